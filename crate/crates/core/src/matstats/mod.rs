//! Spectral representation of symmetric operators and the trace statistics
//! consumed by every bound.
//!
//! All formulas downstream are orthogonally invariant, so an operator is
//! represented by its eigenvalues only. Dense matrices are accepted at the
//! boundary and eigendecomposed immediately.

pub mod io;

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Relative symmetry tolerance for dense input, scaled by the max-abs entry.
pub const TOL_SYM: f64 = 1e-9;
/// Relative PSD tolerance, scaled by the largest eigenvalue magnitude.
pub const TOL_PSD: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectrumSource {
    GivenEigenvalues,
    DenseSymmetricMatrix,
}

/// Eigenvalues of a symmetric operator, ordered by decreasing magnitude
/// (ties broken by decreasing value).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Spectrum {
    eigenvalues: Vec<f64>,
    source: SpectrumSource,
}

impl Spectrum {
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        Self::with_source(eigenvalues, SpectrumSource::GivenEigenvalues)
    }

    fn with_source(mut eigenvalues: Vec<f64>, source: SpectrumSource) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Validation("spectrum is empty".into()));
        }
        if let Some(bad) = eigenvalues.iter().find(|v| !v.is_finite()) {
            return Err(Error::Validation(format!("non-finite eigenvalue {bad}")));
        }
        eigenvalues.sort_by(|a, b| {
            b.abs()
                .partial_cmp(&a.abs())
                .unwrap()
                .then(b.partial_cmp(a).unwrap())
        });
        Ok(Spectrum {
            eigenvalues,
            source,
        })
    }

    /// Eigenvalues of a dense symmetric matrix, with multiplicity.
    pub fn from_dense(matrix: &DMatrix<f64>) -> Result<Self> {
        check_symmetric(matrix)?;
        // Average with the transpose so rounding-level asymmetry does not leak
        // into the eigensolver, which only reads the lower triangle.
        let sym = (matrix + matrix.transpose()) * 0.5;
        let eig = sym.symmetric_eigen();
        Self::with_source(
            eig.eigenvalues.iter().copied().collect(),
            SpectrumSource::DenseSymmetricMatrix,
        )
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn source(&self) -> SpectrumSource {
        self.source
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// Largest absolute eigenvalue.
    pub fn op_norm(&self) -> f64 {
        self.eigenvalues[0].abs()
    }

    pub fn trace_power(&self, m: i32) -> f64 {
        self.eigenvalues.iter().map(|l| l.powi(m)).sum()
    }

    pub fn psd_tolerance(&self) -> f64 {
        TOL_PSD * self.op_norm()
    }

    pub fn is_psd(&self) -> bool {
        let tol = self.psd_tolerance();
        self.eigenvalues.iter().all(|&l| l >= -tol)
    }

    /// Returns a copy with negatives inside the PSD tolerance clamped to zero,
    /// or a domain error if any eigenvalue is more negative than that.
    pub fn to_psd(&self) -> Result<Self> {
        let tol = self.psd_tolerance();
        if let Some(bad) = self.eigenvalues.iter().find(|&&l| l < -tol) {
            return Err(Error::Domain(format!(
                "eigenvalue {bad} is negative beyond tolerance {tol:e}"
            )));
        }
        let clamped = self.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
        Self::with_source(clamped, self.source)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let values = self.eigenvalues.iter().map(|l| l * factor).collect();
        Self::with_source(values, self.source).expect("scaling preserves validity")
    }

    /// True if every eigenvalue lies in `[0, 1]` (up to the PSD tolerance at 0).
    pub fn is_between_zero_and_identity(&self) -> bool {
        let tol = self.psd_tolerance().max(f64::EPSILON);
        self.eigenvalues
            .iter()
            .all(|&l| l >= -tol && l <= 1.0 + tol)
    }
}

fn check_symmetric(matrix: &DMatrix<f64>) -> Result<()> {
    let (rows, cols) = matrix.shape();
    if rows != cols {
        return Err(Error::Validation(format!(
            "matrix is {rows}x{cols}, expected square"
        )));
    }
    if rows == 0 {
        return Err(Error::Validation("matrix is empty".into()));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("matrix has non-finite entries".into()));
    }
    let scale = matrix.amax();
    let tol = TOL_SYM * scale;
    for i in 0..rows {
        for j in (i + 1)..cols {
            let diff = (matrix[(i, j)] - matrix[(j, i)]).abs();
            if diff > tol {
                return Err(Error::Validation(format!(
                    "matrix is not symmetric: |a[{i},{j}] - a[{j},{i}]| = {diff:e} > {tol:e}"
                )));
            }
        }
    }
    Ok(())
}

/// Trace statistics of a quadratic-form operator `B`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QfStats {
    /// `tr B`
    pub dim_a: f64,
    /// `tr B^2`
    pub v2: f64,
    /// `||B||`
    pub lambda: f64,
    /// `m -> tr B^m`; present for `m = 1..=4` when built from a spectrum.
    pub tr_powers: BTreeMap<u8, f64>,
    pub psd: bool,
}

impl QfStats {
    /// Statistics known only through `(tr B, tr B^2, ||B||)`, e.g. the Gaussian
    /// proxy of the covariance loss.
    pub fn from_parts(dim_a: f64, v2: f64, lambda: f64, psd: bool) -> Result<Self> {
        for (name, value) in [("dim_a", dim_a), ("v2", v2), ("lambda", lambda)] {
            if !value.is_finite() {
                return Err(Error::Validation(format!("{name} is not finite")));
            }
        }
        if v2 < 0.0 || lambda < 0.0 {
            return Err(Error::Validation(
                "v2 and lambda must be non-negative".into(),
            ));
        }
        let tr_powers = BTreeMap::from([(1, dim_a), (2, v2)]);
        Ok(QfStats {
            dim_a,
            v2,
            lambda,
            tr_powers,
            psd,
        })
    }

    pub fn v(&self) -> f64 {
        self.v2.sqrt()
    }

    pub fn tr_power(&self, m: u8) -> Option<f64> {
        self.tr_powers.get(&m).copied()
    }

    /// Same statistics for `c * B`, `c > 0`.
    pub fn scaled(&self, c: f64) -> Self {
        let tr_powers = self
            .tr_powers
            .iter()
            .map(|(&m, &t)| (m, t * c.powi(i32::from(m))))
            .collect();
        QfStats {
            dim_a: self.dim_a * c,
            v2: self.v2 * c * c,
            lambda: self.lambda * c,
            tr_powers,
            psd: self.psd,
        }
    }
}

/// Exact trace powers and operator norm of `B`.
pub fn qf_stats(b: &Spectrum) -> QfStats {
    let tr_powers: BTreeMap<u8, f64> = (1..=4u8)
        .map(|m| (m, b.trace_power(i32::from(m))))
        .collect();
    QfStats {
        dim_a: tr_powers[&1],
        v2: tr_powers[&2],
        lambda: b.op_norm(),
        tr_powers,
        psd: b.is_psd(),
    }
}

/// Effective dimension and variance proxy of a covariance operator:
/// `dimA = (tr S)^2 + tr S^2`, `v^2 = (tr S^2)^2 + tr S^4`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovStats {
    pub dim_a: f64,
    pub v2: f64,
}

impl CovStats {
    pub fn v(&self) -> f64 {
        self.v2.sqrt()
    }
}

pub fn cov_effective_stats(sigma: &Spectrum, require_psd: bool) -> Result<CovStats> {
    let owned;
    let sigma = if require_psd {
        owned = sigma.to_psd()?;
        &owned
    } else {
        sigma
    };
    let t1 = sigma.trace_power(1);
    let t2 = sigma.trace_power(2);
    let t4 = sigma.trace_power(4);
    Ok(CovStats {
        dim_a: t1 * t1 + t2,
        v2: t2 * t2 + t4,
    })
}

/// Rescales a spectrum to unit operator norm. Returns the scaled spectrum and
/// the factor `c = ||S||`; quantities quadratic in `S` scale back by `c^2`.
pub fn normalize_unit_opnorm(sigma: &Spectrum) -> Result<(Spectrum, f64)> {
    let c = sigma.op_norm();
    if c == 0.0 {
        return Err(Error::Domain("cannot normalize a zero spectrum".into()));
    }
    Ok((sigma.scaled(1.0 / c), c))
}

/// `A S A^T` for a weight map `A`, after rescaling `A` to unit operator norm.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightedSigma {
    pub spectrum: Spectrum,
    /// Operator norm of the supplied `A`; the normalized map is `A / a_scale`.
    pub a_scale: f64,
    pub stats: CovStats,
}

pub fn weighted_sigma(sigma: &DMatrix<f64>, a_map: &DMatrix<f64>) -> Result<WeightedSigma> {
    check_symmetric(sigma)?;
    let p = sigma.nrows();
    if a_map.ncols() != p {
        return Err(Error::Validation(format!(
            "weight map has {} columns, covariance is {p}x{p}",
            a_map.ncols()
        )));
    }
    if a_map.nrows() == 0 {
        return Err(Error::Validation("weight map has no rows".into()));
    }
    if a_map.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation(
            "weight map has non-finite entries".into(),
        ));
    }
    let gram = a_map.transpose() * a_map;
    let a_scale = Spectrum::from_dense(&gram)?.op_norm().sqrt();
    if a_scale == 0.0 {
        return Err(Error::Domain("weight map is zero".into()));
    }
    let a_unit = a_map / a_scale;
    let sigma_a = &a_unit * sigma * a_unit.transpose();
    let spectrum = Spectrum::from_dense(&sigma_a)?.to_psd()?;
    let stats = cov_effective_stats(&spectrum, true)?;
    Ok(WeightedSigma {
        spectrum,
        a_scale,
        stats,
    })
}

/// Dense diagonal matrix with the given entries in the given order.
pub fn diag_matrix(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(values))
}
