//! Exact moments and moment-generating-function identities for Gaussian
//! quadratic forms `<B g, g>` with `g ~ N(0, I)`.
//!
//! Every routine works in the eigenbasis of `B`, where the form reduces to
//! `sum_j l_j g_j^2` with independent standard normal `g_j`.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matstats::{QfStats, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentSet {
    pub mean: f64,
    /// Centered moments `E(<Bg,g> - tr B)^k`, k = 2, 3, 4.
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    /// Raw moments `E<Bg,g>^k`, k = 2, 3, 4.
    pub r2: f64,
    pub r3: f64,
    pub r4: f64,
    /// `Var(<Bg,g>^2) = r4 - r2^2`.
    pub var_of_square: f64,
}

fn tr_powers(stats: &QfStats) -> Result<[f64; 4]> {
    let mut out = [0.0; 4];
    for (m, slot) in (1..=4u8).zip(out.iter_mut()) {
        *slot = stats
            .tr_power(m)
            .ok_or_else(|| Error::Validation(format!("trace power tr B^{m} is not available")))?;
    }
    Ok(out)
}

pub fn qf_moments(stats: &QfStats) -> Result<MomentSet> {
    let [t1, t2, t3, t4] = tr_powers(stats)?;
    let m2 = 2.0 * t2;
    let m3 = 8.0 * t3;
    let m4 = 48.0 * t4 + 12.0 * t2 * t2;
    let r2 = t1 * t1 + 2.0 * t2;
    let r3 = t1.powi(3) + 6.0 * t1 * t2 + 8.0 * t3;
    let r4 = t1.powi(4) + 12.0 * t1 * t1 * t2 + 32.0 * t1 * t3 + 48.0 * t4 + 12.0 * t2 * t2;
    let var_of_square = 8.0 * t1 * t1 * t2 + 32.0 * t1 * t3 + 48.0 * t4 + 8.0 * t2 * t2;
    Ok(MomentSet {
        mean: t1,
        m2,
        m3,
        m4,
        r2,
        r3,
        r4,
        var_of_square,
    })
}

/// Upper bounds on raw moments for `0 <= B <= I`, in the polynomial form and
/// the looser `(dimA + k ||B||)^k` envelope.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentBounds {
    pub r2: f64,
    pub r2_envelope: f64,
    pub r3: f64,
    pub r3_envelope: f64,
    pub r4: f64,
    pub r4_envelope: f64,
    pub var_of_square: f64,
}

pub fn qf_moment_bounds(stats: &QfStats) -> Result<MomentBounds> {
    if !stats.psd || stats.lambda > 1.0 {
        return Err(Error::Domain(format!(
            "moment bounds need 0 <= B <= I (psd = {}, ||B|| = {})",
            stats.psd, stats.lambda
        )));
    }
    let d = stats.dim_a;
    let l = stats.lambda;
    Ok(MomentBounds {
        r2: d * d + 2.0 * d * l,
        r2_envelope: (d + l).powi(2),
        r3: d.powi(3) + 6.0 * d * d * l + 8.0 * d * l * l,
        r3_envelope: (d + 2.0 * l).powi(3),
        r4: d.powi(4) + 12.0 * d.powi(3) * l + 44.0 * d * d * l * l + 48.0 * d * l.powi(3),
        r4_envelope: (d + 3.0 * l).powi(4),
        var_of_square: 8.0 * d.powi(3) + 40.0 * d * d * l + 48.0 * d * l * l,
    })
}

/// `E (gg^T - I) B (gg^T - I) = B + tr(B) I`, returned as its spectrum, and
/// `E ||B^{1/2} (gg^T - I) B^{1/2}||_Fr^2 = (tr B)^2 + tr B^2`.
pub fn wishart_sandwich(b: &Spectrum) -> (Spectrum, f64) {
    let t1 = b.trace_power(1);
    let t2 = b.trace_power(2);
    let shifted = b.eigenvalues().iter().map(|l| l + t1).collect();
    let spectrum = Spectrum::new(shifted).expect("shift of a valid spectrum is valid");
    (spectrum, t1 * t1 + t2)
}

fn check_mgf_domain(b: &Spectrum, mu: f64) -> Result<()> {
    if !mu.is_finite() {
        return Err(Error::Validation(format!("mu = {mu} is not finite")));
    }
    if let Some(l) = b.eigenvalues().iter().find(|&&l| 1.0 - mu * l <= 0.0) {
        return Err(Error::DivergentMgf(format!(
            "1 - mu * lambda = {} <= 0 at mu = {mu}, lambda = {l}",
            1.0 - mu * l
        )));
    }
    Ok(())
}

/// `log E exp{(mu/2) <Bg,g>} = -(1/2) sum_j log(1 - mu l_j)`.
pub fn log_mgf_qf(b: &Spectrum, mu: f64) -> Result<f64> {
    check_mgf_domain(b, mu)?;
    Ok(-0.5
        * b.eigenvalues()
            .iter()
            .map(|l| (-mu * l).ln_1p())
            .sum::<f64>())
}

/// Exact centered log-MGF `log E exp{(mu/2)(<Bg,g> - tr B)}`.
pub fn log_mgf_centered(b: &Spectrum, mu: f64) -> Result<f64> {
    check_mgf_domain(b, mu)?;
    // -(1/2) sum [log(1 - u) + u] written to avoid cancellation near u = 0
    Ok(-0.5
        * b.eigenvalues()
            .iter()
            .map(|l| {
                let u = mu * l;
                (-u).ln_1p() + u
            })
            .sum::<f64>())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CenteredMgfBounds {
    pub mu: f64,
    /// Exact `log E exp{(mu/2)(<Bg,g> - tr B)}`; absent if `mu ||B|| >= 1`.
    pub exact_plus: Option<f64>,
    /// `mu^2 v^2 / (4 (1 - lambda mu))`; absent if `mu ||B|| >= 1`.
    pub bound_plus: Option<f64>,
    /// Exact `log E exp{-(mu/2)(<Bg,g> - tr B)}`; absent unless `B` is PSD.
    pub exact_minus: Option<f64>,
    /// `mu^2 v^2 / 4`; absent unless `B` is PSD.
    pub bound_minus: Option<f64>,
}

impl CenteredMgfBounds {
    /// True if each exact value present is dominated by its bound.
    pub fn holds(&self) -> bool {
        let ok = |e: Option<f64>, b: Option<f64>| match (e, b) {
            (Some(e), Some(b)) => e <= b * (1.0 + 1e-12) + 1e-300,
            _ => true,
        };
        ok(self.exact_plus, self.bound_plus) && ok(self.exact_minus, self.bound_minus)
    }
}

/// Bounds on both signs of the centered log-MGF for `mu > 0`.
///
/// Errors if neither side is available: `mu ||B|| >= 1` and `B` not PSD.
pub fn log_mgf_centered_bounds(b: &Spectrum, mu: f64) -> Result<CenteredMgfBounds> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::Domain(format!("mu must be positive, got {mu}")));
    }
    let lambda = b.op_norm();
    let v2 = b.trace_power(2);
    let (exact_plus, bound_plus) = if mu * lambda < 1.0 {
        (
            Some(log_mgf_centered(b, mu)?),
            Some(mu * mu * v2 / (4.0 * (1.0 - lambda * mu))),
        )
    } else {
        (None, None)
    };
    let (exact_minus, bound_minus) = if b.is_psd() {
        let psd = b.to_psd()?;
        (Some(log_mgf_centered(&psd, -mu)?), Some(mu * mu * v2 / 4.0))
    } else {
        (None, None)
    };
    if exact_plus.is_none() && exact_minus.is_none() {
        return Err(Error::DivergentMgf(format!(
            "mu * ||B|| = {} >= 1 and B is not PSD",
            mu * lambda
        )));
    }
    Ok(CenteredMgfBounds {
        mu,
        exact_plus,
        bound_plus,
        exact_minus,
        bound_minus,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexRemainder {
    /// `log E exp{(mu/2)(<Bg,g> - tr B)} - mu^2 tr B^2 / 4` on the principal branch.
    pub remainder: Complex64,
    /// `lambda |mu|^3 v^2 / (6 (1 - lambda |mu|))`
    pub bound: f64,
}

impl ComplexRemainder {
    pub fn holds(&self) -> bool {
        self.remainder.norm() <= self.bound * (1.0 + 1e-12) + 1e-300
    }
}

/// Third-order remainder of the centered log-MGF at complex `mu`, `|mu| ||B|| < 1`.
pub fn log_mgf_remainder_complex(b: &Spectrum, mu: Complex64) -> Result<ComplexRemainder> {
    let lambda = b.op_norm();
    let modulus = mu.norm();
    if !modulus.is_finite() || modulus * lambda >= 1.0 {
        return Err(Error::DivergentMgf(format!(
            "|mu| * ||B|| = {} must be below 1",
            modulus * lambda
        )));
    }
    let remainder = b
        .eigenvalues()
        .iter()
        .map(|&l| {
            let u = mu * l;
            -0.5 * (Complex64::new(1.0, 0.0) - u).ln() - u * 0.5 - u * u * 0.25
        })
        .sum();
    let v2 = b.trace_power(2);
    Ok(ComplexRemainder {
        remainder,
        bound: lambda * modulus.powi(3) * v2 / (6.0 * (1.0 - lambda * modulus)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NonCenteredMgf {
    /// `log E exp{(mu/2)(<Bg,g> - tr B) + <a,g>}`
    pub exact: f64,
    /// `||(I - mu B)^{-1/2} a||^2 / 2 + mu^2 v^2 / (4 (1 - |mu| ||B||))`;
    /// absent if `|mu| ||B|| >= 1`.
    pub upper_bound: Option<f64>,
}

/// Log-MGF of a quadratic form with a linear shift. The shift `a` is given in
/// the eigenbasis of `B`, aligned with `b.eigenvalues()`.
pub fn log_mgf_noncentered(b: &Spectrum, a: &[f64], mu: f64) -> Result<NonCenteredMgf> {
    if a.len() != b.len() {
        return Err(Error::Validation(format!(
            "shift has length {}, operator has dimension {}",
            a.len(),
            b.len()
        )));
    }
    let centered = log_mgf_centered(b, mu)?;
    let shift: f64 = b
        .eigenvalues()
        .iter()
        .zip(a)
        .map(|(l, aj)| aj * aj / (2.0 * (1.0 - mu * l)))
        .sum();
    let lambda = b.op_norm();
    let upper_bound = (mu.abs() * lambda < 1.0)
        .then(|| shift + mu * mu * b.trace_power(2) / (4.0 * (1.0 - mu.abs() * lambda)));
    Ok(NonCenteredMgf {
        exact: shift + centered,
        upper_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matstats::qf_stats;
    use approx::assert_relative_eq;

    fn spec(v: &[f64]) -> Spectrum {
        Spectrum::new(v.to_vec()).unwrap()
    }

    #[test]
    fn scalar_moments_match_chi_square_constants() {
        let m = qf_moments(&qf_stats(&spec(&[1.0]))).unwrap();
        assert_eq!((m.mean, m.m2, m.m3, m.m4, m.r2), (1.0, 2.0, 8.0, 60.0, 3.0));
        // E g^6 = 15, E g^8 = 105
        assert_eq!(m.r3, 15.0);
        assert_eq!(m.r4, 105.0);
        assert_eq!(m.var_of_square, 96.0);
    }

    #[test]
    fn zero_and_identity_moments() {
        let m = qf_moments(&qf_stats(&spec(&[0.0]))).unwrap();
        assert_eq!(
            m,
            MomentSet {
                mean: 0.0,
                m2: 0.0,
                m3: 0.0,
                m4: 0.0,
                r2: 0.0,
                r3: 0.0,
                r4: 0.0,
                var_of_square: 0.0
            }
        );
        let m = qf_moments(&qf_stats(&spec(&[1.0, 1.0]))).unwrap();
        assert_eq!((m.mean, m.m2, m.m3, m.m4), (2.0, 4.0, 16.0, 144.0));
        // chi-square(2): E Q^4 - (E Q^2)^2 = 384 - 64
        assert_eq!(m.var_of_square, 320.0);
    }

    #[test]
    fn moments_need_higher_traces() {
        let s = QfStats::from_parts(1.0, 1.0, 1.0, true).unwrap();
        assert!(matches!(qf_moments(&s), Err(Error::Validation(_))));
    }

    #[test]
    fn moment_bounds_examples() {
        let b = qf_moment_bounds(&qf_stats(&spec(&[1.0; 4]))).unwrap();
        assert_eq!((b.r2, b.r2_envelope), (24.0, 25.0));
        let z = qf_moment_bounds(&qf_stats(&spec(&[0.0]))).unwrap();
        assert_eq!(z.r2 + z.r3 + z.r4 + z.var_of_square, 0.0);
        assert!(qf_moment_bounds(&qf_stats(&spec(&[1.5]))).is_err());
        assert!(qf_moment_bounds(&qf_stats(&spec(&[0.5, -0.1]))).is_err());
    }

    #[test]
    fn sandwich_examples() {
        let (s, f) = wishart_sandwich(&spec(&[1.0, 1.0]));
        assert_eq!((s.eigenvalues(), f), (&[3.0, 3.0][..], 6.0));
        let (s, f) = wishart_sandwich(&spec(&[0.0, 0.0]));
        assert_eq!((s.eigenvalues(), f), (&[0.0, 0.0][..], 0.0));
        let (s, f) = wishart_sandwich(&spec(&[1.0, 0.0]));
        assert_eq!((s.eigenvalues(), f), (&[2.0, 1.0][..], 2.0));
    }

    #[test]
    fn log_mgf_examples() {
        assert_relative_eq!(
            log_mgf_qf(&spec(&[1.0]), 0.5).unwrap(),
            -0.5 * 0.5f64.ln(),
            epsilon = 1e-15
        );
        assert_eq!(log_mgf_qf(&spec(&[1.0, 0.5]), 0.0).unwrap(), 0.0);
        let v = log_mgf_qf(&spec(&[1.0, 0.5]), 0.5).unwrap();
        assert_relative_eq!(v, -0.5 * (0.5f64.ln() + 0.75f64.ln()), epsilon = 1e-15);
        assert!((v - 0.4904).abs() < 1e-4);
        // negative mu with a PSD operator is always finite
        assert!(log_mgf_qf(&spec(&[1.0]), -10.0).is_ok());
        assert!(matches!(
            log_mgf_qf(&spec(&[1.0]), 1.0),
            Err(Error::DivergentMgf(_))
        ));
        assert!(matches!(
            log_mgf_qf(&spec(&[-1.0]), -1.5),
            Err(Error::DivergentMgf(_))
        ));
    }

    #[test]
    fn centered_bound_examples() {
        let b = log_mgf_centered_bounds(&spec(&[1.0, 1.0]), 0.5).unwrap();
        assert_relative_eq!(b.bound_plus.unwrap(), 0.25, epsilon = 1e-15);
        assert!(b.holds());

        let b = log_mgf_centered_bounds(&spec(&[1.0]), 0.5).unwrap();
        let exact = b.exact_plus.unwrap();
        assert_relative_eq!(exact, -0.5 * 0.5f64.ln() - 0.25, epsilon = 1e-15);
        assert!((exact - 0.0966).abs() < 1e-4);
        assert!(b.holds());

        let b = log_mgf_centered_bounds(&spec(&[1.0, 0.3]), 1e-8).unwrap();
        assert!(b.bound_plus.unwrap() < 1e-15 && b.bound_minus.unwrap() < 1e-15);

        // non-PSD operator: only the + side
        let b = log_mgf_centered_bounds(&spec(&[1.0, -0.5]), 0.5).unwrap();
        assert!(b.exact_minus.is_none() && b.exact_plus.is_some());
        // PSD operator beyond the + radius: only the - side
        let b = log_mgf_centered_bounds(&spec(&[1.0]), 2.0).unwrap();
        assert!(b.exact_plus.is_none() && b.exact_minus.is_some() && b.holds());
        assert!(log_mgf_centered_bounds(&spec(&[1.0, -1.0]), 2.0).is_err());
        assert!(log_mgf_centered_bounds(&spec(&[1.0]), 0.0).is_err());
    }

    #[test]
    fn complex_remainder_examples() {
        let r = log_mgf_remainder_complex(&spec(&[1.0]), Complex64::new(0.0, 0.0)).unwrap();
        assert_eq!((r.remainder.norm(), r.bound), (0.0, 0.0));

        let r = log_mgf_remainder_complex(&spec(&[1.0]), Complex64::new(0.5, 0.0)).unwrap();
        let expected = -0.5 * 0.5f64.ln() - 0.25 - 0.0625;
        assert_relative_eq!(r.remainder.re, expected, epsilon = 1e-15);
        assert_eq!(r.remainder.im, 0.0);
        assert_relative_eq!(r.bound, 0.125 / 3.0, epsilon = 1e-15);
        assert!(r.holds());

        // mu = 0.3i: -(1/2) log(1 - 0.3i) - 0.15i + 0.0225
        let r = log_mgf_remainder_complex(&spec(&[1.0]), Complex64::new(0.0, 0.3)).unwrap();
        let w = Complex64::new(1.0, -0.3);
        let direct = -0.5 * w.ln() - Complex64::new(0.0, 0.15) + 0.0225;
        assert_relative_eq!(r.remainder.re, direct.re, epsilon = 1e-15);
        assert_relative_eq!(r.remainder.im, direct.im, epsilon = 1e-15);
        assert_relative_eq!(r.bound, 0.027 / (6.0 * 0.7), epsilon = 1e-15);
        assert!(r.holds());

        assert!(log_mgf_remainder_complex(&spec(&[2.0]), Complex64::new(0.0, 0.5)).is_err());
    }

    #[test]
    fn noncentered_examples() {
        let b = spec(&[1.0, 0.5]);
        let n = log_mgf_noncentered(&b, &[0.0, 0.0], 0.5).unwrap();
        assert_eq!(n.exact, log_mgf_centered(&b, 0.5).unwrap());

        let n = log_mgf_noncentered(&spec(&[0.0, 0.0]), &[1.0, 2.0], 3.0).unwrap();
        assert_eq!(n.exact, 2.5);

        let n = log_mgf_noncentered(&spec(&[0.5]), &[1.0], 1.0).unwrap();
        assert_relative_eq!(n.exact, 1.0 - 0.5 * 0.5f64.ln() - 0.25, epsilon = 1e-15);
        assert!(n.exact <= n.upper_bound.unwrap());

        assert!(log_mgf_noncentered(&b, &[1.0], 0.5).is_err());
        assert!(log_mgf_noncentered(&b, &[1.0, 1.0], 1.0).is_err());
    }
}
