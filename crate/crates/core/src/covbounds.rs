//! Deviation bounds for the scaled Frobenius loss `n ||S_hat - S||_Fr^2` of the
//! empirical covariance of `n` Gaussian samples.
//!
//! The bounds are stated for `||S|| = 1`. Other inputs are normalized first
//! and every threshold is scaled back by `||S||^2`.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matstats::{
    cov_effective_stats, normalize_unit_opnorm, weighted_sigma, CovStats, QfStats, Spectrum,
    WeightedSigma,
};
use crate::quantiles::{Side, TailBound};
use crate::roots::{golden_section_max, invert_increasing};

/// Absolute tolerance for the alpha root.
pub const ALPHA_TOL: f64 = 1e-12;
/// Absolute tolerance for the maximizer of the alpha profile.
pub const ALPHA_MAX_TOL: f64 = 1e-10;

pub const UPPER_MULTIPLIER: u32 = 3;
pub const LOWER_MULTIPLIER: u32 = 2;
pub const INTERVAL_MULTIPLIER: u32 = 5;

/// Normalized covariance together with sample size and deviation level.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovBoundInput {
    /// Covariance spectrum rescaled to unit operator norm.
    pub sigma: Spectrum,
    pub n: u64,
    pub x: f64,
    pub stats: CovStats,
    /// Operator norm of the covariance as supplied.
    pub sigma_scale: f64,
    /// Factor applied to every threshold on output.
    pub output_scale: f64,
}

impl CovBoundInput {
    pub fn new(sigma: &Spectrum, n: u64, x: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("sample count n must be positive".into()));
        }
        if !(x >= 0.0) || !x.is_finite() {
            return Err(Error::Domain(format!("x must be finite and >= 0, got {x}")));
        }
        let psd = sigma.to_psd()?;
        let (sigma, sigma_scale) = normalize_unit_opnorm(&psd)?;
        let stats = cov_effective_stats(&sigma, true)?;
        Ok(CovBoundInput {
            sigma,
            n,
            x,
            stats,
            sigma_scale,
            output_scale: sigma_scale * sigma_scale,
        })
    }

    fn half_root_n8(&self) -> f64 {
        (self.n as f64 / 8.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RhoSolution {
    /// Smaller root of `rho (1 - rho) = c`.
    pub rho: f64,
    /// `(sqrt(dimA) + 4 sqrt(x)) / sqrt(n/8)`
    pub c: f64,
    /// `rho (1 - rho) sqrt(n/8) - (sqrt(dimA) + 4 sqrt(x))`
    pub residual: f64,
}

/// Solves `rho (1 - rho) sqrt(n/8) = sqrt(dimA) + 4 sqrt(x)` for the smaller root.
pub fn solve_rho(dim_a: f64, n: u64, x: f64) -> Result<RhoSolution> {
    if !(dim_a >= 0.0) || !(x >= 0.0) || !x.is_finite() || !dim_a.is_finite() {
        return Err(Error::Domain(format!(
            "dimA = {dim_a} and x = {x} must be finite and non-negative"
        )));
    }
    let nf = n as f64;
    if !(8.0 * dim_a < nf) {
        return Err(Error::infeasible(
            "dimA < n/8",
            format!("dimA = {dim_a}, n/8 = {}", nf / 8.0),
        ));
    }
    let scale = (nf / 8.0).sqrt();
    let target = dim_a.sqrt() + 4.0 * x.sqrt();
    let c = target / scale;
    if c > 0.25 {
        return Err(Error::infeasible(
            "rho (1 - rho) = c solvable (c <= 1/4)",
            format!(
                "c = (sqrt(dimA) + 4 sqrt(x)) / sqrt(n/8) = {c}; needs n >= {}",
                (8.0 * 16.0 * target * target).ceil()
            ),
        ));
    }
    // (1 - sqrt(1 - 4c)) / 2 without cancellation for small c
    let rho = 2.0 * c / (1.0 + (1.0 - 4.0 * c).max(0.0).sqrt());
    Ok(RhoSolution {
        rho,
        c,
        residual: rho * (1.0 - rho) * scale - target,
    })
}

/// `f(alpha) = alpha sqrt((1 - 2 alpha) / (1 - alpha))` on `[0, 1/2]`.
pub fn alpha_profile(alpha: f64) -> f64 {
    alpha * ((1.0 - 2.0 * alpha) / (1.0 - alpha)).max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaSolution {
    /// Minimal alpha with `alpha_profile(alpha) >= rhs`.
    pub alpha: f64,
    /// `2 sqrt(x) / v`
    pub mu: f64,
    /// `sqrt(mu / n) (sqrt(2 dimA) + sqrt(2) dimA / v)`
    pub rhs: f64,
    /// Maximizer of the alpha profile on `(0, 1/2)`.
    pub alpha_star: f64,
    pub profile_max: f64,
}

/// Minimal `alpha` satisfying the lower-bound condition, on the increasing
/// branch of [`alpha_profile`].
pub fn solve_alpha(dim_a: f64, v: f64, n: u64, x: f64) -> Result<AlphaSolution> {
    if !(v > 0.0) || !(dim_a > 0.0) || !(x >= 0.0) || !x.is_finite() || n == 0 {
        return Err(Error::Domain(format!(
            "need dimA > 0, v > 0, x >= 0, n > 0 (dimA = {dim_a}, v = {v}, x = {x}, n = {n})"
        )));
    }
    if 2.0 * x.sqrt() > dim_a / v {
        return Err(Error::infeasible(
            "2 sqrt(x) <= dimA / v",
            format!("2 sqrt(x) = {}, dimA / v = {}", 2.0 * x.sqrt(), dim_a / v),
        ));
    }
    let mu = 2.0 * x.sqrt() / v;
    let rhs =
        (mu / n as f64).sqrt() * ((2.0 * dim_a).sqrt() + std::f64::consts::SQRT_2 * dim_a / v);
    let alpha_star = golden_section_max(0.0, 0.5, ALPHA_MAX_TOL, alpha_profile);
    let profile_max = alpha_profile(alpha_star);
    let alpha =
        invert_increasing(0.0, alpha_star, rhs, ALPHA_TOL, alpha_profile).ok_or_else(|| {
            Error::infeasible(
                "alpha condition solvable",
                format!("rhs = {rhs} exceeds max alpha profile {profile_max}; increase n"),
            )
        })?;
    Ok(AlphaSolution {
        alpha,
        mu,
        rhs,
        alpha_star,
        profile_max,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpperCov {
    /// `P(loss > threshold) <= 3 exp(-x)`
    pub bound: TailBound,
    pub rho: RhoSolution,
    /// `sqrt(n/8) - sqrt(dimA) - 4 sqrt(x)`; positive inside the stated x-range.
    pub x_range_margin: f64,
    /// `rho (1 - rho) sqrt(n) / 4 - sqrt(dimA / 2) - sqrt(8x)`
    pub sufficient_margin: f64,
}

pub fn upper_bound_cov(input: &CovBoundInput) -> Result<UpperCov> {
    let CovStats { dim_a, .. } = input.stats;
    let v = input.stats.v();
    let x = input.x;
    let rho = solve_rho(dim_a, input.n, x)?;
    let x_range_margin = input.half_root_n8() - dim_a.sqrt() - 4.0 * x.sqrt();
    if !(x_range_margin > 0.0) {
        return Err(Error::infeasible(
            "4 sqrt(x) < sqrt(n/8) - sqrt(dimA)",
            format!("margin = {x_range_margin}"),
        ));
    }
    let threshold = (dim_a + 2.0 * v * x.sqrt() + 4.0 * x) / (1.0 - rho.rho);
    let sufficient_margin = rho.rho * (1.0 - rho.rho) * (input.n as f64).sqrt() / 4.0
        - (dim_a / 2.0).sqrt()
        - (8.0 * x).sqrt();
    Ok(UpperCov {
        bound: TailBound::new(threshold, UPPER_MULTIPLIER, Side::Upper, x)
            .rescaled(input.output_scale),
        rho,
        x_range_margin,
        sufficient_margin,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowerCov {
    /// `P(loss < threshold) <= 2 exp(-x)`
    pub bound: TailBound,
    pub alpha: AlphaSolution,
}

pub fn lower_bound_cov(input: &CovBoundInput) -> Result<LowerCov> {
    let CovStats { dim_a, .. } = input.stats;
    let v = input.stats.v();
    let alpha = solve_alpha(dim_a, v, input.n, input.x)?;
    let a = alpha.alpha;
    let threshold = (1.0 - 2.0 * a) / (1.0 - a) * dim_a - 2.0 * v * input.x.sqrt();
    Ok(LowerCov {
        bound: TailBound::new(threshold, LOWER_MULTIPLIER, Side::Lower, input.x)
            .rescaled(input.output_scale),
        alpha,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConcentrationInterval {
    pub lower: LowerCov,
    pub upper: UpperCov,
    /// `5 exp(-x)`: probability bound for leaving `[lower, upper]`.
    pub prob_bound: f64,
    /// Interval for `loss - dimA`: `-alpha dimA/(1-alpha) - 2 v sqrt(x)`.
    pub centered_lower: f64,
    /// `rho dimA/(1-rho) + (2 v sqrt(x) + 4x)/(1-rho)`
    pub centered_upper: f64,
    /// `alpha / sqrt(dimA / n)`, order one when `v^2` is comparable to `dimA`.
    pub alpha_ratio: f64,
}

pub fn concentration_interval(input: &CovBoundInput) -> Result<ConcentrationInterval> {
    let upper = upper_bound_cov(input)?;
    let lower = lower_bound_cov(input)?;
    let CovStats { dim_a, .. } = input.stats;
    let v = input.stats.v();
    let x = input.x;
    let a = lower.alpha.alpha;
    let r = upper.rho.rho;
    Ok(ConcentrationInterval {
        lower,
        upper,
        prob_bound: f64::from(INTERVAL_MULTIPLIER) * (-x).exp(),
        centered_lower: (-a * dim_a / (1.0 - a) - 2.0 * v * x.sqrt()) * input.output_scale,
        centered_upper: (r * dim_a / (1.0 - r) + (2.0 * v * x.sqrt() + 4.0 * x) / (1.0 - r))
            * input.output_scale,
        alpha_ratio: a / (dim_a / input.n as f64).sqrt(),
    })
}

/// Every covariance bound for one input; each part fails independently.
#[derive(Debug, Clone, PartialEq)]
pub struct CovBounds {
    pub input: CovBoundInput,
    pub upper: Result<UpperCov>,
    pub lower: Result<LowerCov>,
    pub interval: Result<ConcentrationInterval>,
}

pub fn cov_bounds(input: CovBoundInput) -> CovBounds {
    CovBounds {
        upper: upper_bound_cov(&input),
        lower: lower_bound_cov(&input),
        interval: concentration_interval(&input),
        input,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCovBounds {
    pub weighted: WeightedSigma,
    pub bounds: CovBounds,
}

/// Bounds for `n ||A (S_hat - S) A^T||_Fr^2`.
///
/// `A S_hat A^T` is the empirical covariance of the samples `A X_i`, so this
/// is the unweighted problem for `S_A = A S A^T`. Thresholds refer to the
/// supplied `A`; its operator norm enters as a factor `||A||^4`.
pub fn weighted_bounds(
    sigma: &DMatrix<f64>,
    a_map: &DMatrix<f64>,
    n: u64,
    x: f64,
) -> Result<WeightedCovBounds> {
    let weighted = weighted_sigma(sigma, a_map)?;
    let mut input = CovBoundInput::new(&weighted.spectrum, n, x)?;
    input.output_scale *= weighted.a_scale.powi(4);
    Ok(WeightedCovBounds {
        weighted,
        bounds: cov_bounds(input),
    })
}

/// Statistics of the Gaussian proxy `B~ = Var(S^{1/2} E~ S^{1/2})`:
/// `(dimA(S), v^2(S), 2)` for `||S|| = 1`.
pub fn proxy_stats(sigma: &Spectrum) -> Result<QfStats> {
    if (sigma.op_norm() - 1.0).abs() > 1e-12 {
        return Err(Error::Domain(format!(
            "proxy statistics need ||S|| = 1, got {}",
            sigma.op_norm()
        )));
    }
    let s = cov_effective_stats(sigma, true)?;
    QfStats::from_parts(s.dim_a, s.v2, 2.0, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spec(v: &[f64]) -> Spectrum {
        Spectrum::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rho_example() {
        let r = solve_rho(100.0, 80_000, 1.0).unwrap();
        assert_relative_eq!(r.c, 0.14, epsilon = 1e-15);
        assert_relative_eq!(r.rho, (1.0 - 0.44f64.sqrt()) / 2.0, epsilon = 1e-15);
        assert!((r.rho - 0.168337).abs() < 1e-6);
        assert!(r.residual.abs() <= 1e-12 * 100.0);
    }

    #[test]
    fn rho_limits_and_double_root() {
        assert!(solve_rho(1.0, 1 << 50, 0.0).unwrap().rho < 1e-6);
        // sqrt(n/8) = 4 (sqrt(dimA) + 4 sqrt(x)) gives c = 1/4 exactly
        let r = solve_rho(1.0, 8 * 400, 1.0).unwrap();
        assert_eq!(r.c, 0.25);
        assert_eq!(r.rho, 0.5);
    }

    #[test]
    fn rho_infeasible() {
        let e = solve_rho(30.0, 4000, 1.0).unwrap_err();
        assert_eq!(
            e.failed_condition(),
            Some("rho (1 - rho) = c solvable (c <= 1/4)")
        );
        let e = solve_rho(30.0, 240, 1.0).unwrap_err();
        assert_eq!(e.failed_condition(), Some("dimA < n/8"));
    }

    #[test]
    fn alpha_profile_maximizer_is_analytic() {
        // d/da f^2 is proportional to 2 - 7a + 4a^2
        let star = (7.0 - 17f64.sqrt()) / 8.0;
        let s = solve_alpha(30.0, 30f64.sqrt(), 1_000_000, 1.0).unwrap();
        // near a smooth maximum f varies by O(h^2), so the location is only
        // resolvable to about sqrt(machine epsilon)
        assert!((s.alpha_star - star).abs() < 1e-7);
        assert_relative_eq!(s.profile_max, alpha_profile(star), epsilon = 1e-14);
    }

    #[test]
    fn alpha_inverts_profile() {
        assert_relative_eq!(
            alpha_profile(0.25),
            0.25 * (0.5f64 / 0.75).sqrt(),
            epsilon = 1e-15
        );
        // choose n so that rhs = f(0.25): rhs = sqrt(mu/n) K
        let (d, v, x) = (30.0, 30f64.sqrt(), 1.0);
        let mu = 2.0 / v;
        let k = (2.0f64 * d).sqrt() + std::f64::consts::SQRT_2 * d / v;
        let n = (mu * k * k / alpha_profile(0.25).powi(2)).round() as u64;
        let s = solve_alpha(d, v, n, x).unwrap();
        assert_relative_eq!(s.rhs, alpha_profile(0.25), max_relative = 1e-3);
        assert!((s.alpha - 0.25).abs() < 1e-3);
        assert!(alpha_profile(s.alpha) >= s.rhs);
        assert!(alpha_profile(s.alpha - 1e-9) < s.rhs);
    }

    #[test]
    fn alpha_limits_and_infeasibility() {
        let s = solve_alpha(30.0, 30f64.sqrt(), u64::MAX / 4, 1.0).unwrap();
        assert!(s.alpha < 1e-6);
        let s = solve_alpha(30.0, 30f64.sqrt(), 1000, 0.0).unwrap();
        assert_eq!(s.alpha, 0.0);
        let e = solve_alpha(30.0, 30f64.sqrt(), 10, 1.0).unwrap_err();
        assert_eq!(e.failed_condition(), Some("alpha condition solvable"));
        let e = solve_alpha(2.0, 2f64.sqrt(), 1000, 1.0).unwrap_err();
        assert_eq!(e.failed_condition(), Some("2 sqrt(x) <= dimA / v"));
    }

    #[test]
    fn upper_example_identity5() {
        let input = CovBoundInput::new(&spec(&[1.0; 5]), 80_000, 1.0).unwrap();
        assert_eq!((input.stats.dim_a, input.stats.v2), (30.0, 30.0));
        let u = upper_bound_cov(&input).unwrap();
        let rho = solve_rho(30.0, 80_000, 1.0).unwrap().rho;
        assert_relative_eq!(
            u.bound.threshold,
            (30.0 + 2.0 * 30f64.sqrt() + 4.0) / (1.0 - rho),
            epsilon = 1e-12
        );
        assert_relative_eq!(u.bound.prob_bound, 3.0 * (-1.0f64).exp(), epsilon = 1e-15);
        assert!(u.x_range_margin > 0.0);
        assert!(u.sufficient_margin.abs() < 1e-9);
    }

    #[test]
    fn upper_limits() {
        let input = CovBoundInput::new(&spec(&[1.0; 5]), 1 << 50, 1.0).unwrap();
        let u = upper_bound_cov(&input).unwrap();
        assert_relative_eq!(
            u.bound.threshold,
            34.0 + 2.0 * 30f64.sqrt(),
            max_relative = 1e-5
        );
        let input = CovBoundInput::new(&spec(&[1.0; 5]), 80_000, 0.0).unwrap();
        let u = upper_bound_cov(&input).unwrap();
        let rho0 = solve_rho(30.0, 80_000, 0.0).unwrap().rho;
        assert_relative_eq!(u.bound.threshold, 30.0 / (1.0 - rho0), epsilon = 1e-12);
    }

    #[test]
    fn lower_example_and_sandwich() {
        let input = CovBoundInput::new(&spec(&[1.0; 5]), 1_000_000, 1.0).unwrap();
        let l = lower_bound_cov(&input).unwrap();
        let a = l.alpha.alpha;
        assert!(a > 0.0 && a < 0.05);
        assert_relative_eq!(
            l.bound.threshold,
            30.0 * (1.0 - 2.0 * a) / (1.0 - a) - 2.0 * 30f64.sqrt(),
            epsilon = 1e-12
        );
        let i = concentration_interval(&input).unwrap();
        assert!(i.lower.bound.threshold <= 30.0 && 30.0 <= i.upper.bound.threshold);
        assert_relative_eq!(i.prob_bound, 5.0 * (-1.0f64).exp(), epsilon = 1e-15);
        assert_relative_eq!(
            i.centered_lower + 30.0,
            i.lower.bound.threshold,
            epsilon = 1e-9
        );
        assert_relative_eq!(
            i.centered_upper + 30.0,
            i.upper.bound.threshold,
            epsilon = 1e-9
        );
    }

    #[test]
    fn lower_threshold_may_be_negative() {
        // x near the hypothesis limit (dimA / 2v)^2 = 7.5 with a moderate alpha
        let input = CovBoundInput::new(&spec(&[1.0; 5]), 7000, 7.0).unwrap();
        assert!(lower_bound_cov(&input).unwrap().bound.threshold < 0.0);
    }

    #[test]
    fn interval_collapses() {
        let input = CovBoundInput::new(&spec(&[1.0; 5]), 1 << 52, 1e-10).unwrap();
        let i = concentration_interval(&input).unwrap();
        assert!((i.lower.bound.threshold - 30.0).abs() < 1e-3);
        assert!((i.upper.bound.threshold - 30.0).abs() < 1e-3);
    }

    #[test]
    fn normalization_rescales_thresholds() {
        let base = CovBoundInput::new(&spec(&[1.0, 0.5, 0.25]), 50_000, 1.0).unwrap();
        let scaled = CovBoundInput::new(&spec(&[3.0, 1.5, 0.75]), 50_000, 1.0).unwrap();
        assert_eq!(scaled.sigma_scale, 3.0);
        let (b, s) = (cov_bounds(base), cov_bounds(scaled));
        assert_relative_eq!(
            s.upper.unwrap().bound.threshold,
            9.0 * b.upper.unwrap().bound.threshold,
            max_relative = 1e-14
        );
        assert_relative_eq!(
            s.lower.unwrap().bound.threshold,
            9.0 * b.lower.unwrap().bound.threshold,
            max_relative = 1e-14
        );
    }

    #[test]
    fn weighted_identity_projector_and_rotation() {
        let sigma = crate::matstats::diag_matrix(&[1.0, 0.5, 0.25]);
        let plain = cov_bounds(CovBoundInput::new(&spec(&[1.0, 0.5, 0.25]), 50_000, 1.0).unwrap());
        let w = weighted_bounds(&sigma, &DMatrix::identity(3, 3), 50_000, 1.0).unwrap();
        assert_relative_eq!(
            w.bounds.upper.as_ref().unwrap().bound.threshold,
            plain.upper.as_ref().unwrap().bound.threshold,
            max_relative = 1e-12
        );

        let (c, s) = (0.6, 0.8);
        let rot = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let w = weighted_bounds(&sigma, &rot, 50_000, 1.0).unwrap();
        assert_relative_eq!(
            w.bounds.lower.as_ref().unwrap().bound.threshold,
            plain.lower.as_ref().unwrap().bound.threshold,
            max_relative = 1e-12
        );

        let mut proj = DMatrix::zeros(4, 4);
        proj[(0, 0)] = 1.0;
        let w = weighted_bounds(&DMatrix::identity(4, 4), &proj, 50_000, 1.0).unwrap();
        assert_relative_eq!(w.weighted.stats.dim_a, 2.0, epsilon = 1e-14);
        assert_eq!(w.weighted.spectrum.eigenvalues()[1], 0.0);
    }

    #[test]
    fn weighted_scale_enters_to_fourth_power() {
        let sigma = crate::matstats::diag_matrix(&[1.0, 0.5]);
        let w1 = weighted_bounds(&sigma, &DMatrix::identity(2, 2), 50_000, 1.0).unwrap();
        let w2 = weighted_bounds(&sigma, &(DMatrix::identity(2, 2) * 2.0), 50_000, 1.0).unwrap();
        assert_relative_eq!(
            w2.bounds.upper.unwrap().bound.threshold,
            16.0 * w1.bounds.upper.unwrap().bound.threshold,
            max_relative = 1e-12
        );
    }

    #[test]
    fn proxy_examples() {
        let p = proxy_stats(&spec(&[1.0, 1.0, 1.0])).unwrap();
        assert_eq!((p.dim_a, p.v2, p.lambda), (12.0, 12.0, 2.0));
        let p = proxy_stats(&spec(&[1.0])).unwrap();
        assert_eq!((p.dim_a, p.v2, p.lambda), (2.0, 2.0, 2.0));
        let p = proxy_stats(&spec(&[1.0, 0.5])).unwrap();
        assert_eq!((p.dim_a, p.v2, p.lambda), (3.5, 2.625, 2.0));
        assert!(proxy_stats(&spec(&[2.0])).is_err());
    }
}
