//! Quantile and tail-probability bounds for Gaussian quadratic forms.
//!
//! With `dimA = tr B`, `v^2 = tr B^2`, `lambda = ||B||` and `x >= 0`:
//!
//! ```text
//! P(<Bg,g> - dimA >  2 v sqrt(x) + 2 lambda x) <= exp(-x)
//! P(<Bg,g> - dimA <= -2 v sqrt(x))             <= exp(-x)
//! ```

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matstats::QfStats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Side {
    /// `P(stat > threshold)`
    Upper,
    /// `P(stat < threshold)`
    Lower,
    /// `P(|stat - center| > threshold)`
    TwoSided,
}

/// A threshold with its confidence statement `P(...) <= multiplier * exp(-x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBound {
    pub threshold: f64,
    /// `multiplier * exp(-x)`, not clamped to 1.
    pub prob_bound: f64,
    pub multiplier: u32,
    pub side: Side,
    pub x: f64,
}

impl TailBound {
    pub fn new(threshold: f64, multiplier: u32, side: Side, x: f64) -> Self {
        TailBound {
            threshold,
            prob_bound: f64::from(multiplier) * (-x).exp(),
            multiplier,
            side,
            x,
        }
    }

    /// Same statement for the statistic multiplied by `c > 0`.
    pub fn rescaled(&self, c: f64) -> Self {
        TailBound {
            threshold: self.threshold * c,
            ..*self
        }
    }
}

fn check_x(x: f64) -> Result<()> {
    if !(x >= 0.0) || !x.is_finite() {
        return Err(Error::Domain(format!("x must be finite and >= 0, got {x}")));
    }
    Ok(())
}

/// Two-sided deviation width `2 v sqrt(x) + 2 lambda x`.
pub fn z2(stats: &QfStats, x: f64) -> Result<f64> {
    check_x(x)?;
    Ok(2.0 * stats.v() * x.sqrt() + 2.0 * stats.lambda * x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpperQuantile {
    /// `dimA + 2 v sqrt(x) + 2 lambda x`
    pub value: f64,
    /// `(sqrt(dimA) + sqrt(2 lambda x))^2`
    pub envelope: f64,
}

/// Upper quantile of `<Bg,g>` for PSD `B`, with its square-root envelope.
pub fn upper_quantile_sq(stats: &QfStats, x: f64) -> Result<UpperQuantile> {
    if !stats.psd {
        return Err(Error::Domain(
            "upper quantile envelope needs a PSD operator".into(),
        ));
    }
    let value = stats.dim_a + z2(stats, x)?;
    let envelope = (stats.dim_a.max(0.0).sqrt() + (2.0 * stats.lambda * x).sqrt()).powi(2);
    debug_assert!(value <= envelope * (1.0 + 1e-12) + 1e-12);
    Ok(UpperQuantile { value, envelope })
}

/// `dimA - 2 v sqrt(x)`, possibly negative.
pub fn lower_quantile_sq(stats: &QfStats, x: f64) -> Result<f64> {
    check_x(x)?;
    Ok(stats.dim_a - 2.0 * stats.v() * x.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZTail {
    /// `2 exp{-z^2 / (v + sqrt(v^2 + 2 lambda z))^2}`
    pub exact: f64,
    /// `2 exp{-z^2 / (4 v^2 + 4 lambda z)}`
    pub weaker: f64,
    /// Set when `z < 2v`, where the bound is close to vacuous.
    pub weak_regime: bool,
}

/// Two-sided tail bound for `|<Bg,g> - dimA| >= z`, `z > v`.
pub fn tail_prob_at_z(stats: &QfStats, z: f64) -> Result<ZTail> {
    let v = stats.v();
    if !(z > v) || !z.is_finite() {
        return Err(Error::Domain(format!("z = {z} must exceed v = {v}")));
    }
    let denom = v + (stats.v2 + 2.0 * stats.lambda * z).sqrt();
    let exact = 2.0 * (-(z * z) / (denom * denom)).exp();
    let weaker = 2.0 * (-(z * z) / (4.0 * stats.v2 + 4.0 * stats.lambda * z)).exp();
    Ok(ZTail {
        exact,
        weaker,
        weak_regime: z < 2.0 * v,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Chi2Bounds {
    /// `||g||^2 >= p + 2 sqrt(p x) + 2x`
    pub upper_sq: TailBound,
    /// `||g|| >= sqrt(p) + sqrt(2x)`
    pub upper_norm: TailBound,
    /// `||g||^2 <= p - 2 sqrt(p x)`
    pub lower_sq: TailBound,
}

pub fn chi2_bounds(p: u64, x: f64) -> Result<Chi2Bounds> {
    if p == 0 {
        return Err(Error::Domain("p must be at least 1".into()));
    }
    check_x(x)?;
    let pf = p as f64;
    let root = (pf * x).sqrt();
    Ok(Chi2Bounds {
        upper_sq: TailBound::new(pf + 2.0 * root + 2.0 * x, 1, Side::Upper, x),
        upper_norm: TailBound::new(pf.sqrt() + (2.0 * x).sqrt(), 1, Side::Upper, x),
        lower_sq: TailBound::new(pf - 2.0 * root, 1, Side::Lower, x),
    })
}

fn check_y(stats: &QfStats, y: f64) -> Result<()> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::Domain(format!("y must be positive, got {y}")));
    }
    if !(stats.lambda > 0.0) {
        return Err(Error::Domain("lambda must be positive".into()));
    }
    if stats.dim_a < 0.0 {
        return Err(Error::Domain("dimA must be non-negative".into()));
    }
    Ok(())
}

/// `x(y) = (sqrt(y + dimA) - sqrt(dimA))^2 / (4 lambda)`, the deviation level
/// with `P(<Bg,g> >= dimA + y) <= exp(-x(y))`.
pub fn x_of_y(stats: &QfStats, y: f64) -> Result<f64> {
    check_y(stats, y)?;
    let d = stats.dim_a;
    // sqrt(y + d) - sqrt(d) = y / (sqrt(y + d) + sqrt(d)), stable for small y
    let gap = y / ((y + d).sqrt() + d.sqrt());
    Ok(gap * gap / (4.0 * stats.lambda))
}

/// Solution of `2 v sqrt(x) + 2 lambda x = y`, i.e. the exact inverse of [`z2`].
pub fn x_of_y_sharp(stats: &QfStats, y: f64) -> Result<f64> {
    check_y(stats, y)?;
    let v = stats.v();
    let l = stats.lambda;
    // 2 l sqrt(x) = sqrt(v^2 + 2 l y) - v = 2 l y / (sqrt(v^2 + 2 l y) + v)
    let root = y / ((stats.v2 + 2.0 * l * y).sqrt() + v);
    Ok(root * root)
}

/// Bound on `E{(<Bg,g> - dimA) 1(<Bg,g> >= dimA + y)}`.
pub fn truncated_mean_bound(stats: &QfStats, y: f64) -> Result<f64> {
    let x = x_of_y(stats, y)?;
    Ok(2.0 * ((y + stats.dim_a) / (stats.lambda * x)).sqrt() * (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TruncatedExpBound {
    pub bound: f64,
    /// `mu lambda + mu sqrt(lambda dimA / x(y))`
    pub epsilon: f64,
    pub x_of_y: f64,
}

/// Bound on `E{exp(mu (<Bg,g> - dimA)/2) 1(<Bg,g> >= dimA + y)}`, valid while
/// `epsilon < 1`.
pub fn truncated_expmoment_bound(stats: &QfStats, y: f64, mu: f64) -> Result<TruncatedExpBound> {
    if !(mu > 0.0) || !mu.is_finite() {
        return Err(Error::Domain(format!("mu must be positive, got {mu}")));
    }
    let x = x_of_y(stats, y)?;
    let epsilon = mu * stats.lambda + mu * (stats.lambda * stats.dim_a / x).sqrt();
    if !(epsilon < 1.0) {
        return Err(Error::infeasible(
            "epsilon < 1",
            format!("epsilon = {epsilon} at mu = {mu}, y = {y}"),
        ));
    }
    Ok(TruncatedExpBound {
        bound: (-(1.0 - epsilon) * x).exp() / (1.0 - epsilon),
        epsilon,
        x_of_y: x,
    })
}
