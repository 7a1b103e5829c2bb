//! Estimators over a batch: exceedance frequencies with exact binomial
//! intervals, batch-means moments and exponential moments.

use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::error::{Error, Result};
use crate::quantiles::Side;
use crate::roots::bisect_predicate;

/// Two-sided confidence level of [`clopper_pearson`].
pub const CI_LEVEL: f64 = 0.99;
/// Smallest batch accepted by [`tail_estimate`].
pub const MIN_TAIL_REPS: usize = 100;
pub const MOMENT_BATCHES: usize = 32;

/// Exceedance frequency of a threshold.
///
/// For `Upper` the event is `value > threshold`, for `Lower` it is
/// `value < threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailEstimate {
    pub threshold: f64,
    pub side: Side,
    pub count: u64,
    pub reps: u64,
    pub p_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub stderr: f64,
}

impl TailEstimate {
    fn from_count(threshold: f64, side: Side, count: u64, reps: u64) -> Self {
        let p_hat = count as f64 / reps as f64;
        let (ci_lo, ci_hi) = clopper_pearson(count, reps, CI_LEVEL);
        TailEstimate {
            threshold,
            side,
            count,
            reps,
            p_hat,
            ci_lo,
            ci_hi,
            stderr: (p_hat * (1.0 - p_hat) / reps as f64).sqrt(),
        }
    }

    /// Sampling slack above the point estimate.
    pub fn slack(&self) -> f64 {
        self.p_hat - self.ci_lo
    }

    /// The data are consistent with `P <= cap`: the lower confidence limit
    /// does not exceed the cap, i.e. `p_hat <= cap + slack`.
    pub fn consistent_with_cap(&self, cap: f64) -> bool {
        self.ci_lo <= cap
    }

    /// The whole interval lies below the cap.
    pub fn strictly_below(&self, cap: f64) -> bool {
        self.ci_hi <= cap
    }
}

/// Exact two-sided binomial interval at the given level.
pub fn clopper_pearson(count: u64, reps: u64, level: f64) -> (f64, f64) {
    assert!(reps > 0 && count <= reps);
    let tail = 0.5 * (1.0 - level);
    let k = count as f64;
    let n = reps as f64;
    // The Beta(a, b) cdf is increasing in its argument.
    let quantile = |a: f64, b: f64, q: f64| -> f64 {
        bisect_predicate(0.0, 1.0, 1e-15, |t| beta_reg(a, b, t) >= q).1
    };
    let lo = if count == 0 {
        0.0
    } else {
        quantile(k, n - k + 1.0, tail)
    };
    let hi = if count == reps {
        1.0
    } else {
        quantile(k + 1.0, n - k, 1.0 - tail)
    };
    (lo, hi)
}

fn check_reps(values: &[f64]) -> Result<()> {
    if values.len() < MIN_TAIL_REPS {
        return Err(Error::Validation(format!(
            "tail estimate needs at least {MIN_TAIL_REPS} replications, got {}",
            values.len()
        )));
    }
    Ok(())
}

/// Frequency of `value > threshold` (`Upper`), `value < threshold` (`Lower`),
/// or `|value| > threshold` (`TwoSided`).
pub fn tail_estimate(values: &[f64], threshold: f64, side: Side) -> Result<TailEstimate> {
    check_reps(values)?;
    let count = values
        .iter()
        .filter(|&&v| match side {
            Side::Upper => v > threshold,
            Side::Lower => v < threshold,
            Side::TwoSided => v.abs() > threshold,
        })
        .count() as u64;
    Ok(TailEstimate::from_count(
        threshold,
        side,
        count,
        values.len() as u64,
    ))
}

/// Frequency of falling outside `[lower, upper]`. The reported threshold is
/// the upper end.
pub fn interval_estimate(values: &[f64], lower: f64, upper: f64) -> Result<TailEstimate> {
    check_reps(values)?;
    let count = values.iter().filter(|&&v| v < lower || v > upper).count() as u64;
    Ok(TailEstimate::from_count(
        upper,
        Side::TwoSided,
        count,
        values.len() as u64,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub order: u32,
    pub centered: bool,
    pub estimate: f64,
    pub stderr: f64,
}

/// `k`-th moment, raw or about the sample mean, with a batch-means standard
/// error over [`MOMENT_BATCHES`] contiguous batches.
pub fn moment_estimate(values: &[f64], k: u32, centered: bool) -> Result<MomentEstimate> {
    if !(1..=4).contains(&k) {
        return Err(Error::Validation(format!(
            "moment order must be 1..=4, got {k}"
        )));
    }
    if values.len() < MOMENT_BATCHES {
        return Err(Error::Validation(format!(
            "moment estimate needs at least {MOMENT_BATCHES} values"
        )));
    }
    let n = values.len() as f64;
    let center = if centered {
        values.iter().sum::<f64>() / n
    } else {
        0.0
    };
    let term = |v: f64| (v - center).powi(k as i32);
    let estimate = values.iter().map(|&v| term(v)).sum::<f64>() / n;

    let size = values.len() / MOMENT_BATCHES;
    let means: Vec<f64> = (0..MOMENT_BATCHES)
        .map(|b| {
            let end = if b + 1 == MOMENT_BATCHES {
                values.len()
            } else {
                (b + 1) * size
            };
            let chunk = &values[b * size..end];
            chunk.iter().map(|&v| term(v)).sum::<f64>() / chunk.len() as f64
        })
        .collect();
    let grand = means.iter().sum::<f64>() / MOMENT_BATCHES as f64;
    let var = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (MOMENT_BATCHES - 1) as f64;
    Ok(MomentEstimate {
        order: k,
        centered,
        estimate,
        stderr: (var / MOMENT_BATCHES as f64).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MgfEstimate {
    pub mu: f64,
    pub estimate: f64,
    pub stderr: f64,
}

/// Sample mean of `exp(mu * value / 2)`.
pub fn mgf_estimate(values: &[f64], mu: f64) -> Result<MgfEstimate> {
    if values.len() < 2 {
        return Err(Error::Validation(
            "mgf estimate needs at least 2 values".into(),
        ));
    }
    let n = values.len() as f64;
    let e: Vec<f64> = values.iter().map(|&v| (0.5 * mu * v).exp()).collect();
    let m = e.iter().sum::<f64>() / n;
    let var = e.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(MgfEstimate {
        mu,
        estimate: m,
        stderr: (var / n).sqrt(),
    })
}

/// Warning text when `exp(mu Q / 2)` has infinite variance, i.e. when
/// `mu * lambda_max >= 1/2`.
pub fn mgf_variance_warning(mu: f64, lambda_max: f64) -> Option<String> {
    let r = mu * lambda_max;
    (r >= 0.5).then(|| {
        format!("mu * lambda_max = {r:.4} >= 1/2: the estimator has infinite variance and its stderr is unreliable")
    })
}
