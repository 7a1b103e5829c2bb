//! Seeded Monte-Carlo sampling of the statistics bounded elsewhere in the crate.
//!
//! Replication `r` draws from its own ChaCha8 stream, keyed by the master
//! seed with stream id `r`, so a batch is bit-identical for a given config no
//! matter how replications are chunked or how many workers run them.

pub mod estimate;

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matstats::Spectrum;

pub use estimate::{
    clopper_pearson, interval_estimate, mgf_estimate, mgf_variance_warning, moment_estimate,
    tail_estimate, MgfEstimate, MomentEstimate, TailEstimate, CI_LEVEL, MIN_TAIL_REPS,
    MOMENT_BATCHES,
};

/// The statistic produced by one replication. Operators are given by their
/// spectra and sampled in their eigenbasis.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Statistic {
    /// `n ||S_hat - S||_Fr^2 = sum_jk l_j l_k E_jk^2`, with
    /// `E = n^{-1/2} sum_i (g_i g_i^T - I)`.
    FrobeniusLoss { sigma: Spectrum, n: u64 },
    /// `<Bg,g> = sum_j l_j g_j^2`
    GaussianQf { b: Spectrum },
    /// `||S^{1/2} E~ S^{1/2}||_Fr^2 = 2 sum_{i<=j} l_i l_j G_ij^2`
    ProxyLoss { sigma: Spectrum },
    /// `<Gamma, E> = n^{-1/2} sum_i (g_i^T Gamma g_i - tr Gamma)`
    GammaInner { gamma: Spectrum, n: u64 },
    /// `(mu/2)(<Bg,g> - tr B) + <a,g>`, with `a` in the eigenbasis of `B`.
    ShiftedQfExponent { b: Spectrum, a: Vec<f64>, mu: f64 },
}

impl Statistic {
    pub fn name(&self) -> &'static str {
        match self {
            Statistic::FrobeniusLoss { .. } => "frobenius_loss",
            Statistic::GaussianQf { .. } => "gaussian_qf",
            Statistic::ProxyLoss { .. } => "proxy_loss",
            Statistic::GammaInner { .. } => "gamma_inner",
            Statistic::ShiftedQfExponent { .. } => "shifted_qf_exponent",
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Statistic::FrobeniusLoss { sigma, n } => {
                if *n == 0 {
                    return Err(Error::Validation("sample count n must be positive".into()));
                }
                if !sigma.is_psd() {
                    return Err(Error::Domain("covariance spectrum is not PSD".into()));
                }
            }
            Statistic::ProxyLoss { sigma } if !sigma.is_psd() => {
                return Err(Error::Domain("covariance spectrum is not PSD".into()));
            }
            Statistic::GammaInner { n: 0, .. } => {
                return Err(Error::Validation("sample count n must be positive".into()));
            }
            Statistic::ShiftedQfExponent { b, a, mu } => {
                if a.len() != b.len() {
                    return Err(Error::Validation(
                        "shift length differs from dimension".into(),
                    ));
                }
                if !mu.is_finite() || a.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Validation("non-finite shift or mu".into()));
                }
            }
            _ => {}
        }
        Ok(())
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        let mut normal = || -> f64 { rng.sample(StandardNormal) };
        match self {
            Statistic::GaussianQf { b } => b
                .eigenvalues()
                .iter()
                .map(|l| {
                    let g = normal();
                    l * g * g
                })
                .sum(),
            Statistic::ProxyLoss { sigma } => {
                let l = sigma.eigenvalues();
                let mut acc = 0.0;
                for i in 0..l.len() {
                    for j in i..l.len() {
                        let g = normal();
                        acc += l[i] * l[j] * g * g;
                    }
                }
                2.0 * acc
            }
            Statistic::GammaInner { gamma, n } => {
                let l = gamma.eigenvalues();
                let mut acc = 0.0;
                for _ in 0..*n {
                    for lj in l {
                        let g = normal();
                        acc += lj * (g * g - 1.0);
                    }
                }
                acc / (*n as f64).sqrt()
            }
            Statistic::FrobeniusLoss { sigma, n } => {
                frobenius_loss(sigma.eigenvalues(), *n, normal)
            }
            Statistic::ShiftedQfExponent { b, a, mu } => {
                let mut quad = 0.0;
                let mut lin = 0.0;
                for (l, aj) in b.eigenvalues().iter().zip(a) {
                    let g = normal();
                    quad += l * (g * g - 1.0);
                    lin += aj * g;
                }
                0.5 * mu * quad + lin
            }
        }
    }
}

/// Rank-one accumulation of the upper triangle of `sum_i g_i g_i^T`.
fn frobenius_loss(l: &[f64], n: u64, mut normal: impl FnMut() -> f64) -> f64 {
    let p = l.len();
    let mut g = vec![0.0; p];
    let mut gram = vec![0.0; p * (p + 1) / 2];
    for _ in 0..n {
        for gj in g.iter_mut() {
            *gj = normal();
        }
        let mut idx = 0;
        for j in 0..p {
            let gj = g[j];
            for gk in &g[j..] {
                gram[idx] += gj * gk;
                idx += 1;
            }
        }
    }
    let nf = n as f64;
    let mut loss = 0.0;
    let mut idx = 0;
    for j in 0..p {
        for k in j..p {
            let e = if j == k { gram[idx] - nf } else { gram[idx] };
            let weight = if j == k { 1.0 } else { 2.0 };
            loss += weight * l[j] * l[k] * e * e;
            idx += 1;
        }
    }
    loss / nf
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimConfig {
    pub seed: u64,
    pub reps: usize,
    pub statistic: Statistic,
    /// Replications per work unit; affects scheduling only.
    pub chunk: usize,
}

impl SimConfig {
    pub fn new(seed: u64, reps: usize, statistic: Statistic) -> Self {
        SimConfig {
            seed,
            reps,
            statistic,
            chunk: 256,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleBatch {
    pub values: Vec<f64>,
    pub config: SimConfig,
    #[serde(skip)]
    pub wall_time: Duration,
}

fn stream_key(seed: u64) -> [u8; 32] {
    ChaCha8Rng::seed_from_u64(seed).get_seed()
}

/// Generator for replication `rep` under master `seed`.
pub fn replication_rng(seed: u64, rep: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(stream_key(seed));
    rng.set_stream(rep);
    rng
}

/// Runs the configured replications on the current rayon pool.
pub fn sample(config: &SimConfig) -> Result<SampleBatch> {
    if config.reps == 0 {
        return Err(Error::Validation("replications must be at least 1".into()));
    }
    if config.chunk == 0 {
        return Err(Error::Validation("chunk size must be at least 1".into()));
    }
    config.statistic.validate()?;
    let start = Instant::now();
    let key = stream_key(config.seed);
    let mut values = vec![0.0; config.reps];
    values
        .par_chunks_mut(config.chunk)
        .enumerate()
        .for_each(|(c, out)| {
            let base = (c * config.chunk) as u64;
            for (offset, slot) in out.iter_mut().enumerate() {
                let mut rng = ChaCha8Rng::from_seed(key);
                rng.set_stream(base + offset as u64);
                *slot = config.statistic.draw(&mut rng);
            }
        });
    Ok(SampleBatch {
        values,
        config: config.clone(),
        wall_time: start.elapsed(),
    })
}

/// Runs [`sample`] on a dedicated pool with `threads` workers.
pub fn sample_with_threads(config: &SimConfig, threads: usize) -> Result<SampleBatch> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Validation(format!("cannot build thread pool: {e}")))?;
    pool.install(|| sample(config))
}

pub fn sample_frobenius_loss(
    sigma: &Spectrum,
    n: u64,
    seed: u64,
    reps: usize,
) -> Result<SampleBatch> {
    sample(&SimConfig::new(
        seed,
        reps,
        Statistic::FrobeniusLoss {
            sigma: sigma.clone(),
            n,
        },
    ))
}

pub fn sample_gaussian_qf(b: &Spectrum, seed: u64, reps: usize) -> Result<SampleBatch> {
    sample(&SimConfig::new(
        seed,
        reps,
        Statistic::GaussianQf { b: b.clone() },
    ))
}

pub fn sample_proxy_loss(sigma: &Spectrum, seed: u64, reps: usize) -> Result<SampleBatch> {
    sample(&SimConfig::new(
        seed,
        reps,
        Statistic::ProxyLoss {
            sigma: sigma.clone(),
        },
    ))
}

pub fn sample_gamma_inner(gamma: &Spectrum, n: u64, seed: u64, reps: usize) -> Result<SampleBatch> {
    sample(&SimConfig::new(
        seed,
        reps,
        Statistic::GammaInner {
            gamma: gamma.clone(),
            n,
        },
    ))
}

/// Child seed for a named sub-experiment: FNV-1a of the label folded into the
/// master seed, then a splitmix64 finalizer.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = master ^ h;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(v: &[f64]) -> Spectrum {
        Spectrum::new(v.to_vec()).unwrap()
    }

    fn mean(v: &[f64]) -> (f64, f64) {
        let n = v.len() as f64;
        let m = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (var / n).sqrt())
    }

    #[test]
    fn determinism_and_chunk_independence() {
        let stat = Statistic::FrobeniusLoss {
            sigma: spec(&[1.0, 0.5]),
            n: 20,
        };
        let mut cfg = SimConfig::new(11, 1000, stat);
        let a = sample(&cfg).unwrap();
        cfg.chunk = 7;
        let b = sample_with_threads(&cfg, 3).unwrap();
        cfg.chunk = 1000;
        let c = sample_with_threads(&cfg, 1).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(a.values, c.values);
        let d = sample(&SimConfig::new(12, 1000, cfg.statistic.clone())).unwrap();
        assert_ne!(a.values, d.values);
    }

    #[test]
    fn replication_streams_are_prefix_stable() {
        let stat = Statistic::GaussianQf { b: spec(&[1.0]) };
        let short = sample(&SimConfig::new(5, 100, stat.clone())).unwrap();
        let long = sample(&SimConfig::new(5, 1000, stat)).unwrap();
        assert_eq!(short.values[..], long.values[..100]);
    }

    #[test]
    fn gaussian_qf_means() {
        let b = sample_gaussian_qf(&spec(&[1.0]), 1, 100_000).unwrap();
        let (m, se) = mean(&b.values);
        assert!((m - 1.0).abs() < 6.0 * se);
        let b = sample_gaussian_qf(&spec(&[1.0, -1.0]), 2, 100_000).unwrap();
        let (m, se) = mean(&b.values);
        assert!(m.abs() < 6.0 * se);
    }

    #[test]
    fn frobenius_degenerate_spectrum() {
        // only E_11 survives; n E_11^2 has mean 2
        let b = sample_frobenius_loss(&spec(&[1.0, 0.0]), 50, 3, 50_000).unwrap();
        let (m, se) = mean(&b.values);
        assert!((m - 2.0).abs() < 6.0 * se, "{m} {se}");
    }

    #[test]
    fn gamma_inner_zero() {
        let b = sample_gamma_inner(&spec(&[0.0, 0.0]), 10, 4, 200).unwrap();
        assert!(b.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn proxy_scalar_mean() {
        let b = sample_proxy_loss(&spec(&[1.0]), 5, 100_000).unwrap();
        let (m, se) = mean(&b.values);
        assert!((m - 2.0).abs() < 6.0 * se);
    }

    #[test]
    fn rejects_bad_configs() {
        let stat = Statistic::GaussianQf { b: spec(&[1.0]) };
        assert!(sample(&SimConfig::new(1, 0, stat.clone())).is_err());
        let mut cfg = SimConfig::new(1, 10, stat);
        cfg.chunk = 0;
        assert!(sample(&cfg).is_err());
        assert!(sample_frobenius_loss(&spec(&[1.0, -0.5]), 10, 1, 10).is_err());
        assert!(sample_frobenius_loss(&spec(&[1.0]), 0, 1, 10).is_err());
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(7, "a"), derive_seed(7, "b"));
        assert_ne!(derive_seed(7, "a"), derive_seed(8, "a"));
        assert_eq!(derive_seed(7, "a"), derive_seed(7, "a"));
    }
}
