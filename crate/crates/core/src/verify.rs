//! Monte-Carlo checks of the closed forms and tail bounds.
//!
//! Each check draws from its own seed, derived from the master seed and the
//! check name, so adding or reordering checks leaves the others unchanged.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::covbounds::{self, alpha_profile, solve_alpha, solve_rho, CovBoundInput};
use crate::error::{Error, Result};
use crate::gauss_qf::{
    log_mgf_centered_bounds, log_mgf_noncentered, log_mgf_qf, log_mgf_remainder_complex,
    qf_moments, wishart_sandwich,
};
use crate::matstats::{cov_effective_stats, qf_stats, Spectrum};
use crate::mc::{
    derive_seed, interval_estimate, mgf_estimate, moment_estimate, sample, tail_estimate,
    SimConfig, Statistic, TailEstimate,
};
use crate::quantiles::{chi2_bounds, lower_quantile_sq, upper_quantile_sq, Side, TailBound};

/// Agreement tolerance in standard errors.
pub const Z_TOL: f64 = 6.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// Monte-Carlo estimate against a closed form, within `Z_TOL` stderr.
    Agreement,
    /// Empirical exceedance against a `k exp(-x)` cap.
    TailCap,
    /// Deterministic inequality between two computed quantities.
    Inequality,
    /// The bound could not be formed; `condition` names the failed hypothesis.
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    pub pass: bool,
    /// Closed form, cap, or right-hand side.
    pub target: Option<f64>,
    /// Estimate or left-hand side.
    pub observed: Option<f64>,
    pub stderr: Option<f64>,
    pub tail: Option<TailEstimate>,
    /// For tail caps: the whole confidence interval is below the cap.
    pub strict_pass: Option<bool>,
    pub condition: Option<String>,
    pub detail: Option<String>,
}

impl Check {
    fn blank(name: String, kind: CheckKind, pass: bool) -> Self {
        Check {
            name,
            kind,
            pass,
            target: None,
            observed: None,
            stderr: None,
            tail: None,
            strict_pass: None,
            condition: None,
            detail: None,
        }
    }

    pub fn agreement(name: impl Into<String>, target: f64, observed: f64, stderr: f64) -> Self {
        let diff = (observed - target).abs();
        let pass = if stderr > 0.0 {
            diff <= Z_TOL * stderr
        } else {
            diff <= 1e-12 * target.abs().max(1.0)
        };
        Check {
            target: Some(target),
            observed: Some(observed),
            stderr: Some(stderr),
            ..Check::blank(name.into(), CheckKind::Agreement, pass)
        }
    }

    pub fn tail_cap(name: impl Into<String>, cap: f64, tail: TailEstimate) -> Self {
        Check {
            target: Some(cap),
            observed: Some(tail.p_hat),
            stderr: Some(tail.stderr),
            strict_pass: Some(tail.strictly_below(cap)),
            tail: Some(tail),
            ..Check::blank(
                name.into(),
                CheckKind::TailCap,
                tail.consistent_with_cap(cap),
            )
        }
    }

    /// Passes when `lhs <= rhs`.
    pub fn inequality(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        Check {
            target: Some(rhs),
            observed: Some(lhs),
            ..Check::blank(name.into(), CheckKind::Inequality, lhs <= rhs)
        }
    }

    pub fn infeasible(name: impl Into<String>, err: &Error) -> Self {
        Check {
            condition: err.failed_condition().map(str::to_owned),
            detail: Some(err.to_string()),
            ..Check::blank(name.into(), CheckKind::Infeasible, false)
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = Some(detail.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub suite: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn new(suite: impl Into<String>, checks: Vec<Check>) -> Self {
        Report {
            suite: suite.into(),
            pass: !checks.is_empty() && checks.iter().all(|c| c.pass),
            checks,
        }
    }
}

fn rng_for(seed: u64, label: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, label))
}

fn draw(seed: u64, label: &str, reps: usize, statistic: Statistic) -> Result<Vec<f64>> {
    Ok(sample(&SimConfig::new(derive_seed(seed, label), reps, statistic))?.values)
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("[{}]", parts.join(", "))
}

/// Spectrum of length `p` with entries uniform on `[lo, hi]`.
pub fn random_spectrum(rng: &mut impl Rng, p: usize, lo: f64, hi: f64) -> Spectrum {
    let v = (0..p).map(|_| rng.random_range(lo..=hi)).collect();
    Spectrum::new(v).expect("finite entries")
}

/// Symmetric `p x p` matrix with independent entries uniform on `[-1, 1]`
/// on and above the diagonal.
pub fn random_symmetric(rng: &mut impl Rng, p: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let v = rng.random_range(-1.0..=1.0);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Mean and centered moments 2..4 of `<Bg,g>` against the closed forms.
pub fn qf_moment_checks(b: &Spectrum, seed: u64, reps: usize, label: &str) -> Result<Vec<Check>> {
    let exact = qf_moments(&qf_stats(b))?;
    let values = draw(seed, label, reps, Statistic::GaussianQf { b: b.clone() })?;
    let detail = format!("B = {}", fmt_list(b.eigenvalues()));
    let mut out = Vec::with_capacity(4);
    for (k, centered, target, tag) in [
        (1, false, exact.mean, "mean"),
        (2, true, exact.m2, "m2"),
        (3, true, exact.m3, "m3"),
        (4, true, exact.m4, "m4"),
    ] {
        let est = moment_estimate(&values, k, centered)?;
        out.push(
            Check::agreement(format!("{label}/{tag}"), target, est.estimate, est.stderr)
                .with_detail(detail.clone()),
        );
    }
    Ok(out)
}

/// Centered moments of chi-square(1) against the constants 2, 8, 60, in closed
/// form and by simulation.
pub fn scalar_constant_checks(seed: u64, reps: usize) -> Result<Vec<Check>> {
    let b = Spectrum::new(vec![1.0])?;
    let exact = qf_moments(&qf_stats(&b))?;
    let mut out = vec![
        Check::inequality("scalar/closed_form/m2", (exact.m2 - 2.0).abs(), 0.0),
        Check::inequality("scalar/closed_form/m3", (exact.m3 - 8.0).abs(), 0.0),
        Check::inequality("scalar/closed_form/m4", (exact.m4 - 60.0).abs(), 0.0),
    ];
    let values = draw(seed, "scalar", reps, Statistic::GaussianQf { b })?;
    for (k, target) in [(2, 2.0), (3, 8.0), (4, 60.0)] {
        let est = moment_estimate(&values, k, true)?;
        out.push(Check::agreement(
            format!("scalar/empirical/m{k}"),
            target,
            est.estimate,
            est.stderr,
        ));
    }
    Ok(out)
}

/// `E<Gamma,E>^2 = 2 ||Gamma||_Fr^2` and `E n ||S_hat - S||_Fr^2 = dimA(S)`.
pub fn eps_identity_checks(
    gamma: &Spectrum,
    sigma: &Spectrum,
    n: u64,
    seed: u64,
    reps: usize,
) -> Result<Vec<Check>> {
    let g = draw(
        seed,
        "eps/gamma_inner",
        reps,
        Statistic::GammaInner {
            gamma: gamma.clone(),
            n,
        },
    )?;
    let var = moment_estimate(&g, 2, true)?;
    let frob = draw(
        seed,
        "eps/frobenius",
        reps,
        Statistic::FrobeniusLoss {
            sigma: sigma.clone(),
            n,
        },
    )?;
    let mean = moment_estimate(&frob, 1, false)?;
    let dim_a = cov_effective_stats(sigma, true)?.dim_a;
    Ok(vec![
        Check::agreement(
            "eps/gamma_inner_variance",
            2.0 * gamma.trace_power(2),
            var.estimate,
            var.stderr,
        )
        .with_detail(format!(
            "Gamma spectrum = {}, n = {n}",
            fmt_list(gamma.eigenvalues())
        )),
        Check::agreement("eps/frobenius_mean", dim_a, mean.estimate, mean.stderr).with_detail(
            format!("Sigma = {}, n = {n}", fmt_list(sigma.eigenvalues())),
        ),
    ])
}

/// `E ||B^{1/2}(gg^T - I)B^{1/2}||_Fr^2 = (tr B)^2 + tr B^2`, via the
/// Frobenius loss with a single sample.
pub fn sandwich_check(b: &Spectrum, seed: u64, reps: usize) -> Result<Check> {
    let (_, expected) = wishart_sandwich(b);
    let values = draw(
        seed,
        "sandwich",
        reps,
        Statistic::FrobeniusLoss {
            sigma: b.clone(),
            n: 1,
        },
    )?;
    let est = moment_estimate(&values, 1, false)?;
    Ok(
        Check::agreement("sandwich/mean", expected, est.estimate, est.stderr)
            .with_detail(format!("B = {}", fmt_list(b.eigenvalues()))),
    )
}

/// Spectrum `{2 l_i l_j : i <= j}` of the proxy covariance `Var(S^{1/2} E~ S^{1/2})`.
pub fn proxy_spectrum(sigma: &Spectrum) -> Spectrum {
    let l = sigma.eigenvalues();
    let mut v = Vec::with_capacity(l.len() * (l.len() + 1) / 2);
    for i in 0..l.len() {
        for j in i..l.len() {
            v.push(2.0 * l[i] * l[j]);
        }
    }
    Spectrum::new(v).expect("products of finite values")
}

/// Mean `dimA` and variance `2 tr B~^2 = 4 v^2` of the proxy loss.
pub fn proxy_checks(sigma: &Spectrum, seed: u64, reps: usize) -> Result<Vec<Check>> {
    let stats = cov_effective_stats(sigma, true)?;
    let proxy = proxy_spectrum(sigma);
    let values = draw(
        seed,
        "proxy",
        reps,
        Statistic::ProxyLoss {
            sigma: sigma.clone(),
        },
    )?;
    let mean = moment_estimate(&values, 1, false)?;
    let var = moment_estimate(&values, 2, true)?;
    let detail = format!(
        "Sigma = {}, v^2 = {}",
        fmt_list(sigma.eigenvalues()),
        stats.v2
    );
    Ok(vec![
        Check::agreement("proxy/mean", stats.dim_a, mean.estimate, mean.stderr)
            .with_detail(detail.clone()),
        Check::agreement(
            "proxy/variance",
            2.0 * proxy.trace_power(2),
            var.estimate,
            var.stderr,
        )
        .with_detail(detail),
    ])
}

/// `E exp{(mu/2)<Bg,g>}` against `det(I - mu B)^{-1/2}`.
pub fn mgf_identity_check(
    b: &Spectrum,
    mu: f64,
    seed: u64,
    reps: usize,
    label: &str,
) -> Result<Check> {
    let exact = log_mgf_qf(b, mu)?.exp();
    let values = draw(seed, label, reps, Statistic::GaussianQf { b: b.clone() })?;
    let est = mgf_estimate(&values, mu)?;
    Ok(Check::agreement(label, exact, est.estimate, est.stderr)
        .with_detail(format!("B = {}, mu = {mu:.6}", fmt_list(b.eigenvalues()))))
}

/// Non-centered MGF: simulation against the closed form, and the closed form
/// against its upper bound.
pub fn noncentered_mgf_checks(
    b: &Spectrum,
    a: &[f64],
    mu: f64,
    seed: u64,
    reps: usize,
    label: &str,
) -> Result<Vec<Check>> {
    let exact = log_mgf_noncentered(b, a, mu)?;
    let values = draw(
        seed,
        label,
        reps,
        Statistic::ShiftedQfExponent {
            b: b.clone(),
            a: a.to_vec(),
            mu,
        },
    )?;
    // the sampled value is already the exponent
    let est = mgf_estimate(&values, 2.0)?;
    let detail = format!(
        "B = {}, a = {}, mu = {mu:.6}",
        fmt_list(b.eigenvalues()),
        fmt_list(a)
    );
    let mut out = vec![Check::agreement(
        format!("{label}/identity"),
        exact.exact.exp(),
        est.estimate,
        est.stderr,
    )
    .with_detail(detail.clone())];
    if let Some(ub) = exact.upper_bound {
        out.push(Check::inequality(format!("{label}/bound"), exact.exact, ub).with_detail(detail));
    }
    Ok(out)
}

/// Third-order remainder bound at `count` random complex `mu` with
/// `|mu| lambda <= 0.9`.
pub fn complex_remainder_checks(seed: u64, count: usize) -> Result<Vec<Check>> {
    let mut rng = rng_for(seed, "complex_remainder");
    let mut out = Vec::with_capacity(count);
    for i in 0..count {
        let p = rng.random_range(1..=5);
        let b = random_spectrum(&mut rng, p, -1.0, 1.0);
        let lambda = b.op_norm().max(f64::MIN_POSITIVE);
        let r = rng.random_range(0.0..=0.9) / lambda;
        let theta = rng.random_range(0.0..std::f64::consts::TAU);
        let mu = Complex64::from_polar(r, theta);
        let rem = log_mgf_remainder_complex(&b, mu)?;
        let mut c = Check::inequality(
            format!("complex_remainder/{i}"),
            rem.remainder.norm(),
            rem.bound,
        )
        .with_detail(format!(
            "B = {}, mu = {:.6}{:+.6}i",
            fmt_list(b.eigenvalues()),
            mu.re,
            mu.im
        ));
        c.pass = rem.holds();
        out.push(c);
    }
    Ok(out)
}

/// Exact centered log-MGF against its two one-sided bounds at `count`
/// random PSD `(B, mu)` pairs.
pub fn centered_mgf_bound_checks(seed: u64, count: usize) -> Result<Vec<Check>> {
    let mut rng = rng_for(seed, "centered_bounds");
    let mut out = Vec::new();
    for i in 0..count {
        let p = rng.random_range(1..=5);
        let b = random_spectrum(&mut rng, p, 0.0, 1.0);
        let lambda = b.op_norm().max(1e-3);
        let mu = rng.random_range(0.01..0.95) / lambda;
        let r = log_mgf_centered_bounds(&b, mu)?;
        let detail = format!("B = {}, mu = {mu:.6}", fmt_list(b.eigenvalues()));
        if let (Some(e), Some(bd)) = (r.exact_plus, r.bound_plus) {
            out.push(
                Check::inequality(format!("centered_bound/{i}/plus"), e, bd)
                    .with_detail(detail.clone()),
            );
        }
        if let (Some(e), Some(bd)) = (r.exact_minus, r.bound_minus) {
            out.push(
                Check::inequality(format!("centered_bound/{i}/minus"), e, bd).with_detail(detail),
            );
        }
    }
    Ok(out)
}

fn tail_check(name: String, bound: &TailBound, values: &[f64]) -> Result<Check> {
    let t = tail_estimate(values, bound.threshold, bound.side)?;
    Ok(Check::tail_cap(name, bound.prob_bound, t))
}

/// Upper tail at `dimA + 2v sqrt(x) + 2 lambda x` and lower tail at
/// `dimA - 2 v sqrt(x)`, each capped by `exp(-x)`.
pub fn gaussian_tail_checks(
    b: &Spectrum,
    xs: &[f64],
    seed: u64,
    reps: usize,
    label: &str,
) -> Result<Vec<Check>> {
    let stats = qf_stats(b);
    let values = draw(seed, label, reps, Statistic::GaussianQf { b: b.clone() })?;
    let detail = format!("B = {}", fmt_list(b.eigenvalues()));
    let mut out = Vec::new();
    for &x in xs {
        let up = TailBound::new(upper_quantile_sq(&stats, x)?.value, 1, Side::Upper, x);
        let lo = TailBound::new(lower_quantile_sq(&stats, x)?, 1, Side::Lower, x);
        out.push(
            tail_check(format!("{label}/x={x}/upper"), &up, &values)?.with_detail(detail.clone()),
        );
        out.push(
            tail_check(format!("{label}/x={x}/lower"), &lo, &values)?.with_detail(detail.clone()),
        );
    }
    Ok(out)
}

/// `P(||g||^2 >= p + 2 sqrt(px) + 2x)` and `P(||g|| >= sqrt(p) + sqrt(2x))`.
pub fn chi2_checks(p: u64, x: f64, seed: u64, reps: usize) -> Result<Vec<Check>> {
    let bounds = chi2_bounds(p, x)?;
    let b = Spectrum::new(vec![1.0; p as usize])?;
    let values = draw(seed, "chi2", reps, Statistic::GaussianQf { b })?;
    let norm_sq = TailBound {
        threshold: bounds.upper_norm.threshold.powi(2),
        ..bounds.upper_norm
    };
    Ok(vec![
        tail_check(
            format!("chi2/p={p}/x={x}/squared"),
            &bounds.upper_sq,
            &values,
        )?,
        tail_check(format!("chi2/p={p}/x={x}/norm"), &norm_sq, &values)?
            .with_detail(format!("norm threshold {}", bounds.upper_norm.threshold)),
    ])
}

/// Empirical validity of the covariance upper, lower and two-sided bounds.
/// Infeasible bounds are reported as failing `Infeasible` checks.
pub fn cov_tail_checks(
    sigma: &Spectrum,
    n: u64,
    x: f64,
    seed: u64,
    reps: usize,
) -> Result<Vec<Check>> {
    let input = CovBoundInput::new(sigma, n, x)?;
    let bounds = covbounds::cov_bounds(input);
    let psd = sigma.to_psd()?;
    let values = draw(
        seed,
        "cov",
        reps,
        Statistic::FrobeniusLoss { sigma: psd, n },
    )?;
    let label = format!("cov/n={n}/x={x}");
    let mut out = Vec::new();
    match &bounds.upper {
        Ok(u) => out.push(tail_check(format!("{label}/upper"), &u.bound, &values)?),
        Err(e) => out.push(Check::infeasible(format!("{label}/upper"), e)),
    }
    match &bounds.lower {
        Ok(l) => out.push(tail_check(format!("{label}/lower"), &l.bound, &values)?),
        Err(e) => out.push(Check::infeasible(format!("{label}/lower"), e)),
    }
    match &bounds.interval {
        Ok(i) => {
            let t = interval_estimate(&values, i.lower.bound.threshold, i.upper.bound.threshold)?;
            let mut c = Check::tail_cap(format!("{label}/interval"), i.prob_bound, t);
            c.detail = Some(format!(
                "interval [{}, {}]",
                i.lower.bound.threshold, i.upper.bound.threshold
            ));
            out.push(c);
        }
        Err(e) => out.push(Check::infeasible(format!("{label}/interval"), e)),
    }
    Ok(out)
}

/// Contracts of the rho and alpha solvers on `count` random feasible inputs,
/// plus constructed infeasible inputs.
pub fn solver_contract_checks(seed: u64, count: usize) -> Vec<Check> {
    let mut rng = rng_for(seed, "solvers");
    let mut out = Vec::new();
    let mut rho_fail = Vec::new();
    let mut worst_residual: f64 = 0.0;
    for i in 0..count {
        // choose c <= 1/4 first, then the n that realizes it
        let dim_a: f64 = rng.random_range(0.5..200.0);
        let x: f64 = rng.random_range(0.0..10.0);
        let c: f64 = rng.random_range(0.01..0.25);
        let target = dim_a.sqrt() + 4.0 * x.sqrt();
        let n = ((8.0 * (target / c).powi(2)).ceil() as u64).max((8.0 * dim_a) as u64 + 1);
        match solve_rho(dim_a, n, x) {
            Ok(s) => {
                let scale = (n as f64 / 8.0).sqrt();
                let rel = s.residual.abs() / scale;
                worst_residual = worst_residual.max(rel);
                let other = 1.0 - s.rho;
                if rel > 1e-12 || !(s.rho <= other) || !(s.rho > 0.0) {
                    rho_fail.push(format!("#{i}: dimA={dim_a}, n={n}, x={x}, rho={}", s.rho));
                }
            }
            Err(e) => rho_fail.push(format!("#{i}: dimA={dim_a}, n={n}, x={x}: {e}")),
        }
    }
    let mut c = Check::inequality("solvers/rho/residual_and_root", worst_residual, 1e-12);
    c.pass = rho_fail.is_empty();
    c.detail = Some(if rho_fail.is_empty() {
        format!("{count} feasible inputs; worst residual / sqrt(n/8) shown")
    } else {
        rho_fail.join("; ")
    });
    out.push(c);

    let mut alpha_fail = Vec::new();
    let mut solved = 0;
    while solved < count {
        let dim_a: f64 = rng.random_range(0.5..200.0);
        // v^2 between its extremes for unit norm: dimA-ish scale
        let v: f64 = dim_a.sqrt() * rng.random_range(0.3..1.5);
        let x_max = (dim_a / v / 2.0).powi(2);
        let x: f64 = rng.random_range(0.0..=x_max);
        let n: u64 = rng.random_range(10..10_000_000);
        match solve_alpha(dim_a, v, n, x) {
            Ok(s) => {
                solved += 1;
                let below = alpha_profile(s.alpha - 1e-9);
                let at = alpha_profile(s.alpha);
                if !(below < s.rhs && s.rhs <= at) || !(s.alpha <= s.alpha_star) {
                    alpha_fail.push(format!(
                        "dimA={dim_a}, v={v}, n={n}, x={x}: alpha={}, rhs={}",
                        s.alpha, s.rhs
                    ));
                }
            }
            // rhs beyond max f: resample
            Err(Error::Infeasible { .. }) => {}
            Err(e) => alpha_fail.push(e.to_string()),
        }
    }
    let mut c = Check::blank(
        "solvers/alpha/minimality".into(),
        CheckKind::Inequality,
        alpha_fail.is_empty(),
    );
    c.detail = Some(if alpha_fail.is_empty() {
        format!("{count} feasible inputs: f(alpha - 1e-9) < rhs <= f(alpha)")
    } else {
        alpha_fail.join("; ")
    });
    out.push(c);

    let cases: [(&str, Result<()>, &str); 4] = [
        (
            "solvers/rho/infeasible_c",
            solve_rho(30.0, 4000, 1.0).map(|_| ()),
            "rho (1 - rho) = c solvable (c <= 1/4)",
        ),
        (
            "solvers/rho/infeasible_n",
            solve_rho(30.0, 240, 1.0).map(|_| ()),
            "dimA < n/8",
        ),
        (
            "solvers/alpha/infeasible_x",
            solve_alpha(30.0, 30f64.sqrt(), 1_000_000, 100.0).map(|_| ()),
            "2 sqrt(x) <= dimA / v",
        ),
        (
            "solvers/alpha/infeasible_rhs",
            solve_alpha(30.0, 30f64.sqrt(), 50, 1.0).map(|_| ()),
            "alpha condition solvable",
        ),
    ];
    for (name, res, expected) in cases {
        let got = res.err().and_then(|e| e.failed_condition());
        let mut c = Check::blank(name.into(), CheckKind::Inequality, got == Some(expected));
        c.condition = got.map(str::to_owned);
        c.detail = Some(format!("expected condition: {expected}"));
        out.push(c);
    }
    out
}

/// Defaults for the `moments` suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSuite {
    pub seed: u64,
    pub reps: usize,
    /// Operators to test; random when empty.
    pub spectra: Vec<Spectrum>,
    pub random_count: usize,
    /// Sample size for the epsilon-matrix identities.
    pub n: u64,
}

pub fn run_moments(cfg: &MomentSuite) -> Result<Report> {
    let mut rng = rng_for(cfg.seed, "moments/spectra");
    let spectra: Vec<Spectrum> = if cfg.spectra.is_empty() {
        (0..cfg.random_count)
            .map(|_| {
                let p = rng.random_range(1..=5);
                random_spectrum(&mut rng, p, -1.0, 1.0)
            })
            .collect()
    } else {
        cfg.spectra.clone()
    };
    let mut checks = Vec::new();
    for (i, b) in spectra.iter().enumerate() {
        checks.extend(qf_moment_checks(
            b,
            cfg.seed,
            cfg.reps,
            &format!("moments/{i}"),
        )?);
    }
    checks.extend(scalar_constant_checks(cfg.seed, cfg.reps)?);
    let gamma = Spectrum::from_dense(&random_symmetric(&mut rng, 4))?;
    let sigma = Spectrum::new(vec![1.0, 0.5, 0.25])?;
    checks.extend(eps_identity_checks(
        &gamma, &sigma, cfg.n, cfg.seed, cfg.reps,
    )?);
    let psd = random_spectrum(&mut rng, 4, 0.0, 1.0);
    checks.push(sandwich_check(&psd, cfg.seed, cfg.reps)?);
    let (unit, _) =
        crate::matstats::normalize_unit_opnorm(&random_spectrum(&mut rng, 4, 0.05, 1.0))?;
    checks.extend(proxy_checks(&unit, cfg.seed, cfg.reps)?);
    Ok(Report::new("moments", checks))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailSuite {
    pub seed: u64,
    pub reps: usize,
    pub spectra: Vec<Spectrum>,
    pub random_count: usize,
    pub dim: usize,
    pub xs: Vec<f64>,
    pub chi2_p: u64,
    pub chi2_x: f64,
}

pub fn run_tails(cfg: &TailSuite) -> Result<Report> {
    let mut rng = rng_for(cfg.seed, "tails/spectra");
    let spectra: Vec<Spectrum> = if cfg.spectra.is_empty() {
        (0..cfg.random_count)
            .map(|_| random_spectrum(&mut rng, cfg.dim, 0.0, 1.0))
            .collect()
    } else {
        cfg.spectra.clone()
    };
    let mut checks = Vec::new();
    for (i, b) in spectra.iter().enumerate() {
        let b = b.to_psd()?;
        checks.extend(gaussian_tail_checks(
            &b,
            &cfg.xs,
            cfg.seed,
            cfg.reps,
            &format!("tails/{i}"),
        )?);
    }
    checks.extend(chi2_checks(cfg.chi2_p, cfg.chi2_x, cfg.seed, cfg.reps)?);
    Ok(Report::new("tails", checks))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MgfSuite {
    pub seed: u64,
    pub reps: usize,
    pub spectra: Vec<Spectrum>,
    pub random_count: usize,
    /// Largest `|mu| lambda` for the simulated identities.
    pub mu_lambda_max: f64,
    /// Fixed `mu` instead of random ones.
    pub mu: Option<f64>,
    pub complex_count: usize,
}

pub fn run_mgf(cfg: &MgfSuite) -> Result<Report> {
    let mut rng = rng_for(cfg.seed, "mgf/spectra");
    let spectra: Vec<Spectrum> = if cfg.spectra.is_empty() {
        (0..cfg.random_count)
            .map(|_| {
                let p = rng.random_range(1..=5);
                random_spectrum(&mut rng, p, -1.0, 1.0)
            })
            .collect()
    } else {
        cfg.spectra.clone()
    };
    let mut checks = Vec::new();
    for (i, b) in spectra.iter().enumerate() {
        let lambda = b.op_norm().max(1e-3);
        let mu = match cfg.mu {
            Some(m) => m,
            None => rng.random_range(-cfg.mu_lambda_max..=cfg.mu_lambda_max) / lambda,
        };
        checks.push(mgf_identity_check(
            b,
            mu,
            cfg.seed,
            cfg.reps,
            &format!("mgf/{i}"),
        )?);
        let a: Vec<f64> = (0..b.len()).map(|_| rng.random_range(-0.5..=0.5)).collect();
        checks.extend(noncentered_mgf_checks(
            b,
            &a,
            mu,
            cfg.seed,
            cfg.reps,
            &format!("mgf_noncentered/{i}"),
        )?);
    }
    checks.extend(complex_remainder_checks(cfg.seed, cfg.complex_count)?);
    checks.extend(centered_mgf_bound_checks(cfg.seed, cfg.complex_count)?);
    Ok(Report::new("mgf", checks))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovSuite {
    pub seed: u64,
    pub reps: usize,
    pub sigma: Spectrum,
    pub n: u64,
    pub x: f64,
}

pub fn run_cov(cfg: &CovSuite) -> Result<Report> {
    let checks = cov_tail_checks(&cfg.sigma, cfg.n, cfg.x, cfg.seed, cfg.reps)?;
    Ok(Report::new("cov", checks))
}
