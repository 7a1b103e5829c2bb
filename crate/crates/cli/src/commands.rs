use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::{json, Value};

use covconc::covbounds::{cov_bounds, weighted_bounds, CovBoundInput, CovBounds};
use covconc::gauss_qf::{log_mgf_centered_bounds, log_mgf_qf, qf_moment_bounds, qf_moments};
use covconc::matstats::io::{parse_dense_csv, parse_operator, parse_operator_dense};
use covconc::matstats::{cov_effective_stats, qf_stats, Spectrum};
use covconc::mc::mgf_variance_warning;
use covconc::quantiles::{
    lower_quantile_sq, tail_prob_at_z, truncated_expmoment_bound, truncated_mean_bound,
    upper_quantile_sq, x_of_y, x_of_y_sharp, z2, Side, TailBound,
};
use covconc::verify::{self, CheckKind, CovSuite, MgfSuite, MomentSuite, Report, TailSuite};
use covconc::Error;

use crate::args::{BoundKind, Suite};
use crate::config::Settings;
use crate::failure::Failure;
use crate::output::{self, sha256_hex, InputDigest};

pub const DEFAULT_SEED: u64 = 7;
/// Fewest replications any verify suite accepts.
pub const MIN_REPS: usize = 100;

pub fn default_reps(suite: Suite) -> usize {
    match suite {
        Suite::Moments | Suite::Mgf => 1_000_000,
        Suite::Tails => 100_000,
        Suite::Cov => 20_000,
    }
}

/// Command output: report body plus the exit status it implies.
pub struct Outcome {
    pub kind: String,
    pub body: Value,
    pub inputs: Vec<InputDigest>,
    pub failure: Option<Failure>,
    pub csv: Option<String>,
}

fn read_input(path: &Path, role: &str, inputs: &mut Vec<InputDigest>) -> Result<String, Failure> {
    let bytes = std::fs::read(path)
        .map_err(|e| Failure::Usage(format!("cannot read {role} file {}: {e}", path.display())))?;
    inputs.push(InputDigest {
        role: role.to_owned(),
        path: path.to_path_buf(),
        sha256: sha256_hex(&bytes),
    });
    String::from_utf8(bytes)
        .map_err(|_| Failure::Usage(format!("{role} file {} is not UTF-8", path.display())))
}

fn with_path(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| Failure::Usage(format!("{}: {e}", path.display()))
}

fn operator_path(s: &Settings) -> Result<Option<(PathBuf, bool)>, Failure> {
    match (&s.spectrum, &s.matrix) {
        (Some(_), Some(_)) => Err(Failure::Usage(
            "give either --spectrum or --matrix, not both".into(),
        )),
        (Some(p), None) => Ok(Some((p.clone(), false))),
        (None, Some(p)) => Ok(Some((p.clone(), true))),
        (None, None) => Ok(None),
    }
}

fn load_operator(s: &Settings, inputs: &mut Vec<InputDigest>) -> Result<Option<Spectrum>, Failure> {
    let Some((path, dense)) = operator_path(s)? else {
        return Ok(None);
    };
    let text = read_input(&path, "operator", inputs)?;
    let spectrum = if dense {
        Spectrum::from_dense(&parse_dense_csv(&text).map_err(with_path(&path))?)
    } else {
        parse_operator(&text)
    }
    .map_err(with_path(&path))?;
    if s.psd && !spectrum.is_psd() {
        return Err(Failure::NotPsd(format!(
            "{} has smallest eigenvalue {}",
            path.display(),
            spectrum
                .eigenvalues()
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min)
        )));
    }
    Ok(Some(spectrum))
}

fn require_operator(s: &Settings, inputs: &mut Vec<InputDigest>) -> Result<Spectrum, Failure> {
    load_operator(s, inputs)?.ok_or_else(|| Failure::Usage("missing --spectrum or --matrix".into()))
}

fn require<T: Copy>(v: Option<T>, flag: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::Usage(format!("missing --{flag}")))
}

fn operator_json(b: &Spectrum) -> Value {
    json!({
        "dimension": b.len(),
        "source": b.source(),
        "eigenvalues": b.eigenvalues(),
    })
}

/// Collects per-part results; failed parts become structured entries.
#[derive(Default)]
struct Parts {
    infeasible: Vec<String>,
}

impl Parts {
    fn entry<T: Serialize>(&mut self, r: covconc::Result<T>) -> Value {
        match r {
            Ok(v) => serde_json::to_value(v).expect("serializable"),
            Err(e) => self.error(&e),
        }
    }

    fn error(&mut self, e: &Error) -> Value {
        match e {
            Error::Infeasible { condition, detail } => {
                let msg = format!("{condition} ({detail})");
                if !self.infeasible.contains(&msg) {
                    self.infeasible.push(msg);
                }
                json!({"infeasible": {"condition": condition, "detail": detail}})
            }
            other => json!({"error": other.to_string()}),
        }
    }

    fn failure(&self) -> Option<Failure> {
        (!self.infeasible.is_empty()).then(|| Failure::Infeasible(self.infeasible.join("; ")))
    }
}

pub fn stats(s: &Settings) -> Result<Outcome, Failure> {
    let mut inputs = Vec::new();
    let b = require_operator(s, &mut inputs)?;
    let q = qf_stats(&b);
    let cov = cov_effective_stats(&b, false)?;
    let body = json!({
        "operator": operator_json(&b),
        "trace_powers": q.tr_powers,
        "qf": {"dim_a": q.dim_a, "v2": q.v2, "lambda": q.lambda},
        "cov": {"dim_a": cov.dim_a, "v2": cov.v2},
        "psd": b.is_psd(),
    });
    Ok(Outcome {
        kind: "stats".into(),
        body,
        inputs,
        failure: None,
        csv: None,
    })
}

pub fn bound(kind: BoundKind, s: &Settings) -> Result<Outcome, Failure> {
    match kind {
        BoundKind::GaussQf => bound_gauss_qf(s),
        BoundKind::Cov if s.weight_matrix.is_none() => bound_cov(s),
        BoundKind::Cov | BoundKind::CovWeighted => bound_cov_weighted(s),
    }
}

fn bound_gauss_qf(s: &Settings) -> Result<Outcome, Failure> {
    let mut inputs = Vec::new();
    let b = require_operator(s, &mut inputs)?;
    let x = require(s.x, "x")?;
    let stats = qf_stats(&b);
    let mut parts = Parts::default();

    let upper = upper_quantile_sq(&stats, x).map(|u| {
        json!({
            "bound": TailBound::new(u.value, 1, Side::Upper, x),
            "envelope": u.envelope,
        })
    });
    let lower = lower_quantile_sq(&stats, x).map(|t| TailBound::new(t, 1, Side::Lower, x));
    let width = z2(&stats, x)?;
    let mut body = json!({
        "operator": operator_json(&b),
        "stats": &stats,
        "x": x,
        "z2": width,
        "upper": parts.entry(upper),
        "lower": parts.entry(lower),
        "z_tail": parts.entry(tail_prob_at_z(&stats, width)),
        "moments": parts.entry(qf_moments(&stats)),
    });
    if stats.psd && stats.lambda <= 1.0 {
        body["moment_bounds"] = parts.entry(qf_moment_bounds(&stats));
    }
    if let Some(y) = s.y {
        let mut inv = json!({
            "y": y,
            "x_of_y": parts.entry(x_of_y(&stats, y)),
            "x_of_y_sharp": parts.entry(x_of_y_sharp(&stats, y)),
            "truncated_mean_bound": parts.entry(truncated_mean_bound(&stats, y)),
        });
        if let Some(mu) = s.mu {
            inv["truncated_expmoment"] = parts.entry(truncated_expmoment_bound(&stats, y, mu));
        }
        body["inverse"] = inv;
    }
    if let Some(mu) = s.mu {
        let centered = if mu > 0.0 {
            parts.entry(log_mgf_centered_bounds(&b, mu))
        } else {
            Value::Null
        };
        body["mgf"] = json!({
            "mu": mu,
            "log_mgf": parts.entry(log_mgf_qf(&b, mu)),
            "centered_bounds": centered,
        });
    }
    Ok(Outcome {
        kind: "bound-gauss-qf".into(),
        body,
        inputs,
        failure: parts.failure(),
        csv: None,
    })
}

fn cov_body(bounds: &CovBounds, parts: &mut Parts) -> Value {
    let input: &CovBoundInput = &bounds.input;
    let upper = bounds.upper.as_ref().map(|u| u.bound).map_err(Clone::clone);
    let lower = bounds.lower.as_ref().map(|l| l.bound).map_err(Clone::clone);
    let interval = bounds.interval.as_ref().map_err(Clone::clone).map(|i| {
        json!({
            "lower": i.lower.bound.threshold,
            "upper": i.upper.bound.threshold,
            "prob_bound": i.prob_bound,
            "centered_lower": i.centered_lower,
            "centered_upper": i.centered_upper,
        })
    });
    let rho = bounds.upper.as_ref().ok().map(|u| u.rho);
    let alpha = bounds.lower.as_ref().ok().map(|l| l.alpha);
    json!({
        "input": {
            "n": input.n,
            "x": input.x,
            "dim_a": input.stats.dim_a,
            "v2": input.stats.v2,
            "sigma_scale": input.sigma_scale,
            "output_scale": input.output_scale,
            "normalized_eigenvalues": input.sigma.eigenvalues(),
        },
        "upper": parts.entry(upper),
        "lower": parts.entry(lower),
        "interval": parts.entry(interval),
        "diagnostics": {
            "rho": rho,
            "alpha": alpha,
            "mu": alpha.map(|a| a.mu),
            "margins": {
                "x_range": bounds.upper.as_ref().ok().map(|u| u.x_range_margin),
                "sufficient": bounds.upper.as_ref().ok().map(|u| u.sufficient_margin),
            },
            "alpha_ratio": bounds.interval.as_ref().ok().map(|i| i.alpha_ratio),
        },
    })
}

fn check_cov_psd(sigma: &Spectrum, label: &str) -> Result<(), Failure> {
    if !sigma.is_psd() {
        return Err(Failure::NotPsd(format!(
            "{label} must be a covariance (PSD)"
        )));
    }
    Ok(())
}

fn bound_cov(s: &Settings) -> Result<Outcome, Failure> {
    let mut inputs = Vec::new();
    let sigma = require_operator(s, &mut inputs)?;
    let n = require(s.n, "n")?;
    let x = require(s.x, "x")?;
    check_cov_psd(&sigma, "covariance")?;
    let bounds = cov_bounds(CovBoundInput::new(&sigma, n, x)?);
    let mut parts = Parts::default();
    let body = cov_body(&bounds, &mut parts);
    Ok(Outcome {
        kind: "bound-cov".into(),
        body,
        inputs,
        failure: parts.failure(),
        csv: None,
    })
}

fn bound_cov_weighted(s: &Settings) -> Result<Outcome, Failure> {
    let mut inputs = Vec::new();
    let (path, _) =
        operator_path(s)?.ok_or_else(|| Failure::Usage("missing --spectrum or --matrix".into()))?;
    let text = read_input(&path, "operator", &mut inputs)?;
    let sigma = parse_operator_dense(&text).map_err(with_path(&path))?;
    let a_path = s
        .weight_matrix
        .clone()
        .ok_or_else(|| Failure::Usage("missing --weight-matrix".into()))?;
    let a_text = read_input(&a_path, "weight", &mut inputs)?;
    let a = parse_operator_dense(&a_text).map_err(with_path(&a_path))?;
    let n = require(s.n, "n")?;
    let x = require(s.x, "x")?;
    let spectrum = Spectrum::from_dense(&sigma).map_err(with_path(&path))?;
    check_cov_psd(&spectrum, "covariance")?;
    let w = weighted_bounds(&sigma, &a, n, x)?;
    let mut parts = Parts::default();
    let mut body = cov_body(&w.bounds, &mut parts);
    body["weight"] = json!({
        "a_scale": w.weighted.a_scale,
        "weighted_eigenvalues": w.weighted.spectrum.eigenvalues(),
        "dim_a": w.weighted.stats.dim_a,
        "v2": w.weighted.stats.v2,
    });
    Ok(Outcome {
        kind: "bound-cov-weighted".into(),
        body,
        inputs,
        failure: parts.failure(),
        csv: None,
    })
}

pub fn run_verify(suite: Suite, s: &Settings) -> Result<Outcome, Failure> {
    let seed = s.seed.unwrap_or(DEFAULT_SEED);
    let reps = s.reps.unwrap_or(default_reps(suite));
    if reps < MIN_REPS {
        return Err(Failure::Usage(format!(
            "--reps {reps} is below the minimum of {MIN_REPS}"
        )));
    }
    let mut inputs = Vec::new();
    let operator = load_operator(s, &mut inputs)?;
    let spectra: Vec<Spectrum> = operator.iter().cloned().collect();
    let mut warnings = Vec::new();
    let start = Instant::now();
    let (report, config): (Report, Value) = match suite {
        Suite::Moments => {
            let cfg = MomentSuite {
                seed,
                reps,
                spectra,
                random_count: 20,
                n: s.n.unwrap_or(200),
            };
            (
                verify::run_moments(&cfg)?,
                serde_json::to_value(&cfg).unwrap(),
            )
        }
        Suite::Tails => {
            let cfg = TailSuite {
                seed,
                reps,
                spectra,
                random_count: 5,
                dim: 10,
                xs: s.x.map_or_else(|| vec![0.5, 1.0, 2.0, 3.0], |x| vec![x]),
                chi2_p: 50,
                chi2_x: s.x.unwrap_or(2.0),
            };
            (
                verify::run_tails(&cfg)?,
                serde_json::to_value(&cfg).unwrap(),
            )
        }
        Suite::Mgf => {
            let cfg = MgfSuite {
                seed,
                reps,
                spectra,
                random_count: 20,
                mu_lambda_max: 0.4,
                mu: s.mu,
                complex_count: 64,
            };
            if let Some(mu) = s.mu {
                for b in cfg.spectra.iter() {
                    warnings.extend(mgf_variance_warning(mu.abs(), b.op_norm()));
                }
            }
            (verify::run_mgf(&cfg)?, serde_json::to_value(&cfg).unwrap())
        }
        Suite::Cov => {
            let sigma =
                operator.ok_or_else(|| Failure::Usage("missing --spectrum or --matrix".into()))?;
            check_cov_psd(&sigma, "covariance")?;
            let cfg = CovSuite {
                seed,
                reps,
                sigma,
                n: require(s.n, "n")?,
                x: require(s.x, "x")?,
            };
            (verify::run_cov(&cfg)?, serde_json::to_value(&cfg).unwrap())
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let failed: Vec<_> = report.checks.iter().filter(|c| !c.pass).collect();
    let infeasible: Vec<String> = failed
        .iter()
        .filter(|c| c.kind == CheckKind::Infeasible)
        .map(|c| format!("{}: {}", c.name, c.condition.as_deref().unwrap_or("?")))
        .collect();
    let failure = if !infeasible.is_empty() {
        Some(Failure::Infeasible(infeasible.join("; ")))
    } else if !failed.is_empty() {
        Some(Failure::ChecksFailed(failed.len()))
    } else {
        None
    };
    let csv = output::tail_csv(&report.checks);
    let body = json!({
        "suite": report.suite,
        "pass": report.pass,
        "config": config,
        "summary": {
            "total": report.checks.len(),
            "failed": failed.len(),
            "infeasible": infeasible.len(),
        },
        "warnings": warnings,
        "checks": report.checks,
        "timing": {"wall_seconds": elapsed},
    });
    Ok(Outcome {
        kind: format!("verify-{}", suite.name()),
        body,
        inputs,
        failure,
        csv: Some(csv),
    })
}
