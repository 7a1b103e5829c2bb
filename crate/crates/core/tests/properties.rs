use covconc::covbounds::{alpha_profile, cov_bounds, solve_alpha, solve_rho, CovBoundInput};
use covconc::gauss_qf::{
    log_mgf_centered, log_mgf_centered_bounds, log_mgf_qf, log_mgf_remainder_complex, qf_moments,
};
use covconc::matstats::{cov_effective_stats, diag_matrix, qf_stats, weighted_sigma, Spectrum};
use covconc::mc::{clopper_pearson, sample_with_threads, SimConfig, Statistic};
use covconc::quantiles::{lower_quantile_sq, tail_prob_at_z, upper_quantile_sq, x_of_y, z2};
use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

fn spectrum(lo: f64, hi: f64, max_len: usize) -> impl Strategy<Value = Spectrum> {
    prop::collection::vec(lo..=hi, 1..=max_len).prop_map(|v| Spectrum::new(v).unwrap())
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

fn orthogonal(p: usize, angles: &[f64]) -> DMatrix<f64> {
    let mut q = DMatrix::identity(p, p);
    for (k, &t) in angles.iter().enumerate() {
        let i = k % p;
        let j = (k + 1) % p;
        if i == j {
            continue;
        }
        let mut g = DMatrix::identity(p, p);
        g[(i, i)] = t.cos();
        g[(j, j)] = t.cos();
        g[(i, j)] = -t.sin();
        g[(j, i)] = t.sin();
        q = g * q;
    }
    q
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn raw_moments_expand_binomially(b in spectrum(-2.0, 2.0, 6)) {
        let m = qf_moments(&qf_stats(&b)).unwrap();
        let t = m.mean;
        prop_assert!(rel_close(m.r2, t * t + m.m2, 1e-12));
        prop_assert!(rel_close(m.r3, t.powi(3) + 3.0 * t * m.m2 + m.m3, 1e-12));
        prop_assert!(rel_close(
            m.r4,
            t.powi(4) + 6.0 * t * t * m.m2 + 4.0 * t * m.m3 + m.m4,
            1e-12
        ));
        prop_assert!(rel_close(m.var_of_square, m.r4 - m.r2 * m.r2, 1e-12));
    }

    #[test]
    fn psd_variance_proxy_bounded(b in spectrum(0.0, 3.0, 8)) {
        let s = qf_stats(&b);
        prop_assert!(s.v2 <= s.dim_a * s.lambda * (1.0 + 1e-12));
        let c = cov_effective_stats(&b.scaled(1.0 / b.op_norm().max(1e-300)), true).unwrap();
        if b.op_norm() > 0.0 {
            prop_assert!(c.v2 <= 2.0 * c.dim_a * (1.0 + 1e-12));
        }
    }

    #[test]
    fn dense_traces_match_eigenvalues(
        eig in prop::collection::vec(-2.0f64..=2.0, 2..=6),
        angles in prop::collection::vec(-3.0f64..=3.0, 1..=10),
    ) {
        let p = eig.len();
        let q = orthogonal(p, &angles);
        let m = &q * diag_matrix(&eig) * q.transpose();
        let m = (&m + m.transpose()) * 0.5;
        let dense = Spectrum::from_dense(&m).unwrap();
        let given = Spectrum::new(eig).unwrap();
        for k in 1..=4 {
            prop_assert!((dense.trace_power(k) - given.trace_power(k)).abs() <= 1e-10);
        }
    }

    #[test]
    fn weighted_sigma_orthogonal_invariance(
        eig in prop::collection::vec(0.0f64..=1.0, 2..=5),
        angles in prop::collection::vec(-3.0f64..=3.0, 1..=8),
    ) {
        let p = eig.len();
        let sigma = diag_matrix(&eig);
        let base = weighted_sigma(&sigma, &DMatrix::identity(p, p)).unwrap();
        let rotated = weighted_sigma(&sigma, &orthogonal(p, &angles)).unwrap();
        prop_assert!((base.a_scale - rotated.a_scale).abs() <= 1e-12);
        prop_assert!(rel_close(base.stats.dim_a, rotated.stats.dim_a, 1e-10));
        prop_assert!(rel_close(base.stats.v2, rotated.stats.v2, 1e-10));
    }

    #[test]
    fn centered_mgf_dominated(b in spectrum(-1.0, 1.0, 6), t in 0.01f64..0.95) {
        let mu = t / b.op_norm().max(1e-3);
        let bounds = log_mgf_centered_bounds(&b, mu).unwrap();
        prop_assert!(bounds.holds(), "{bounds:?}");
    }

    #[test]
    fn complex_remainder_dominated(
        b in spectrum(-1.0, 1.0, 6),
        r in 0.0f64..0.9,
        arg in -std::f64::consts::PI..std::f64::consts::PI,
    ) {
        let mu = Complex64::from_polar(r / b.op_norm().max(1e-3), arg);
        let rem = log_mgf_remainder_complex(&b, mu).unwrap();
        prop_assert!(rem.holds(), "{rem:?}");
    }

    #[test]
    fn mgf_derivatives_reproduce_moments(b in spectrum(-1.0, 1.0, 5)) {
        // d^k/dmu^k of log E exp{(mu/2) Q} at 0 is cumulant_k / 2^k
        let h = 1e-2;
        let f = |mu: f64| log_mgf_qf(&b, mu).unwrap();
        let m = qf_moments(&qf_stats(&b)).unwrap();
        let d1 = (f(h) - f(-h)) / (2.0 * h);
        let d2 = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
        let d3 = (f(2.0 * h) - 2.0 * f(h) + 2.0 * f(-h) - f(-2.0 * h)) / (2.0 * h.powi(3));
        let scale = b.trace_power(2).max(1e-2);
        prop_assert!((2.0 * d1 - m.mean).abs() <= 1e-4 * scale.max(m.mean.abs()));
        prop_assert!((4.0 * d2 - m.m2).abs() <= 1e-3 * scale);
        prop_assert!((8.0 * d3 - m.m3).abs() <= 1e-2 * scale);
        prop_assert!((log_mgf_centered(&b, h).unwrap() - (f(h) - h * m.mean / 2.0)).abs() <= 1e-12);
    }

    #[test]
    fn rho_residual_and_smaller_root(dim_a in 0.0f64..200.0, x in 0.0f64..5.0, slack in 1.0f64..50.0) {
        let target = dim_a.sqrt() + 4.0 * x.sqrt();
        let n = (128.0 * target * target * slack).ceil().max(8.0 * dim_a + 8.0) as u64;
        let r = solve_rho(dim_a, n, x).unwrap();
        let scale = (n as f64 / 8.0).sqrt();
        prop_assert!(r.residual.abs() <= 1e-12 * scale);
        prop_assert!(r.rho <= 0.5);
        prop_assert!(r.rho <= 2.0 * r.c + 1e-15);
        let bigger = solve_rho(dim_a, 4 * n, x).unwrap();
        prop_assert!(bigger.rho <= r.rho);
    }

    #[test]
    fn alpha_is_minimal(dim_a in 1.0f64..100.0, ratio in 0.2f64..1.0, x in 0.01f64..2.0, n_exp in 4.0f64..8.0) {
        let v = (dim_a * ratio).sqrt();
        let n = 10f64.powf(n_exp) as u64;
        if let Ok(a) = solve_alpha(dim_a, v, n, x) {
            prop_assert!(a.alpha > 0.0 && a.alpha <= a.alpha_star);
            prop_assert!(alpha_profile(a.alpha) >= a.rhs);
            prop_assert!(alpha_profile(a.alpha - 1e-9) < a.rhs);
        }
    }

    #[test]
    fn raw_moments_below_bounds(b in spectrum(0.0, 1.0, 8)) {
        let s = qf_stats(&b);
        let m = qf_moments(&s).unwrap();
        let bounds = covconc::gauss_qf::qf_moment_bounds(&s).unwrap();
        let tol = 1.0 + 1e-12;
        prop_assert!(m.r2 <= bounds.r2 * tol && bounds.r2 <= bounds.r2_envelope * tol);
        prop_assert!(m.r3 <= bounds.r3 * tol && bounds.r3 <= bounds.r3_envelope * tol);
        prop_assert!(m.r4 <= bounds.r4 * tol && bounds.r4 <= bounds.r4_envelope * tol);
        prop_assert!(m.var_of_square <= bounds.var_of_square * tol);
    }

    #[test]
    fn quantile_ordering(b in spectrum(0.0, 2.0, 8), x in 0.0f64..10.0) {
        let s = qf_stats(&b);
        let up = upper_quantile_sq(&s, x).unwrap();
        prop_assert!(up.value <= up.envelope * (1.0 + 1e-12) + 1e-12);
        prop_assert!(lower_quantile_sq(&s, x).unwrap() <= s.dim_a);
        let c = 3.7;
        prop_assert!(rel_close(z2(&s.scaled(c), x).unwrap(), c * z2(&s, x).unwrap(), 1e-12));
        if s.lambda > 0.0 && x > 0.0 {
            let z = z2(&s, x).unwrap();
            if z > s.v() {
                prop_assert!(tail_prob_at_z(&s, z).unwrap().exact <= 2.0 * (-x).exp() * (1.0 + 1e-12));
            }
            let y = z;
            prop_assert!(x_of_y(&s, y).unwrap() <= x_of_y(&s, 2.0 * y).unwrap());
        }
    }

    #[test]
    fn cov_sandwich_when_feasible(eig in prop::collection::vec(0.05f64..=1.0, 1..=6), x in 0.0f64..3.0) {
        let sigma = Spectrum::new(eig).unwrap();
        let input = CovBoundInput::new(&sigma, 5_000_000, x).unwrap();
        let d = input.stats.dim_a * input.output_scale;
        let b = cov_bounds(input);
        if let (Ok(lo), Ok(up)) = (&b.lower, &b.upper) {
            prop_assert!(lo.bound.threshold <= d && d <= up.bound.threshold);
        }
    }

    #[test]
    fn clopper_pearson_brackets_estimate(reps in 1u64..5000, frac in 0.0f64..=1.0) {
        let count = ((reps as f64) * frac).floor() as u64;
        let (lo, hi) = clopper_pearson(count, reps, 0.99);
        let p = count as f64 / reps as f64;
        prop_assert!(0.0 <= lo && lo <= p && p <= hi && hi <= 1.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn sampling_ignores_thread_count(seed in any::<u64>(), reps in 1usize..2000) {
        let b = Spectrum::new(vec![1.0, -0.5, 0.25]).unwrap();
        let cfg = SimConfig::new(seed, reps, Statistic::GaussianQf { b });
        let one = sample_with_threads(&cfg, 1).unwrap().values;
        let four = sample_with_threads(&cfg, 4).unwrap().values;
        prop_assert_eq!(one, four);
    }
}
