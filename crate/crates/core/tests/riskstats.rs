mod common;

use common::*;
use nalgebra::DMatrix;
use netwaves::propagate::{draw_innovations, simulate_reduced, DepthConvention, Timing};
use netwaves::rng::child_seed;
use netwaves::riskstats::*;
use proptest::prelude::*;

/// `Φ(−x)` by Simpson on the density over `[x, x + 14]`.
fn upper_tail_quadrature(x: f64) -> f64 {
    let pdf = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    simpson(pdf, x, x + 14.0, 40_000)
}

#[test]
fn normal_cdf_matches_quadrature() {
    for x in [0.0, 0.5, 1.0, 2.0, 4.0, 5.0, 7.0] {
        let q = upper_tail_quadrature(x);
        assert!((normal_cdf(-x) / q - 1.0).abs() < 1e-9, "x={x}");
    }
    assert!((gaussian_tail(4.0, 2.0).unwrap() - 0.158_655_253_931_457_05).abs() < 1e-15);
}

#[test]
fn two_firm_static_variance() {
    // w = (0.5, 0.5)(I − A)^{-1} = (1/0.6, 1/0.6)
    let w = 0.5 * 1.7 / 0.51;
    let want = 2.0 * (w * w + w * w);
    let got = population_static_variance(&two_firm(), 1.0).unwrap();
    assert!((got - want).abs() < 1e-10, "{got} vs {want}");
}

#[test]
fn depth_l_variance_approaches_static() {
    for seed in 0..5 {
        let net = heterogeneous_network(100, 1.6, 0.35, seed);
        let star = population_static_variance(&net, 1.0).unwrap();
        let deep = population_l_variance(&net, 1.0, 500, 1e-15, DepthConvention::LayerBlock).unwrap();
        assert!((deep / star - 1.0).abs() < 1e-6);
        for l in [1, 2, 5, 10] {
            let phi = population_l_variance(&net, 1.0, l, 1e-15, DepthConvention::LayerBlock).unwrap();
            assert!(phi <= star, "seed {seed} L={l}");
        }
    }
}

#[test]
fn depth_l_variance_matches_simulation() {
    use netwaves::propagate::{draw_shocks, simulate_l_economy};
    let net = heterogeneous_network(60, 1.5, 0.4, 3);
    let panel = draw_shocks(60, 40_000, 1.0, 4).unwrap();
    for l in [1, 3] {
        let phi = population_l_variance(&net, 1.0, l, 1e-15, DepthConvention::LayerBlock).unwrap();
        let path = simulate_l_economy(&net, &panel, l, DepthConvention::LayerBlock).unwrap();
        let v = variance(&path.increments()[200..]);
        assert!((v / phi - 1.0).abs() < 0.05, "L={l}: {v} vs {phi}");
    }
}

#[test]
fn twomode_and_attenuation() {
    let (phi, star) = twomode_variances(1.0, 0.5, 1.0).unwrap();
    assert!((phi - 4.0 / 3.0).abs() < 1e-14);
    assert!((star - 8.0).abs() < 1e-14);
    for lam in [0.1, 0.5, 0.7, 0.95] {
        let (p, s) = twomode_variances(1.7, lam, 0.3).unwrap();
        let r = (1.0 - lam).powi(2) / (1.0 + lam);
        assert!((p / s - r).abs() < 1e-14);
        assert!((attenuation_ratio(lam).unwrap() - r).abs() < 1e-15);
    }
    assert!((attenuation_ratio(0.5).unwrap() - 1.0 / 6.0).abs() < 1e-15);
    assert!((attenuation_ratio(0.7).unwrap() - 0.09 / 1.7).abs() < 1e-15);
}

#[test]
fn realized_statistics_of_reduced_path() {
    let eta = draw_innovations(200_000, 1.0, 21).unwrap();
    let path = simulate_reduced(0.5, 1.0, &eta, Timing::Lagged).unwrap();
    let (phi, _) = twomode_variances(1.0, 0.5, 1.0).unwrap();
    let phi_hat = realized_volatility(&path.y).unwrap();
    assert!((phi_hat / phi - 1.0).abs() < 0.02);

    let c = 2.0 * phi.sqrt();
    let p = gaussian_tail(phi, c).unwrap();
    let t = (path.y.len() - 1) as f64;
    let se = (p * (1.0 - p) / t).sqrt();
    let hat = realized_tail(&path.y, c).unwrap();
    assert!((hat - p).abs() < 3.0 * se, "{hat} vs {p} (se {se})");
}

#[test]
fn tail_ratio_examples() {
    let r = tail_ratio(1.0 / 6.0, 4.0).unwrap();
    let f = r.asymptotic / r.exact;
    assert!((1.0 / 1.5..1.5).contains(&f), "factor {f}");
    let mut last = 0.0;
    for x in 1..=6 {
        let e = tail_ratio(1.0 / 6.0, x as f64).unwrap().exact;
        assert!(e > last);
        last = e;
    }
}

#[test]
fn smallest_window() {
    for lam in [0.0, 0.3, 0.8] {
        let s = finite_t_spectra(lam, 2).unwrap();
        assert_eq!(s.nu_star, vec![2.0]);
        assert!((s.nu[0] - ((lam - 1.0).powi(2) + 1.0)).abs() < 1e-14);
    }
}

/// `M = D K Kᵀ Dᵀ` assembled explicitly and diagonalized by nalgebra.
fn oracle_nu(lam: f64, t: usize) -> Vec<f64> {
    let k = DMatrix::from_fn(t, t, |r, c| if c <= r { lam.powi((r - c) as i32) } else { 0.0 });
    let d = DMatrix::from_fn(t - 1, t, |r, c| {
        if c == r + 1 {
            1.0
        } else if c == r {
            -1.0
        } else {
            0.0
        }
    });
    let m = &d * &k * k.transpose() * d.transpose();
    let mut v: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

#[test]
fn spectra_match_explicit_product() {
    for (lam, t) in [(0.2, 12), (0.5, 40), (0.9, 90)] {
        let s = finite_t_spectra(lam, t).unwrap();
        for (a, b) in s.nu.iter().zip(oracle_nu(lam, t)) {
            assert!((a - b).abs() < 1e-9 * s.nu_max, "lambda2={lam} T={t}");
        }
        let (k, dt) = build_overlap_matrices(lam, t).unwrap();
        assert_eq!((k.len(), dt.len(), dt[0].len()), (t, t - 1, t));
    }
}

#[test]
fn mean_eigenvalue_limit() {
    let s = finite_t_spectra(0.5, 2000).unwrap();
    assert!((s.mean_nu() - 2.0 / 1.5).abs() < 1e-3);
    assert!((s.nu_star.iter().sum::<f64>() - 2.0 * 1999.0).abs() < 1e-9 * 1999.0);
}

#[test]
fn sampler_mean_is_unbiased_for_static() {
    let (lam, b, sigma) = (0.5, 1.0, 1.0);
    let s = finite_t_spectra(lam, 30).unwrap();
    let d = sample_quadratic_form(&s, b, sigma, 100_000, 5).unwrap();
    let m = mean(&d.phi_hat_star);
    let se = (variance(&d.phi_hat_star) / d.phi_hat_star.len() as f64).sqrt();
    let want = 2.0 * sigma * sigma * b * b / (1.0 - lam).powi(2);
    assert!((m - want).abs() < 4.0 * se, "{m} vs {want}");
    let (e_star, e_dyn) = expected_volatilities(lam, b, sigma, 30).unwrap();
    assert!((e_star - want).abs() < 1e-12);
    assert!((mean(&d.phi_hat) - e_dyn).abs() < 4.0 * (variance(&d.phi_hat) / 1e5).sqrt());
}

#[test]
fn sampler_law_matches_paths() {
    let (lam, t_len, draws) = (0.5, 50, 10_000);
    let spec = finite_t_spectra(lam, t_len).unwrap();
    let sampled = sample_quadratic_form(&spec, 1.0, 1.0, draws, 31).unwrap().phi_hat;
    let paths: Vec<f64> = (0..draws as u64)
        .map(|r| {
            let eta = draw_innovations(t_len, 1.0, child_seed(32, r)).unwrap();
            let y = simulate_reduced(lam, 1.0, &eta, Timing::Contemporaneous).unwrap().y;
            y.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>() / (t_len - 1) as f64
        })
        .collect();
    let ks = ks_statistic(&sampled, &paths);
    assert!(ks < 0.02, "KS {ks}");
}

#[test]
fn fosd_reporting() {
    let s = finite_t_spectra(0.0, 40).unwrap();
    let f = fosd_check(&s);
    assert_eq!(f.bound, 1.0);
    assert!(f.nu_max <= 4.0 + 1e-12);
    assert!(!f.condition_holds);

    let s = finite_t_spectra(0.9, 50).unwrap();
    let f = fosd_check(&s);
    if f.condition_holds {
        let d = sample_quadratic_form(&s, 1.0, 1.0, 100_000, 6).unwrap();
        assert_eq!(coupled_violations(&d, -1e-12), 0);
    }
}

fn overshoot(n_scaling: f64, margin: f64) -> OvershootReport {
    overshoot_diagnostics(&OvershootParams {
        lambda2: 0.5,
        b: 1.0,
        sigma: 1.0,
        n_scaling,
        t: 10,
        reps: 20_000,
        margin,
        seed: 41,
        timing: Timing::Lagged,
    })
    .unwrap()
}

#[test]
fn reversals_happen_and_margins_shrink() {
    assert!(overshoot(100.0, 0.0).rate_any > 0.0);
    let rates: Vec<OvershootReport> = [1e2, 1e3, 1e4].iter().map(|&n| overshoot(n, 0.05)).collect();
    for w in rates.windows(2) {
        let slack = 2.0 * (w[0].se_margin.powi(2) + w[1].se_margin.powi(2)).sqrt();
        assert!(w[1].rate_margin <= w[0].rate_margin + slack);
    }
}

#[test]
fn levels_and_increments() {
    let r = levels_vs_increments(0.5, 1.0, 1.0, 400_000, 7).unwrap();
    assert!((r.closed_levels - 1.0 / 3.0).abs() < 1e-15);
    assert!((r.closed_increments - 1.0 / 6.0).abs() < 1e-15);
    assert!((r.ratio_levels / r.closed_levels - 1.0).abs() < 0.02);
    assert!((r.ratio_increments / r.closed_increments - 1.0).abs() < 0.02);

    let near_one = levels_vs_increments(0.99, 1.0, 1.0, 400_000, 8).unwrap();
    assert!((near_one.var_dynamic_increment - 2.0 / 1.99).abs() < 0.03);
}

#[test]
fn zero_variance_report() {
    use netwaves::propagate::static_series_twomode;
    let eta = vec![0.0; 20];
    let dynamic = simulate_reduced(0.5, 1.0, &eta, Timing::Lagged).unwrap();
    let stat = static_series_twomode(0.5, 1.0, &eta).unwrap();
    let r = RiskReport::from_paths(&dynamic, &stat, 0.0, 0.0, 1.0, RiskMeta::default()).unwrap();
    assert_eq!((r.phi_hat, r.omega_c, r.omega_hat_c, r.kappa), (0.0, 0.0, 0.0, 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn trace_identities_hold(t_len in 2usize..120, lam in 0.0f64..0.97) {
        let s = finite_t_spectra(lam, t_len).unwrap();
        prop_assert!(check_trace_identities(&s).is_ok());
        prop_assert!((s.nu_star.iter().sum::<f64>() - 2.0 * (t_len - 1) as f64).abs() < 1e-9 * t_len as f64);
    }

    #[test]
    fn tails_are_monotone(phi in 0.01f64..10.0, c in 0.01f64..10.0, dphi in 0.0f64..5.0, dc in 0.0f64..5.0) {
        let base = gaussian_tail(phi, c).unwrap();
        prop_assert!(gaussian_tail(phi, c + dc).unwrap() <= base);
        prop_assert!(gaussian_tail(phi + dphi, c).unwrap() >= base);
    }

    #[test]
    fn variance_objects_are_homogeneous(
        b in 0.1f64..3.0,
        sigma in 0.1f64..3.0,
        lam in 0.0f64..0.95,
        s in 0.1f64..10.0,
        c in 0.1f64..5.0,
        t_len in 2usize..200,
    ) {
        let (p, ps) = twomode_variances(b, lam, sigma).unwrap();
        for (bb, ss) in [(s * b, sigma), (b, s * sigma)] {
            let (q, qs) = twomode_variances(bb, lam, ss).unwrap();
            prop_assert!((q / (s * s * p) - 1.0).abs() < 1e-12);
            prop_assert!((qs / (s * s * ps) - 1.0).abs() < 1e-12);
            let (e, es) = expected_volatilities(lam, bb, ss, t_len).unwrap();
            let (e0, es0) = expected_volatilities(lam, b, sigma, t_len).unwrap();
            prop_assert!((e / (s * s * e0) - 1.0).abs() < 1e-12);
            prop_assert!((es / (s * s * es0) - 1.0).abs() < 1e-12);
        }
        let t0 = gaussian_tail(p, c).unwrap();
        let t1 = gaussian_tail(s * s * p, s * c).unwrap();
        prop_assert!((t0 - t1).abs() <= 1e-14 + 1e-12 * t0);
    }

    #[test]
    fn depth_ordering_on_generated_networks(seed in 0u64..5000, alpha in 1.2f64..3.0, beta in 0.1f64..0.9) {
        let net = raw_network(60, alpha, beta, seed);
        let star = population_static_variance(&net, 1.0).unwrap();
        for l in [1, 2, 5] {
            let phi = population_l_variance(&net, 1.0, l, 1e-15, DepthConvention::LayerBlock).unwrap();
            prop_assert!(phi <= star * (1.0 + 1e-12));
        }
    }
}
