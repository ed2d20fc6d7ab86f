mod common;

use common::*;
use netwaves::linalg::CscMatrix;
use netwaves::netgen::ProductionNetwork;
use netwaves::Error;
use netwaves::propagate::{draw_shocks, simulate_reduced, Timing};
use netwaves::rng::substream;
use netwaves::spectral::*;
use proptest::prelude::*;
use rand_distr::{Distribution, StandardNormal};

fn summary(net: &ProductionNetwork) -> SpectralSummary {
    spectral_summary(net, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap()
}

#[test]
fn two_firm_perron_pair() {
    let p = perron(&two_firm(), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    assert!((p.lambda1 - 0.7).abs() < 1e-12);
    assert!((p.v1[0] - p.v1[1]).abs() < 1e-12);
    let s = summary(&two_firm());
    assert!((s.lambda2_mod - 0.7).abs() < 1e-12);
    assert!((s.u2_norm[0] + s.u2_norm[1]).abs() < 1e-12);
    assert!((s.u2_norm[0].abs() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
}

#[test]
fn complete_graph_transient() {
    let s = summary(&complete_graph(4, 0.5));
    assert!((s.lambda1 - 0.5).abs() < 1e-10);
    assert!((s.lambda2_mod - 0.5 / 3.0).abs() < 1e-9);
    assert!((s.lambda2 + 0.5 / 3.0).abs() < 1e-9);
    // the eigenspace of -1/6 is three-dimensional
    assert!(s.lambda2_tie);
}

#[test]
fn transient_modulus_matches_nalgebra() {
    for seed in 0..6 {
        let net = random_network(80, 1.6, 0.3 + 0.05 * seed as f64, seed);
        let s = summary(&net);
        let mut mods: Vec<f64> = dense(&net)
            .complex_eigenvalues()
            .iter()
            .map(|z| z.norm())
            .collect();
        mods.sort_by(|a, b| b.total_cmp(a));
        assert!((mods[0] - s.lambda1).abs() < 1e-8);
        assert!(
            (mods[1] - s.lambda2_mod).abs() < 1e-6,
            "seed {seed}: oracle {} vs {}",
            mods[1],
            s.lambda2_mod
        );
    }
}

#[test]
fn split_economy_is_reducible() {
    // {0, 1} and {2, 3} each buy only from each other
    let cols = vec![
        vec![(1, 0.6)],
        vec![(0, 0.6)],
        vec![(3, 0.6)],
        vec![(2, 0.6)],
        vec![(0, 0.3), (2, 0.3)],
    ];
    let net = ProductionNetwork::new(CscMatrix::from_columns(5, cols), 0.4, vec![0.2; 5], None).unwrap();
    match perron(&net, DEFAULT_TOL, DEFAULT_MAX_ITER) {
        Err(Error::Reducible { classes, firm }) => assert_eq!((classes, firm), (2, 2)),
        other => panic!("expected Reducible, got {other:?}"),
    }
}

#[test]
fn deflation_residual() {
    let net = random_network(200, 1.4, 0.4, 12);
    let p = perron(&net, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
    let uv: f64 = p.u1.iter().zip(&p.v1).map(|(a, b)| a * b).sum();
    let av = net.a().mul_vec(&p.v1);
    let resid: f64 = av
        .iter()
        .zip(&p.v1)
        .map(|(x, v)| x - p.lambda1 * v * uv)
        .map(|r| r * r)
        .sum::<f64>()
        .sqrt();
    assert!((uv - 1.0).abs() < 1e-10, "u1'v1 = {uv}");
    assert!(resid <= 1e-8, "residual {resid}");
}

#[test]
fn degree_proportional_loading_is_nonzero() {
    let net = heterogeneous_network(300, 1.5, 0.4, 2);
    let s = summary(&net);
    let b = loading(net.gamma(), &s.v2_norm).unwrap();
    assert!(b.abs() > 1e-6);
    assert!((b - s.b).abs() < 1e-12);
}

#[test]
fn projected_innovation_variance() {
    let n = 200;
    let u2: Vec<f64> = (0..n).map(|i| ((i * 7 % 13) as f64 - 5.0) + 0.3).collect();
    let norm = u2.iter().map(|x| x * x).sum::<f64>().sqrt();
    let u2: Vec<f64> = u2.iter().map(|x| x / norm).collect();
    let sum_u: f64 = u2.iter().sum();
    let oracle = 1.0 - sum_u * sum_u / n as f64;
    let draws = 100_000;
    let mut rng = substream(77, 0);
    let eta: Vec<f64> = (0..draws)
        .map(|_| {
            let e: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let m = mean(&e);
            let hat: Vec<f64> = e.iter().map(|x| x - m).collect();
            project_innovation(&u2, &hat)
        })
        .collect();
    let v = variance(&eta);
    assert!((v / oracle - 1.0).abs() < 0.03, "var {v} vs {oracle}");
}

#[test]
fn proxy_cosine_is_reported() {
    let net = heterogeneous_network(1000, 1.5, 0.4, 21);
    let s = summary(&net);
    let d = net.degrees().unwrap().as_f64();
    let r = degree_proxy(&d, net.gamma(), Some(&s.u2_norm)).unwrap();
    let c = r.cosine_true_proxy.unwrap();
    assert!((0.0..=1.0 + 1e-12).contains(&c));
    println!("degree proxy cosine on n=1000, alpha=1.5: {c:.4}");
}

fn proxy_inputs() -> (Vec<f64>, Vec<f64>) {
    let net = heterogeneous_network(1000, 1.5, 0.4, 4);
    (net.degrees().unwrap().as_f64(), net.gamma().to_vec())
}

#[test]
fn log_derivative_converges_under_step_halving() {
    let (d, g) = proxy_inputs();
    let e1 = log_derivative_b(1.5, &d, &g, 0.02).unwrap().direct;
    let e2 = log_derivative_b(1.5, &d, &g, 0.01).unwrap().direct;
    let e3 = log_derivative_b(1.5, &d, &g, 0.005).unwrap().direct;
    let shrink = (e1 - e2).abs() / (e2 - e3).abs();
    assert!((3.0..5.0).contains(&shrink), "shrink factor {shrink}");
}

#[test]
fn log_derivative_analytic_matches_direct() {
    let (d, g) = proxy_inputs();
    for alpha in [1.3, 1.7] {
        let r = log_derivative_b(alpha, &d, &g, 1e-3).unwrap();
        assert!((r.analytic / r.direct - 1.0).abs() < 0.05, "alpha {alpha}: {r:?}");
    }
}

#[test]
fn rescaled_pair_leaves_paths_unchanged() {
    // two complete clusters of 20 plus one cross link per firm: A is
    // symmetric with simple lambda2 = 18 * 0.03
    let cols: Vec<Vec<(usize, f64)>> = (0..40)
        .map(|i| {
            let base = i / 20 * 20;
            let mut c: Vec<(usize, f64)> = (base..base + 20).filter(|&j| j != i).map(|j| (j, 0.03)).collect();
            c.push(((i + 20) % 40, 0.03));
            c
        })
        .collect();
    let raw: Vec<f64> = (0..40).map(|i| 1.0 + (i % 7) as f64).collect();
    let total: f64 = raw.iter().sum();
    let gamma = raw.iter().map(|g| g / total).collect();
    let net = ProductionNetwork::new(CscMatrix::from_columns(40, cols), 0.4, gamma, None).unwrap();
    let s = summary(&net);
    let panel = draw_shocks(40, 60, 0.2, 3).unwrap();
    let lam = s.real_lambda2().unwrap();
    assert!((lam - 0.54).abs() < 1e-9);
    let base_eta = panel.eta(&s.u2_norm);
    let base = simulate_reduced(lam, s.b, &base_eta, Timing::Lagged).unwrap();
    for scale in [-3.0, 0.01, 250.0] {
        let u: Vec<f64> = s.u2.iter().map(|x| x / scale).collect();
        let v: Vec<f64> = s.v2.iter().map(|x| x * scale).collect();
        let (un, vn) = normalize_pair(&u, &v).unwrap();
        for i in 0..5 {
            for j in 0..5 {
                let want = s.v2_norm[i] * s.u2_norm[j];
                assert!((vn[i] * un[j] - want).abs() < 1e-10);
            }
        }
        let b = loading(net.gamma(), &vn).unwrap();
        let eta = panel.eta(&un);
        let path = simulate_reduced(lam, b, &eta, Timing::Lagged).unwrap();
        for (x, y) in path.y.iter().zip(&base.y) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn perron_root_is_one_minus_beta(
        n in 20usize..150,
        alpha in 1.2f64..3.5,
        beta in 0.05f64..0.95,
        seed in any::<u64>(),
    ) {
        let net = raw_network(n, alpha, beta, seed);
        match perron(&net, DEFAULT_TOL, DEFAULT_MAX_ITER) {
            Ok(p) => prop_assert!((p.lambda1 - (1.0 - beta)).abs() <= 1e-8),
            Err(e) => prop_assert!(
                matches!(e, Error::Reducible { .. }),
                "only reducible draws may fail: {e}"
            ),
        }
    }
}
