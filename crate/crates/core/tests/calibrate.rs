mod common;

use common::*;
use netwaves::calibrate::*;
use netwaves::riskstats::{expected_volatilities, mean_dynamic_weight};
use netwaves::spectral::b_of_alpha;
use proptest::prelude::*;

#[test]
fn attenuation_grid_values() {
    let t = attenuation_table(&[0.2]).unwrap();
    assert!((t.rows[0].r - 0.64 / 1.2).abs() < 1e-15);
    let t = attenuation_table(&[0.5, 0.7]).unwrap();
    assert!((t.rows[0].r - 0.17).abs() < 0.005);
    assert!((t.rows[1].r - 0.05).abs() < 0.005);
    assert!(attenuation_table(&[1.0]).is_err());
    assert_eq!(attenuation_table(&DEFAULT_GRID).unwrap().rows.len(), 7);
}

#[test]
fn implied_shares() {
    let s = granular_share(1.0 / 3.0, 0.2).unwrap();
    assert!((s - 0.178).abs() < 5e-4);
    assert_eq!(share_label(s), "about one-sixth");
    let s = granular_share(1.0 / 3.0, 0.5).unwrap();
    assert!((s - 0.056).abs() < 5e-4);
    assert_eq!(share_label(s), "close to zero");
}

fn proxy_loading() -> LoadingModel {
    let net = heterogeneous_network(1000, 1.5, 0.4, 4);
    LoadingModel::DegreeProxy {
        degrees: net.degrees().unwrap().as_f64(),
        gamma: net.gamma().to_vec(),
        c: 1.0,
    }
}

fn expected_phi_hat(alpha: f64, mapping: &Lambda2Mapping, loading: &LoadingModel, sigma: f64, t: usize) -> f64 {
    let lam = mapping.eval(alpha).unwrap();
    let b = loading.eval(alpha).unwrap();
    sigma * sigma * b * b * mean_dynamic_weight(lam, t)
}

#[test]
fn decomposition_matches_direct_difference() {
    // lambda2 = 0.9 − 0.2(α − 1)
    let mapping = Lambda2Mapping::Linear {
        intercept: 1.1,
        slope: -0.2,
    };
    let loading = proxy_loading();
    let (alpha, sigma, t, h) = (1.5, 1.0, 100, 1e-3);
    let rep = sensitivity_decomposition(alpha, &mapping, &loading, sigma, t, h).unwrap();
    assert!((rep.lambda2 - 0.8).abs() < 1e-15);
    assert!(rep.warnings.is_empty());
    let direct = (expected_phi_hat(alpha + h, &mapping, &loading, sigma, t)
        - expected_phi_hat(alpha - h, &mapping, &loading, sigma, t))
        / (2.0 * h);
    assert!((rep.total / direct - 1.0).abs() < 0.05, "{} vs {direct}", rep.total);
    assert!((rep.exposure_channel + rep.overlap_channel - rep.total).abs() < 1e-12 * direct.abs());
}

#[test]
fn constant_persistence_scales_by_the_wedge() {
    let mapping = Lambda2Mapping::Linear {
        intercept: 0.6,
        slope: 0.0,
    };
    let loading = proxy_loading();
    let (alpha, sigma, t, h) = (1.7, 0.5, 80, 1e-3);
    let rep = sensitivity_decomposition(alpha, &mapping, &loading, sigma, t, h).unwrap();
    assert_eq!(rep.overlap_channel, 0.0);
    let e_star = |a: f64| {
        let b = loading.eval(a).unwrap();
        expected_volatilities(0.6, b, sigma, t).unwrap()
    };
    let (s0, d0) = e_star(alpha);
    let d_star = (e_star(alpha + h).0 - e_star(alpha - h).0) / (2.0 * h);
    let want = d0 / s0 * d_star.abs();
    assert!((rep.total.abs() / want - 1.0).abs() < 0.05);
}

#[test]
fn eigenvalue_derivatives_sum_to_trace_derivative() {
    let (lam, t) = (0.6, 60);
    let (d, _) = eigenvalue_derivatives(lam, t, 1e-3).unwrap();
    let e = 1e-5;
    let trace = |l: f64| mean_dynamic_weight(l, t) * (t - 1) as f64;
    let want = (trace(lam + e) - trace(lam - e)) / (2.0 * e);
    let got: f64 = d.iter().sum();
    assert!((got - want).abs() < 1e-5 * want.abs().max(1.0), "{got} vs {want}");
}

#[test]
fn loading_follows_the_proxy() {
    let LoadingModel::DegreeProxy { degrees, gamma, c } = proxy_loading() else {
        unreachable!()
    };
    let model = LoadingModel::DegreeProxy {
        degrees: degrees.clone(),
        gamma: gamma.clone(),
        c,
    };
    assert_eq!(model.eval(1.6).unwrap(), b_of_alpha(1.6, &degrees, &gamma, c).unwrap());
}

#[test]
fn rising_persistence_is_flagged() {
    let mapping = Lambda2Mapping::Linear {
        intercept: 0.2,
        slope: 0.1,
    };
    let rep = sensitivity_decomposition(2.5, &mapping, &LoadingModel::Constant { b: 1.0 }, 1.0, 30, 0.01).unwrap();
    assert_eq!(rep.warnings.len(), 1);
}

proptest! {
    #[test]
    fn shares_scale_exactly(
        grid in proptest::collection::vec(0.01f64..0.99, 1..8),
        shares in proptest::collection::vec(0.0f64..1.0, 1..4),
    ) {
        let table = attenuation_table(&grid).unwrap().with_shares(&shares).unwrap();
        prop_assert_eq!(table.rows.len(), grid.len() * shares.len());
        for row in &table.rows {
            prop_assert_eq!(row.dynamic_share.unwrap(), row.static_share.unwrap() * row.r);
        }
    }
}
