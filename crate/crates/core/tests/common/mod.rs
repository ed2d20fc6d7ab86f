#![allow(dead_code)]

use nalgebra::DMatrix;
use netwaves::linalg::CscMatrix;
use netwaves::netgen::{
    build_share_matrix, sample_degrees, Alignment, ConsumptionMode, DegreeSequence, ProductionNetwork,
};

pub fn two_firm() -> ProductionNetwork {
    let a = CscMatrix::from_dense(&[vec![0.0, 0.7], vec![0.7, 0.0]]);
    ProductionNetwork::new(a, 0.3, vec![0.5, 0.5], None).unwrap()
}

pub fn complete_graph(n: usize, beta: f64) -> ProductionNetwork {
    let d = DegreeSequence::from_degrees(vec![n - 1; n], 2.0).unwrap();
    build_share_matrix(&d, beta, Alignment::Uniform, 0).unwrap()
}

pub fn raw_network(n: usize, alpha: f64, beta: f64, seed: u64) -> ProductionNetwork {
    let d = sample_degrees(n, alpha, seed).unwrap();
    build_share_matrix(&d, beta, Alignment::Uniform, seed ^ 0xA5A5).unwrap()
}

/// First draw from `seed, seed + 1, ...` whose only closed supplier group
/// holds at least half the firms, so the Perron root is well separated.
pub fn random_network(n: usize, alpha: f64, beta: f64, seed: u64) -> ProductionNetwork {
    (seed..)
        .map(|s| raw_network(n, alpha, beta, s))
        .find(|net| {
            let closed = net.a().closed_classes();
            closed.len() == 1 && 2 * closed[0].len() >= net.n()
        })
        .unwrap()
}

pub fn heterogeneous_network(n: usize, alpha: f64, beta: f64, seed: u64) -> ProductionNetwork {
    random_network(n, alpha, beta, seed)
        .with_consumption(ConsumptionMode::DegreeProportional)
        .unwrap()
}

pub fn dense(net: &ProductionNetwork) -> DMatrix<f64> {
    let n = net.n();
    let mut m = DMatrix::zeros(n, n);
    for (row, col, v) in net.a().entries() {
        m[(row, col)] = v;
    }
    m
}

/// `γᵀ(I − A)^{-1}` by LU.
pub fn leontief_row(net: &ProductionNetwork) -> Vec<f64> {
    let n = net.n();
    let m = DMatrix::identity(n, n) - dense(net);
    let g = nalgebra::DVector::from_column_slice(net.gamma());
    let w = m.transpose().lu().solve(&g).unwrap();
    w.iter().copied().collect()
}

/// Composite Simpson on `[a, b]` with `m` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, m: usize) -> f64 {
    let h = (b - a) / m as f64;
    let mut s = f(a) + f(b);
    for k in 1..m {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// `E[X^k]` of the Pareto law truncated to `[1, n^{1/α}]`, integrated in
/// `u = ln x` where the integrand is smooth.
pub fn pareto_moment(alpha: f64, n: f64, k: i32) -> f64 {
    let top = n.ln() / alpha;
    let norm = 1.0 - 1.0 / n;
    simpson(|u| alpha * ((k as f64 - alpha) * u).exp(), 0.0, top, 20_000) / norm
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}
