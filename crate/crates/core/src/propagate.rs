//! Shock panels and output series: static Leontief benchmark, depth-L
//! economy, the micro price/quantity simulator and the scalar two-mode
//! recursion.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, norm1, CscMatrix};
use crate::netgen::ProductionNetwork;
use crate::rng::substream;
use crate::spectral::{project_innovation, SpectralSummary};

/// Residual tolerance for resolvent solves.
pub const SOLVE_TOL: f64 = 1e-12;
/// Loadings below this 1-norm are treated as negligible.
pub const TRUNCATION_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShockPanel {
    /// `eps[t][i]`: innovation of firm `i` at date `t`.
    pub eps: Vec<Vec<f64>>,
    /// Cross-section demeaned per date, then window-demeaned per firm.
    pub eps_hat: Vec<Vec<f64>>,
    pub sigma: f64,
    pub seed: Option<u64>,
}

impl ShockPanel {
    /// Wrap a given `T × n` panel and compute its double-demeaned variant.
    pub fn from_raw(eps: Vec<Vec<f64>>, sigma: f64, seed: Option<u64>) -> Result<Self> {
        let n = eps.first().map_or(0, Vec::len);
        if eps.iter().any(|row| row.len() != n) {
            return Err(invalid("eps", "ragged panel"));
        }
        let eps_hat = double_demean(&eps);
        Ok(Self {
            eps,
            eps_hat,
            sigma,
            seed,
        })
    }

    pub fn n(&self) -> usize {
        self.eps.first().map_or(0, Vec::len)
    }

    pub fn t_len(&self) -> usize {
        self.eps.len()
    }

    /// `η_t = ũ2ᵀ ε̂_t` for every date.
    pub fn eta(&self, u2_norm: &[f64]) -> Vec<f64> {
        self.eps_hat
            .iter()
            .map(|e| project_innovation(u2_norm, e))
            .collect()
    }

    /// Entrywise sum of two panels (superposition checks).
    pub fn add(&self, other: &ShockPanel) -> Result<ShockPanel> {
        if self.t_len() != other.t_len() || self.n() != other.n() {
            return Err(invalid("panel", "shapes differ"));
        }
        let eps = self
            .eps
            .iter()
            .zip(&other.eps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect())
            .collect();
        ShockPanel::from_raw(eps, self.sigma, None)
    }
}

fn double_demean(eps: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let t_len = eps.len();
    if t_len == 0 {
        return Vec::new();
    }
    let n = eps[0].len();
    let mut out: Vec<Vec<f64>> = eps
        .iter()
        .map(|row| {
            let m = row.iter().sum::<f64>() / n as f64;
            row.iter().map(|x| x - m).collect()
        })
        .collect();
    for i in 0..n {
        let m = out.iter().map(|row| row[i]).sum::<f64>() / t_len as f64;
        out.iter_mut().for_each(|row| row[i] -= m);
    }
    out
}

/// i.i.d. `N(0, σ²)` panel; date `t` uses substream `t` of `seed`.
pub fn draw_shocks(n: usize, t_len: usize, sigma: f64, seed: u64) -> Result<ShockPanel> {
    if !(sigma > 0.0) {
        return Err(invalid("sigma", "must be positive"));
    }
    let eps: Vec<Vec<f64>> = (0..t_len)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, t as u64);
            (0..n)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    sigma * z
                })
                .collect()
        })
        .collect();
    ShockPanel::from_raw(eps, sigma, Some(seed))
}

/// Scalar i.i.d. `N(0, σ²)` stream from a single substream of `seed`;
/// `σ = 0` gives zeros.
pub fn draw_innovations(t_len: usize, sigma: f64, seed: u64) -> Result<Vec<f64>> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(invalid("sigma", "must be finite and nonnegative"));
    }
    let mut rng = substream(seed, 0);
    Ok((0..t_len)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            sigma * z
        })
        .collect())
}

/// Solve `(I − A) x = rhs` (or `(I − Aᵀ) x = rhs`) by fixed-point
/// iteration `x ← rhs + A x`, to `‖rhs + A x − x‖∞ ≤ SOLVE_TOL·‖rhs‖∞`.
pub fn resolvent_solve(a: &CscMatrix, rhs: &[f64], transpose: bool) -> Result<Vec<f64>> {
    let scale = rhs.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut x = rhs.to_vec();
    if scale == 0.0 {
        return Ok(x);
    }
    const MAX_ITER: usize = 100_000;
    let mut resid = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let ax = if transpose {
            a.tr_mul_vec(&x)
        } else {
            a.mul_vec(&x)
        };
        let next: Vec<f64> = rhs.iter().zip(&ax).map(|(r, v)| r + v).collect();
        resid = next
            .iter()
            .zip(&x)
            .fold(0.0f64, |m, (p, q)| m.max((p - q).abs()));
        x = next;
        if resid <= SOLVE_TOL * scale {
            return Ok(x);
        }
    }
    Err(Error::NotConverged {
        what: "resolvent fixed-point solve",
        iterations: MAX_ITER,
        residual: resid,
    })
}

/// Static loadings `((I − A)^{-1})ᵀ γ`, so `y* = wᵀε`.
pub fn leontief_weights(net: &ProductionNetwork) -> Result<Vec<f64>> {
    resolvent_solve(net.a(), net.gamma(), true)
}

/// `y* = γᵀ(I − A)^{-1} ε`.
pub fn leontief_aggregate(net: &ProductionNetwork, eps_t: &[f64]) -> Result<f64> {
    check_len(net, eps_t)?;
    let x = resolvent_solve(net.a(), eps_t, false)?;
    Ok(dot(net.gamma(), &x))
}

fn check_len(net: &ProductionNetwork, v: &[f64]) -> Result<()> {
    if v.len() != net.n() {
        return Err(invalid("eps", format!("length {} != n = {}", v.len(), net.n())));
    }
    Ok(())
}

/// `γᵀ Σ_{ℓ=0}^{L} A^ℓ ε`.
pub fn depth_truncated(net: &ProductionNetwork, eps_t: &[f64], l: usize) -> Result<f64> {
    check_len(net, eps_t)?;
    let mut x = eps_t.to_vec();
    let mut total = dot(net.gamma(), &x);
    for _ in 0..l {
        x = net.a().mul_vec(&x);
        total += dot(net.gamma(), &x);
    }
    Ok(total)
}

/// Geometric envelope `|y* − y_L| ≤ C r^{L+1}/(1−r) ‖ε‖₁` with
/// `r = ρ(A) + 0.05`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DepthBound {
    pub c: f64,
    pub r: f64,
}

impl DepthBound {
    pub fn at(&self, l: usize, eps_l1: f64) -> f64 {
        self.c * self.r.powi(l as i32 + 1) / (1.0 - self.r) * eps_l1
    }
}

/// Fit `C = ‖γ‖∞ · max_ℓ ‖A^ℓ‖₁ / r^ℓ` over `ℓ ≤ l_max`. For a nonnegative
/// matrix `‖A^ℓ‖₁` is the largest entry of `1ᵀA^ℓ`.
pub fn fit_depth_bound(net: &ProductionNetwork, rho: f64, l_max: usize) -> DepthBound {
    let r = rho + 0.05;
    let n = net.n();
    let mut row = vec![1.0; n];
    let mut c_norm: f64 = 1.0;
    for l in 1..=l_max {
        row = net.a().tr_mul_vec(&row);
        let norm = row.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        c_norm = c_norm.max(norm / r.powi(l as i32));
    }
    let gmax = net.gamma().iter().fold(0.0f64, |m, x| m.max(x.abs()));
    DepthBound { c: gmax * c_norm, r }
}

/// `|y* − y_L|` for `L = 0..=l_max`, sharing one Neumann recursion.
pub fn depth_errors(net: &ProductionNetwork, eps_t: &[f64], l_max: usize) -> Result<Vec<f64>> {
    let y_star = leontief_aggregate(net, eps_t)?;
    let mut x = eps_t.to_vec();
    let mut partial = dot(net.gamma(), &x);
    let mut out = vec![(y_star - partial).abs()];
    for _ in 0..l_max {
        x = net.a().mul_vec(&x);
        partial += dot(net.gamma(), &x);
        out.push((y_star - partial).abs());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DepthConvention {
    /// Each date advances a vintage through a block of `L` layers and adds
    /// the partial sums of that block: `state ← A^L state + S_L ε_t`,
    /// `S_L = Σ_{ℓ<L} A^ℓ`. Converges to the static benchmark as `L → ∞`.
    #[default]
    LayerBlock,
    /// Only the depth-`jL` snapshot of each vintage is kept:
    /// `state ← A^L state + ε_t`.
    Snapshot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Timing {
    /// `s_t = λ s_{t−1} + η_{t−1}`.
    #[default]
    Lagged,
    /// `s_t = λ s_{t−1} + η_t`.
    Contemporaneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PathKind {
    Static,
    DepthL,
    Micro,
    Reduced,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    pub l: Option<usize>,
    pub convention: Option<DepthConvention>,
    pub lambda2: Option<f64>,
    pub b: Option<f64>,
    pub timing: Option<Timing>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicroPanel {
    /// `log q_t` for `t = 0..=T`.
    pub log_q: Vec<Vec<f64>>,
    /// `log p_{t+1}` for `t = 0..T`.
    pub log_p: Vec<Vec<f64>>,
    pub log_q_star: Vec<f64>,
    pub m_bar: Vec<f64>,
    /// `b(A, β, m̄)` of the closed recursion.
    pub drift: Vec<f64>,
    /// `max_i |log q_{t+1} − (Aᵀ log q_t + ε_t + b)|` per step.
    pub recursion_residual: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputPath {
    pub kind: PathKind,
    pub y: Vec<f64>,
    pub params: PathParams,
    pub micro: Option<MicroPanel>,
}

impl OutputPath {
    fn new(kind: PathKind, y: Vec<f64>, params: PathParams) -> Self {
        Self {
            kind,
            y,
            params,
            micro: None,
        }
    }

    pub fn increments(&self) -> Vec<f64> {
        self.y.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// `state ← A^L state + block(ε_t)` evaluated by `L` Horner steps.
fn depth_step(a: &CscMatrix, state: &[f64], eps_t: &[f64], l: usize, conv: DepthConvention) -> Vec<f64> {
    match conv {
        DepthConvention::LayerBlock => {
            let mut z = state.to_vec();
            for _ in 0..l {
                z = a.mul_vec(&z);
                z.iter_mut().zip(eps_t).for_each(|(x, e)| *x += e);
            }
            z
        }
        DepthConvention::Snapshot => {
            let mut z = state.to_vec();
            for _ in 0..l {
                z = a.mul_vec(&z);
            }
            z.iter_mut().zip(eps_t).for_each(|(x, e)| *x += e);
            z
        }
    }
}

/// Superposition of partially processed vintages, `y_t = Σ_j a_j ε_{t−j}`.
pub fn simulate_l_economy(
    net: &ProductionNetwork,
    panel: &ShockPanel,
    l: usize,
    convention: DepthConvention,
) -> Result<OutputPath> {
    if l == 0 {
        return Err(invalid("L", "depth must be at least 1"));
    }
    if panel.n() != net.n() && panel.t_len() > 0 {
        return Err(invalid("panel", "cross-section differs from network size"));
    }
    let mut state = vec![0.0; net.n()];
    let mut y = Vec::with_capacity(panel.t_len());
    for eps_t in &panel.eps {
        state = depth_step(net.a(), &state, eps_t, l, convention);
        y.push(dot(net.gamma(), &state));
    }
    Ok(OutputPath::new(
        PathKind::DepthL,
        y,
        PathParams {
            l: Some(l),
            convention: Some(convention),
            ..Default::default()
        },
    ))
}

/// Row loadings `a_j` of the depth-`L` superposition, `j = 0, 1, ...`,
/// stopping once `‖a_j‖₁ < TRUNCATION_TOL` (at most `max_terms`).
pub fn depth_loadings(
    net: &ProductionNetwork,
    l: usize,
    convention: DepthConvention,
    max_terms: usize,
) -> Vec<Vec<f64>> {
    let a = net.a();
    let a0 = match convention {
        DepthConvention::Snapshot => net.gamma().to_vec(),
        DepthConvention::LayerBlock => {
            let mut g = net.gamma().to_vec();
            let mut s = g.clone();
            for _ in 1..l {
                g = a.tr_mul_vec(&g);
                s.iter_mut().zip(&g).for_each(|(x, y)| *x += y);
            }
            s
        }
    };
    let mut out = vec![a0];
    while out.len() < max_terms {
        let mut next = out.last().unwrap().clone();
        for _ in 0..l {
            next = a.tr_mul_vec(&next);
        }
        let small = norm1(&next) < TRUNCATION_TOL;
        out.push(next);
        if small {
            break;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Interference {
    pub delta_y_star: f64,
    pub correction: f64,
    /// `Δy_t^{[L]}` from the running-state simulation.
    pub delta_y_l: f64,
}

/// `Δy_t^{[L]} = Δy*_t + Σ_{j≥1} a_j (Δε_{t−j} − Δε_t)` with `Δε_0 = ε_0`
/// and dates before 0 contributing nothing. Requires `t ≥ 1` and the
/// layer-block convention: snapshot loadings sum to `γᵀ(I − A^L)^{-1}`
/// rather than the Leontief weights, so the identity does not hold there.
pub fn interference_decomposition(
    net: &ProductionNetwork,
    panel: &ShockPanel,
    t: usize,
    l: usize,
    convention: DepthConvention,
) -> Result<Interference> {
    if t == 0 || t >= panel.t_len() {
        return Err(invalid("t", "need 1 <= t < T"));
    }
    if convention != DepthConvention::LayerBlock {
        return Err(invalid(
            "convention",
            "the interference identity needs layer-block loadings, which sum to the Leontief weights",
        ));
    }
    let n = net.n();
    let d_eps = |s: usize| -> Vec<f64> {
        if s == 0 {
            panel.eps[0].clone()
        } else {
            panel.eps[s]
                .iter()
                .zip(&panel.eps[s - 1])
                .map(|(a, b)| a - b)
                .collect()
        }
    };
    let w = leontief_weights(net)?;
    let de_t = d_eps(t);
    let delta_y_star = dot(&w, &de_t);
    let loads = depth_loadings(net, l, convention, usize::MAX);
    let zero = vec![0.0; n];
    let mut correction = 0.0;
    for (j, a_j) in loads.iter().enumerate().skip(1) {
        let past = if j <= t { d_eps(t - j) } else { zero.clone() };
        let diff: Vec<f64> = past.iter().zip(&de_t).map(|(p, c)| p - c).collect();
        correction += dot(a_j, &diff);
    }
    let path = simulate_l_economy(net, panel, l, convention)?;
    Ok(Interference {
        delta_y_star,
        correction,
        delta_y_l: path.y[t] - path.y[t - 1],
    })
}

#[derive(Debug, Clone, Default)]
pub struct MicroOptions {
    /// Starting log quantities; steady state when `None`.
    pub initial_log_q: Option<Vec<f64>>,
}

fn finite_positive(log_v: f64) -> bool {
    let v = log_v.exp();
    v.is_finite() && v > 0.0
}

/// Iterate the market-clearing price rule, input demands and Cobb–Douglas
/// production with `w̄ = 1` and `m̄ = (I − A)^{-1} γ`. The aggregate drops
/// the steady state and the initial-condition transient, so `y[t]` is
/// `γᵀ Σ_{τ≤t} (Aᵀ)^τ ε_{t−τ}`.
pub fn simulate_micro(
    net: &ProductionNetwork,
    panel: &ShockPanel,
    options: &MicroOptions,
) -> Result<OutputPath> {
    let a = net.a();
    let n = net.n();
    let beta = net.beta();
    if panel.t_len() > 0 && panel.n() != n {
        return Err(invalid("panel", "cross-section differs from network size"));
    }
    let m_bar = resolvent_solve(a, net.gamma(), false)?;
    if let Some(i) = m_bar.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::NonPositiveState {
            what: "nominal size",
            firm: i,
            date: 0,
        });
    }
    let log_m: Vec<f64> = m_bar.iter().map(|m| m.ln()).collect();
    let log_w = 0.0;
    let theta: Vec<f64> = (0..n)
        .map(|i| beta * beta.ln() + a.column(i).map(|(_, v)| v * v.ln()).sum::<f64>())
        .collect();
    let at_log_m = a.tr_mul_vec(&log_m);
    let drift: Vec<f64> = (0..n)
        .map(|i| theta[i] + log_m[i] - beta * log_w - at_log_m[i])
        .collect();
    let log_q_star = resolvent_solve(a, &drift, true)?;
    let log_q0 = match &options.initial_log_q {
        Some(q) => {
            check_len(net, q)?;
            q.clone()
        }
        None => log_q_star.clone(),
    };
    let mut dev: Vec<f64> = log_q0.iter().zip(&log_q_star).map(|(q, s)| q - s).collect();
    let mut log_q = vec![log_q0];
    let mut log_p = Vec::with_capacity(panel.t_len());
    let mut residual = Vec::with_capacity(panel.t_len());
    let mut y = Vec::with_capacity(panel.t_len());
    for (t, eps_t) in panel.eps.iter().enumerate() {
        let q_t = log_q.last().unwrap();
        let p_next: Vec<f64> = (0..n).map(|j| log_m[j] - q_t[j]).collect();
        if let Some(j) = p_next.iter().position(|&p| !finite_positive(p)) {
            return Err(Error::NonPositiveState {
                what: "price",
                firm: j,
                date: t + 1,
            });
        }
        let q_next: Vec<f64> = (0..n)
            .map(|i| {
                let log_l = beta.ln() + log_m[i] - log_w;
                let inputs: f64 = a
                    .column(i)
                    .map(|(j, aji)| aji * (aji.ln() + log_m[i] - p_next[j]))
                    .sum();
                eps_t[i] + beta * log_l + inputs
            })
            .collect();
        if let Some(i) = q_next.iter().position(|&q| !finite_positive(q)) {
            return Err(Error::NonPositiveState {
                what: "quantity",
                firm: i,
                date: t + 1,
            });
        }
        let predicted = a.tr_mul_vec(q_t);
        let r = (0..n)
            .map(|i| (q_next[i] - (predicted[i] + eps_t[i] + drift[i])).abs())
            .fold(0.0f64, f64::max);
        residual.push(r);
        dev = a.tr_mul_vec(&dev);
        let shock_part: f64 = (0..n)
            .map(|i| net.gamma()[i] * (q_next[i] - log_q_star[i] - dev[i]))
            .sum();
        y.push(shock_part);
        log_p.push(p_next);
        log_q.push(q_next);
    }
    let mut path = OutputPath::new(PathKind::Micro, y, PathParams::default());
    path.micro = Some(MicroPanel {
        log_q,
        log_p,
        log_q_star,
        m_bar,
        drift,
        recursion_residual: residual,
    });
    Ok(path)
}

fn check_reduced_lambda(lambda2: f64) -> Result<()> {
    if !(0.0..1.0).contains(&lambda2) {
        return Err(Error::Domain {
            name: "lambda2",
            value: lambda2,
            domain: "[0, 1)",
        });
    }
    Ok(())
}

/// Scalar dominant-mode state `s_t`, `y_t = b s_t`, with `s` starting at 0.
pub fn simulate_reduced(lambda2: f64, b: f64, eta: &[f64], timing: Timing) -> Result<OutputPath> {
    check_reduced_lambda(lambda2)?;
    let mut y = Vec::with_capacity(eta.len());
    let mut s = 0.0;
    for t in 0..eta.len() {
        s = match timing {
            Timing::Lagged if t == 0 => 0.0,
            Timing::Lagged => lambda2 * s + eta[t - 1],
            Timing::Contemporaneous => lambda2 * s + eta[t],
        };
        y.push(b * s);
    }
    Ok(OutputPath::new(
        PathKind::Reduced,
        y,
        PathParams {
            lambda2: Some(lambda2),
            b: Some(b),
            timing: Some(timing),
            ..Default::default()
        },
    ))
}

/// Reduced simulation driven by a spectral summary; refuses complex pairs.
pub fn simulate_reduced_from(
    summary: &SpectralSummary,
    eta: &[f64],
    timing: Timing,
) -> Result<OutputPath> {
    simulate_reduced(summary.real_lambda2()?, summary.b, eta, timing)
}

/// Fully processed benchmark per date, `y*_t = γᵀ(I − A)^{-1} ε_t`.
pub fn static_series_network(net: &ProductionNetwork, panel: &ShockPanel) -> Result<OutputPath> {
    let w = leontief_weights(net)?;
    let y = panel.eps.iter().map(|e| dot(&w, e)).collect();
    Ok(OutputPath::new(PathKind::Static, y, PathParams::default()))
}

/// Two-mode static benchmark `y*_t = b/(1 − λ2) η_t`.
pub fn static_series_twomode(lambda2: f64, b: f64, eta: &[f64]) -> Result<OutputPath> {
    check_reduced_lambda(lambda2)?;
    let gain = b / (1.0 - lambda2);
    Ok(OutputPath::new(
        PathKind::Static,
        eta.iter().map(|e| gain * e).collect(),
        PathParams {
            lambda2: Some(lambda2),
            b: Some(b),
            ..Default::default()
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_firm() -> ProductionNetwork {
        let a = CscMatrix::from_dense(&[vec![0.0, 0.7], vec![0.7, 0.0]]);
        ProductionNetwork::new(a, 0.3, vec![0.5, 0.5], None).unwrap()
    }

    #[test]
    fn two_firm_leontief() {
        let y = leontief_aggregate(&two_firm(), &[1.0, 0.0]).unwrap();
        // (I − A)^{-1} = [[1, .7], [.7, 1]] / 0.51
        assert!((y - 0.5 * 1.7 / 0.51).abs() < 1e-11);
    }

    #[test]
    fn reduced_impulse() {
        let mut eta = vec![0.0; 6];
        eta[0] = 1.0;
        let p = simulate_reduced(0.5, 2.0, &eta, Timing::Lagged).unwrap();
        assert_eq!(p.y[0], 0.0);
        for t in 1..6 {
            assert!((p.y[t] - 2.0 * 0.5f64.powi(t as i32 - 1)).abs() < 1e-15);
        }
        assert!(simulate_reduced(1.0, 1.0, &eta, Timing::Lagged).is_err());
    }

    #[test]
    fn single_firm_panel_demeans_to_zero() {
        let p = draw_shocks(1, 10, 1.0, 4).unwrap();
        assert!(p.eps_hat.iter().all(|r| r[0] == 0.0));
    }
}
