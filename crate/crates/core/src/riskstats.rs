//! Volatility and tail-risk objects: population formulas, realized
//! estimators, finite-horizon quadratic-form spectra, dominance and
//! overshooting diagnostics.

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{invalid, Error, Result};
use crate::linalg::symeig::tridiagonal_eigenvalues;
use crate::linalg::{dot, norm1, symmetric_eigen, DenseMatrix, KahanSum};
use crate::netgen::ProductionNetwork;
use crate::propagate::{leontief_weights, DepthConvention, OutputPath, TRUNCATION_TOL};
use crate::rng::substream;

/// Eigenvectors (and the per-pair residual check) are computed up to this
/// window length; longer windows return eigenvalues only.
pub const VECTOR_CHECK_MAX_T: usize = 400;
/// Tolerance on the trace identities.
pub const TRACE_TOL: f64 = 1e-9;

/// Standard normal CDF through the complementary error function.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn check_unit_interval(lambda2: f64) -> Result<()> {
    if !(0.0..1.0).contains(&lambda2) {
        return Err(Error::Domain {
            name: "lambda2",
            value: lambda2,
            domain: "[0, 1)",
        });
    }
    Ok(())
}

/// `φ* = 2σ² ‖γᵀ(I − A)^{-1}‖²`.
pub fn population_static_variance(net: &ProductionNetwork, sigma: f64) -> Result<f64> {
    let w = leontief_weights(net)?;
    Ok(2.0 * sigma * sigma * dot(&w, &w))
}

/// `φ_L = σ² (‖a_0‖² + Σ_{j≥0} ‖a_{j+1} − a_j‖²)` for the depth-`L`
/// loadings, summed until a term falls below `tol` times the running total.
pub fn population_l_variance(
    net: &ProductionNetwork,
    sigma: f64,
    l: usize,
    tol: f64,
    convention: DepthConvention,
) -> Result<f64> {
    if l == 0 {
        return Err(invalid("L", "depth must be at least 1"));
    }
    let a = net.a();
    let mut prev = match convention {
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
    let mut total = KahanSum::default();
    total.add(dot(&prev, &prev));
    const MAX_TERMS: usize = 1_000_000;
    for _ in 0..MAX_TERMS {
        let mut next = prev.clone();
        for _ in 0..l {
            next = a.tr_mul_vec(&next);
        }
        let term: f64 = next.iter().zip(&prev).map(|(x, y)| (x - y).powi(2)).sum();
        total.add(term);
        let negligible = norm1(&next) < TRUNCATION_TOL;
        if term < tol * total.total() || negligible {
            if negligible {
                // remaining telescoping tail is ‖a_{j+1}‖² ≈ 0
                total.add(dot(&next, &next));
            }
            return Ok(sigma * sigma * total.total());
        }
        prev = next;
    }
    Err(Error::NotConverged {
        what: "depth-L variance series",
        iterations: MAX_TERMS,
        residual: total.total(),
    })
}

/// `(φ, φ*) = (2b²σ²/(1+λ2), 2b²σ²/(1−λ2)²)`.
pub fn twomode_variances(b: f64, lambda2: f64, sigma: f64) -> Result<(f64, f64)> {
    check_unit_interval(lambda2)?;
    let s = 2.0 * b * b * sigma * sigma;
    Ok((s / (1.0 + lambda2), s / (1.0 - lambda2).powi(2)))
}

/// `R = (1 − λ2)² / (1 + λ2)`.
pub fn attenuation_ratio(lambda2: f64) -> Result<f64> {
    check_unit_interval(lambda2)?;
    Ok((1.0 - lambda2).powi(2) / (1.0 + lambda2))
}

fn increments(y: &[f64]) -> Vec<f64> {
    y.windows(2).map(|w| w[1] - w[0]).collect()
}

/// Demeaned increment variance over the window, divided by `T − 1`.
pub fn realized_volatility(y: &[f64]) -> Result<f64> {
    if y.len() < 3 {
        return Err(invalid("T", "realized volatility needs at least 3 observations"));
    }
    let d = increments(y);
    let m = d.iter().sum::<f64>() / d.len() as f64;
    let mut acc = KahanSum::default();
    for x in &d {
        acc.add((x - m).powi(2));
    }
    Ok(acc.total() / d.len() as f64)
}

/// Fraction of increments below `−c`.
pub fn realized_tail(y: &[f64], c: f64) -> Result<f64> {
    if !(c > 0.0) {
        return Err(invalid("c", "threshold must be positive"));
    }
    if y.len() < 2 {
        return Err(invalid("T", "need at least one increment"));
    }
    let d = increments(y);
    Ok(d.iter().filter(|&&x| x < -c).count() as f64 / d.len() as f64)
}

/// `ω_c = Φ(−c/√φ)`.
pub fn gaussian_tail(phi: f64, c: f64) -> Result<f64> {
    if !(phi > 0.0) {
        return Err(Error::Domain {
            name: "phi",
            value: phi,
            domain: "(0, inf)",
        });
    }
    if !(c >= 0.0) {
        return Err(invalid("c", "threshold must be nonnegative"));
    }
    Ok(normal_cdf(-c / phi.sqrt()))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TailRatio {
    pub exact: f64,
    pub asymptotic: f64,
}

/// `Φ(−x√κ)/Φ(−x)` and its Mills-ratio approximation `κ^{-1/2} e^{x²(1−κ)/2}`.
pub fn tail_ratio(kappa: f64, x: f64) -> Result<TailRatio> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::Domain {
            name: "kappa",
            value: kappa,
            domain: "(0, 1]",
        });
    }
    if !(x > 0.0) {
        return Err(invalid("x", "must be positive"));
    }
    Ok(TailRatio {
        exact: normal_cdf(-x * kappa.sqrt()) / normal_cdf(-x),
        asymptotic: kappa.powf(-0.5) * (x * x * (1.0 - kappa) / 2.0).exp(),
    })
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RiskMeta {
    pub n: Option<usize>,
    pub t: usize,
    pub lambda2: Option<f64>,
    pub sigma: f64,
    pub b: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RiskReport {
    pub phi: f64,
    pub phi_star: f64,
    pub phi_hat: f64,
    pub phi_hat_star: f64,
    pub c: f64,
    pub omega_c: f64,
    pub omega_c_star: f64,
    pub omega_hat_c: f64,
    pub omega_hat_c_star: f64,
    /// Attenuation ratio implied by `λ2` when one is supplied.
    pub r: Option<f64>,
    pub kappa: f64,
    pub meta: RiskMeta,
}

impl RiskReport {
    /// Combine population variances with realized statistics of a coupled
    /// dynamic/static path pair. Degenerate (zero) variances give zero tail
    /// probabilities.
    pub fn from_paths(
        dynamic: &OutputPath,
        static_path: &OutputPath,
        phi: f64,
        phi_star: f64,
        c: f64,
        meta: RiskMeta,
    ) -> Result<Self> {
        let tail = |p: f64| if p > 0.0 { gaussian_tail(p, c) } else { Ok(0.0) };
        let r = meta.lambda2.map(attenuation_ratio).transpose()?;
        Ok(Self {
            phi,
            phi_star,
            phi_hat: realized_volatility(&dynamic.y)?,
            phi_hat_star: realized_volatility(&static_path.y)?,
            c,
            omega_c: tail(phi)?,
            omega_c_star: tail(phi_star)?,
            omega_hat_c: realized_tail(&dynamic.y, c)?,
            omega_hat_c_star: realized_tail(&static_path.y, c)?,
            r,
            kappa: if phi_star > 0.0 { phi / phi_star } else { 0.0 },
            meta,
        })
    }
}

/// `K` (`T×T`, `K_{tq} = λ^{t−q}` for `q ≤ t`) and `D_T` (`(T−1)×T`
/// first differences), as row-major nested vectors.
pub fn build_overlap_matrices(lambda2: f64, t_len: usize) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    if t_len < 2 {
        return Err(invalid("T", "window needs at least 2 dates"));
    }
    let k = (0..t_len)
        .map(|t| {
            (0..t_len)
                .map(|q| if q <= t { lambda2.powi((t - q) as i32) } else { 0.0 })
                .collect()
        })
        .collect();
    let d = (0..t_len - 1)
        .map(|r| {
            let mut row = vec![0.0; t_len];
            row[r] = -1.0;
            row[r + 1] = 1.0;
            row
        })
        .collect();
    Ok((k, d))
}

/// `M = D K Kᵀ Dᵀ` assembled in closed form. Row `r` of `DK` is
/// `((λ−1)λ^{r−1}, …, (λ−1), 1, 0, …)`, which gives for `r < s`
/// `M_rs = (λ−1)² λ^{s−r} Σ_{m<r} λ^{2m} + (λ−1) λ^{s−r−1}` and
/// `M_rr = (λ−1)² Σ_{m<r} λ^{2m} + 1` (1-based `r, s`).
pub fn dynamic_form_matrix(lambda2: f64, t_len: usize) -> DenseMatrix {
    let m = t_len - 1;
    let lm1 = lambda2 - 1.0;
    let l2 = lambda2 * lambda2;
    // geo[r] = Σ_{m<r} λ^{2m}
    let mut geo = vec![0.0; m + 1];
    for r in 1..=m {
        geo[r] = geo[r - 1] * l2 + 1.0;
    }
    let mut pow = vec![1.0; m + 1];
    for k in 1..=m {
        pow[k] = pow[k - 1] * lambda2;
    }
    let mut out = DenseMatrix::zeros(m);
    for r in 1..=m {
        out[(r - 1, r - 1)] = lm1 * lm1 * geo[r] + 1.0;
        for s in r + 1..=m {
            let v = lm1 * lm1 * pow[s - r] * geo[r] + lm1 * pow[s - r - 1];
            out[(r - 1, s - 1)] = v;
            out[(s - 1, r - 1)] = v;
        }
    }
    out
}

/// `M* = D Dᵀ`, tridiagonal with 2 on the diagonal and −1 beside it.
pub fn static_form_matrix(t_len: usize) -> DenseMatrix {
    let m = t_len - 1;
    DenseMatrix::from_fn(m, |r, c| match r.abs_diff(c) {
        0 => 2.0,
        1 => -1.0,
        _ => 0.0,
    })
}

/// `(1/(T−1)) Σ_{t=1}^{T−1} [1 + ((1−λ)/(1+λ))(1 − λ^{2t})]`.
pub fn mean_dynamic_weight(lambda2: f64, t_len: usize) -> f64 {
    let m = t_len - 1;
    let ratio = (1.0 - lambda2) / (1.0 + lambda2);
    let l2 = lambda2 * lambda2;
    let mut p = 1.0;
    let mut acc = KahanSum::default();
    for _ in 1..=m {
        p *= l2;
        acc.add(1.0 + ratio * (1.0 - p));
    }
    acc.total() / m as f64
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FiniteTSpectrum {
    pub t_len: usize,
    pub lambda2: f64,
    /// Eigenvalues of `M*`, descending.
    pub nu_star: Vec<f64>,
    /// Eigenvalues of `M(λ2)`, descending.
    pub nu: Vec<f64>,
    pub nu_max: f64,
    /// Largest `‖Mx − νx‖ / ‖M‖` when eigenvectors were computed.
    pub max_residual: Option<f64>,
}

impl FiniteTSpectrum {
    pub fn mean_nu(&self) -> f64 {
        self.nu.iter().sum::<f64>() / (self.t_len - 1) as f64
    }

    pub fn mean_nu_star(&self) -> f64 {
        self.nu_star.iter().sum::<f64>() / (self.t_len - 1) as f64
    }
}

fn clamp_psd(values: Vec<f64>, scale: f64, what: &'static str) -> Result<Vec<f64>> {
    values
        .into_iter()
        .map(|v| {
            if v >= 0.0 {
                Ok(v)
            } else if v > -1e-10 * scale {
                Ok(0.0)
            } else {
                Err(Error::TraceIdentity {
                    identity: what,
                    expected: 0.0,
                    observed: v,
                })
            }
        })
        .collect()
}

/// Check `Σν* = 2(T−1)` and `mean ν = mean_dynamic_weight(λ2, T)` against
/// the spectrum's recorded `λ2`.
pub fn check_trace_identities(spec: &FiniteTSpectrum) -> Result<()> {
    let m = (spec.t_len - 1) as f64;
    let sum_star: f64 = spec.nu_star.iter().sum();
    if (sum_star - 2.0 * m).abs() > TRACE_TOL * m.max(1.0) {
        return Err(Error::TraceIdentity {
            identity: "sum nu_star = 2(T-1)",
            expected: 2.0 * m,
            observed: sum_star,
        });
    }
    let want = mean_dynamic_weight(spec.lambda2, spec.t_len);
    let got = spec.mean_nu();
    if (got - want).abs() > TRACE_TOL {
        return Err(Error::TraceIdentity {
            identity: "mean nu = (1/(T-1)) sum [1 + (1-l)/(1+l)(1-l^2t)]",
            expected: want,
            observed: got,
        });
    }
    Ok(())
}

pub fn finite_t_spectra(lambda2: f64, t_len: usize) -> Result<FiniteTSpectrum> {
    check_unit_interval(lambda2)?;
    if t_len < 2 {
        return Err(invalid("T", "window needs at least 2 dates"));
    }
    let m = t_len - 1;
    let nu_star = clamp_psd(
        tridiagonal_eigenvalues(&vec![2.0; m], &vec![-1.0; m.saturating_sub(1)])?,
        4.0,
        "M* positive semidefinite",
    )?;
    let mat = dynamic_form_matrix(lambda2, t_len);
    let want_vectors = t_len <= VECTOR_CHECK_MAX_T;
    let eig = symmetric_eigen(&mat, want_vectors)?;
    let norm = mat.norm();
    let max_residual = eig.max_residual(&mat).map(|r| r / norm);
    if let Some(r) = max_residual {
        if r > 1e-9 {
            return Err(Error::NotConverged {
                what: "symmetric eigensolver residual check",
                iterations: 0,
                residual: r,
            });
        }
    }
    let nu = clamp_psd(eig.values, norm, "M positive semidefinite")?;
    let nu_max = nu.first().copied().unwrap_or(0.0);
    let spec = FiniteTSpectrum {
        t_len,
        lambda2,
        nu_star,
        nu,
        nu_max,
        max_residual,
    };
    check_trace_identities(&spec)?;
    Ok(spec)
}

/// `(E[φ̂*], E[φ̂])` from the trace identities.
pub fn expected_volatilities(lambda2: f64, b: f64, sigma: f64, t_len: usize) -> Result<(f64, f64)> {
    check_unit_interval(lambda2)?;
    if t_len < 2 {
        return Err(invalid("T", "window needs at least 2 dates"));
    }
    let s = sigma * sigma * b * b;
    Ok((
        2.0 * s / (1.0 - lambda2).powi(2),
        s * mean_dynamic_weight(lambda2, t_len),
    ))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadraticFormDraws {
    pub phi_hat_star: Vec<f64>,
    pub phi_hat: Vec<f64>,
}

const DRAW_BLOCK: usize = 256;

/// Coupled draws of the weighted chi-square laws, one `Z` vector per draw
/// shared by both statistics (eigenvalues paired in descending order).
pub fn sample_quadratic_form(
    spec: &FiniteTSpectrum,
    b: f64,
    sigma: f64,
    draws: usize,
    seed: u64,
) -> Result<QuadraticFormDraws> {
    if draws == 0 {
        return Err(invalid("draws", "need at least one draw"));
    }
    let m = (spec.t_len - 1) as f64;
    let scale = sigma * sigma * b * b / m;
    let scale_star = scale / (1.0 - spec.lambda2).powi(2);
    let blocks = draws.div_ceil(DRAW_BLOCK);
    let pairs: Vec<(f64, f64)> = (0..blocks)
        .into_par_iter()
        .flat_map_iter(|blk| {
            let mut rng = substream(seed, blk as u64);
            let count = DRAW_BLOCK.min(draws - blk * DRAW_BLOCK);
            (0..count)
                .map(|_| {
                    let (mut st, mut dy) = (0.0, 0.0);
                    for (ns, nd) in spec.nu_star.iter().zip(&spec.nu) {
                        let z: f64 = StandardNormal.sample(&mut rng);
                        let z2 = z * z;
                        st += ns * z2;
                        dy += nd * z2;
                    }
                    (scale_star * st, scale * dy)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let (phi_hat_star, phi_hat) = pairs.into_iter().unzip();
    Ok(QuadraticFormDraws {
        phi_hat_star,
        phi_hat,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FosdReport {
    pub condition_holds: bool,
    pub nu_max: f64,
    pub bound: f64,
    /// `ν_j (1−λ2)² ≤ ν*_j` for every descending-paired `j`; this is what
    /// pathwise dominance of the coupled draws actually requires.
    pub termwise_dominance: bool,
}

/// Sufficient condition `ν_max ≤ (1 − λ2)^{-2}`.
pub fn fosd_check(spec: &FiniteTSpectrum) -> FosdReport {
    let f = (1.0 - spec.lambda2).powi(2);
    let bound = 1.0 / f;
    let termwise_dominance = spec
        .nu
        .iter()
        .zip(&spec.nu_star)
        .all(|(nu, ns)| nu * f <= ns + 1e-12);
    FosdReport {
        condition_holds: spec.nu_max <= bound,
        nu_max: spec.nu_max,
        bound,
        termwise_dominance,
    }
}

/// Number of coupled draws with `φ̂* − φ̂ < tol` (tol is typically −1e-12).
pub fn coupled_violations(draws: &QuadraticFormDraws, tol: f64) -> usize {
    draws
        .phi_hat_star
        .iter()
        .zip(&draws.phi_hat)
        .filter(|(s, d)| *s - *d < tol)
        .count()
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a − F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic two-sample critical value at level 0.05.
pub fn ks_critical_05(na: usize, nb: usize) -> f64 {
    1.358 * ((na + nb) as f64 / (na as f64 * nb as f64)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignConfig {
    BothPositive,
    BothNegative,
    DynamicPositiveStaticNegative,
    DynamicNegativeStaticPositive,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OvershootEvent {
    pub delta_y: f64,
    pub delta_y_star: f64,
    pub reversal: bool,
    pub config: Option<SignConfig>,
}

/// Compare `Δy_t = b((λ−1)s_{t−1} + η_{t−1})` with
/// `Δy*_t = b(η_t − η_{t−1})/(1−λ)`. Under lagged timing the date-`t`
/// dynamic increment loads on `η_{t−1}`.
pub fn overshoot_event(
    lambda2: f64,
    b: f64,
    s_prev: f64,
    eta_prev: f64,
    eta_t: f64,
    timing: crate::propagate::Timing,
) -> OvershootEvent {
    let fresh = match timing {
        crate::propagate::Timing::Lagged => eta_prev,
        crate::propagate::Timing::Contemporaneous => eta_t,
    };
    let delta_y = b * ((lambda2 - 1.0) * s_prev + fresh);
    let delta_y_star = b * (eta_t - eta_prev) / (1.0 - lambda2);
    let reversal = delta_y.abs() > delta_y_star.abs();
    let config = reversal.then(|| match (delta_y >= 0.0, delta_y_star >= 0.0) {
        (true, true) => SignConfig::BothPositive,
        (false, false) => SignConfig::BothNegative,
        (true, false) => SignConfig::DynamicPositiveStaticNegative,
        (false, true) => SignConfig::DynamicNegativeStaticPositive,
    });
    OvershootEvent {
        delta_y,
        delta_y_star,
        reversal,
        config,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OvershootParams {
    pub lambda2: f64,
    pub b: f64,
    pub sigma: f64,
    pub n_scaling: f64,
    /// Calendar date at which the increments are compared (`≥ 2`).
    pub t: usize,
    pub reps: usize,
    pub margin: f64,
    pub seed: u64,
    pub timing: crate::propagate::Timing,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OvershootReport {
    pub rate_any: f64,
    pub rate_margin: f64,
    pub se_any: f64,
    pub se_margin: f64,
    pub reps: usize,
    /// Counts of reversal events by sign configuration, in the order
    /// both-positive, both-negative, dynamic+/static−, dynamic−/static+.
    pub configurations: [usize; 4],
    pub timing: crate::propagate::Timing,
}

/// Independent two-mode replications with `η ~ N(0, σ²/n_scaling)`,
/// evaluated at date `t`.
pub fn overshoot_diagnostics(p: &OvershootParams) -> Result<OvershootReport> {
    check_unit_interval(p.lambda2)?;
    if p.t < 2 || p.reps == 0 || !(p.margin >= 0.0) || !(p.n_scaling > 0.0) {
        return Err(invalid("overshoot", "need t >= 2, reps >= 1, margin >= 0, n_scaling > 0"));
    }
    let sd = p.sigma / p.n_scaling.sqrt();
    let blocks = p.reps.div_ceil(DRAW_BLOCK);
    let events: Vec<OvershootEvent> = (0..blocks)
        .into_par_iter()
        .flat_map_iter(|blk| {
            let mut rng = substream(p.seed, blk as u64);
            let count = DRAW_BLOCK.min(p.reps - blk * DRAW_BLOCK);
            (0..count)
                .map(|_| {
                    let eta: Vec<f64> = (0..=p.t)
                        .map(|_| {
                            let z: f64 = StandardNormal.sample(&mut rng);
                            sd * z
                        })
                        .collect();
                    // s_{t-1} from s_0 = 0
                    let mut s = 0.0;
                    for k in 1..p.t {
                        s = match p.timing {
                            crate::propagate::Timing::Lagged => p.lambda2 * s + eta[k - 1],
                            crate::propagate::Timing::Contemporaneous => p.lambda2 * s + eta[k],
                        };
                    }
                    overshoot_event(p.lambda2, p.b, s, eta[p.t - 1], eta[p.t], p.timing)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    let reps = events.len() as f64;
    let any = events.iter().filter(|e| e.reversal).count() as f64;
    let margin = events
        .iter()
        .filter(|e| e.delta_y.abs() > e.delta_y_star.abs() + p.margin)
        .count() as f64;
    let mut configurations = [0usize; 4];
    for e in &events {
        if let Some(c) = e.config {
            configurations[c as usize] += 1;
        }
    }
    let (ra, rm) = (any / reps, margin / reps);
    Ok(OvershootReport {
        rate_any: ra,
        rate_margin: rm,
        se_any: (ra * (1.0 - ra) / reps).sqrt(),
        se_margin: (rm * (1.0 - rm) / reps).sqrt(),
        reps: p.reps,
        configurations,
        timing: p.timing,
    })
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LevelsIncrements {
    pub ratio_levels: f64,
    pub ratio_increments: f64,
    /// `(1−λ2)/(1+λ2)`
    pub closed_levels: f64,
    /// `(1−λ2)²/(1+λ2)`
    pub closed_increments: f64,
    pub var_dynamic_increment: f64,
    pub burn_in: usize,
}

fn sample_variance(x: &[f64]) -> f64 {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    let mut acc = KahanSum::default();
    for v in x {
        acc.add((v - m).powi(2));
    }
    acc.total() / (x.len() - 1) as f64
}

/// Stationary level and increment variance ratios of the two-mode dynamic
/// and static series (contemporaneous timing, burn-in `⌈50/(1−λ2)⌉`).
pub fn levels_vs_increments(
    lambda2: f64,
    b: f64,
    sigma: f64,
    t_len: usize,
    seed: u64,
) -> Result<LevelsIncrements> {
    check_unit_interval(lambda2)?;
    if t_len < 3 {
        return Err(invalid("T", "need at least 3 retained dates"));
    }
    let burn_in = (50.0 / (1.0 - lambda2)).ceil() as usize;
    let mut rng = substream(seed, 0);
    let gain = b / (1.0 - lambda2);
    let mut s = 0.0;
    let mut y = Vec::with_capacity(t_len);
    let mut y_star = Vec::with_capacity(t_len);
    for k in 0..burn_in + t_len {
        let z: f64 = StandardNormal.sample(&mut rng);
        let eta = sigma * z;
        s = lambda2 * s + eta;
        if k >= burn_in {
            y.push(b * s);
            y_star.push(gain * eta);
        }
    }
    let dy = increments(&y);
    let dy_star = increments(&y_star);
    let var_dy = sample_variance(&dy);
    Ok(LevelsIncrements {
        ratio_levels: sample_variance(&y) / sample_variance(&y_star),
        ratio_increments: var_dy / sample_variance(&dy_star),
        closed_levels: (1.0 - lambda2) / (1.0 + lambda2),
        closed_increments: (1.0 - lambda2).powi(2) / (1.0 + lambda2),
        var_dynamic_increment: var_dy,
        burn_in,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normal_cdf_reference_values() {
        // mpmath, 30 digits
        assert!((normal_cdf(-1.0) / 0.158_655_253_931_457_05 - 1.0).abs() < 1e-13);
        assert!((normal_cdf(-5.0) / 2.866_515_718_791_939e-7 - 1.0).abs() < 1e-12);
        assert_eq!(normal_cdf(0.0), 0.5);
    }

    #[test]
    fn dynamic_form_matches_explicit_product() {
        for &(lam, t) in &[(0.0, 4usize), (0.5, 7), (0.9, 12)] {
            let (k, d) = build_overlap_matrices(lam, t).unwrap();
            let dk: Vec<Vec<f64>> = d
                .iter()
                .map(|row| (0..t).map(|q| (0..t).map(|p| row[p] * k[p][q]).sum()).collect())
                .collect();
            let m = dynamic_form_matrix(lam, t);
            for r in 0..t - 1 {
                for s in 0..t - 1 {
                    let want: f64 = (0..t).map(|q| dk[r][q] * dk[s][q]).sum();
                    assert!((m[(r, s)] - want).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn ks_identical_and_disjoint() {
        let a = [1.0, 2.0, 3.0];
        assert_eq!(ks_statistic(&a, &a), 0.0);
        assert_eq!(ks_statistic(&a, &[10.0, 11.0]), 1.0);
    }
}
