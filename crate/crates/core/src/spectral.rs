//! Perron and dominant-transient eigenpairs, the normalized two-mode
//! objects and the degree-based proxy for the transient direction.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::{dot, norm2};
use crate::netgen::{degree_moments, ProductionNetwork};
use crate::rng::substream;

pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PerronPair {
    pub lambda1: f64,
    /// Right vector, normalized to sum 1 (so `u1ᵀv1 = 1` with `u1 = 1`).
    pub v1: Vec<f64>,
    pub u1: Vec<f64>,
    /// Number of strictly positive entries of `v1`; less than `n` when some
    /// firms supply nobody (the chain is reducible but has one closed class).
    pub support: usize,
    pub iterations: usize,
}

/// Shifted power iteration on `A` (shift by the column-sum bound, which
/// removes periodic oscillation without moving eigenvectors). `u1` is taken
/// as `1` when `1ᵀA = λ1 1ᵀ` holds, otherwise iterated on `Aᵀ`.
pub fn perron(net: &ProductionNetwork, tol: f64, max_iter: usize) -> Result<PerronPair> {
    let a = net.a();
    let n = a.n();
    let shift = a.norm1();
    if shift == 0.0 {
        return Err(Error::InvalidNetwork("share matrix is zero".into()));
    }
    let closed = a.closed_classes();
    if closed.len() > 1 {
        return Err(Error::Reducible {
            classes: closed.len(),
            firm: closed[1][0],
        });
    }
    let (v1, iterations) = shifted_power(n, shift, tol, max_iter, |x| a.mul_vec(x))?;
    let av = a.mul_vec(&v1);
    let lambda1 = av.iter().sum::<f64>() / v1.iter().sum::<f64>();
    for (firm, &entry) in v1.iter().enumerate() {
        if entry < -tol {
            return Err(Error::NotPrimitive { firm, entry });
        }
    }
    let v1: Vec<f64> = v1.into_iter().map(|x| x.max(0.0)).collect();
    let support = v1.iter().filter(|&&x| x > tol).count();

    let ones = vec![1.0; n];
    let left_resid = a
        .tr_mul_vec(&ones)
        .iter()
        .map(|x| (x - lambda1).abs())
        .fold(0.0, f64::max);
    let u1 = if left_resid <= tol {
        ones
    } else {
        let (u, _) = shifted_power(n, shift, tol, max_iter, |x| a.tr_mul_vec(x))?;
        let s = dot(&u, &v1);
        if s.abs() < 1e-300 {
            return Err(Error::DefectivePair(s));
        }
        u.into_iter().map(|x| x / s).collect()
    };
    Ok(PerronPair {
        lambda1,
        v1,
        u1,
        support,
        iterations,
    })
}

fn shifted_power(
    n: usize,
    shift: f64,
    tol: f64,
    max_iter: usize,
    apply: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<(Vec<f64>, usize)> {
    let mut v = vec![1.0 / n as f64; n];
    let mut prev_rq = f64::NAN;
    let mut resid = f64::INFINITY;
    for k in 1..=max_iter {
        let av = apply(&v);
        let rq = dot(&v, &av) / dot(&v, &v);
        let mut w: Vec<f64> = av.iter().zip(&v).map(|(a, x)| a + shift * x).collect();
        let s: f64 = w.iter().sum();
        if s == 0.0 {
            return Err(Error::NotConverged {
                what: "Perron power iteration",
                iterations: k,
                residual: f64::INFINITY,
            });
        }
        w.iter_mut().for_each(|x| *x /= s);
        resid = w.iter().zip(&v).map(|(a, b)| (a - b).abs()).sum();
        v = w;
        if (rq - prev_rq).abs() < tol && resid < tol {
            return Ok((v, k));
        }
        prev_rq = rq;
    }
    Err(Error::NotConverged {
        what: "Perron power iteration",
        iterations: max_iter,
        residual: resid,
    })
}

/// Outcome of the block-2 iteration on one side (right or left).
#[derive(Debug, Clone)]
struct Mode {
    /// Dominant Ritz value (real part when complex).
    value: f64,
    modulus: f64,
    complex: bool,
    tie: bool,
    /// Ritz vector, or the first basis vector of the invariant plane.
    vector: Vec<f64>,
    plane: [Vec<f64>; 2],
    iterations: usize,
}

fn orthonormalize(q: &mut [Vec<f64>; 2], fill: &mut impl FnMut() -> Vec<f64>) {
    for k in 0..2 {
        let mut attempts = 0;
        loop {
            let before = norm2(&q[k]);
            for _ in 0..2 {
                for j in 0..k {
                    let c = dot(&q[j], &q[k]);
                    let (lo, hi) = q.split_at_mut(k);
                    hi[0].iter_mut().zip(&lo[j]).for_each(|(x, y)| *x -= c * y);
                }
            }
            let after = norm2(&q[k]);
            if after > 1e-10 * before && after > 1e-280 {
                q[k].iter_mut().for_each(|x| *x /= after);
                break;
            }
            attempts += 1;
            assert!(attempts < 100, "cannot complete orthonormal basis");
            q[k] = fill();
        }
    }
}

/// Block-2 subspace iteration with 2×2 Rayleigh–Ritz. Detects a complex
/// dominant pair (negative discriminant at convergence) and modulus ties.
fn dominant_mode(
    n: usize,
    scale: f64,
    tol: f64,
    max_iter: usize,
    seed: u64,
    apply: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<Mode> {
    let mut rng = substream(seed, 0);
    let mut fill = move || (0..n).map(|_| rng.random::<f64>() - 0.5).collect::<Vec<f64>>();
    let mut q = [fill(), fill()];
    if n == 1 {
        let w = apply(&[1.0]);
        return Ok(Mode {
            value: w[0],
            modulus: w[0].abs(),
            complex: false,
            tie: false,
            vector: vec![1.0],
            plane: [vec![1.0], vec![0.0]],
            iterations: 1,
        });
    }
    orthonormalize(&mut q, &mut fill);
    let mut prev_mod = f64::NAN;
    let mut resid = f64::INFINITY;
    for k in 1..=max_iter {
        let w = [apply(&q[0]), apply(&q[1])];
        let wnorm = norm2(&w[0]).max(norm2(&w[1]));
        if wnorm <= 1e-13 * scale {
            // operator vanishes on the deflated space: every transient is zero
            return Ok(Mode {
                value: 0.0,
                modulus: 0.0,
                complex: false,
                tie: true,
                vector: q[0].clone(),
                plane: q.clone(),
                iterations: k,
            });
        }
        let h = [
            [dot(&q[0], &w[0]), dot(&q[0], &w[1])],
            [dot(&q[1], &w[0]), dot(&q[1], &w[1])],
        ];
        let tr = h[0][0] + h[1][1];
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let disc = tr * tr / 4.0 - det;
        let complex_now = disc < -(tol * scale).powi(2);
        let (value, modulus, other_mod, y) = if complex_now {
            let m = det.max(0.0).sqrt();
            (tr / 2.0, m, m, [1.0, 0.0])
        } else {
            let r = disc.max(0.0).sqrt();
            let (mu_a, mu_b) = (tr / 2.0 + r, tr / 2.0 - r);
            let (mu, other) = if mu_a.abs() >= mu_b.abs() {
                (mu_a, mu_b)
            } else {
                (mu_b, mu_a)
            };
            let c1 = [h[0][1], mu - h[0][0]];
            let c2 = [mu - h[1][1], h[1][0]];
            let n1 = c1[0].hypot(c1[1]);
            let n2 = c2[0].hypot(c2[1]);
            let y = if n1.max(n2) <= 1e-300 {
                [1.0, 0.0]
            } else if n1 >= n2 {
                [c1[0] / n1, c1[1] / n1]
            } else {
                [c2[0] / n2, c2[1] / n2]
            };
            (mu, mu.abs(), other.abs(), y)
        };
        // residual: plane invariance when complex, Ritz pair otherwise
        resid = if complex_now {
            let mut s = 0.0;
            for j in 0..2 {
                for i in 0..n {
                    let qh = q[0][i] * h[0][j] + q[1][i] * h[1][j];
                    s += (w[j][i] - qh).powi(2);
                }
            }
            s.sqrt()
        } else {
            (0..n)
                .map(|i| {
                    let bx = w[0][i] * y[0] + w[1][i] * y[1];
                    let x = q[0][i] * y[0] + q[1][i] * y[1];
                    (bx - value * x).powi(2)
                })
                .sum::<f64>()
                .sqrt()
        };
        let converged = (modulus - prev_mod).abs() < tol * scale.max(1.0)
            && resid <= 100.0 * tol * scale.max(1.0);
        if converged {
            let vector: Vec<f64> = if complex_now {
                q[0].clone()
            } else {
                (0..n).map(|i| q[0][i] * y[0] + q[1][i] * y[1]).collect()
            };
            let tie = complex_now || (modulus - other_mod).abs() <= 1e-6 * modulus.max(1e-300);
            return Ok(Mode {
                value,
                modulus,
                complex: complex_now,
                tie,
                vector,
                plane: q.clone(),
                iterations: k,
            });
        }
        prev_mod = modulus;
        q = w;
        orthonormalize(&mut q, &mut fill);
    }
    Err(Error::NotConverged {
        what: "dominant transient iteration",
        iterations: max_iter,
        residual: resid,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransientPair {
    /// Signed real eigenvalue; for a complex pair, its real part.
    pub lambda2: f64,
    pub lambda2_mod: f64,
    pub lambda2_complex: bool,
    /// Non-unique dominant direction (modulus tie, repeated eigenvalue, or
    /// vanishing transient operator).
    pub lambda2_tie: bool,
    pub u2: Vec<f64>,
    pub v2: Vec<f64>,
    /// Real basis of the invariant plane when complex (right side).
    pub plane: Option<[Vec<f64>; 2]>,
    pub iterations: usize,
}

/// Dominant eigenpair of the deflated operator `A − λ1 v1 u1ᵀ` and its
/// transpose.
pub fn dominant_transient(
    net: &ProductionNetwork,
    perron: &PerronPair,
    tol: f64,
    max_iter: usize,
) -> Result<TransientPair> {
    let a = net.a();
    let n = a.n();
    let l1 = perron.lambda1;
    let (v1, u1) = (&perron.v1, &perron.u1);
    let scale = l1.abs().max(a.norm1());
    let right = dominant_mode(n, scale, tol, max_iter, 0x2_5eed, |x| {
        let c = l1 * dot(u1, x);
        a.mul_vec(x)
            .into_iter()
            .zip(v1)
            .map(|(y, v)| y - c * v)
            .collect()
    })?;
    if !right.complex && (right.value - l1).abs() <= tol.sqrt() * scale {
        return Err(Error::NoSpectralGap {
            lambda1: l1,
            lambda2: right.value,
        });
    }
    let left = dominant_mode(n, scale, tol, max_iter, 0x3_5eed, |x| {
        let c = l1 * dot(v1, x);
        a.tr_mul_vec(x)
            .into_iter()
            .zip(u1)
            .map(|(y, u)| y - c * u)
            .collect()
    })?;
    if (left.modulus - right.modulus).abs() > 1e-6 * scale {
        return Err(Error::NotConverged {
            what: "left/right transient moduli disagree",
            iterations: left.iterations.max(right.iterations),
            residual: (left.modulus - right.modulus).abs(),
        });
    }
    Ok(TransientPair {
        lambda2: right.value,
        lambda2_mod: right.modulus,
        lambda2_complex: right.complex,
        lambda2_tie: right.tie || left.tie,
        u2: left.vector,
        v2: right.vector,
        plane: right.complex.then_some(right.plane),
        iterations: right.iterations.max(left.iterations),
    })
}

/// Rescale so `u2ᵀv2 = 1`, then `ũ2 = u2/‖u2‖`, `ṽ2 = ‖u2‖ v2`.
pub fn normalize_pair(u2: &[f64], v2: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if u2.len() != v2.len() {
        return Err(invalid("v2", "dimension differs from u2"));
    }
    let s = dot(u2, v2);
    if s.abs() <= 1e-14 * norm2(u2) * norm2(v2) || !s.is_finite() {
        return Err(Error::DefectivePair(s));
    }
    let nu = norm2(u2);
    let u = u2.iter().map(|x| x / nu).collect();
    let v = v2.iter().map(|x| x / s * nu).collect();
    Ok((u, v))
}

pub fn loading(gamma: &[f64], v2_norm: &[f64]) -> Result<f64> {
    if gamma.len() != v2_norm.len() {
        return Err(invalid("gamma", "dimension differs from v2"));
    }
    Ok(dot(gamma, v2_norm))
}

pub fn project_innovation(u2_norm: &[f64], eps_hat_t: &[f64]) -> f64 {
    debug_assert_eq!(u2_norm.len(), eps_hat_t.len());
    dot(u2_norm, eps_hat_t)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda2_mod: f64,
    pub lambda2_complex: bool,
    pub lambda2_tie: bool,
    pub u2: Vec<f64>,
    pub v2: Vec<f64>,
    pub u2_norm: Vec<f64>,
    pub v2_norm: Vec<f64>,
    pub b: f64,
    pub perron_support: usize,
    pub iterations: usize,
}

impl SpectralSummary {
    /// Persistence parameter for the scalar reduction; refuses complex pairs
    /// and values outside `[0, 1)`.
    pub fn real_lambda2(&self) -> Result<f64> {
        if self.lambda2_complex {
            return Err(Error::ComplexTransient {
                modulus: self.lambda2_mod,
            });
        }
        if !(0.0..1.0).contains(&self.lambda2) {
            return Err(Error::Domain {
                name: "lambda2",
                value: self.lambda2,
                domain: "[0, 1) for the scalar two-mode reduction",
            });
        }
        Ok(self.lambda2)
    }
}

/// Full pipeline: Perron pair, dominant transient, biorthogonal
/// normalization (sign fixed so the first non-negligible entry of `ũ2` is
/// positive) and the loading `b = γᵀṽ2`.
pub fn spectral_summary(
    net: &ProductionNetwork,
    tol: f64,
    max_iter: usize,
) -> Result<SpectralSummary> {
    let p = perron(net, tol, max_iter)?;
    let t = dominant_transient(net, &p, tol, max_iter)?;
    let (mut u2, mut v2) = (t.u2.clone(), t.v2.clone());
    let lead = u2
        .iter()
        .copied()
        .find(|x| x.abs() > 1e-8 * norm2(&t.u2))
        .unwrap_or(1.0);
    if lead < 0.0 {
        u2.iter_mut().for_each(|x| *x = -*x);
        v2.iter_mut().for_each(|x| *x = -*x);
    }
    let (u2_norm, v2_norm) = if t.lambda2_complex {
        let nu = norm2(&u2);
        let nv = norm2(&v2);
        (
            u2.iter().map(|x| x / nu).collect(),
            v2.iter().map(|x| x / nv).collect(),
        )
    } else {
        normalize_pair(&u2, &v2)?
    };
    let b = loading(net.gamma(), &v2_norm)?;
    Ok(SpectralSummary {
        lambda1: p.lambda1,
        lambda2: t.lambda2,
        lambda2_mod: t.lambda2_mod,
        lambda2_complex: t.lambda2_complex,
        lambda2_tie: t.lambda2_tie,
        u2,
        v2,
        u2_norm,
        v2_norm,
        b,
        perron_support: p.support,
        iterations: p.iterations + t.iterations,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProxyReport {
    pub u2_proxy: Vec<f64>,
    pub b_alpha: f64,
    /// Free relative scale of the left/right proxies, fixed to 1.
    pub scale_c: f64,
    pub cosine_true_proxy: Option<f64>,
}

fn mean_var(d: &[f64]) -> (f64, f64) {
    let n = d.len() as f64;
    let m = d.iter().sum::<f64>() / n;
    let v = d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, v)
}

/// Centered-degree proxy for the transient direction using empirical
/// moments.
pub fn degree_proxy(
    degrees: &[f64],
    gamma: &[f64],
    true_u2: Option<&[f64]>,
) -> Result<ProxyReport> {
    let n = degrees.len();
    if gamma.len() != n {
        return Err(invalid("gamma", "dimension differs from degrees"));
    }
    let (m, v) = mean_var(degrees);
    if v <= 1e-14 * m * m {
        return Err(Error::DegenerateProxy);
    }
    let denom = (n as f64 * v).sqrt();
    let u2_proxy: Vec<f64> = degrees.iter().map(|d| (d - m) / denom).collect();
    let centered: f64 = gamma.iter().zip(degrees).map(|(g, d)| g * (d - m)).sum();
    let b_alpha = (n as f64).sqrt() * centered / v.sqrt();
    let cosine_true_proxy = match true_u2 {
        Some(u) => {
            if u.len() != n {
                return Err(invalid("true_u2", "dimension differs from degrees"));
            }
            Some((dot(u, &u2_proxy) / (norm2(u) * norm2(&u2_proxy))).abs())
        }
        None => None,
    };
    Ok(ProxyReport {
        u2_proxy,
        b_alpha,
        scale_c: 1.0,
        cosine_true_proxy,
    })
}

/// `b(α) = c √n (γᵀd − E[d](α)) / √Var(d)(α)` with closed-form moments at
/// `n = len(d)` and the realized degrees held fixed.
pub fn b_of_alpha(alpha: f64, degrees: &[f64], gamma: &[f64], c: f64) -> Result<f64> {
    let n = degrees.len() as f64;
    let mom = degree_moments(alpha, n)?;
    if !(mom.variance > 0.0) || !mom.variance.is_finite() {
        return Err(Error::Domain {
            name: "alpha",
            value: alpha,
            domain: "values with finite positive degree variance",
        });
    }
    let gd = dot(gamma, degrees);
    Ok(c * n.sqrt() * (gd - mom.mean) / mom.variance.sqrt())
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LogDerivativeB {
    /// Central difference of `log|b(α)|`.
    pub direct: f64,
    /// `−E[d]'(α) / γᵀ(d − E[d]1)`.
    pub recentering: f64,
    /// `−½ Var(d)'(α) / Var(d)`.
    pub rescaling: f64,
    pub analytic: f64,
}

pub fn log_derivative_b(
    alpha: f64,
    degrees: &[f64],
    gamma: &[f64],
    h: f64,
) -> Result<LogDerivativeB> {
    if !(h > 0.0) {
        return Err(invalid("h", "step must be positive"));
    }
    let (lo, hi) = (alpha - h, alpha + h);
    if lo <= 1.0 || (lo <= 2.0 && hi >= 2.0) {
        return Err(Error::Domain {
            name: "alpha",
            value: alpha,
            domain: "(1, inf) minus 2, with alpha ± h on the same side of 2",
        });
    }
    let b0 = b_of_alpha(alpha, degrees, gamma, 1.0)?;
    if b0 == 0.0 {
        return Err(Error::ZeroLoading);
    }
    let b_lo = b_of_alpha(lo, degrees, gamma, 1.0)?;
    let b_hi = b_of_alpha(hi, degrees, gamma, 1.0)?;
    if b_lo == 0.0 || b_hi == 0.0 {
        return Err(Error::ZeroLoading);
    }
    let direct = (b_hi.abs().ln() - b_lo.abs().ln()) / (2.0 * h);
    let n = degrees.len() as f64;
    let m0 = degree_moments(alpha, n)?;
    let m_lo = degree_moments(lo, n)?;
    let m_hi = degree_moments(hi, n)?;
    let dmean = (m_hi.mean - m_lo.mean) / (2.0 * h);
    let dvar = (m_hi.variance - m_lo.variance) / (2.0 * h);
    let centered = dot(gamma, degrees) - m0.mean;
    let recentering = -dmean / centered;
    let rescaling = -0.5 * dvar / m0.variance;
    Ok(LogDerivativeB {
        direct,
        recentering,
        rescaling,
        analytic: recentering + rescaling,
    })
}
