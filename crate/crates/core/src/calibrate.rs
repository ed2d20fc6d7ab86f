//! Attenuation tables, implied granular shares and the tail-exponent
//! sensitivity decomposition.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::riskstats::{attenuation_ratio, finite_t_spectra};
use crate::spectral::b_of_alpha;

pub const DEFAULT_GRID: [f64; 7] = [0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8];
pub const DEFAULT_STATIC_SHARES: [f64; 2] = [0.10, 0.33];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub lambda2: f64,
    pub r: f64,
    pub static_share: Option<f64>,
    pub dynamic_share: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub rows: Vec<CalibrationRow>,
}

impl CalibrationTable {
    /// One row per (grid point, share) with `dynamic = static · R`.
    pub fn with_shares(&self, shares: &[f64]) -> Result<CalibrationTable> {
        let mut rows = Vec::with_capacity(self.rows.len() * shares.len());
        for &s in shares {
            for row in &self.rows {
                rows.push(CalibrationRow {
                    lambda2: row.lambda2,
                    r: row.r,
                    static_share: Some(s),
                    dynamic_share: Some(granular_share(s, row.lambda2)?),
                });
            }
        }
        Ok(CalibrationTable { rows })
    }
}

pub fn attenuation_table(grid: &[f64]) -> Result<CalibrationTable> {
    let rows = grid
        .iter()
        .map(|&l| {
            if !(l > 0.0 && l < 1.0) {
                return Err(Error::Domain {
                    name: "lambda2",
                    value: l,
                    domain: "(0, 1)",
                });
            }
            Ok(CalibrationRow {
                lambda2: l,
                r: attenuation_ratio(l)?,
                static_share: None,
                dynamic_share: None,
            })
        })
        .collect::<Result<_>>()?;
    Ok(CalibrationTable { rows })
}

/// Share of aggregate volatility left to granular shocks once overlap
/// attenuation is accounted for: `static_share · R(λ2)`.
pub fn granular_share(static_share: f64, lambda2: f64) -> Result<f64> {
    if !(static_share > 0.0 && static_share <= 1.0) {
        return Err(Error::Domain {
            name: "static_share",
            value: static_share,
            domain: "(0, 1]",
        });
    }
    Ok(static_share * attenuation_ratio(lambda2)?)
}

/// Verbal rounding of a share: "close to zero" below 0.1, otherwise the
/// nearest unit fraction `1/k`, `k = 1..=10`.
pub fn share_label(share: f64) -> String {
    if share < 0.1 {
        return "close to zero".to_string();
    }
    const NAMES: [&str; 10] = [
        "all", "one-half", "one-third", "one-quarter", "one-fifth", "one-sixth",
        "one-seventh", "one-eighth", "one-ninth", "one-tenth",
    ];
    let k = (1..=10)
        .min_by(|&a, &b| {
            let da = (share - 1.0 / a as f64).abs();
            let db = (share - 1.0 / b as f64).abs();
            da.total_cmp(&db)
        })
        .unwrap();
    format!("about {}", NAMES[k - 1])
}

/// User-supplied persistence as a function of the tail exponent.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Lambda2Mapping {
    Linear { intercept: f64, slope: f64 },
    /// Piecewise-linear interpolation through `(alpha, lambda2)` points.
    Table { points: Vec<(f64, f64)> },
}

impl Lambda2Mapping {
    /// Linear form is `intercept + slope · α`.
    pub fn eval(&self, alpha: f64) -> Result<f64> {
        match self {
            Lambda2Mapping::Linear { intercept, slope } => Ok(intercept + slope * alpha),
            Lambda2Mapping::Table { points } => {
                let mut pts = points.clone();
                pts.sort_by(|a, b| a.0.total_cmp(&b.0));
                let (first, last) = match (pts.first(), pts.last()) {
                    (Some(f), Some(l)) if pts.len() >= 2 => (*f, *l),
                    _ => return Err(invalid("points", "table mapping needs two points")),
                };
                if alpha < first.0 || alpha > last.0 {
                    return Err(Error::Domain {
                        name: "alpha",
                        value: alpha,
                        domain: "inside the lambda2 table range",
                    });
                }
                let k = pts.partition_point(|p| p.0 <= alpha).clamp(1, pts.len() - 1);
                let (a0, l0) = pts[k - 1];
                let (a1, l1) = pts[k];
                Ok(l0 + (l1 - l0) * (alpha - a0) / (a1 - a0))
            }
        }
    }
}

/// Aggregate loading as a function of the tail exponent.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum LoadingModel {
    Constant { b: f64 },
    /// `b(α) = c √n (γᵀd − E[d](α)) / √Var(d)(α)`.
    DegreeProxy {
        degrees: Vec<f64>,
        gamma: Vec<f64>,
        c: f64,
    },
}

impl LoadingModel {
    pub fn eval(&self, alpha: f64) -> Result<f64> {
        match self {
            LoadingModel::Constant { b } => Ok(*b),
            LoadingModel::DegreeProxy { degrees, gamma, c } => b_of_alpha(alpha, degrees, gamma, *c),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub alpha: f64,
    pub lambda2: f64,
    pub lambda2_prime: f64,
    pub b: f64,
    pub b_prime: f64,
    pub exposure_channel: f64,
    pub overlap_channel: f64,
    pub total: f64,
    /// `∂ν_j/∂α = (∂ν_j/∂λ2) λ2'(α)`, descending eigenvalue order.
    pub nu_prime: Vec<f64>,
    /// λ2 step actually used for the eigenvalue derivatives.
    pub lambda_step: f64,
    pub warnings: Vec<String>,
}

fn spectrum_nu(lambda2: f64, t_len: usize) -> Result<Vec<f64>> {
    Ok(finite_t_spectra(lambda2, t_len)?.nu)
}

/// Order-matched central differences `∂ν_j/∂λ2`; the step is halved while
/// step-`δ` and step-`δ/2` estimates disagree (an ordering change inside
/// the bracket), erroring after three halvings.
pub fn eigenvalue_derivatives(lambda2: f64, t_len: usize, step: f64) -> Result<(Vec<f64>, f64)> {
    let central = |d: f64| -> Result<Vec<f64>> {
        if lambda2 - d < 0.0 || lambda2 + d >= 1.0 {
            return Err(Error::Domain {
                name: "lambda2",
                value: lambda2,
                domain: "lambda2 ± step inside [0, 1)",
            });
        }
        let hi = spectrum_nu(lambda2 + d, t_len)?;
        let lo = spectrum_nu(lambda2 - d, t_len)?;
        Ok(hi.iter().zip(&lo).map(|(a, b)| (a - b) / (2.0 * d)).collect())
    };
    let mut d = step;
    for _ in 0..=3 {
        let full = central(d)?;
        let half = central(d / 2.0)?;
        let scale = half.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        let gap = full
            .iter()
            .zip(&half)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        // smooth branches agree to O(d²); kinks show up as O(1) gaps
        if gap <= 1e-2 * scale {
            return Ok((half, d / 2.0));
        }
        d /= 2.0;
    }
    Err(Error::EigenvalueCrossing { halvings: 3, step: d })
}

#[allow(clippy::too_many_arguments)]
pub fn sensitivity_decomposition(
    alpha: f64,
    mapping: &Lambda2Mapping,
    loading: &LoadingModel,
    sigma: f64,
    t_len: usize,
    h: f64,
) -> Result<SensitivityReport> {
    if !(h > 0.0) || alpha - h <= 1.0 {
        return Err(invalid("h", "need h > 0 and alpha - h > 1"));
    }
    let lam = mapping.eval(alpha)?;
    let lam_hi = mapping.eval(alpha + h)?;
    let lam_lo = mapping.eval(alpha - h)?;
    for (a, l) in [(alpha - h, lam_lo), (alpha, lam), (alpha + h, lam_hi)] {
        if !(l > 0.0 && l < 1.0) {
            return Err(Error::Domain {
                name: "lambda2(alpha)",
                value: l,
                domain: if a == alpha { "(0, 1)" } else { "(0, 1) at alpha ± h" },
            });
        }
    }
    let lambda2_prime = (lam_hi - lam_lo) / (2.0 * h);
    let mut warnings = Vec::new();
    if lambda2_prime >= 0.0 {
        warnings.push(format!(
            "lambda2'(alpha) = {lambda2_prime:.4} is not negative; fatter tails do not slow mixing under this mapping"
        ));
    }
    let b = loading.eval(alpha)?;
    let b_prime = (loading.eval(alpha + h)? - loading.eval(alpha - h)?) / (2.0 * h);
    let spec = finite_t_spectra(lam, t_len)?;
    let m = (t_len - 1) as f64;
    let mean_nu = spec.mean_nu();
    let (dnu, lambda_step) = if lambda2_prime == 0.0 {
        (vec![0.0; spec.nu.len()], 0.0)
    } else {
        let step = h.min(0.5 * lam).min(0.5 * (1.0 - lam));
        eigenvalue_derivatives(lam, t_len, step)?
    };
    let nu_prime: Vec<f64> = dnu.iter().map(|d| d * lambda2_prime).collect();
    let s2 = sigma * sigma;
    let exposure_channel = s2 * 2.0 * b * b_prime * mean_nu;
    let overlap_channel = s2 * b * b * nu_prime.iter().sum::<f64>() / m;
    Ok(SensitivityReport {
        alpha,
        lambda2: lam,
        lambda2_prime,
        b,
        b_prime,
        exposure_channel,
        overlap_channel,
        total: exposure_channel + overlap_channel,
        nu_prime,
        lambda_step,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels() {
        assert_eq!(share_label(0.178), "about one-sixth");
        assert_eq!(share_label(0.056), "close to zero");
        assert_eq!(share_label(0.33), "about one-third");
    }

    #[test]
    fn table_mapping_interpolates() {
        let m = Lambda2Mapping::Table {
            points: vec![(2.0, 0.5), (1.0, 0.9)],
        };
        assert!((m.eval(1.5).unwrap() - 0.7).abs() < 1e-15);
        assert!(m.eval(2.5).is_err());
        let json = r#"{"type":"linear","intercept":1.1,"slope":-0.2}"#;
        let lin: Lambda2Mapping = serde_json::from_str(json).unwrap();
        assert!((lin.eval(1.5).unwrap() - 0.8).abs() < 1e-15);
    }
}
