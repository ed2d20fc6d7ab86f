//! Network construction: truncated power-law degree sequences, locally even
//! share matrices, consumption weights and edge-list persistence.

use std::path::Path;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::linalg::CscMatrix;
use crate::rng::substream;

/// Tolerance on column sums and on the consumption-weight total.
pub const COLSUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeSequence {
    pub degrees: Vec<usize>,
    pub alpha: f64,
    pub d_max: usize,
}

impl DegreeSequence {
    /// Wrap an explicit degree vector (e.g. hand-built fixtures).
    pub fn from_degrees(degrees: Vec<usize>, alpha: f64) -> Result<Self> {
        let d_max = degrees.iter().copied().max().unwrap_or(0);
        if degrees.contains(&0) {
            return Err(invalid("degrees", "every degree must be at least 1"));
        }
        Ok(Self {
            degrees,
            alpha,
            d_max,
        })
    }

    pub fn len(&self) -> usize {
        self.degrees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.degrees.is_empty()
    }

    pub fn as_f64(&self) -> Vec<f64> {
        self.degrees.iter().map(|&d| d as f64).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegreeMoments {
    pub mean: f64,
    pub variance: f64,
    pub second_moment: f64,
    /// `(1 − n^{(1−α)/α}) / (1 − 1/n)`
    pub psi_alpha: f64,
    /// `(1 − n^{(2−α)/α}) / (1 − 1/n)`, the finite-size factor of `E[d²]`
    pub psi_second: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Alignment {
    #[default]
    Uniform,
    DegreeProportional,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ConsumptionMode {
    #[default]
    Uniform,
    DegreeProportional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProductionNetwork {
    a: CscMatrix,
    beta: f64,
    gamma: Vec<f64>,
    degrees: Option<DegreeSequence>,
}

impl ProductionNetwork {
    /// Validated constructor: nonnegative entries, zero diagonal, columns
    /// summing to `1 − beta`, `gamma` a probability vector.
    pub fn new(
        a: CscMatrix,
        beta: f64,
        gamma: Vec<f64>,
        degrees: Option<DegreeSequence>,
    ) -> Result<Self> {
        if !(beta > 0.0 && beta < 1.0) {
            return Err(invalid("beta", format!("{beta} not in (0, 1)")));
        }
        let n = a.n();
        check_gamma(&gamma, n)?;
        for (j, i, v) in a.entries() {
            if i == j {
                return Err(Error::InvalidNetwork(format!("self-supply at firm {i}")));
            }
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidNetwork(format!(
                    "entry a[{j},{i}] = {v} is not a finite nonnegative share"
                )));
            }
        }
        for (i, s) in a.col_sums().into_iter().enumerate() {
            if (s - (1.0 - beta)).abs() > COLSUM_TOL {
                return Err(Error::InvalidNetwork(format!(
                    "column {i} sums to {s}, expected {}",
                    1.0 - beta
                )));
            }
        }
        if let Some(d) = &degrees {
            if d.len() != n {
                return Err(invalid("degrees", "length differs from network size"));
            }
        }
        Ok(Self {
            a,
            beta,
            gamma,
            degrees,
        })
    }

    /// Skip invariant checks. Used for degenerate test economies (A = 0,
    /// rank-one operators with self-supply) that the model excludes.
    pub fn from_parts_unchecked(a: CscMatrix, beta: f64, gamma: Vec<f64>) -> Self {
        Self {
            a,
            beta,
            gamma,
            degrees: None,
        }
    }

    /// Same economy with `Aᵀ` as the propagation operator. Quantities in the
    /// micro model respond to past quantities through `Aᵀ`, so depth-1
    /// superpositions on this network reproduce micro paths.
    pub fn transposed_unchecked(&self) -> Self {
        Self {
            a: self.a.transpose(),
            beta: self.beta,
            gamma: self.gamma.clone(),
            degrees: None,
        }
    }

    pub fn n(&self) -> usize {
        self.a.n()
    }

    pub fn a(&self) -> &CscMatrix {
        &self.a
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn degrees(&self) -> Option<&DegreeSequence> {
        self.degrees.as_ref()
    }

    pub fn with_gamma(mut self, gamma: Vec<f64>) -> Result<Self> {
        check_gamma(&gamma, self.n())?;
        self.gamma = gamma;
        Ok(self)
    }

    pub fn with_consumption(self, mode: ConsumptionMode) -> Result<Self> {
        let degrees = self.degrees.as_ref().map(|d| d.degrees.clone());
        let gamma = consumption_weights(self.n(), mode, degrees.as_deref())?;
        self.with_gamma(gamma)
    }
}

fn check_gamma(gamma: &[f64], n: usize) -> Result<()> {
    if gamma.len() != n {
        return Err(invalid("gamma", format!("length {} != n = {n}", gamma.len())));
    }
    if gamma.iter().any(|&g| !(g >= 0.0)) {
        return Err(invalid("gamma", "weights must be nonnegative"));
    }
    let total: f64 = gamma.iter().sum();
    if (total - 1.0).abs() > COLSUM_TOL {
        return Err(invalid("gamma", format!("weights sum to {total}, not 1")));
    }
    Ok(())
}

/// Largest integer `k` with `k^alpha <= n`, robust to `powf` rounding.
pub fn degree_cutoff(n: usize, alpha: f64) -> usize {
    let nf = n as f64;
    let mut k = nf.powf(1.0 / alpha).round().max(1.0);
    let fits = |k: f64| k.powf(alpha) <= nf * (1.0 + 1e-12);
    while k > 1.0 && !fits(k) {
        k -= 1.0;
    }
    while fits(k + 1.0) {
        k += 1.0;
    }
    k as usize
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 1.0) {
        return Err(Error::NonNormalizableTail(alpha));
    }
    Ok(())
}

/// Inverse CDF of the continuous Pareto density on `[1, n^{1/α}]`.
fn truncated_pareto(u: f64, alpha: f64, inv_n: f64) -> f64 {
    (1.0 - u * (1.0 - inv_n)).powf(-1.0 / alpha)
}

/// Continuous draws underlying [`sample_degrees`] (same streams, before
/// flooring).
pub fn sample_latent_degrees(n: usize, alpha: f64, seed: u64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if n < 2 {
        return Err(invalid("n", "need at least two firms"));
    }
    sample_truncated_pareto(n, alpha, n as f64, seed)
}

/// `count` continuous draws on `[1, n^{1/α}]`, draw `i` from substream `i`.
pub fn sample_truncated_pareto(count: usize, alpha: f64, n: f64, seed: u64) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    if !(n > 1.0) {
        return Err(invalid("n", format!("{n} must exceed 1")));
    }
    let inv_n = 1.0 / n;
    Ok((0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            truncated_pareto(rng.random::<f64>(), alpha, inv_n)
        })
        .collect())
}

pub fn sample_degrees(n: usize, alpha: f64, seed: u64) -> Result<DegreeSequence> {
    check_alpha(alpha)?;
    if n < 2 {
        return Err(invalid("n", "need at least two firms"));
    }
    let d_max = degree_cutoff(n, alpha);
    let inv_n = 1.0 / n as f64;
    let degrees = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, i as u64);
            loop {
                let d = truncated_pareto(rng.random::<f64>(), alpha, inv_n).floor() as usize;
                if (1..=d_max).contains(&d) {
                    break d;
                }
            }
        })
        .collect();
    Ok(DegreeSequence {
        degrees,
        alpha,
        d_max,
    })
}

/// Closed-form moments of the continuous truncated Pareto on
/// `[1, n^{1/α}]`. `n` may be `f64::INFINITY`.
pub fn degree_moments(alpha: f64, n: f64) -> Result<DegreeMoments> {
    check_alpha(alpha)?;
    if !(n > 1.0) {
        return Err(invalid("n", format!("{n} must exceed 1")));
    }
    let norm = 1.0 - 1.0 / n;
    let psi = |p: f64| {
        if n.is_infinite() {
            if p < 0.0 {
                1.0
            } else {
                f64::NEG_INFINITY
            }
        } else {
            (1.0 - n.powf(p)) / norm
        }
    };
    let psi_alpha = psi((1.0 - alpha) / alpha);
    let mean = alpha / (alpha - 1.0) * psi_alpha;
    let (second, psi_second) = if (alpha - 2.0).abs() < 1e-9 {
        // ∫ x² · C x^{-3} dx = C ln d_max, with C ln d_max = ln(n) / (1 − 1/n)
        let v = n.ln() / norm;
        (v, v / alpha)
    } else {
        let p2 = psi((2.0 - alpha) / alpha);
        (alpha / (alpha - 2.0) * p2, p2)
    };
    Ok(DegreeMoments {
        mean,
        variance: second - mean * mean,
        second_moment: second,
        psi_alpha,
        psi_second,
    })
}

pub fn consumption_weights(
    n: usize,
    mode: ConsumptionMode,
    degrees: Option<&[usize]>,
) -> Result<Vec<f64>> {
    match mode {
        ConsumptionMode::Uniform => Ok(vec![1.0 / n as f64; n]),
        ConsumptionMode::DegreeProportional => {
            let d = degrees.ok_or_else(|| {
                invalid("gamma_mode", "degree-proportional weights need a degree sequence")
            })?;
            if d.len() != n || d.contains(&0) {
                return Err(invalid("degrees", "need n positive degrees"));
            }
            let total: usize = d.iter().sum();
            Ok(d.iter().map(|&x| x as f64 / total as f64).collect())
        }
    }
}

/// Pick `d` distinct suppliers `j != i` with probability proportional to
/// `weight[j]` (successive sampling without replacement).
fn weighted_suppliers<R: Rng>(
    rng: &mut R,
    i: usize,
    d: usize,
    cumulative: &[f64],
    weights: &[usize],
) -> Vec<usize> {
    let n = weights.len();
    let total = *cumulative.last().unwrap();
    let mut chosen: Vec<usize> = Vec::with_capacity(d);
    let mut attempts = 0usize;
    while chosen.len() < d && attempts < 50 * d + 200 {
        attempts += 1;
        let u = rng.random::<f64>() * total;
        let j = cumulative.partition_point(|&c| c <= u).min(n - 1);
        if j != i && !chosen.contains(&j) {
            chosen.push(j);
        }
    }
    if chosen.len() < d {
        // heavy rejection: fall back to exact weighted sampling over j != i
        let skip = |k: usize| if k >= i { k + 1 } else { k };
        chosen = index::sample_weighted(rng, n - 1, |k| weights[skip(k)] as f64, d)
            .expect("positive weights")
            .into_iter()
            .map(skip)
            .collect();
    }
    chosen
}

pub fn build_share_matrix(
    degrees: &DegreeSequence,
    beta: f64,
    alignment: Alignment,
    seed: u64,
) -> Result<ProductionNetwork> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid("beta", format!("{beta} not in (0, 1)")));
    }
    let n = degrees.len();
    if n < 2 {
        return Err(invalid("degrees", "need at least two firms"));
    }
    for (firm, &d) in degrees.degrees.iter().enumerate() {
        if d == 0 {
            return Err(invalid("degrees", format!("firm {firm} has degree 0")));
        }
        if d >= n {
            return Err(Error::TooManySuppliers {
                firm,
                degree: d,
                available: n - 1,
            });
        }
    }
    let cumulative: Vec<f64> = degrees
        .degrees
        .iter()
        .scan(0.0, |acc, &d| {
            *acc += d as f64;
            Some(*acc)
        })
        .collect();
    let columns: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let d = degrees.degrees[i];
            let mut rng = substream(seed, i as u64);
            let suppliers: Vec<usize> = match alignment {
                Alignment::Uniform => index::sample(&mut rng, n - 1, d)
                    .into_iter()
                    .map(|k| if k >= i { k + 1 } else { k })
                    .collect(),
                Alignment::DegreeProportional => {
                    weighted_suppliers(&mut rng, i, d, &cumulative, &degrees.degrees)
                }
            };
            let w = (1.0 - beta) / d as f64;
            suppliers.into_iter().map(|j| (j, w)).collect()
        })
        .collect();
    let a = CscMatrix::from_columns(n, columns);
    let gamma = consumption_weights(n, ConsumptionMode::Uniform, None)?;
    ProductionNetwork::new(a, beta, gamma, Some(degrees.clone()))
}

#[derive(Debug, Serialize, Deserialize)]
struct EdgeRow {
    supplier: usize,
    buyer: usize,
    weight: f64,
}

/// Read a `supplier,buyer,weight` edge list. Row numbers in errors count
/// data rows from 1.
pub fn ingest_network(path: &Path, beta: f64, normalize: bool) -> Result<ProductionNetwork> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(invalid("beta", format!("{beta} not in (0, 1)")));
    }
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut edges = Vec::new();
    for (k, rec) in reader.deserialize::<EdgeRow>().enumerate() {
        let row = k + 1;
        let e = rec.map_err(|err| Error::Ingest {
            row,
            reason: err.to_string(),
        })?;
        if e.supplier == e.buyer {
            return Err(Error::Ingest {
                row,
                reason: format!("self-loop at firm {}", e.supplier),
            });
        }
        if !(e.weight >= 0.0) || !e.weight.is_finite() {
            return Err(Error::Ingest {
                row,
                reason: format!("weight {} is not a finite nonnegative number", e.weight),
            });
        }
        edges.push(e);
    }
    let n = edges
        .iter()
        .map(|e| e.supplier.max(e.buyer) + 1)
        .max()
        .unwrap_or(0);
    if n < 2 {
        return Err(Error::InvalidNetwork("edge list defines fewer than two firms".into()));
    }
    let mut columns = vec![Vec::new(); n];
    for e in &edges {
        columns[e.buyer].push((e.supplier, e.weight));
    }
    let mut a = CscMatrix::from_columns(n, columns);
    if normalize {
        let sums = a.col_sums();
        if let Some(firm) = sums.iter().position(|&s| s <= 0.0) {
            return Err(Error::ZeroColumn { firm });
        }
        let target = 1.0 - beta;
        let cols = (0..n)
            .map(|i| a.column(i).map(|(j, v)| (j, v / sums[i] * target)).collect())
            .collect();
        a = CscMatrix::from_columns(n, cols);
    }
    let gamma = consumption_weights(n, ConsumptionMode::Uniform, None)?;
    ProductionNetwork::new(a, beta, gamma, None)
}

/// JSON sidecar stored next to a persisted edge list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSidecar {
    pub n: usize,
    pub beta: f64,
    pub gamma_mode: ConsumptionMode,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
}

pub fn write_edge_list(net: &ProductionNetwork, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for (supplier, buyer, weight) in net.a().entries() {
        w.serialize(EdgeRow {
            supplier,
            buyer,
            weight,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sidecar(sidecar: &NetworkSidecar, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(sidecar)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn read_sidecar(path: &Path) -> Result<NetworkSidecar> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}
