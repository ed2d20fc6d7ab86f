//! Subcommand bodies. Each writes its tables into the output directory and
//! reports the files and seeds it used; stochastic work is split into
//! per-replication seeds so the merge order never depends on scheduling.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use netwaves::calibrate::{
    attenuation_table, sensitivity_decomposition, share_label, DEFAULT_GRID,
    DEFAULT_STATIC_SHARES,
};
use netwaves::netgen::{
    build_share_matrix, degree_moments, ingest_network, read_sidecar, sample_degrees,
    sample_latent_degrees, write_edge_list, write_sidecar, ConsumptionMode, NetworkSidecar,
    ProductionNetwork,
};
use netwaves::propagate::{
    draw_innovations, draw_shocks, simulate_l_economy, simulate_micro, simulate_reduced,
    static_series_network, static_series_twomode, DepthConvention, MicroOptions, OutputPath,
    PathKind, ShockPanel,
};
use netwaves::riskstats::{
    population_l_variance, population_static_variance, twomode_variances, RiskMeta, RiskReport,
};
use netwaves::rng::child_seed;
use netwaves::spectral::{
    degree_proxy, spectral_summary, SpectralSummary, DEFAULT_MAX_ITER, DEFAULT_TOL,
};

use crate::config::{require, CompareMode, ExperimentConfig};
use crate::verify::{run_criterion, criterion_ids, CriterionResult, VerifyOptions, DEFAULT_VERIFY_SEED};
use crate::{CliError, Result};

// Purpose tags for seed derivation, so the network and the shocks drawn
// from one user seed use unrelated streams.
const TAG_DEGREES: u64 = 1;
const TAG_MATRIX: u64 = 2;
const TAG_SHOCKS: u64 = 3;

#[derive(Debug, Clone)]
pub struct Globals {
    pub out: PathBuf,
    pub seed: Option<u64>,
}

#[derive(Debug, Default)]
pub struct Execution {
    pub files: Vec<PathBuf>,
    pub seeds: Vec<u64>,
    /// Criterion rows (verify only).
    pub criteria: Vec<CriterionResult>,
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub struct LoadedNetwork {
    pub net: ProductionNetwork,
    pub sidecar: NetworkSidecar,
    pub seed: Option<u64>,
}

/// Network from the `network` block: ingest `edges` when given (reading a
/// `.json` sidecar next to it if present), otherwise generate.
pub fn load_network(cfg: &ExperimentConfig, g: &Globals) -> Result<LoadedNetwork> {
    let block = cfg
        .network
        .clone()
        .ok_or_else(|| CliError::Config("missing `network` block".into()))?;
    if let Some(edges) = &block.edges {
        let side_path = edges.with_extension("json");
        let sidecar = side_path
            .exists()
            .then(|| read_sidecar(&side_path))
            .transpose()?;
        let beta = require(block.beta.or(sidecar.as_ref().map(|s| s.beta)), "network.beta")?;
        let mode = match (&sidecar, block.gamma_mode) {
            (Some(s), ConsumptionMode::Uniform) => s.gamma_mode,
            (_, m) => m,
        };
        if mode != ConsumptionMode::Uniform {
            return Err(CliError::Config(
                "network.gamma_mode: ingested networks carry no degree sequence; use uniform".into(),
            ));
        }
        let net = ingest_network(edges, beta, block.normalize)?;
        let sidecar = NetworkSidecar {
            n: net.n(),
            beta,
            gamma_mode: mode,
            alpha: sidecar.as_ref().and_then(|s| s.alpha),
            seed: sidecar.as_ref().and_then(|s| s.seed),
        };
        return Ok(LoadedNetwork {
            net,
            sidecar,
            seed: None,
        });
    }
    let n = require(block.n, "network.n")?;
    let alpha = require(block.alpha, "network.alpha")?;
    let beta = require(block.beta, "network.beta")?;
    let seed = cfg.resolve_seed(g.seed, block.seed, "network")?;
    let degrees = sample_degrees(n, alpha, child_seed(seed, TAG_DEGREES))?;
    let net = build_share_matrix(&degrees, beta, block.alignment, child_seed(seed, TAG_MATRIX))?
        .with_consumption(block.gamma_mode)?;
    Ok(LoadedNetwork {
        net,
        sidecar: NetworkSidecar {
            n,
            beta,
            gamma_mode: block.gamma_mode,
            alpha: Some(alpha),
            seed: Some(seed),
        },
        seed: Some(seed),
    })
}

#[derive(Debug, Serialize)]
struct MomentRow {
    statistic: &'static str,
    closed_form: f64,
    latent_sample: f64,
    integer_degrees: f64,
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let k = x.len() as f64;
    let m = x.iter().sum::<f64>() / k;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / k)
}

pub fn generate(cfg: &ExperimentConfig, g: &Globals) -> Result<Execution> {
    let loaded = load_network(cfg, g)?;
    let seed = loaded
        .seed
        .ok_or_else(|| CliError::Config("generate needs network.n/alpha/beta, not edges".into()))?;
    let alpha = loaded.sidecar.alpha.expect("generated network has alpha");
    let n = loaded.net.n();
    let edges = g.out.join("network.csv");
    let side = g.out.join("network.json");
    write_edge_list(&loaded.net, &edges)?;
    write_sidecar(&loaded.sidecar, &side)?;

    let closed = degree_moments(alpha, n as f64)?;
    let latent = sample_latent_degrees(n, alpha, child_seed(seed, TAG_DEGREES))?;
    let ints = loaded.net.degrees().expect("generated degrees").as_f64();
    let (lm, lv) = mean_var(&latent);
    let (im, iv) = mean_var(&ints);
    let rows = [
        MomentRow {
            statistic: "mean",
            closed_form: closed.mean,
            latent_sample: lm,
            integer_degrees: im,
        },
        MomentRow {
            statistic: "variance",
            closed_form: closed.variance,
            latent_sample: lv,
            integer_degrees: iv,
        },
        MomentRow {
            statistic: "second_moment",
            closed_form: closed.second_moment,
            latent_sample: lv + lm * lm,
            integer_degrees: iv + im * im,
        },
    ];
    let moments = g.out.join("degree_moments.csv");
    write_csv(&moments, &rows)?;
    println!("generated n={n} alpha={alpha} beta={} ({} edges)", loaded.sidecar.beta, loaded.net.a().nnz());
    for r in &rows {
        println!(
            "  {:<14} closed form {:>10.4}  latent draws {:>10.4}  integer degrees {:>10.4}",
            r.statistic, r.closed_form, r.latent_sample, r.integer_degrees
        );
    }
    Ok(Execution {
        files: vec![edges, side, moments],
        seeds: vec![seed],
        ..Default::default()
    })
}

#[derive(Debug, Serialize)]
struct SpectrumRow {
    n: usize,
    lambda1: f64,
    lambda2: f64,
    lambda2_mod: f64,
    lambda2_complex: bool,
    lambda2_tie: bool,
    b: f64,
    perron_support: usize,
    iterations: usize,
    proxy_b_alpha: Option<f64>,
    proxy_cosine: Option<f64>,
}

pub fn compute_spectrum(cfg: &ExperimentConfig, net: &ProductionNetwork) -> Result<SpectralSummary> {
    let block = cfg.spectrum.clone().unwrap_or_default();
    Ok(spectral_summary(
        net,
        block.tol.unwrap_or(DEFAULT_TOL),
        block.max_iter.unwrap_or(DEFAULT_MAX_ITER),
    )?)
}

pub fn spectrum(cfg: &ExperimentConfig, g: &Globals) -> Result<Execution> {
    let loaded = load_network(cfg, g)?;
    let summary = compute_spectrum(cfg, &loaded.net)?;
    let proxy = match loaded.net.degrees() {
        Some(d) => degree_proxy(&d.as_f64(), loaded.net.gamma(), Some(&summary.u2_norm)).ok(),
        None => None,
    };
    let row = SpectrumRow {
        n: loaded.net.n(),
        lambda1: summary.lambda1,
        lambda2: summary.lambda2,
        lambda2_mod: summary.lambda2_mod,
        lambda2_complex: summary.lambda2_complex,
        lambda2_tie: summary.lambda2_tie,
        b: summary.b,
        perron_support: summary.perron_support,
        iterations: summary.iterations,
        proxy_b_alpha: proxy.as_ref().map(|p| p.b_alpha),
        proxy_cosine: proxy.as_ref().and_then(|p| p.cosine_true_proxy),
    };
    let csv_path = g.out.join("spectrum.csv");
    write_csv(&csv_path, &[&row])?;
    let json_path = g.out.join("spectrum.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&summary)? + "\n")?;
    println!(
        "lambda1 = {:.12}  lambda2 = {:.12}{}  |lambda2| = {:.12}  b = {:.6}",
        row.lambda1,
        row.lambda2,
        if row.lambda2_complex { " (complex pair)" } else { "" },
        row.lambda2_mod,
        row.b
    );
    Ok(Execution {
        files: vec![csv_path, json_path],
        seeds: loaded.seed.into_iter().collect(),
        ..Default::default()
    })
}

fn shock_panel(n: usize, t_len: usize, sigma: f64, seed: u64) -> Result<ShockPanel> {
    if sigma == 0.0 {
        return Ok(ShockPanel::from_raw(vec![vec![0.0; n]; t_len], 0.0, Some(seed))?);
    }
    Ok(draw_shocks(n, t_len, sigma, seed)?)
}

fn real_lambda2(summary: &SpectralSummary) -> Result<f64> {
    summary.real_lambda2().map_err(|e| {
        CliError::Config(format!(
            "{e} (try compare --mode l-economy, or simulate --kind depth-l/micro)"
        ))
    })
}

#[derive(Debug, Serialize)]
struct PathRow {
    t: usize,
    y: f64,
    y_static: Option<f64>,
    recursion_residual: Option<f64>,
}

pub fn simulate(cfg: &ExperimentConfig, g: &Globals) -> Result<Execution> {
    let block = cfg
        .simulate
        .clone()
        .ok_or_else(|| CliError::Config("missing `simulate` block".into()))?;
    let seed = cfg.resolve_seed(g.seed, block.seed, "simulate")?;
    let shock_seed = child_seed(seed, TAG_SHOCKS);
    let mut seeds = vec![seed];
    let (path, stat): (OutputPath, Option<OutputPath>) = match block.kind {
        PathKind::Reduced => {
            let (lambda2, b, eta) = match (block.lambda2, block.b) {
                (Some(l), Some(b)) => (l, b, draw_innovations(block.t, block.sigma, shock_seed)?),
                _ => {
                    let loaded = load_network(cfg, g)?;
                    seeds.extend(loaded.seed);
                    let summary = compute_spectrum(cfg, &loaded.net)?;
                    let panel = shock_panel(loaded.net.n(), block.t, block.sigma, shock_seed)?;
                    (real_lambda2(&summary)?, summary.b, panel.eta(&summary.u2_norm))
                }
            };
            (
                simulate_reduced(lambda2, b, &eta, block.timing)?,
                Some(static_series_twomode(lambda2, b, &eta)?),
            )
        }
        kind => {
            let loaded = load_network(cfg, g)?;
            seeds.extend(loaded.seed);
            let panel = shock_panel(loaded.net.n(), block.t, block.sigma, shock_seed)?;
            let stat = static_series_network(&loaded.net, &panel)?;
            let path = match kind {
                PathKind::Static => stat.clone(),
                PathKind::DepthL => {
                    let l = require(block.l, "simulate.L")?;
                    simulate_l_economy(&loaded.net, &panel, l, block.convention)?
                }
                PathKind::Micro => simulate_micro(&loaded.net, &panel, &MicroOptions::default())?,
                PathKind::Reduced => unreachable!(),
            };
            (path, Some(stat))
        }
    };
    let residual = path.micro.as_ref().map(|m| m.recursion_residual.clone());
    let rows: Vec<PathRow> = path
        .y
        .iter()
        .enumerate()
        .map(|(t, &y)| PathRow {
            t: t + 1,
            y,
            y_static: stat.as_ref().map(|s| s.y[t]),
            recursion_residual: residual.as_ref().map(|r| r[t]),
        })
        .collect();
    let file = g.out.join("path.csv");
    write_csv(&file, &rows)?;
    println!("simulated {} dates ({:?})", rows.len(), block.kind);
    Ok(Execution {
        files: vec![file],
        seeds,
        ..Default::default()
    })
}

#[derive(Debug, Clone, Serialize)]
struct CompareRow {
    rep: String,
    seed: Option<u64>,
    #[serde(rename = "L")]
    l: Option<usize>,
    phi: f64,
    phi_star: f64,
    phi_hat: f64,
    phi_hat_star: f64,
    ratio_hat: f64,
    omega_c: f64,
    omega_c_star: f64,
    omega_hat_c: f64,
    omega_hat_c_star: f64,
    r: Option<f64>,
    kappa: f64,
}

impl CompareRow {
    fn from_report(rep: usize, seed: u64, l: Option<usize>, r: &RiskReport) -> Self {
        Self {
            rep: rep.to_string(),
            seed: Some(seed),
            l,
            phi: r.phi,
            phi_star: r.phi_star,
            phi_hat: r.phi_hat,
            phi_hat_star: r.phi_hat_star,
            ratio_hat: if r.phi_hat_star > 0.0 { r.phi_hat / r.phi_hat_star } else { 0.0 },
            omega_c: r.omega_c,
            omega_c_star: r.omega_c_star,
            omega_hat_c: r.omega_hat_c,
            omega_hat_c_star: r.omega_hat_c_star,
            r: r.r,
            kappa: r.kappa,
        }
    }

    fn mean(rows: &[&CompareRow]) -> Self {
        let k = rows.len() as f64;
        let avg = |f: fn(&CompareRow) -> f64| rows.iter().map(|r| f(r)).sum::<f64>() / k;
        Self {
            rep: "mean".into(),
            seed: None,
            l: rows[0].l,
            phi: avg(|r| r.phi),
            phi_star: avg(|r| r.phi_star),
            phi_hat: avg(|r| r.phi_hat),
            phi_hat_star: avg(|r| r.phi_hat_star),
            ratio_hat: avg(|r| r.ratio_hat),
            omega_c: avg(|r| r.omega_c),
            omega_c_star: avg(|r| r.omega_c_star),
            omega_hat_c: avg(|r| r.omega_hat_c),
            omega_hat_c_star: avg(|r| r.omega_hat_c_star),
            r: rows[0].r,
            kappa: avg(|r| r.kappa),
        }
    }
}

pub fn compare(cfg: &ExperimentConfig, g: &Globals) -> Result<Execution> {
    let block = cfg
        .compare
        .clone()
        .ok_or_else(|| CliError::Config("missing `compare` block".into()))?;
    if block.reps == 0 {
        return Err(CliError::Config("compare.reps must be at least 1".into()));
    }
    let seed = cfg.resolve_seed(g.seed, block.seed, "compare")?;
    let shock_seed = child_seed(seed, TAG_SHOCKS);
    let mut seeds = vec![seed];
    let sigma = block.sigma;
    let rep_seeds: Vec<u64> = (0..block.reps).map(|r| child_seed(shock_seed, r as u64)).collect();
    let mut rows: Vec<CompareRow> = match block.mode {
        CompareMode::TwoMode => {
            let explicit = block.lambda2.zip(block.b);
            let network = match explicit {
                Some(_) => None,
                None => {
                    let loaded = load_network(cfg, g)?;
                    seeds.extend(loaded.seed);
                    let summary = compute_spectrum(cfg, &loaded.net)?;
                    Some((loaded.net, summary))
                }
            };
            let (lambda2, b) = match (&explicit, &network) {
                (Some(p), _) => *p,
                (None, Some((_, s))) => (real_lambda2(s)?, s.b),
                _ => unreachable!(),
            };
            let (phi, phi_star) = twomode_variances(b, lambda2, sigma)?;
            rep_seeds
                .par_iter()
                .enumerate()
                .map(|(rep, &s)| -> Result<CompareRow> {
                    let eta = match &network {
                        None => draw_innovations(block.t, sigma, s)?,
                        Some((net, summary)) => {
                            shock_panel(net.n(), block.t, sigma, s)?.eta(&summary.u2_norm)
                        }
                    };
                    let dynamic = simulate_reduced(lambda2, b, &eta, block.timing)?;
                    let stat = static_series_twomode(lambda2, b, &eta)?;
                    let meta = RiskMeta {
                        n: network.as_ref().map(|(net, _)| net.n()),
                        t: block.t,
                        lambda2: Some(lambda2),
                        sigma,
                        b: Some(b),
                        seed: Some(s),
                    };
                    let report = RiskReport::from_paths(&dynamic, &stat, phi, phi_star, block.c, meta)?;
                    Ok(CompareRow::from_report(rep, s, None, &report))
                })
                .collect::<Result<_>>()?
        }
        CompareMode::LEconomy => {
            let loaded = load_network(cfg, g)?;
            seeds.extend(loaded.seed);
            let net = &loaded.net;
            if block.l_values.is_empty() || block.l_values.contains(&0) {
                return Err(CliError::Config("compare.L_values must be positive depths".into()));
            }
            let phi_star = population_static_variance(net, sigma)?;
            let phis: Vec<f64> = block
                .l_values
                .iter()
                .map(|&l| population_l_variance(net, sigma, l, 1e-15, DepthConvention::LayerBlock))
                .collect::<netwaves::Result<_>>()?;
            let per_rep: Vec<Vec<CompareRow>> = rep_seeds
                .par_iter()
                .enumerate()
                .map(|(rep, &s)| -> Result<Vec<CompareRow>> {
                    let panel = shock_panel(net.n(), block.t, sigma, s)?;
                    let stat = static_series_network(net, &panel)?;
                    block
                        .l_values
                        .iter()
                        .zip(&phis)
                        .map(|(&l, &phi)| {
                            let dynamic = simulate_l_economy(net, &panel, l, DepthConvention::LayerBlock)?;
                            let meta = RiskMeta {
                                n: Some(net.n()),
                                t: block.t,
                                lambda2: None,
                                sigma,
                                b: None,
                                seed: Some(s),
                            };
                            let report = RiskReport::from_paths(&dynamic, &stat, phi, phi_star, block.c, meta)?;
                            Ok(CompareRow::from_report(rep, s, Some(l), &report))
                        })
                        .collect()
                })
                .collect::<Result<_>>()?;
            per_rep.into_iter().flatten().collect()
        }
    };
    let mut keys: Vec<Option<usize>> = rows.iter().map(|r| r.l).collect();
    keys.sort();
    keys.dedup();
    let summaries: Vec<CompareRow> = keys
        .iter()
        .map(|k| CompareRow::mean(&rows.iter().filter(|r| r.l == *k).collect::<Vec<_>>()))
        .collect();
    for s in &summaries {
        match s.l {
            Some(l) => println!("L={l}: mean phi_hat/phi_hat* = {:.6} over {} reps", s.ratio_hat, block.reps),
            None => println!("mean phi_hat/phi_hat* = {:.6} over {} reps", s.ratio_hat, block.reps),
        }
    }
    rows.extend(summaries);
    let file = g.out.join("compare.csv");
    write_csv(&file, &rows)?;
    Ok(Execution {
        files: vec![file],
        seeds,
        ..Default::default()
    })
}

#[derive(Debug, Serialize)]
struct CalibrationCsvRow {
    lambda2: f64,
    r: f64,
    static_share: f64,
    dynamic_share: f64,
    label: String,
}

pub fn calibrate(cfg: &ExperimentConfig, g: &Globals) -> Result<Execution> {
    let block = cfg.calibrate.clone().unwrap_or_default();
    let grid = block.grid.unwrap_or_else(|| DEFAULT_GRID.to_vec());
    let shares = block.shares.unwrap_or_else(|| DEFAULT_STATIC_SHARES.to_vec());
    let table = attenuation_table(&grid)?.with_shares(&shares)?;
    let rows: Vec<CalibrationCsvRow> = table
        .rows
        .iter()
        .map(|r| {
            let dynamic_share = r.dynamic_share.unwrap_or(f64::NAN);
            CalibrationCsvRow {
                lambda2: r.lambda2,
                r: r.r,
                static_share: r.static_share.unwrap_or(f64::NAN),
                dynamic_share,
                label: share_label(dynamic_share),
            }
        })
        .collect();
    let file = g.out.join("calibration.csv");
    write_csv(&file, &rows)?;
    let mut files = vec![file];
    for r in &rows {
        println!(
            "lambda2={:.2} R={:.4} static {:.2} -> dynamic {:.4} ({})",
            r.lambda2, r.r, r.static_share, r.dynamic_share, r.label
        );
    }
    if let Some(s) = block.sensitivity {
        let report = sensitivity_decomposition(s.alpha, &s.mapping, &s.loading, s.sigma, s.t, s.h)?;
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
        println!(
            "d E[phi_hat]/d alpha = {:.6} (exposure {:.6}, overlap {:.6})",
            report.total, report.exposure_channel, report.overlap_channel
        );
        let path = g.out.join("sensitivity.json");
        std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
        files.push(path);
    }
    Ok(Execution {
        files,
        ..Default::default()
    })
}

pub fn verify(
    cfg: &ExperimentConfig,
    g: &Globals,
    tamper_lambda2: Option<f64>,
) -> Result<Execution> {
    let block = cfg.verify.clone().unwrap_or_default();
    let opts = VerifyOptions {
        level: block.level,
        seed: g.seed.or(block.seed).or(cfg.seed).unwrap_or(DEFAULT_VERIFY_SEED),
        tamper_lambda2,
    };
    let ids = block.criteria.unwrap_or_else(criterion_ids);
    let mut results = Vec::new();
    for id in ids {
        let r = run_criterion(id, &opts)
            .ok_or_else(|| CliError::Config(format!("verify.criteria: no criterion {id}")))?;
        println!("{}", r.line());
        results.push(r);
    }
    let file = g.out.join("verify.csv");
    write_csv(&file, &results)?;
    Ok(Execution {
        files: vec![file],
        seeds: vec![opts.seed],
        criteria: results,
    })
}

fn markdown_table(path: &Path, max_rows: usize) -> Result<String> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let mut s = String::new();
    let _ = writeln!(s, "| {} |", headers.iter().collect::<Vec<_>>().join(" | "));
    let _ = writeln!(s, "|{}", "---|".repeat(headers.len()));
    let mut total = 0;
    for rec in reader.records() {
        let rec = rec?;
        total += 1;
        if total <= max_rows {
            let _ = writeln!(s, "| {} |", rec.iter().collect::<Vec<_>>().join(" | "));
        }
    }
    if total > max_rows {
        let _ = writeln!(s, "\n({} of {total} rows shown)", max_rows);
    }
    Ok(s)
}

/// Collect the tables found in the output directory into `report.md`,
/// plus a gnuplot script for `path.csv` when present.
pub fn report(_cfg: &ExperimentConfig, g: &Globals) -> Result<Execution> {
    let sections = [
        ("verify.csv", "Acceptance ledger"),
        ("spectrum.csv", "Spectrum"),
        ("degree_moments.csv", "Degree moments"),
        ("compare.csv", "Static vs dynamic comparison"),
        ("calibration.csv", "Calibration"),
        ("path.csv", "Output path"),
    ];
    let mut md = String::from("# netwaves report\n");
    let mut found = 0;
    for (file, title) in sections {
        let p = g.out.join(file);
        if p.exists() {
            found += 1;
            let _ = write!(md, "\n## {title}\n\n{}", markdown_table(&p, 40)?);
        }
    }
    if found == 0 {
        return Err(CliError::Config(format!(
            "no result tables in {}; run another command with this --out first",
            g.out.display()
        )));
    }
    let mut files = Vec::new();
    if g.out.join("path.csv").exists() {
        let gp = g.out.join("plot_path.gp");
        std::fs::write(
            &gp,
            "set datafile separator ','\nset key autotitle columnhead\nset xlabel 't'\n\
             plot 'path.csv' using 1:2 with lines, '' using 1:3 with lines\n",
        )?;
        files.push(gp);
    }
    let file = g.out.join("report.md");
    std::fs::write(&file, md)?;
    files.insert(0, file);
    println!("wrote report for {found} tables");
    Ok(Execution {
        files,
        ..Default::default()
    })
}
