use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde_json::{json, Map, Value};

use netwaves::netgen::{Alignment, ConsumptionMode};
use netwaves::propagate::{DepthConvention, PathKind, Timing};
use netwaves_cli::commands::{self, Execution, Globals};
use netwaves_cli::config::{CompareMode, ExperimentConfig};
use netwaves_cli::manifest::write_manifest;
use netwaves_cli::verify::Level;
use netwaves_cli::{CliError, Result};

#[derive(Debug, Parser)]
#[command(name = "netwaves", version, about = "Overlapping propagation waves in production networks")]
struct Cli {
    /// JSON experiment config; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for every stochastic step of the command.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

fn serde_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Debug, Args, Default)]
struct NetworkArgs {
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// uniform | degree-proportional
    #[arg(long, value_parser = serde_enum::<ConsumptionMode>)]
    gamma_mode: Option<ConsumptionMode>,
    /// uniform | degree-proportional
    #[arg(long, value_parser = serde_enum::<Alignment>)]
    alignment: Option<Alignment>,
    /// supplier,buyer,weight edge list to ingest instead of generating
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long)]
    normalize: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a random production network and its degree-moment summary.
    Generate {
        #[command(flatten)]
        network: NetworkArgs,
    },
    /// Perron pair, dominant transient mode and aggregate loading.
    Spectrum {
        #[command(flatten)]
        network: NetworkArgs,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Simulate one output path (static, depth-l, micro or reduced).
    Simulate {
        #[command(flatten)]
        network: NetworkArgs,
        #[arg(long, value_parser = serde_enum::<PathKind>)]
        kind: Option<PathKind>,
        #[arg(long = "L")]
        l: Option<usize>,
        #[arg(long = "T")]
        t: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        lambda2: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long, value_parser = serde_enum::<Timing>)]
        timing: Option<Timing>,
        #[arg(long, value_parser = serde_enum::<DepthConvention>)]
        convention: Option<DepthConvention>,
    },
    /// Coupled static/dynamic replications with population formulas.
    Compare {
        #[command(flatten)]
        network: NetworkArgs,
        #[arg(long, value_enum)]
        mode: Option<CompareMode>,
        #[arg(long)]
        lambda2: Option<f64>,
        #[arg(long)]
        b: Option<f64>,
        #[arg(long = "T")]
        t: Option<usize>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        c: Option<f64>,
        /// Depths compared in l-economy mode.
        #[arg(long = "L", value_delimiter = ',')]
        l_values: Option<Vec<usize>>,
        #[arg(long, value_parser = serde_enum::<Timing>)]
        timing: Option<Timing>,
    },
    /// Attenuation table and implied granular shares.
    Calibrate {
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        shares: Option<Vec<f64>>,
    },
    /// Run the acceptance suite; exits 3 if any criterion fails.
    Verify {
        #[arg(long, value_enum)]
        level: Option<Level>,
        /// Subset of criterion ids, e.g. 4,12.
        #[arg(long, value_delimiter = ',')]
        criteria: Option<Vec<u8>>,
        /// Mutation hook: compute the trace-check spectra at lambda2 + DELTA.
        #[arg(long, hide = true, allow_hyphen_values = true)]
        tamper_lambda2: Option<f64>,
    },
    /// Summarize the tables in the output directory as markdown.
    Report,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Generate { .. } => "generate",
            Command::Spectrum { .. } => "spectrum",
            Command::Simulate { .. } => "simulate",
            Command::Compare { .. } => "compare",
            Command::Calibrate { .. } => "calibrate",
            Command::Verify { .. } => "verify",
            Command::Report => "report",
        }
    }
}

/// Set `root[block][key] = value` for every provided value.
fn overlay(root: &mut Map<String, Value>, block: &str, fields: Vec<(&str, Option<Value>)>) {
    let fields: Vec<_> = fields.into_iter().filter_map(|(k, v)| v.map(|v| (k, v))).collect();
    if fields.is_empty() {
        return;
    }
    let entry = root.entry(block).or_insert_with(|| json!({}));
    if entry.is_null() {
        *entry = json!({});
    }
    let obj = entry.as_object_mut().expect("config blocks are objects");
    for (k, v) in fields {
        obj.insert(k.to_string(), v);
    }
}

fn to_value<T: serde::Serialize>(v: Option<T>) -> Option<Value> {
    v.map(|x| serde_json::to_value(x).expect("serializable flag"))
}

fn network_overlay(root: &mut Map<String, Value>, a: NetworkArgs) {
    overlay(
        root,
        "network",
        vec![
            ("n", to_value(a.n)),
            ("alpha", to_value(a.alpha)),
            ("beta", to_value(a.beta)),
            ("gamma_mode", to_value(a.gamma_mode)),
            ("alignment", to_value(a.alignment)),
            ("edges", to_value(a.edges)),
            ("normalize", a.normalize.then_some(Value::Bool(true))),
        ],
    );
}

/// Effective config after flag overrides, plus the verify mutation delta.
fn effective_config(cli: &Cli, command: Command) -> Result<(ExperimentConfig, Option<f64>)> {
    let base = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let mut value = serde_json::to_value(&base)?;
    let root = value.as_object_mut().expect("config is an object");
    let name = command.name();
    let tamper = match command {
        Command::Generate { network } => {
            network_overlay(root, network);
            None
        }
        Command::Spectrum { network, tol } => {
            network_overlay(root, network);
            overlay(root, "spectrum", vec![("tol", to_value(tol))]);
            None
        }
        Command::Simulate {
            network,
            kind,
            l,
            t,
            sigma,
            lambda2,
            b,
            timing,
            convention,
        } => {
            network_overlay(root, network);
            overlay(
                root,
                "simulate",
                vec![
                    ("kind", to_value(kind)),
                    ("L", to_value(l)),
                    ("T", to_value(t)),
                    ("sigma", to_value(sigma)),
                    ("lambda2", to_value(lambda2)),
                    ("b", to_value(b)),
                    ("timing", to_value(timing)),
                    ("convention", to_value(convention)),
                ],
            );
            None
        }
        Command::Compare {
            network,
            mode,
            lambda2,
            b,
            t,
            sigma,
            reps,
            c,
            l_values,
            timing,
        } => {
            network_overlay(root, network);
            overlay(
                root,
                "compare",
                vec![
                    ("mode", to_value(mode)),
                    ("lambda2", to_value(lambda2)),
                    ("b", to_value(b)),
                    ("T", to_value(t)),
                    ("sigma", to_value(sigma)),
                    ("reps", to_value(reps)),
                    ("c", to_value(c)),
                    ("L_values", to_value(l_values)),
                    ("timing", to_value(timing)),
                ],
            );
            None
        }
        Command::Calibrate { grid, shares } => {
            overlay(
                root,
                "calibrate",
                vec![("grid", to_value(grid)), ("shares", to_value(shares))],
            );
            None
        }
        Command::Verify {
            level,
            criteria,
            tamper_lambda2,
        } => {
            overlay(
                root,
                "verify",
                vec![("level", to_value(level)), ("criteria", to_value(criteria))],
            );
            tamper_lambda2
        }
        Command::Report => None,
    };
    // `--seed` wins over every block seed; record it once at the top so the
    // written config reproduces the run.
    if let Some(seed) = cli.seed {
        root.insert("seed".into(), json!(seed));
        for block in root.values_mut() {
            if let Some(obj) = block.as_object_mut() {
                obj.remove("seed");
            }
        }
    }
    if let Some(out) = &cli.out {
        root.insert("out".into(), json!(out));
    }
    let cfg: ExperimentConfig = serde_json::from_value(value)
        .map_err(|e| CliError::Config(format!("{name}: {e}")))?;
    Ok((cfg, tamper))
}

fn run(mut cli: Cli) -> Result<()> {
    let started = Instant::now();
    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--threads: {e}")))?;
    }
    let command = std::mem::replace(&mut cli.command, Command::Report);
    let name = command.name();
    let (cfg, tamper) = effective_config(&cli, command)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("netwaves-out"));
    std::fs::create_dir_all(&out)?;
    let g = Globals {
        out: out.clone(),
        seed: cli.seed,
    };
    let exec: Execution = match name {
        "generate" => commands::generate(&cfg, &g)?,
        "spectrum" => commands::spectrum(&cfg, &g)?,
        "simulate" => commands::simulate(&cfg, &g)?,
        "compare" => commands::compare(&cfg, &g)?,
        "calibrate" => commands::calibrate(&cfg, &g)?,
        "verify" => commands::verify(&cfg, &g, tamper)?,
        _ => commands::report(&cfg, &g)?,
    };
    let run_id = cfg.run_id.clone().unwrap_or_else(|| name.to_string());
    write_manifest(
        &out,
        &run_id,
        name,
        &cfg,
        exec.seeds.clone(),
        &exec.files,
        started_unix,
        started.elapsed().as_secs_f64(),
    )?;
    let failed = exec.criteria.iter().filter(|c| !c.pass).count();
    if failed > 0 {
        return Err(CliError::CriteriaFailed {
            failed,
            total: exec.criteria.len(),
        });
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
