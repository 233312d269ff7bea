use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand, ValueEnum};
use shrimp_cli::commands::{cmd_impute, cmd_pool, cmd_selftest, cmd_simulate};
use shrimp_cli::config::RunConfig;
use shrimp_core::dataset::ClusterColumn;
use shrimp_core::lme::SigmaEMode;
use shrimp_core::sim_study::Arm;

#[derive(Parser)]
#[command(name = "shrimp", version, about = "Multiple imputation of clustered data with spike-and-slab variable selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Impute a CSV file M times
    Impute(ImputeArgs),
    /// Run the Monte Carlo study and write its metrics table
    Simulate(SimulateArgs),
    /// Pool per-copy estimates with Rubin's rules
    Pool(PoolArgs),
    /// Check the samplers against their target distributions
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CliSigmaEMode {
    Conjugate,
    AppendixLiteral,
}

impl From<CliSigmaEMode> for SigmaEMode {
    fn from(m: CliSigmaEMode) -> Self {
        match m {
            CliSigmaEMode::Conjugate => SigmaEMode::Conjugate,
            CliSigmaEMode::AppendixLiteral => SigmaEMode::AppendixLiteral,
        }
    }
}

#[derive(Args)]
struct Common {
    /// JSON config file; flags override its settings
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores, capped by copies or replicates)
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct PlanArgs {
    /// Number of imputed copies (M)
    #[arg(long)]
    copies: Option<usize>,
    /// Imputation cycles per copy
    #[arg(long)]
    cycles: Option<usize>,
    /// Gibbs iterations per variable per cycle
    #[arg(long = "inner-iters")]
    inner_iters: Option<usize>,
    #[arg(long = "sigma-e-mode", value_enum)]
    sigma_e_mode: Option<CliSigmaEMode>,
    /// Center and scale continuous covariates in every imputation model
    #[arg(long)]
    standardize: bool,
}

#[derive(Args)]
struct ImputeArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    plan: PlanArgs,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long = "output-dir")]
    output_dir: Option<PathBuf>,
    /// Cluster identifier column, by name or 0-based index
    #[arg(long = "cluster-column")]
    cluster_column: Option<String>,
    #[arg(long = "missing-token")]
    missing_token: Option<String>,
    /// Treat columns whose observed values are all 0/1 as binary
    #[arg(long = "infer-binary")]
    infer_binary: bool,
    /// Also write per-copy chain traces
    #[arg(long)]
    traces: bool,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    plan: PlanArgs,
    #[arg(long = "output-dir")]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    replicates: Option<usize>,
    /// Comma-separated methods: bd, cc, shrimp
    #[arg(long, value_delimiter = ',')]
    arms: Option<Vec<Arm>>,
    /// 10 replicates with 5 copies unless set explicitly
    #[arg(long)]
    quick: bool,
}

#[derive(Args)]
struct PoolArgs {
    #[command(flatten)]
    common: Common,
    /// CSV with columns copy, coefficient, estimate, se
    #[arg(long)]
    input: Option<PathBuf>,
    /// Write pooled.csv here instead of standard output
    #[arg(long = "output-dir")]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    #[command(flatten)]
    common: Common,
    /// Smaller sample sizes
    #[arg(long)]
    quick: bool,
    /// Replace the residual-variance update with one that ignores the
    /// current state; the self-test is expected to fail
    #[arg(long = "inject-fault")]
    inject_fault: bool,
}

fn base_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if common.threads.is_some() {
        cfg.threads = common.threads;
    }
    Ok(cfg)
}

fn apply_plan(cfg: &mut RunConfig, plan: &PlanArgs) {
    if let Some(v) = plan.copies {
        cfg.copies = v;
    }
    if let Some(v) = plan.cycles {
        cfg.cycles = v;
    }
    if let Some(v) = plan.inner_iters {
        cfg.inner_iterations = v;
    }
    if let Some(m) = plan.sigma_e_mode {
        cfg.sigma_e_mode = m.into();
    }
    if plan.standardize {
        cfg.standardize = true;
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Impute(a) => {
            let mut cfg = base_config(&a.common)?;
            apply_plan(&mut cfg, &a.plan);
            if a.input.is_some() {
                cfg.input = a.input;
            }
            if a.output_dir.is_some() {
                cfg.output_dir = a.output_dir;
            }
            if let Some(c) = a.cluster_column {
                cfg.cluster_column = match c.parse::<usize>() {
                    Ok(i) => ClusterColumn::Index(i),
                    Err(_) => ClusterColumn::Name(c),
                };
            }
            if let Some(t) = a.missing_token {
                cfg.missing_token = t;
            }
            if a.infer_binary {
                cfg.infer_binary = true;
            }
            if a.traces {
                cfg.traces = true;
            }
            cmd_impute(&cfg)
        }
        Command::Simulate(a) => {
            let mut cfg = base_config(&a.common)?;
            if a.quick || cfg.quick {
                cfg.quick = true;
                cfg.simulation.replicates = 10;
                cfg.copies = 5;
            }
            apply_plan(&mut cfg, &a.plan);
            if let Some(r) = a.replicates {
                cfg.simulation.replicates = r;
            }
            if let Some(arms) = a.arms {
                cfg.arms = arms;
            }
            if a.output_dir.is_some() {
                cfg.output_dir = a.output_dir;
            }
            cmd_simulate(&cfg)
        }
        Command::Pool(a) => {
            let mut cfg = base_config(&a.common)?;
            if a.input.is_some() {
                cfg.input = a.input;
            }
            if a.output_dir.is_some() {
                cfg.output_dir = a.output_dir;
            }
            cmd_pool(&cfg)
        }
        Command::Selftest(a) => {
            let mut cfg = base_config(&a.common)?;
            if a.quick {
                cfg.quick = true;
            }
            cmd_selftest(&cfg, a.inject_fault)
        }
    }
}

/// Exit status and label for an error, by the first recognizable cause.
fn classify(err: &anyhow::Error) -> (u8, &'static str) {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<shrimp_core::Error>() {
            return match e {
                shrimp_core::Error::Io { .. } => (3, "io"),
                shrimp_core::Error::Numeric(_) => (5, "numeric"),
                _ => (4, "validation"),
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return (3, "io");
        }
        if cause.downcast_ref::<csv::Error>().is_some() {
            return (3, "io");
        }
    }
    (1, "error")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let (code, class) = classify(&e);
            // library errors already include their cause
            let msg = if e.downcast_ref::<shrimp_core::Error>().is_some() {
                e.to_string()
            } else {
                format!("{e:#}")
            };
            let msg = msg.replace('\n', " ");
            eprintln!("shrimp: {class} error: {msg}");
            ExitCode::from(code)
        }
    }
}
