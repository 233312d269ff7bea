//! The four subcommands. Each returns `Ok(true)` on success, `Ok(false)` when
//! it ran to completion but a check failed (selftest), and `Err` otherwise.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use shrimp_core::dataset::{load_csv, save_csv, ClusteredDataset, CsvOptions, Scale, SpecSource};
use shrimp_core::distributions::{pg1_mean, pg_series_oracle, sample_pg1, PgParams};
use shrimp_core::geweke::{geweke_linear, geweke_logistic, GewekeConfig};
use shrimp_core::lme::SigmaEMode;
use shrimp_core::shrimp::{multiple_impute, Manifest, VariableTrace};
use shrimp_core::sim_study::run_monte_carlo;
use shrimp_core::stats::{iid_standard_error, ks_two_sample, mean};
use shrimp_core::RngStream;

use crate::config::RunConfig;
use crate::pool_table::{pool_groups, read_pool_table, write_pooled};

fn require_path<'a>(p: &'a Option<PathBuf>, flag: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| anyhow!(shrimp_core::Error::InvalidParameter(format!("{flag} is required"))))
}

fn prepare_output_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| shrimp_core::Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    Ok(())
}

fn create_file(path: &Path) -> Result<BufWriter<fs::File>> {
    let f = fs::File::create(path).map_err(|source| shrimp_core::Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(BufWriter::new(f))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create_file(path)?;
    serde_json::to_writer_pretty(&mut w, value).context("serializing JSON")?;
    writeln!(w).and_then(|_| w.flush()).map_err(|source| shrimp_core::Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(())
}

fn same_file(a: &Path, b: &Path) -> bool {
    match (fs::canonicalize(a), fs::canonicalize(b)) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    }
}

#[derive(Serialize)]
struct ImputeManifest<'a> {
    version: &'static str,
    input: &'a Path,
    outputs: Vec<PathBuf>,
    traces: Vec<PathBuf>,
    #[serde(flatten)]
    run: &'a Manifest,
}

/// Multiple imputation of a CSV file.
pub fn cmd_impute(cfg: &RunConfig) -> Result<bool> {
    let input = require_path(&cfg.input, "--input")?;
    let out_dir = require_path(&cfg.output_dir, "--output-dir")?;
    let options = cfg.csv_options()?;
    let ds = load_csv(input, &options)?;
    prepare_output_dir(out_dir)?;

    let mut plan = cfg.plan();
    if let Some(names) = &cfg.order {
        let order = names
            .iter()
            .map(|n| {
                ds.specs()
                    .iter()
                    .position(|s| &s.name == n)
                    .ok_or_else(|| shrimp_core::Error::Validation(format!("order names unknown variable `{n}`")))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        plan.order = Some(order);
    }
    plan.validate(ds.n_vars())?;

    let stem = input
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("data")
        .to_string();
    let copy_paths: Vec<PathBuf> = (1..=plan.copies)
        .map(|c| out_dir.join(format!("{stem}_imp{c}.csv")))
        .collect();
    let trace_paths: Vec<PathBuf> = if cfg.traces {
        (1..=plan.copies)
            .map(|c| out_dir.join(format!("{stem}_trace_imp{c}.csv")))
            .collect()
    } else {
        Vec::new()
    };
    let manifest_path = out_dir.join("manifest.json");
    for p in copy_paths.iter().chain(&trace_paths).chain(std::iter::once(&manifest_path)) {
        if same_file(p, input) {
            bail!(shrimp_core::Error::InvalidParameter(format!(
                "output {} would overwrite the input",
                p.display()
            )));
        }
    }

    let threads = cfg.threads_for(plan.copies);
    let set = multiple_impute(&ds, &plan, &RngStream::new(cfg.seed), threads)?;

    for (copy, path) in set.copies.iter().zip(&copy_paths) {
        save_csv(copy, path, &cfg.missing_token)?;
        verify_copy(&ds, path, &options)?;
    }
    for (traces, path) in set.traces.iter().zip(&trace_paths) {
        write_traces(traces, path)?;
    }
    write_json(
        &manifest_path,
        &ImputeManifest {
            version: env!("CARGO_PKG_VERSION"),
            input,
            outputs: copy_paths.clone(),
            traces: trace_paths,
            run: &set.manifest,
        },
    )?;
    println!(
        "imputed {} missing cells in {} copies -> {}",
        ds.total_missing(),
        plan.copies,
        out_dir.display()
    );
    Ok(true)
}

/// Re-read a written copy and check it against the input: complete, observed
/// cells bit-identical, binary cells in {0, 1}.
fn verify_copy(input: &ClusteredDataset, path: &Path, options: &CsvOptions) -> Result<()> {
    let reread = load_csv(
        path,
        &CsvOptions {
            specs: SpecSource::Explicit(input.specs().to_vec()),
            cluster_column: options.cluster_column.clone(),
            missing_token: options.missing_token.clone(),
        },
    )?;
    let bad = |what: &str| anyhow!(shrimp_core::Error::Validation(format!("{}: {what}", path.display())));
    if reread.total_missing() > 0 || reread.cluster_sizes() != input.cluster_sizes() {
        return Err(bad("written copy is incomplete or reshaped"));
    }
    for (i, c) in input.clusters().iter().enumerate() {
        for j in 0..c.n_rows() {
            for k in 0..input.n_vars() {
                let v = reread.value(i, j, k);
                if let Some(obs) = input.observed(i, j, k) {
                    if obs.to_bits() != v.to_bits() {
                        return Err(bad("observed cell changed"));
                    }
                }
                if input.specs()[k].scale == Scale::Binary && v != 0.0 && v != 1.0 {
                    return Err(bad("binary cell outside {0, 1}"));
                }
            }
        }
    }
    Ok(())
}

fn write_traces(traces: &[VariableTrace], path: &Path) -> Result<()> {
    let p = traces
        .iter()
        .flat_map(|t| t.rows.first())
        .map(|r| r.beta.len())
        .max()
        .unwrap_or(0);
    let mut w = csv::Writer::from_writer(create_file(path)?);
    let mut header: Vec<String> = ["variable", "cycle", "iteration", "w", "mu0", "sigma0_sq", "sigma_b_sq", "sigma_e_sq"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..p).map(|j| format!("beta_{j}")));
    w.write_record(&header)?;
    for t in traces {
        for r in &t.rows {
            let mut rec = vec![
                t.name.clone(),
                r.cycle.to_string(),
                r.iteration.to_string(),
                r.w.to_string(),
                r.mu0.to_string(),
                r.sigma0_sq.to_string(),
                r.sigma_b_sq.to_string(),
                r.sigma_e_sq.map(|v| v.to_string()).unwrap_or_default(),
            ];
            rec.extend((0..p).map(|j| r.beta.get(j).map(|b| b.to_string()).unwrap_or_default()));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct SimulationSummary<'a> {
    version: &'static str,
    seed: u64,
    replicates: usize,
    copies: usize,
    arms: &'a [shrimp_core::sim_study::Arm],
    mean_missing_fraction: f64,
    elapsed_seconds: f64,
    simulation: &'a shrimp_core::sim_study::SimConfig,
    plan: &'a shrimp_core::shrimp::ImputationPlan,
}

/// The Monte Carlo study.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<bool> {
    let out_dir = require_path(&cfg.output_dir, "--output-dir")?;
    let plan = cfg.plan();
    plan.validate(cfg.simulation.d)?;
    cfg.simulation.validate()?;
    prepare_output_dir(out_dir)?;

    let threads = cfg.threads_for(cfg.simulation.replicates);
    let start = Instant::now();
    let result = run_monte_carlo(&cfg.simulation, &plan, &cfg.arms, &RngStream::new(cfg.seed), threads)?;
    let elapsed = start.elapsed().as_secs_f64();

    result.table.write_csv(create_file(&out_dir.join("metrics.csv"))?)?;
    result.write_records_csv(create_file(&out_dir.join("replicates.csv"))?, &cfg.simulation.coefficient_names())?;
    write_json(
        &out_dir.join("summary.json"),
        &SimulationSummary {
            version: env!("CARGO_PKG_VERSION"),
            seed: cfg.seed,
            replicates: cfg.simulation.replicates,
            copies: plan.copies,
            arms: &cfg.arms,
            mean_missing_fraction: result.mean_missing_fraction(),
            elapsed_seconds: elapsed,
            simulation: &cfg.simulation,
            plan: &plan,
        },
    )?;
    println!(
        "{} replicates, missing fraction {:.4}, {:.1}s -> {}",
        cfg.simulation.replicates,
        result.mean_missing_fraction(),
        elapsed,
        out_dir.display()
    );
    Ok(true)
}

/// Rubin pooling of an external estimate table.
pub fn cmd_pool(cfg: &RunConfig) -> Result<bool> {
    let input = require_path(&cfg.input, "--input")?;
    let file = fs::File::open(input).map_err(|source| shrimp_core::Error::Io {
        path: input.to_path_buf(),
        source,
    })?;
    let groups = read_pool_table(file)?;
    let pooled = pool_groups(&groups)?;
    match &cfg.output_dir {
        Some(dir) => {
            prepare_output_dir(dir)?;
            let path = dir.join("pooled.csv");
            if same_file(&path, input) {
                bail!(shrimp_core::Error::InvalidParameter("output would overwrite the input".into()));
            }
            write_pooled(&pooled, create_file(&path)?)?;
            println!("pooled {} coefficients -> {}", pooled.len(), path.display());
        }
        None => write_pooled(&pooled, std::io::stdout().lock())?,
    }
    Ok(true)
}

struct Check {
    name: String,
    detail: String,
    pass: bool,
}

/// Polya-Gamma moment and distribution checks plus both joint-distribution
/// tests. `inject_fault` swaps in the residual-variance update that ignores
/// the current state, which the linear test must catch.
pub fn cmd_selftest(cfg: &RunConfig, inject_fault: bool) -> Result<bool> {
    let root = RngStream::new(cfg.seed);
    let quick = cfg.quick;
    let n_moment = if quick { 10_000 } else { 100_000 };
    let (n_ks, n_oracle) = if quick { (4_000, 1_000) } else { (20_000, 5_000) };
    let n_geweke = if quick { 3_000 } else { 10_000 };
    let mut checks = Vec::new();

    for (i, c) in [0.0, 0.5, 1.0, 2.0, 4.0].into_iter().enumerate() {
        let mut rng = root.child(i as u64);
        let xs: Vec<f64> = (0..n_moment).map(|_| sample_pg1(&mut rng, c)).collect();
        let z = (mean(&xs) - pg1_mean(c)) / iid_standard_error(&xs);
        checks.push(Check {
            name: format!("pg mean c={c}"),
            detail: format!("z = {z:+.2}"),
            pass: z.abs() < 4.0,
        });
    }
    for (i, c) in [0.0, 2.0].into_iter().enumerate() {
        let mut rng = root.child(10 + i as u64);
        let xs: Vec<f64> = (0..n_ks).map(|_| sample_pg1(&mut rng, c)).collect();
        let params = PgParams::new(1.0, c)?;
        let ys = (0..n_oracle)
            .map(|_| pg_series_oracle(&mut rng, params, 500))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let ks = ks_two_sample(&xs, &ys);
        checks.push(Check {
            name: format!("pg ks c={c}"),
            detail: format!("D = {:.4}, p = {:.3}", ks.statistic, ks.p_value),
            pass: ks.p_value > 0.001,
        });
    }

    let geweke = GewekeConfig {
        n_samples: n_geweke,
        sigma_e_mode: if inject_fault {
            SigmaEMode::AppendixLiteral
        } else {
            SigmaEMode::Conjugate
        },
        ..GewekeConfig::default()
    };
    for (name, report) in [
        ("geweke linear", geweke_linear(&geweke, &mut root.child(20))?),
        ("geweke logistic", geweke_logistic(&geweke, &mut root.child(21))?),
    ] {
        let worst = report
            .stats
            .iter()
            .max_by(|a, b| a.z.abs().total_cmp(&b.z.abs()))
            .map(|s| format!("max |z| = {:.2} ({})", s.z.abs(), s.name))
            .unwrap_or_default();
        checks.push(Check {
            name: name.to_string(),
            detail: worst,
            pass: report.passes(4.0),
        });
    }

    for c in &checks {
        println!("{:<18} {:<4} {}", c.name, if c.pass { "PASS" } else { "FAIL" }, c.detail);
    }
    let all = checks.iter().all(|c| c.pass);
    println!("selftest {}", if all { "passed" } else { "FAILED" });
    Ok(all)
}
