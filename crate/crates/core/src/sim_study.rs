//! Monte Carlo study: clustered data from a banded Gaussian with half the
//! columns dichotomized, sequential MAR missingness, imputation, and a
//! logistic mixed model fitted to every completed copy.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{regression_view, ClusteredDataset, RowInput, SelectionPolicy, VariableSpec, ViewOptions};
use crate::distributions::{bernoulli, normal, sample_standard, StandardDist};
use crate::error::{Error, Result};
use crate::lme::SamplerConfig;
use crate::logit;
use crate::pooling::{compute_metrics, rubin_pool, single_estimate, PooledEstimate};
use crate::rng::RngStream;
use crate::shrimp::{multiple_impute, ImputationPlan};
use crate::stats::{logistic, mean, variance};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Number of clusters.
    pub m: usize,
    /// Cluster sizes are `n_base + Binomial(n_trials, n_prob)`.
    pub n_base: usize,
    pub n_trials: u64,
    pub n_prob: f64,
    /// Number of variables; the second half is dichotomized.
    pub d: usize,
    pub sigma_diag: f64,
    /// `(offset, value)`: entries with `|k - l| == offset` of the covariance.
    pub bands: Vec<(usize, f64)>,
    /// Variance of each coordinate of the cluster means.
    pub cluster_mean_var: f64,
    pub alpha_mis: f64,
    pub beta_mis: f64,
    pub p_first: f64,
    pub replicates: usize,
    /// Iterations discarded before the analysis model's posterior summary.
    pub analysis_burn_in: usize,
    pub analysis_draws: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            m: 10,
            n_base: 100,
            n_trials: 20,
            n_prob: 0.5,
            d: 10,
            sigma_diag: 5.0,
            bands: vec![(2, -1.0), (4, 0.5), (6, 1.0)],
            cluster_mean_var: 1.0,
            alpha_mis: -3.0,
            beta_mis: 1.0,
            p_first: 0.1,
            replicates: 100,
            analysis_burn_in: 200,
            analysis_draws: 800,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 || !self.d.is_multiple_of(2) {
            return Err(Error::invalid(format!("d must be even and at least 2, got {}", self.d)));
        }
        if self.m == 0 || self.n_base + self.n_trials as usize == 0 {
            return Err(Error::invalid("need at least one cluster with at least one row"));
        }
        if !(0.0..=1.0).contains(&self.n_prob) || !(0.0..=1.0).contains(&self.p_first) {
            return Err(Error::invalid("probabilities must lie in [0, 1]"));
        }
        if !(self.cluster_mean_var >= 0.0) || !self.alpha_mis.is_finite() || !self.beta_mis.is_finite() {
            return Err(Error::invalid("invalid missingness or cluster-mean parameters"));
        }
        if self.analysis_draws < 2 {
            return Err(Error::invalid("analysis_draws must be at least 2"));
        }
        banded_sigma(self).map(|_| ())
    }

    pub fn variable_names(&self) -> Vec<String> {
        (1..=self.d).map(|k| format!("x{k}")).collect()
    }

    /// Names of the analysis model's coefficients.
    pub fn coefficient_names(&self) -> Vec<String> {
        let mut out = vec!["(Intercept)".to_string()];
        out.extend((1..self.d).map(|k| format!("x{k}")));
        out
    }
}

/// The banded covariance, checked to be positive definite.
pub fn banded_sigma(cfg: &SimConfig) -> Result<DMatrix<f64>> {
    let d = cfg.d;
    let mut s = DMatrix::<f64>::zeros(d, d);
    for k in 0..d {
        s[(k, k)] = cfg.sigma_diag;
    }
    for &(offset, v) in &cfg.bands {
        if offset == 0 {
            return Err(Error::invalid("band offset 0 overlaps the diagonal"));
        }
        for k in 0..d.saturating_sub(offset) {
            s[(k, k + offset)] = v;
            s[(k + offset, k)] = v;
        }
    }
    let min_eig = SymmetricEigen::new(s.clone()).eigenvalues.min();
    if !(min_eig > 0.0) {
        return Err(Error::invalid(format!(
            "covariance is not positive definite (smallest eigenvalue {min_eig})"
        )));
    }
    Ok(s)
}

fn specs(cfg: &SimConfig) -> Vec<VariableSpec> {
    cfg.variable_names()
        .into_iter()
        .enumerate()
        .map(|(k, name)| {
            if k < cfg.d / 2 {
                VariableSpec::continuous(name)
            } else {
                VariableSpec::binary(name)
            }
        })
        .collect()
}

/// A fully observed dataset: cluster means `mu_i ~ N(0, cluster_mean_var I)`,
/// rows `N(mu_i, Sigma)`, and the last `d/2` columns replaced by
/// `1[value >= 0]`.
pub fn generate_complete<R: Rng + ?Sized>(cfg: &SimConfig, rng: &mut R) -> Result<ClusteredDataset> {
    cfg.validate()?;
    let sigma = banded_sigma(cfg)?;
    let chol = sigma
        .cholesky()
        .ok_or_else(|| Error::numeric("Cholesky factorization of the covariance failed"))?;
    let l = chol.l();
    let d = cfg.d;
    let mut clusters = Vec::with_capacity(cfg.m);
    for i in 0..cfg.m {
        let extra = sample_standard(rng, StandardDist::Binomial { n: cfg.n_trials, p: cfg.n_prob })? as usize;
        let n_i = cfg.n_base + extra;
        let mu: Vec<f64> = (0..d).map(|_| normal(rng, 0.0, cfg.cluster_mean_var)).collect();
        let rows: Vec<RowInput> = (0..n_i)
            .map(|_| {
                let z = DVector::from_iterator(d, (0..d).map(|_| normal(rng, 0.0, 1.0)));
                let x = &l * z;
                (0..d)
                    .map(|k| {
                        let v = mu[k] + x[k];
                        Some(if k < d / 2 { v } else { (v >= 0.0) as u8 as f64 })
                    })
                    .collect()
            })
            .collect();
        clusters.push(((i + 1).to_string(), rows));
    }
    ClusteredDataset::from_clusters(specs(cfg), clusters)
}

/// Sequential MAR mask. The first column is masked with probability
/// `p_first`; column k is masked with probability
/// `logistic(alpha_mis + beta_mis * value of column k-1)` when column k-1 is
/// observed in that row and never otherwise.
pub fn impose_mar<R: Rng + ?Sized>(ds: &ClusteredDataset, cfg: &SimConfig, rng: &mut R) -> Result<ClusteredDataset> {
    if ds.total_missing() > 0 {
        return Err(Error::validation("dataset already has missing cells"));
    }
    let mut prev_missing = false;
    ds.with_mask(|i, j, k| {
        let masked = if k == 0 {
            bernoulli(rng, cfg.p_first)
        } else if prev_missing {
            false
        } else {
            bernoulli(rng, logistic(cfg.alpha_mis + cfg.beta_mis * ds.value(i, j, k - 1)))
        };
        prev_missing = masked;
        masked
    })
}

pub fn missing_fraction(ds: &ClusteredDataset) -> f64 {
    ds.total_missing() as f64 / (ds.n_rows() * ds.n_vars()) as f64
}

/// Posterior mean and standard deviation of each coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fit {
    pub estimates: Vec<f64>,
    pub ses: Vec<f64>,
}

/// Logistic mixed model of the last variable on an intercept and all other
/// variables, every coefficient kept in the model.
pub fn fit_analysis_model<R: Rng + ?Sized>(
    ds: &ClusteredDataset,
    cfg: &SimConfig,
    sampler: &SamplerConfig,
    rng: &mut R,
) -> Result<Fit> {
    let target = ds.n_vars() - 1;
    if !ds.is_complete() {
        return Err(Error::validation("analysis model needs a completed dataset"));
    }
    let mut view = regression_view(
        ds,
        target,
        ViewOptions {
            include_intercept: true,
            standardize: false,
        },
    )?;
    // imputed responses are data for the analyst
    view.y_missing.iter_mut().for_each(|m| *m = false);
    let policies = vec![SelectionPolicy::Forced; view.n_covariates()];
    let config = SamplerConfig {
        sigma_e_mode: Default::default(),
        ..*sampler
    };
    let out = logit::run_chain(&view, &policies, &config, rng, cfg.analysis_burn_in + cfg.analysis_draws, None)?;
    let draws = &out.trace[cfg.analysis_burn_in..];
    let p = view.n_covariates();
    let mut estimates = Vec::with_capacity(p);
    let mut ses = Vec::with_capacity(p);
    for k in 0..p {
        let xs: Vec<f64> = draws.iter().map(|d| d.beta[k]).collect();
        estimates.push(mean(&xs));
        ses.push(variance(&xs).sqrt());
    }
    Ok(Fit { estimates, ses })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arm {
    /// The analysis applied to the data before deletion.
    Bd,
    /// Complete cases only.
    Cc,
    /// Multiple imputation with the spike-and-slab samplers.
    Shrimp,
}

impl Arm {
    pub fn as_str(&self) -> &'static str {
        match self {
            Arm::Bd => "bd",
            Arm::Cc => "cc",
            Arm::Shrimp => "shrimp",
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "bd" => Ok(Arm::Bd),
            "cc" => Ok(Arm::Cc),
            "shrimp" | "ss-shrimp" => Ok(Arm::Shrimp),
            other => Err(Error::invalid(format!("unknown arm `{other}` (expected bd, cc or shrimp)"))),
        }
    }
}

/// Estimates of one replicate. `before` is always present: it defines the
/// true values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub missing_fraction: f64,
    pub before: Fit,
    pub arms: Vec<(Arm, Vec<PooledEstimate>)>,
}

/// One replicate on the stream `rng`.
pub fn run_replicate(
    replicate: usize,
    cfg: &SimConfig,
    plan: &ImputationPlan,
    arms: &[Arm],
    rng: &RngStream,
) -> Result<ReplicateRecord> {
    let complete = generate_complete(cfg, &mut rng.child(0))?;
    let before = fit_analysis_model(&complete, cfg, &plan.sampler, &mut rng.child(1))?;
    let masked = impose_mar(&complete, cfg, &mut rng.child(2))?;
    let mut out_arms = Vec::with_capacity(arms.len());
    for &arm in arms {
        let pooled = match arm {
            Arm::Bd => before
                .estimates
                .iter()
                .zip(&before.ses)
                .map(|(q, s)| single_estimate(*q, *s))
                .collect(),
            Arm::Cc => {
                let cc = masked.complete_cases()?;
                let fit = fit_analysis_model(&cc, cfg, &plan.sampler, &mut rng.child(3))?;
                fit.estimates
                    .iter()
                    .zip(&fit.ses)
                    .map(|(q, s)| single_estimate(*q, *s))
                    .collect()
            }
            Arm::Shrimp => {
                let set = multiple_impute(&masked, plan, &rng.child(4), 1)?;
                let fits_rng = rng.child(5);
                let fits = set
                    .copies
                    .iter()
                    .enumerate()
                    .map(|(c, copy)| fit_analysis_model(copy, cfg, &plan.sampler, &mut fits_rng.child(c as u64)))
                    .collect::<Result<Vec<_>>>()?;
                pool_fits(&fits)?
            }
        };
        out_arms.push((arm, pooled));
    }
    Ok(ReplicateRecord {
        replicate,
        missing_fraction: missing_fraction(&masked),
        before,
        arms: out_arms,
    })
}

fn pool_fits(fits: &[Fit]) -> Result<Vec<PooledEstimate>> {
    if fits.len() == 1 {
        let f = &fits[0];
        return Ok(f.estimates.iter().zip(&f.ses).map(|(q, s)| single_estimate(*q, *s)).collect());
    }
    let p = fits[0].estimates.len();
    (0..p)
        .map(|k| {
            let q: Vec<f64> = fits.iter().map(|f| f.estimates[k]).collect();
            let s: Vec<f64> = fits.iter().map(|f| f.ses[k]).collect();
            rubin_pool(&q, &s)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub coefficient: String,
    pub method: Arm,
    pub true_value: f64,
    #[serde(rename = "PB")]
    pub pb: f64,
    #[serde(rename = "RMSE")]
    pub rmse: f64,
    #[serde(rename = "SE")]
    pub se: f64,
    #[serde(rename = "CR")]
    pub cr: f64,
    #[serde(rename = "FMI")]
    pub fmi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn rows_for(&self, arm: Arm) -> impl Iterator<Item = &MetricsRow> {
        self.rows.iter().filter(move |r| r.method == arm)
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for r in &self.rows {
            out.serialize(r).map_err(csv_error)?;
        }
        out.flush().map_err(|e| Error::invalid(e.to_string()))
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::invalid(format!("CSV output: {e}"))
}

/// Per-coefficient metrics against the across-replicate mean of the
/// before-deletion estimates.
pub fn aggregate(records: &[ReplicateRecord], coefficient_names: &[String]) -> Result<MetricsTable> {
    let first = records.first().ok_or_else(|| Error::invalid("no replicates to aggregate"))?;
    let p = coefficient_names.len();
    let truth: Vec<f64> = (0..p)
        .map(|k| records.iter().map(|r| r.before.estimates[k]).sum::<f64>() / records.len() as f64)
        .collect();
    let mut rows = Vec::new();
    for (a, (arm, _)) in first.arms.iter().enumerate() {
        for k in 0..p {
            let pooled: Vec<PooledEstimate> = records.iter().map(|r| r.arms[a].1[k]).collect();
            let m = compute_metrics(truth[k], &pooled)?;
            rows.push(MetricsRow {
                coefficient: coefficient_names[k].clone(),
                method: *arm,
                true_value: truth[k],
                pb: m.pb,
                rmse: m.rmse,
                se: m.se,
                cr: m.cr,
                fmi: m.fmi,
            });
        }
    }
    Ok(MetricsTable { rows })
}

#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    pub records: Vec<ReplicateRecord>,
    pub table: MetricsTable,
}

impl MonteCarloResult {
    pub fn mean_missing_fraction(&self) -> f64 {
        self.records.iter().map(|r| r.missing_fraction).sum::<f64>() / self.records.len() as f64
    }

    /// Long-format per-replicate estimates.
    pub fn write_records_csv<W: Write>(&self, w: W, coefficient_names: &[String]) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "replicate",
            "coefficient",
            "method",
            "estimate",
            "se",
            "ci_low",
            "ci_high",
            "fmi",
            "missing_fraction",
        ])
        .map_err(csv_error)?;
        for r in &self.records {
            for (arm, pooled) in &r.arms {
                for (name, p) in coefficient_names.iter().zip(pooled) {
                    out.write_record([
                        r.replicate.to_string(),
                        name.clone(),
                        arm.to_string(),
                        p.q_bar.to_string(),
                        p.se().to_string(),
                        p.ci_low.to_string(),
                        p.ci_high.to_string(),
                        p.fmi.to_string(),
                        r.missing_fraction.to_string(),
                    ])
                    .map_err(csv_error)?;
                }
            }
        }
        out.flush().map_err(|e| Error::invalid(e.to_string()))
    }
}

/// `cfg.replicates` replicates, replicate r on `rng.child(r)`. With
/// `threads > 1` replicates run on a pool of that many workers; the result
/// does not depend on the thread count.
pub fn run_monte_carlo(
    cfg: &SimConfig,
    plan: &ImputationPlan,
    arms: &[Arm],
    rng: &RngStream,
    threads: usize,
) -> Result<MonteCarloResult> {
    cfg.validate()?;
    plan.validate(cfg.d)?;
    if cfg.replicates < 2 {
        return Err(Error::invalid("the Monte Carlo study needs at least 2 replicates"));
    }
    if arms.is_empty() {
        return Err(Error::invalid("select at least one arm"));
    }
    let run = |r: usize| run_replicate(r, cfg, plan, arms, &rng.child(r as u64));
    let records: Vec<ReplicateRecord> = if threads > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.min(cfg.replicates))
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        pool.install(|| (0..cfg.replicates).into_par_iter().map(run).collect::<Result<Vec<_>>>())?
    } else {
        (0..cfg.replicates).map(run).collect::<Result<Vec<_>>>()?
    };
    let table = aggregate(&records, &cfg.coefficient_names())?;
    Ok(MonteCarloResult { records, table })
}
