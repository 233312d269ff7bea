//! Run settings from an optional JSON file, overridden by command-line flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shrimp_core::dataset::{ClusterColumn, CsvOptions, SpecSource, VariableSpec};
use shrimp_core::lme::{SamplerConfig, ScanOrder, SigmaEMode};
use shrimp_core::shrimp::ImputationPlan;
use shrimp_core::sim_study::{Arm, SimConfig};
use shrimp_core::spike_slab::Hyper;
use shrimp_core::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    pub copies: usize,
    pub cycles: usize,
    pub inner_iterations: usize,
    pub sigma_e_mode: SigmaEMode,
    pub scan: ScanOrder,
    pub standardize: bool,
    pub include_intercept: bool,
    pub hyper: Hyper,
    /// Variable names in visiting order; missing-count order when absent.
    pub order: Option<Vec<String>>,
    /// Worker threads for copies and replicates; all cores when absent.
    pub threads: Option<usize>,
    pub cluster_column: ClusterColumn,
    pub missing_token: String,
    /// Scale and selection policy of every variable column.
    pub variables: Option<Vec<VariableSpec>>,
    /// Treat columns whose observed values are all 0/1 as binary.
    pub infer_binary: bool,
    pub traces: bool,
    pub simulation: SimConfig,
    pub arms: Vec<Arm>,
    pub quick: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let plan = ImputationPlan::default();
        RunConfig {
            input: None,
            output_dir: None,
            seed: 1,
            copies: plan.copies,
            cycles: plan.n_cycles,
            inner_iterations: plan.inner_iterations,
            sigma_e_mode: SigmaEMode::default(),
            scan: ScanOrder::default(),
            standardize: false,
            include_intercept: true,
            hyper: Hyper::default(),
            order: None,
            threads: None,
            cluster_column: ClusterColumn::default(),
            missing_token: "NA".to_string(),
            variables: None,
            infer_binary: false,
            traces: false,
            simulation: SimConfig::default(),
            arms: vec![Arm::Cc, Arm::Shrimp],
            quick: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line() as u64,
            message: format!("config: {e}"),
        })
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn csv_options(&self) -> Result<CsvOptions, Error> {
        let specs = match (&self.variables, self.infer_binary) {
            (Some(_), true) => {
                return Err(Error::InvalidParameter(
                    "give either an explicit variable list or infer_binary, not both".into(),
                ))
            }
            (Some(v), false) => SpecSource::Explicit(v.clone()),
            (None, true) => SpecSource::InferBinary,
            (None, false) => SpecSource::AllContinuous,
        };
        Ok(CsvOptions {
            missing_token: self.missing_token.clone(),
            cluster_column: self.cluster_column.clone(),
            specs,
        })
    }

    /// The plan with the variable order left unresolved.
    pub fn plan(&self) -> ImputationPlan {
        ImputationPlan {
            order: None,
            n_cycles: self.cycles,
            inner_iterations: self.inner_iterations,
            copies: self.copies,
            sampler: SamplerConfig {
                hyper: self.hyper,
                sigma_e_mode: self.sigma_e_mode,
                scan: self.scan,
            },
            include_intercept: self.include_intercept,
            standardize: self.standardize,
        }
    }

    /// Worker count, capped by the number of independent units.
    pub fn threads_for(&self, units: usize) -> usize {
        let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
        self.threads.unwrap_or(available).clamp(1, units.max(1))
    }
}
