//! Joint-distribution tests for the Gibbs samplers.
//!
//! Two simulators of the joint law of parameters and data are compared:
//! independent draws from the prior followed by the likelihood, and a long
//! run that alternates one sweep of the sampler (treating the data as
//! observed) with a fresh draw of the data given the parameters. When every
//! conditional is right both have the same stationary law, so the means of
//! any test function must agree.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Covariate, RegressionView, SelectionPolicy};
use crate::distributions::normal;
use crate::error::Result;
use crate::lme::{self, LmeState, SamplerConfig, SigmaEMode};
use crate::logit::{self, LogitState};
use crate::spike_slab::Hyper;
use crate::stats::{batch_means_standard_error, iid_standard_error, mean};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Linear,
    Logistic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeConfig {
    /// Draws on each side.
    pub n_samples: usize,
    pub n_batches: usize,
    pub cluster_sizes: Vec<usize>,
    pub policies: Vec<SelectionPolicy>,
    pub hyper: Hyper,
    pub sigma_e_mode: SigmaEMode,
}

impl Default for GewekeConfig {
    /// m = 2 clusters of 3 rows, two covariates (one forced, one selectable).
    /// The hyperparameters keep fourth moments of every variance finite so
    /// that second-moment comparisons have finite standard errors.
    fn default() -> Self {
        GewekeConfig {
            n_samples: 10_000,
            n_batches: 50,
            cluster_sizes: vec![3, 3],
            policies: vec![SelectionPolicy::Forced, SelectionPolicy::Undetermined],
            hyper: Hyper {
                a_w: 2.0,
                b_w: 2.0,
                nu_b: 12.0,
                nu_e: 12.0,
                mu0_var: 1.0,
                sigma0_shape: 6.0,
                sigma0_scale: 5.0,
            },
            sigma_e_mode: SigmaEMode::Conjugate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeStat {
    pub name: String,
    pub prior_mean: f64,
    pub chain_mean: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GewekeReport {
    pub model: Model,
    pub stats: Vec<GewekeStat>,
}

impl GewekeReport {
    pub fn max_abs_z(&self) -> f64 {
        self.stats.iter().map(|s| s.z.abs()).fold(0.0, f64::max)
    }

    pub fn passes(&self, threshold: f64) -> bool {
        self.stats.iter().all(|s| s.z.abs() < threshold)
    }
}

struct Sample {
    beta: Vec<f64>,
    w: f64,
    mu0: f64,
    sigma0_sq: f64,
    b: Vec<f64>,
    sigma_b_sq: f64,
    sigma_e_sq: Option<f64>,
    y: Vec<f64>,
}

fn test_functions(s: &Sample, view: &RegressionView, policies: &[SelectionPolicy]) -> Vec<(String, f64)> {
    let mut out = Vec::new();
    let mut push = |name: String, v: f64, square: bool| {
        if square {
            out.push((format!("{name}^2"), v * v));
        }
        out.push((name, v));
    };
    for (k, b) in s.beta.iter().enumerate() {
        push(format!("beta{k}"), *b, true);
        if policies[k] == SelectionPolicy::Undetermined {
            push(format!("included{k}"), (*b != 0.0) as u8 as f64, false);
        }
    }
    push("w".into(), s.w, true);
    push("mu0".into(), s.mu0, true);
    push("sigma0_sq".into(), s.sigma0_sq, true);
    for (i, b) in s.b.iter().enumerate() {
        push(format!("b{i}"), *b, true);
    }
    push("sigma_b_sq".into(), s.sigma_b_sq, true);
    if let Some(v) = s.sigma_e_sq {
        push("sigma_e_sq".into(), v, true);
    }
    let binary = s.sigma_e_sq.is_none();
    for (r, y) in s.y.iter().enumerate() {
        push(format!("y{r}"), *y, !binary);
    }
    let p = view.n_covariates();
    for k in 0..p {
        let xy: f64 = (0..view.n_rows()).map(|r| view.x[r * p + k] * s.y[r]).sum();
        push(format!("x{k}'y"), xy, false);
    }
    let bx: f64 = (0..view.n_rows())
        .map(|r| s.y[r] * view.row(r).iter().zip(&s.beta).map(|(x, b)| x * b).sum::<f64>())
        .sum();
    push("y'x beta".into(), bx, false);
    out
}

fn compare(model: Model, prior: Vec<Vec<(String, f64)>>, chain: Vec<Vec<(String, f64)>>, n_batches: usize) -> GewekeReport {
    let names: Vec<String> = prior[0].iter().map(|(n, _)| n.clone()).collect();
    let stats = names
        .into_iter()
        .enumerate()
        .map(|(j, name)| {
            let a: Vec<f64> = prior.iter().map(|row| row[j].1).collect();
            let c: Vec<f64> = chain.iter().map(|row| row[j].1).collect();
            let se = (iid_standard_error(&a).powi(2) + batch_means_standard_error(&c, n_batches).powi(2)).sqrt();
            let diff = mean(&a) - mean(&c);
            let z = if se > 0.0 {
                diff / se
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            GewekeStat {
                name,
                prior_mean: mean(&a),
                chain_mean: mean(&c),
                z,
            }
        })
        .collect();
    GewekeReport { model, stats }
}

fn toy_view<R: Rng + ?Sized>(config: &GewekeConfig, rng: &mut R) -> Result<RegressionView> {
    let n: usize = config.cluster_sizes.iter().sum();
    let p = config.policies.len();
    let x: Vec<f64> = (0..n * p).map(|_| normal(rng, 0.0, 1.0)).collect();
    let covariates = config
        .policies
        .iter()
        .map(|&policy| Covariate { source: None, policy })
        .collect();
    // every response is "missing" so the sampler's imputation step is the
    // data draw of the successive-conditional simulator
    RegressionView::new(vec![0.0; n], vec![true; n], x, covariates, &config.cluster_sizes)
}

pub fn geweke_linear<R: Rng + ?Sized>(config: &GewekeConfig, rng: &mut R) -> Result<GewekeReport> {
    config.hyper.validate()?;
    let mut view = toy_view(config, rng)?;
    let m = view.n_clusters();
    let sampler = SamplerConfig {
        hyper: config.hyper,
        sigma_e_mode: config.sigma_e_mode,
        ..SamplerConfig::default()
    };
    let lme_sample = |st: &LmeState, y: Vec<f64>| Sample {
        beta: st.coef.beta.clone(),
        w: st.coef.w,
        mu0: st.coef.mu0,
        sigma0_sq: st.coef.sigma0_sq,
        b: st.b.clone(),
        sigma_b_sq: st.sigma_b_sq,
        sigma_e_sq: Some(st.sigma_e_sq),
        y,
    };

    let mut prior = Vec::with_capacity(config.n_samples);
    for _ in 0..config.n_samples {
        let st = LmeState::from_prior(&config.policies, m, &config.hyper, rng);
        let y = lme::simulate_responses(&st, &view, rng);
        prior.push(test_functions(&lme_sample(&st, y), &view, &config.policies));
    }

    let mut state = LmeState::from_prior(&config.policies, m, &config.hyper, rng);
    view.y = lme::simulate_responses(&state, &view, rng);
    let mut chain = Vec::with_capacity(config.n_samples);
    for _ in 0..config.n_samples {
        let out = lme::run_chain(&view, &config.policies, &sampler, rng, 1, Some(state))?;
        state = out.state;
        view.y = out.imputations;
        chain.push(test_functions(&lme_sample(&state, view.y.clone()), &view, &config.policies));
    }
    Ok(compare(Model::Linear, prior, chain, config.n_batches))
}

pub fn geweke_logistic<R: Rng + ?Sized>(config: &GewekeConfig, rng: &mut R) -> Result<GewekeReport> {
    config.hyper.validate()?;
    let mut view = toy_view(config, rng)?;
    let m = view.n_clusters();
    let n = view.n_rows();
    let sampler = SamplerConfig {
        hyper: config.hyper,
        ..SamplerConfig::default()
    };
    let logit_sample = |st: &LogitState, y: Vec<f64>| Sample {
        beta: st.coef.beta.clone(),
        w: st.coef.w,
        mu0: st.coef.mu0,
        sigma0_sq: st.coef.sigma0_sq,
        b: st.b.clone(),
        sigma_b_sq: st.sigma_b_sq,
        sigma_e_sq: None,
        y,
    };

    let mut prior = Vec::with_capacity(config.n_samples);
    for _ in 0..config.n_samples {
        let st = LogitState::from_prior(&config.policies, m, n, &config.hyper, rng);
        let y = logit::simulate_responses(&st, &view, rng);
        prior.push(test_functions(&logit_sample(&st, y), &view, &config.policies));
    }

    let mut state = LogitState::from_prior(&config.policies, m, n, &config.hyper, rng);
    view.y = logit::simulate_responses(&state, &view, rng);
    let mut chain = Vec::with_capacity(config.n_samples);
    for _ in 0..config.n_samples {
        let out = logit::run_chain(&view, &config.policies, &sampler, rng, 1, Some(state))?;
        state = out.state;
        view.y = out.imputations;
        chain.push(test_functions(&logit_sample(&state, view.y.clone()), &view, &config.policies));
    }
    Ok(compare(Model::Logistic, prior, chain, config.n_batches))
}
