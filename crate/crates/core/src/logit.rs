//! Gibbs sampler for the random-intercept logistic mixed model with
//! spike-and-slab coefficients, via Polya-Gamma augmentation. Used to impute
//! a binary variable.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{RegressionView, SelectionPolicy};
use crate::distributions::{bernoulli, normal, sample_pg1};
use crate::error::{Error, Result};
use crate::lme::{linear_predictor, ChainDraw, ChainOutput, SamplerConfig, ScanOrder};
use crate::spike_slab::{
    coef_conditional, draw_coef, sigma_b_prior, update_mu0, update_sigma0, update_sigma_b,
    update_w, CoefConditional, CoefLikelihood, Hyper, SpikeSlabState,
};
use crate::stats::logistic;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitState {
    pub coef: SpikeSlabState,
    pub b: Vec<f64>,
    pub sigma_b_sq: f64,
    /// One Polya-Gamma auxiliary per row.
    pub omega: Vec<f64>,
}

impl LogitState {
    pub fn initial<R: Rng + ?Sized>(
        policies: &[SelectionPolicy],
        m: usize,
        n_rows: usize,
        hyper: &Hyper,
        rng: &mut R,
    ) -> Self {
        LogitState {
            coef: SpikeSlabState::initial(policies, hyper, rng),
            b: vec![0.0; m],
            sigma_b_sq: 1.0,
            omega: vec![0.25; n_rows],
        }
    }

    pub fn from_prior<R: Rng + ?Sized>(
        policies: &[SelectionPolicy],
        m: usize,
        n_rows: usize,
        hyper: &Hyper,
        rng: &mut R,
    ) -> Self {
        let coef = SpikeSlabState::from_prior(policies, hyper, rng);
        let sigma_b_sq = sigma_b_prior(hyper, rng);
        let b = (0..m).map(|_| normal(rng, 0.0, sigma_b_sq)).collect();
        LogitState {
            coef,
            b,
            sigma_b_sq,
            omega: vec![0.25; n_rows],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coef.beta.iter().chain(&self.b).all(|v| v.is_finite())
            && self.sigma_b_sq.is_finite()
            && self.sigma_b_sq > 0.0
            && self.omega.iter().all(|w| w.is_finite() && *w > 0.0)
    }
}

fn cluster_of_rows(view: &RegressionView) -> Vec<usize> {
    let mut out = Vec::with_capacity(view.n_rows());
    for i in 0..view.n_clusters() {
        out.extend(view.cluster_rows(i).map(|_| i));
    }
    out
}

fn check_shapes(view: &RegressionView, policies: &[SelectionPolicy], state: &LogitState) -> Result<()> {
    let p = view.n_covariates();
    if policies.len() != p || state.coef.beta.len() != p {
        return Err(Error::invalid(format!(
            "{} policies and {} coefficients for {p} covariates",
            policies.len(),
            state.coef.beta.len()
        )));
    }
    if state.b.len() != view.n_clusters() || state.omega.len() != view.n_rows() {
        return Err(Error::invalid("state does not match the view's clusters and rows"));
    }
    Ok(())
}

fn require_binary_filled(y: &[f64]) -> Result<()> {
    if y.iter().any(|v| *v != 0.0 && *v != 1.0) {
        return Err(Error::invalid("responses must be filled with 0/1 before updating parameters"));
    }
    Ok(())
}

fn update_omega_cached<R: Rng + ?Sized>(state: &mut LogitState, xb: &[f64], cluster: &[usize], rng: &mut R) {
    for (r, w) in state.omega.iter_mut().enumerate() {
        *w = sample_pg1(rng, xb[r] + state.b[cluster[r]]);
    }
}

/// omega_ij ~ PG(1, x_ij' beta + b_i) for every row.
pub fn update_omega<R: Rng + ?Sized>(state: &mut LogitState, view: &RegressionView, rng: &mut R) -> Result<()> {
    if state.omega.len() != view.n_rows() || state.b.len() != view.n_clusters() {
        return Err(Error::invalid("state does not match the view's clusters and rows"));
    }
    let xb = linear_predictor(view, &state.coef.beta);
    let cluster = cluster_of_rows(view);
    update_omega_cached(state, &xb, &cluster, rng);
    Ok(())
}

/// Omega-weighted likelihood statistics for beta_k:
/// precision = sum omega x^2, score = sum x ((y - 1/2) - omega (x'beta_{-k} + b_i)),
/// which equals sum omega x (z - x'beta_{-k}) with z = (y - 1/2)/omega - b_i.
fn coef_likelihood(
    view: &RegressionView,
    y: &[f64],
    xb: &[f64],
    cluster: &[usize],
    state: &LogitState,
    k: usize,
) -> CoefLikelihood {
    let p = view.n_covariates();
    let beta_k = state.coef.beta[k];
    let mut precision = 0.0;
    let mut score = 0.0;
    for r in 0..view.n_rows() {
        let x = view.x[r * p + k];
        let w = state.omega[r];
        let offset = xb[r] - x * beta_k + state.b[cluster[r]];
        precision += w * x * x;
        score += x * ((y[r] - 0.5) - w * offset);
    }
    CoefLikelihood { precision, score }
}

fn update_beta_k_cached<R: Rng + ?Sized>(
    state: &mut LogitState,
    view: &RegressionView,
    y: &[f64],
    xb: &mut [f64],
    cluster: &[usize],
    policy: SelectionPolicy,
    k: usize,
    rng: &mut R,
) -> Result<f64> {
    let lik = coef_likelihood(view, y, xb, cluster, state, k);
    let cond = coef_conditional(lik, policy, state.coef.w, state.coef.mu0, state.coef.sigma0_sq)?;
    let new = draw_coef(rng, &cond);
    let delta = new - state.coef.beta[k];
    if delta != 0.0 {
        let p = view.n_covariates();
        for (r, v) in xb.iter_mut().enumerate() {
            *v += view.x[r * p + k] * delta;
        }
    }
    state.coef.beta[k] = new;
    state.coef.included[k] = new != 0.0;
    Ok(new)
}

pub fn update_beta_k<R: Rng + ?Sized>(
    state: &mut LogitState,
    view: &RegressionView,
    policy: SelectionPolicy,
    k: usize,
    rng: &mut R,
) -> Result<f64> {
    require_binary_filled(&view.y)?;
    let mut xb = linear_predictor(view, &state.coef.beta);
    let cluster = cluster_of_rows(view);
    update_beta_k_cached(state, view, &view.y, &mut xb, &cluster, policy, k, rng)
}

pub fn beta_k_conditional(
    state: &LogitState,
    view: &RegressionView,
    policy: SelectionPolicy,
    k: usize,
) -> Result<CoefConditional> {
    require_binary_filled(&view.y)?;
    let xb = linear_predictor(view, &state.coef.beta);
    let cluster = cluster_of_rows(view);
    let lik = coef_likelihood(view, &view.y, &xb, &cluster, state, k);
    coef_conditional(lik, policy, state.coef.w, state.coef.mu0, state.coef.sigma0_sq)
}

fn update_random_effects_cached<R: Rng + ?Sized>(
    state: &mut LogitState,
    view: &RegressionView,
    y: &[f64],
    xb: &[f64],
    rng: &mut R,
) {
    for i in 0..view.n_clusters() {
        let mut prec = 1.0 / state.sigma_b_sq;
        let mut num = 0.0;
        for r in view.cluster_rows(i) {
            // omega * u with u = (y - 1/2)/omega - x'beta
            prec += state.omega[r];
            num += (y[r] - 0.5) - state.omega[r] * xb[r];
        }
        let var = 1.0 / prec;
        state.b[i] = normal(rng, var * num, var);
    }
}

/// b_i ~ N((1/sigma_b^2 + sum omega)^-1 sum omega u, (1/sigma_b^2 + sum omega)^-1).
pub fn update_random_effects<R: Rng + ?Sized>(state: &mut LogitState, view: &RegressionView, rng: &mut R) -> Result<()> {
    require_binary_filled(&view.y)?;
    let xb = linear_predictor(view, &state.coef.beta);
    update_random_effects_cached(state, view, &view.y, &xb, rng);
    Ok(())
}

/// Bernoulli(logistic(x' beta + b_i)) draws for the masked responses.
pub fn impute_missing_y<R: Rng + ?Sized>(state: &LogitState, view: &RegressionView, rng: &mut R) -> Vec<f64> {
    let xb = linear_predictor(view, &state.coef.beta);
    let cluster = cluster_of_rows(view);
    view.missing_rows()
        .into_iter()
        .map(|r| bernoulli_logit(rng, xb[r] + state.b[cluster[r]]))
        .collect()
}

fn bernoulli_logit<R: Rng + ?Sized>(rng: &mut R, eta: f64) -> f64 {
    if bernoulli(rng, logistic(eta)) {
        1.0
    } else {
        0.0
    }
}

/// Run `n_cycles` Gibbs iterations: omega, every beta_k, w, mu0, sigma0^2,
/// b, sigma_b^2, then the masked responses.
pub fn run_chain<R: Rng + ?Sized>(
    view: &RegressionView,
    policies: &[SelectionPolicy],
    config: &SamplerConfig,
    rng: &mut R,
    n_cycles: usize,
    init: Option<LogitState>,
) -> Result<ChainOutput<LogitState>> {
    if n_cycles == 0 {
        return Err(Error::invalid("n_cycles must be at least 1"));
    }
    config.hyper.validate()?;
    let mut state = match init {
        Some(s) => s,
        None => LogitState::initial(policies, view.n_clusters(), view.n_rows(), &config.hyper, rng),
    };
    check_shapes(view, policies, &state)?;
    if view
        .y
        .iter()
        .zip(&view.y_missing)
        .any(|(v, m)| !m && *v != 0.0 && *v != 1.0)
    {
        return Err(Error::invalid("observed binary responses must be 0 or 1"));
    }

    let cluster = cluster_of_rows(view);
    let missing = view.missing_rows();
    let mut y = view.y.clone();
    let mut xb = linear_predictor(view, &state.coef.beta);
    for &r in &missing {
        if y[r] != 0.0 && y[r] != 1.0 {
            y[r] = bernoulli_logit(rng, xb[r] + state.b[cluster[r]]);
        }
    }

    let p = view.n_covariates();
    let mut order: Vec<usize> = (0..p).collect();
    let mut trace = Vec::with_capacity(n_cycles);
    for _ in 0..n_cycles {
        update_omega_cached(&mut state, &xb, &cluster, rng);
        if config.scan == ScanOrder::Random {
            order.shuffle(rng);
        }
        for &k in &order {
            update_beta_k_cached(&mut state, view, &y, &mut xb, &cluster, policies[k], k, rng)?;
        }
        update_w(&mut state.coef, policies, &config.hyper, rng);
        update_mu0(&mut state.coef, &config.hyper, rng);
        update_sigma0(&mut state.coef, &config.hyper, rng);
        update_random_effects_cached(&mut state, view, &y, &xb, rng);
        state.sigma_b_sq = update_sigma_b(&state.b, &config.hyper, rng);
        for &r in &missing {
            y[r] = bernoulli_logit(rng, xb[r] + state.b[cluster[r]]);
        }
        if !state.is_finite() {
            return Err(Error::numeric("logistic sampler produced a non-finite state"));
        }
        trace.push(ChainDraw {
            beta: state.coef.beta.clone(),
            w: state.coef.w,
            mu0: state.coef.mu0,
            sigma0_sq: state.coef.sigma0_sq,
            b: state.b.clone(),
            sigma_b_sq: state.sigma_b_sq,
            sigma_e_sq: None,
        });
    }
    let imputations = missing.iter().map(|&r| y[r]).collect();
    Ok(ChainOutput {
        trace,
        state,
        imputations,
    })
}

/// Simulate binary responses for every row from the model at `state`.
pub fn simulate_responses<R: Rng + ?Sized>(state: &LogitState, view: &RegressionView, rng: &mut R) -> Vec<f64> {
    let xb = linear_predictor(view, &state.coef.beta);
    let cluster = cluster_of_rows(view);
    (0..view.n_rows())
        .map(|r| bernoulli_logit(rng, xb[r] + state.b[cluster[r]]))
        .collect()
}
