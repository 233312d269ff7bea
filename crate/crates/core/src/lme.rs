//! Gibbs sampler for the random-intercept linear mixed model
//! `y_ij = x_ij' beta + b_i + e_ij` with spike-and-slab coefficients, used to
//! impute a continuous variable.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{RegressionView, SelectionPolicy};
use crate::distributions::{inv_chisq_with_numerator, normal};
use crate::error::{Error, Result};
use crate::spike_slab::{
    coef_conditional, draw_coef, sigma_b_prior, update_mu0, update_sigma0, update_sigma_b,
    update_w, CoefLikelihood, Hyper, SpikeSlabState,
};

/// How the residual variance is updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaEMode {
    /// `(1 + sum r^2) / chi^2_{nu_e + N}` with `r = y - x'beta - b_i` at the
    /// current state. Leaves the joint posterior invariant.
    #[default]
    Conjugate,
    /// Residuals from the least-squares fit of `y - b` on `x`, ignoring the
    /// current beta and the random intercepts, with `nu_e + N - 1` degrees of
    /// freedom. Does not target the model posterior; kept for comparison.
    AppendixLiteral,
}

/// Coefficient visiting order within a cycle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScanOrder {
    #[default]
    Sequential,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub hyper: Hyper,
    pub sigma_e_mode: SigmaEMode,
    pub scan: ScanOrder,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmeState {
    pub coef: SpikeSlabState,
    pub b: Vec<f64>,
    pub sigma_b_sq: f64,
    pub sigma_e_sq: f64,
}

impl LmeState {
    pub fn initial<R: Rng + ?Sized>(policies: &[SelectionPolicy], m: usize, hyper: &Hyper, rng: &mut R) -> Self {
        LmeState {
            coef: SpikeSlabState::initial(policies, hyper, rng),
            b: vec![0.0; m],
            sigma_b_sq: 1.0,
            sigma_e_sq: 1.0,
        }
    }

    /// Draw every parameter from its prior.
    pub fn from_prior<R: Rng + ?Sized>(policies: &[SelectionPolicy], m: usize, hyper: &Hyper, rng: &mut R) -> Self {
        let coef = SpikeSlabState::from_prior(policies, hyper, rng);
        let sigma_b_sq = sigma_b_prior(hyper, rng);
        let b = (0..m).map(|_| normal(rng, 0.0, sigma_b_sq)).collect();
        let sigma_e_sq = inv_chisq_with_numerator(rng, hyper.nu_e, 1.0);
        LmeState {
            coef,
            b,
            sigma_b_sq,
            sigma_e_sq,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.coef.beta.iter().chain(&self.b).all(|v| v.is_finite())
            && self.sigma_b_sq.is_finite()
            && self.sigma_b_sq > 0.0
            && self.sigma_e_sq.is_finite()
            && self.sigma_e_sq > 0.0
    }
}

/// Per-row fixed-effect predictor x_r' beta.
pub(crate) fn linear_predictor(view: &RegressionView, beta: &[f64]) -> Vec<f64> {
    (0..view.n_rows())
        .map(|r| view.row(r).iter().zip(beta).map(|(x, b)| x * b).sum())
        .collect()
}

fn check_state(view: &RegressionView, policies: &[SelectionPolicy], beta_len: usize, b_len: usize) -> Result<()> {
    if policies.len() != view.n_covariates() || beta_len != view.n_covariates() {
        return Err(Error::invalid(format!(
            "{} policies and {} coefficients for {} covariates",
            policies.len(),
            beta_len,
            view.n_covariates()
        )));
    }
    if b_len != view.n_clusters() {
        return Err(Error::invalid(format!(
            "{b_len} random intercepts for {} clusters",
            view.n_clusters()
        )));
    }
    Ok(())
}

fn cluster_of_rows(view: &RegressionView) -> Vec<usize> {
    let mut out = Vec::with_capacity(view.n_rows());
    for i in 0..view.n_clusters() {
        out.extend(view.cluster_rows(i).map(|_| i));
    }
    out
}

/// Coefficient-k likelihood statistics given the current state.
fn coef_likelihood(
    view: &RegressionView,
    y: &[f64],
    xb: &[f64],
    cluster: &[usize],
    state: &LmeState,
    k: usize,
) -> CoefLikelihood {
    let p = view.n_covariates();
    let beta_k = state.coef.beta[k];
    let mut sxx = 0.0;
    let mut sxr = 0.0;
    for r in 0..view.n_rows() {
        let x = view.x[r * p + k];
        let partial = y[r] - (xb[r] - x * beta_k) - state.b[cluster[r]];
        sxx += x * x;
        sxr += x * partial;
    }
    CoefLikelihood {
        precision: sxx / state.sigma_e_sq,
        score: sxr / state.sigma_e_sq,
    }
}

fn update_beta_k_cached<R: Rng + ?Sized>(
    state: &mut LmeState,
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

/// Redraw beta_k (and its inclusion flag) from its spike/slab conditional.
/// Missing responses must already be filled in `view.y`.
pub fn update_beta_k<R: Rng + ?Sized>(
    state: &mut LmeState,
    view: &RegressionView,
    policy: SelectionPolicy,
    k: usize,
    rng: &mut R,
) -> Result<f64> {
    require_filled(view)?;
    let mut xb = linear_predictor(view, &state.coef.beta);
    let cluster = cluster_of_rows(view);
    update_beta_k_cached(state, view, &view.y, &mut xb, &cluster, policy, k, rng)
}

/// Closed-form spike probability and slab moments for beta_k at the current
/// state.
pub fn beta_k_conditional(
    state: &LmeState,
    view: &RegressionView,
    policy: SelectionPolicy,
    k: usize,
) -> Result<crate::spike_slab::CoefConditional> {
    require_filled(view)?;
    let xb = linear_predictor(view, &state.coef.beta);
    let cluster = cluster_of_rows(view);
    let lik = coef_likelihood(view, &view.y, &xb, &cluster, state, k);
    coef_conditional(lik, policy, state.coef.w, state.coef.mu0, state.coef.sigma0_sq)
}

fn require_filled(view: &RegressionView) -> Result<()> {
    if view.y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("responses must be filled before updating parameters"));
    }
    Ok(())
}

fn update_random_effects_cached<R: Rng + ?Sized>(
    state: &mut LmeState,
    view: &RegressionView,
    y: &[f64],
    xb: &[f64],
    rng: &mut R,
) {
    for i in 0..view.n_clusters() {
        let rows = view.cluster_rows(i);
        let n_i = rows.len() as f64;
        let resid: f64 = rows.map(|r| y[r] - xb[r]).sum();
        let var = 1.0 / (n_i / state.sigma_e_sq + 1.0 / state.sigma_b_sq);
        let mean = var * resid / state.sigma_e_sq;
        state.b[i] = normal(rng, mean, var);
    }
}

/// b_i ~ N(V * sum_j (y_ij - x_ij' beta) / sigma_e^2, V) with
/// V = (n_i / sigma_e^2 + 1 / sigma_b^2)^-1, independently per cluster.
pub fn update_random_effects<R: Rng + ?Sized>(state: &mut LmeState, view: &RegressionView, rng: &mut R) -> Result<()> {
    require_filled(view)?;
    let xb = linear_predictor(view, &state.coef.beta);
    update_random_effects_cached(state, view, &view.y, &xb, rng);
    Ok(())
}

fn update_sigma_e_cached<R: Rng + ?Sized>(
    state: &mut LmeState,
    view: &RegressionView,
    y: &[f64],
    xb: &[f64],
    cluster: &[usize],
    hyper: &Hyper,
    mode: SigmaEMode,
    rng: &mut R,
) -> Result<f64> {
    let n = view.n_rows();
    if n == 0 {
        return Err(Error::invalid("residual variance update needs at least one row"));
    }
    let value = match mode {
        SigmaEMode::Conjugate => {
            let ss: f64 = (0..n)
                .map(|r| {
                    let e = y[r] - xb[r] - state.b[cluster[r]];
                    e * e
                })
                .sum();
            inv_chisq_with_numerator(rng, hyper.nu_e + n as f64, 1.0 + ss)
        }
        SigmaEMode::AppendixLiteral => {
            let p = view.n_covariates();
            let x = DMatrix::from_row_slice(n, p, &view.x);
            let target = DVector::from_iterator(n, (0..n).map(|r| y[r] - state.b[cluster[r]]));
            let xtx = x.transpose() * &x;
            let xty = x.transpose() * target;
            let beta_hat = xtx
                .cholesky()
                .ok_or_else(|| Error::numeric("least-squares design is singular"))?
                .solve(&xty);
            let fitted = &x * beta_hat;
            let ss: f64 = (0..n).map(|r| (y[r] - fitted[r]).powi(2)).sum();
            let df = hyper.nu_e + n as f64 - 1.0;
            if !(df > 0.0) {
                return Err(Error::numeric("non-positive residual degrees of freedom"));
            }
            inv_chisq_with_numerator(rng, df, 1.0 + ss)
        }
    };
    if !(value > 0.0 && value.is_finite()) {
        return Err(Error::numeric(format!("residual variance draw {value}")));
    }
    state.sigma_e_sq = value;
    Ok(value)
}

pub fn update_sigma_e<R: Rng + ?Sized>(
    state: &mut LmeState,
    view: &RegressionView,
    hyper: &Hyper,
    mode: SigmaEMode,
    rng: &mut R,
) -> Result<f64> {
    require_filled(view)?;
    let xb = linear_predictor(view, &state.coef.beta);
    let cluster = cluster_of_rows(view);
    update_sigma_e_cached(state, view, &view.y, &xb, &cluster, hyper, mode, rng)
}

/// Draw every masked response from N(x' beta + b_i, sigma_e^2). Returns the
/// draws in row order of the masked cells.
pub fn impute_missing_y<R: Rng + ?Sized>(state: &LmeState, view: &RegressionView, rng: &mut R) -> Vec<f64> {
    let xb = linear_predictor(view, &state.coef.beta);
    let cluster = cluster_of_rows(view);
    view.missing_rows()
        .into_iter()
        .map(|r| normal(rng, xb[r] + state.b[cluster[r]], state.sigma_e_sq))
        .collect()
}

/// One recorded Gibbs iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDraw {
    pub beta: Vec<f64>,
    pub w: f64,
    pub mu0: f64,
    pub sigma0_sq: f64,
    pub b: Vec<f64>,
    pub sigma_b_sq: f64,
    /// Absent for the logistic model.
    pub sigma_e_sq: Option<f64>,
}

impl ChainDraw {
    pub fn included(&self) -> Vec<bool> {
        self.beta.iter().map(|b| *b != 0.0).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainOutput<S> {
    pub trace: Vec<ChainDraw>,
    pub state: S,
    /// Final draws for the masked responses, in row order.
    pub imputations: Vec<f64>,
}

/// Run `n_cycles` Gibbs iterations. Each iteration updates every beta_k, then
/// w, mu0, sigma0^2, then b, sigma_e^2, sigma_b^2, and finally redraws the
/// masked responses. Masked responses still holding NaN in the view are
/// first drawn from the predictive at the starting state.
pub fn run_chain<R: Rng + ?Sized>(
    view: &RegressionView,
    policies: &[SelectionPolicy],
    config: &SamplerConfig,
    rng: &mut R,
    n_cycles: usize,
    init: Option<LmeState>,
) -> Result<ChainOutput<LmeState>> {
    if n_cycles == 0 {
        return Err(Error::invalid("n_cycles must be at least 1"));
    }
    config.hyper.validate()?;
    let mut state = match init {
        Some(s) => s,
        None => LmeState::initial(policies, view.n_clusters(), &config.hyper, rng),
    };
    check_state(view, policies, state.coef.beta.len(), state.b.len())?;
    if view.y.iter().zip(&view.y_missing).any(|(v, m)| !m && !v.is_finite()) {
        return Err(Error::invalid("observed responses must be finite"));
    }

    let cluster = cluster_of_rows(view);
    let missing = view.missing_rows();
    let mut y = view.y.clone();
    let mut xb = linear_predictor(view, &state.coef.beta);
    for &r in &missing {
        if !y[r].is_finite() {
            y[r] = normal(rng, xb[r] + state.b[cluster[r]], state.sigma_e_sq);
        }
    }

    let p = view.n_covariates();
    let mut order: Vec<usize> = (0..p).collect();
    let mut trace = Vec::with_capacity(n_cycles);
    for _ in 0..n_cycles {
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
        update_sigma_e_cached(&mut state, view, &y, &xb, &cluster, &config.hyper, config.sigma_e_mode, rng)?;
        state.sigma_b_sq = update_sigma_b(&state.b, &config.hyper, rng);
        for &r in &missing {
            y[r] = normal(rng, xb[r] + state.b[cluster[r]], state.sigma_e_sq);
        }
        if !state.is_finite() {
            return Err(Error::numeric("linear sampler produced a non-finite state"));
        }
        trace.push(ChainDraw {
            beta: state.coef.beta.clone(),
            w: state.coef.w,
            mu0: state.coef.mu0,
            sigma0_sq: state.coef.sigma0_sq,
            b: state.b.clone(),
            sigma_b_sq: state.sigma_b_sq,
            sigma_e_sq: Some(state.sigma_e_sq),
        });
    }
    let imputations = missing.iter().map(|&r| y[r]).collect();
    Ok(ChainOutput {
        trace,
        state,
        imputations,
    })
}

/// Simulate responses for every row of `view` from the model at `state`.
pub fn simulate_responses<R: Rng + ?Sized>(state: &LmeState, view: &RegressionView, rng: &mut R) -> Vec<f64> {
    let xb = linear_predictor(view, &state.coef.beta);
    let cluster = cluster_of_rows(view);
    (0..view.n_rows())
        .map(|r| normal(rng, xb[r] + state.b[cluster[r]], state.sigma_e_sq))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Covariate;
    use crate::rng::RngStream;
    use crate::stats::{iid_standard_error, mean, quantile, variance};

    fn undetermined(p: usize) -> Vec<Covariate> {
        vec![
            Covariate {
                source: None,
                policy: SelectionPolicy::Undetermined
            };
            p
        ]
    }

    fn base_state(p: usize, m: usize) -> LmeState {
        LmeState {
            coef: SpikeSlabState {
                beta: vec![0.0; p],
                included: vec![false; p],
                w: 0.5,
                mu0: 0.0,
                sigma0_sq: 1.0,
            },
            b: vec![0.0; m],
            sigma_b_sq: 1.0,
            sigma_e_sq: 1.0,
        }
    }

    #[test]
    fn beta_k_spike_frequency_matches_closed_form() {
        // single cluster, x = (1, 1), y - b = (0, 0)
        let view = RegressionView::new(vec![0.0, 0.0], vec![false, false], vec![1.0, 1.0], undetermined(1), &[2]).unwrap();
        let state = base_state(1, 1);
        let cond = beta_k_conditional(&state, &view, SelectionPolicy::Undetermined, 0).unwrap();
        let expected = 3f64.sqrt() / (3f64.sqrt() + 1.0);
        assert!((cond.spike_probability - expected).abs() < 1e-12);

        let mut rng = RngStream::new(1);
        let n = 10_000;
        let spikes = (0..n)
            .filter(|_| {
                let mut s = state.clone();
                update_beta_k(&mut s, &view, SelectionPolicy::Undetermined, 0, &mut rng).unwrap() == 0.0
            })
            .count() as f64
            / n as f64;
        let se = (expected * (1.0 - expected) / n as f64).sqrt();
        assert!((spikes - expected).abs() < 3.0 * se);
    }

    #[test]
    fn beta_k_always_slab_when_w_is_one() {
        let view = RegressionView::new(vec![0.0, 0.0], vec![false, false], vec![1.0, 1.0], undetermined(1), &[2]).unwrap();
        let mut state = base_state(1, 1);
        state.coef.w = 1.0;
        let mut rng = RngStream::new(2);
        for _ in 0..1000 {
            let v = update_beta_k(&mut state, &view, SelectionPolicy::Undetermined, 0, &mut rng).unwrap();
            assert_ne!(v, 0.0);
            assert!(state.coef.included[0]);
        }
    }

    #[test]
    fn beta_k_zero_column_draws_from_prior() {
        let view = RegressionView::new(vec![1.0, 2.0], vec![false, false], vec![0.0, 0.0], undetermined(1), &[2]).unwrap();
        let mut state = base_state(1, 1);
        state.coef.mu0 = 0.5;
        state.coef.sigma0_sq = 2.0;
        let mut rng = RngStream::new(3);
        let draws: Vec<f64> = (0..20_000)
            .map(|_| update_beta_k(&mut state, &view, SelectionPolicy::Forced, 0, &mut rng).unwrap())
            .collect();
        assert!((mean(&draws) - 0.5).abs() < 4.0 * iid_standard_error(&draws));
        assert!((variance(&draws) - 2.0).abs() < 0.1);
    }

    #[test]
    fn random_effect_plug_in() {
        // n_i = 1, y - x'beta = 4, sigma_e^2 = sigma_b^2 = 1 -> N(2, 1/2)
        let view = RegressionView::new(vec![4.0], vec![false], vec![0.0], undetermined(1), &[1]).unwrap();
        let mut rng = RngStream::new(4);
        let draws: Vec<f64> = (0..10_000)
            .map(|_| {
                let mut s = base_state(1, 1);
                update_random_effects(&mut s, &view, &mut rng).unwrap();
                s.b[0]
            })
            .collect();
        assert!((mean(&draws) - 2.0).abs() < 3.0 * iid_standard_error(&draws));
        assert!((variance(&draws) / 0.5 - 1.0).abs() < 0.05);
    }

    #[test]
    fn random_effect_vanishes_with_prior_variance() {
        let view = RegressionView::new(vec![4.0, 5.0], vec![false, false], vec![0.0, 0.0], undetermined(1), &[2]).unwrap();
        let mut rng = RngStream::new(5);
        let mut s = base_state(1, 1);
        s.sigma_b_sq = 1e-12;
        update_random_effects(&mut s, &view, &mut rng).unwrap();
        assert!(s.b[0].abs() < 1e-5);
    }

    #[test]
    fn sigma_e_zero_residuals() {
        // all residuals zero, nu_e = 1, N = 10 -> 1 / chi^2_11
        let view = RegressionView::new(vec![0.0; 10], vec![false; 10], vec![1.0; 10], undetermined(1), &[10]).unwrap();
        let mut rng = RngStream::new(6);
        let hyper = Hyper::default();
        let draws: Vec<f64> = (0..50_000)
            .map(|_| {
                let mut s = base_state(1, 1);
                update_sigma_e(&mut s, &view, &hyper, SigmaEMode::Conjugate, &mut rng).unwrap()
            })
            .collect();
        // E[1 / chi^2_11] = 1/9
        assert!((mean(&draws) - 1.0 / 9.0).abs() < 4.0 * iid_standard_error(&draws));
    }

    #[test]
    fn sigma_e_concentrates_on_residual_variance() {
        let mut rng = RngStream::new(7);
        let n = 2000;
        let y: Vec<f64> = (0..n).map(|_| normal(&mut rng, 0.0, 4.0)).collect();
        let view = RegressionView::new(y, vec![false; n], vec![0.0; n], undetermined(1), &[n]).unwrap();
        let hyper = Hyper::default();
        let draws: Vec<f64> = (0..200)
            .map(|_| {
                let mut s = base_state(1, 1);
                update_sigma_e(&mut s, &view, &hyper, SigmaEMode::Conjugate, &mut rng).unwrap()
            })
            .collect();
        let med = quantile(&draws, 0.5);
        assert!((3.6..=4.4).contains(&med), "median {med}");
    }

    #[test]
    fn appendix_literal_mode_runs() {
        let mut rng = RngStream::new(8);
        let n = 50;
        let x: Vec<f64> = (0..n).map(|_| normal(&mut rng, 0.0, 1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + normal(&mut rng, 0.0, 1.0)).collect();
        let view = RegressionView::new(y, vec![false; n], x, undetermined(1), &[25, 25]).unwrap();
        let mut s = base_state(1, 2);
        let v = update_sigma_e(&mut s, &view, &Hyper::default(), SigmaEMode::AppendixLiteral, &mut rng).unwrap();
        assert!(v > 0.0 && v.is_finite());
    }

    #[test]
    fn imputation_moments() {
        let view = RegressionView::new(vec![f64::NAN], vec![true], vec![2.0], undetermined(1), &[1]).unwrap();
        let mut s = base_state(1, 1);
        s.coef.beta[0] = 1.5;
        s.coef.included[0] = true;
        s.b[0] = -0.5;
        s.sigma_e_sq = 0.0;
        let mut rng = RngStream::new(9);
        assert_eq!(impute_missing_y(&s, &view, &mut rng), vec![2.5]);

        s.sigma_e_sq = 2.0;
        let draws: Vec<f64> = (0..10_000).map(|_| impute_missing_y(&s, &view, &mut rng)[0]).collect();
        assert!((mean(&draws) - 2.5).abs() < 3.0 * iid_standard_error(&draws));
        assert!((variance(&draws) / 2.0 - 1.0).abs() < 0.05);
    }

    #[test]
    fn chain_length_and_spike_exactness() {
        let mut rng = RngStream::new(10);
        let n = 40;
        let x: Vec<f64> = (0..2 * n).map(|_| normal(&mut rng, 0.0, 1.0)).collect();
        let y: Vec<f64> = (0..n).map(|r| x[2 * r] + normal(&mut rng, 0.0, 1.0)).collect();
        let mut missing = vec![false; n];
        missing[3] = true;
        let view = RegressionView::new(y, missing, x, undetermined(2), &[20, 20]).unwrap();
        let policies = view.policies();
        let out = run_chain(&view, &policies, &SamplerConfig::default(), &mut rng, 1, None).unwrap();
        assert_eq!(out.trace.len(), 1);
        assert_eq!(out.imputations.len(), 1);
        let out = run_chain(&view, &policies, &SamplerConfig::default(), &mut rng, 300, None).unwrap();
        for d in &out.trace {
            for b in &d.beta {
                assert!(*b == 0.0 || b.abs() > 0.0);
            }
        }
        assert!(out.state.coef.is_consistent());
        assert!(run_chain(&view, &policies, &SamplerConfig::default(), &mut rng, 0, None).is_err());
    }

    #[test]
    fn chain_is_reproducible() {
        let n = 30;
        let mut rng = RngStream::new(11);
        let x: Vec<f64> = (0..n).map(|_| normal(&mut rng, 0.0, 1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| v + normal(&mut rng, 0.0, 1.0)).collect();
        let view = RegressionView::new(y, vec![false; n], x, undetermined(1), &[10, 20]).unwrap();
        let policies = view.policies();
        let cfg = SamplerConfig {
            scan: ScanOrder::Random,
            ..Default::default()
        };
        let a = run_chain(&view, &policies, &cfg, &mut RngStream::new(3), 50, None).unwrap();
        let b = run_chain(&view, &policies, &cfg, &mut RngStream::new(3), 50, None).unwrap();
        assert_eq!(a.trace, b.trace);
    }
}
