//! Spike-and-slab coefficient state and the conditionals shared by the
//! linear and logistic samplers: the single-coefficient mixture draw and the
//! updates for w, mu0, sigma0^2 and sigma_b^2.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::SelectionPolicy;
use crate::distributions::{beta, inv_chisq_with_numerator, inverse_gamma, normal};
use crate::error::{Error, Result};
use crate::stats::log_normal_pdf;

/// Hyperparameters shared by both imputation models.
///
/// `w ~ Beta(a_w, b_w)`, `mu0 ~ N(0, mu0_var)`,
/// `sigma0^2 ~ Inverse-Gamma(sigma0_shape, sigma0_scale)`,
/// `sigma_b^2 = nu_b / chi^2_{nu_b}`, `sigma_e^2 = 1 / chi^2_{nu_e}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Hyper {
    pub a_w: f64,
    pub b_w: f64,
    pub nu_b: f64,
    pub nu_e: f64,
    pub mu0_var: f64,
    pub sigma0_shape: f64,
    pub sigma0_scale: f64,
}

impl Default for Hyper {
    fn default() -> Self {
        Hyper {
            a_w: 1.0,
            b_w: 1.0,
            nu_b: 1.0,
            nu_e: 1.0,
            mu0_var: 1.0,
            sigma0_shape: 1.0,
            sigma0_scale: 1.0,
        }
    }
}

impl Hyper {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("a_w", self.a_w),
            ("b_w", self.b_w),
            ("nu_b", self.nu_b),
            ("nu_e", self.nu_e),
            ("mu0_var", self.mu0_var),
            ("sigma0_shape", self.sigma0_shape),
            ("sigma0_scale", self.sigma0_scale),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("hyperparameter {name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpikeSlabState {
    pub beta: Vec<f64>,
    /// `included[k]` iff `beta[k] != 0`.
    pub included: Vec<bool>,
    pub w: f64,
    pub mu0: f64,
    pub sigma0_sq: f64,
}

impl SpikeSlabState {
    /// Start: excluded undetermined coordinates, forced coordinates drawn from
    /// the slab at mu0 = 0, sigma0^2 = 1; w at its prior mean.
    pub fn initial<R: Rng + ?Sized>(policies: &[SelectionPolicy], hyper: &Hyper, rng: &mut R) -> Self {
        let mu0 = 0.0;
        let sigma0_sq = 1.0;
        let beta: Vec<f64> = policies
            .iter()
            .map(|p| match p {
                SelectionPolicy::Forced => nonzero_normal(rng, mu0, sigma0_sq),
                SelectionPolicy::Undetermined => 0.0,
            })
            .collect();
        let included = beta.iter().map(|b| *b != 0.0).collect();
        SpikeSlabState {
            beta,
            included,
            w: hyper.a_w / (hyper.a_w + hyper.b_w),
            mu0,
            sigma0_sq,
        }
    }

    /// Joint draw of (w, mu0, sigma0^2, beta) from the prior.
    pub fn from_prior<R: Rng + ?Sized>(policies: &[SelectionPolicy], hyper: &Hyper, rng: &mut R) -> Self {
        let w = beta(rng, hyper.a_w, hyper.b_w);
        let mu0 = normal(rng, 0.0, hyper.mu0_var);
        let sigma0_sq = inverse_gamma(rng, hyper.sigma0_shape, hyper.sigma0_scale);
        let beta: Vec<f64> = policies
            .iter()
            .map(|p| match p {
                SelectionPolicy::Forced => nonzero_normal(rng, mu0, sigma0_sq),
                SelectionPolicy::Undetermined => {
                    if rng.random::<f64>() < w {
                        nonzero_normal(rng, mu0, sigma0_sq)
                    } else {
                        0.0
                    }
                }
            })
            .collect();
        let included = beta.iter().map(|b| *b != 0.0).collect();
        SpikeSlabState {
            beta,
            included,
            w,
            mu0,
            sigma0_sq,
        }
    }

    pub fn n_included(&self) -> usize {
        self.included.iter().filter(|z| **z).count()
    }

    pub fn is_consistent(&self) -> bool {
        self.beta
            .iter()
            .zip(&self.included)
            .all(|(b, z)| (*b != 0.0) == *z)
    }
}

// A slab draw of exactly 0.0 would be indistinguishable from the spike;
// probability zero, redrawn for totality.
fn nonzero_normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, var: f64) -> f64 {
    loop {
        let v = normal(rng, mean, var);
        if v != 0.0 {
            return v;
        }
    }
}

/// Sufficient statistics of one coefficient's likelihood: the likelihood in
/// beta_k is proportional to `exp(-precision/2 * beta^2 + score * beta)`.
/// For the linear model `precision = sum x^2 / sigma_e^2` and
/// `score = sum x * partial_residual / sigma_e^2`; the logistic model uses the
/// omega-weighted sums.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefLikelihood {
    pub precision: f64,
    pub score: f64,
}

/// Mixture weights and slab moments of a coefficient's full conditional.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefConditional {
    /// Probability of the point mass at zero (0 for forced coordinates).
    pub spike_probability: f64,
    pub slab_mean: f64,
    pub slab_var: f64,
}

pub fn coef_conditional(
    lik: CoefLikelihood,
    policy: SelectionPolicy,
    w: f64,
    mu0: f64,
    sigma0_sq: f64,
) -> Result<CoefConditional> {
    // An all-zero covariate column carries no information: the conditional
    // is the prior.
    if lik.precision == 0.0 && lik.score == 0.0 {
        return Ok(CoefConditional {
            spike_probability: match policy {
                SelectionPolicy::Forced => 0.0,
                SelectionPolicy::Undetermined => 1.0 - w,
            },
            slab_mean: mu0,
            slab_var: sigma0_sq,
        });
    }
    if !(lik.precision > 0.0) || !lik.precision.is_finite() || !lik.score.is_finite() {
        return Err(Error::numeric(format!(
            "degenerate covariate column: precision {}, score {}",
            lik.precision, lik.score
        )));
    }
    let slab_var = 1.0 / (lik.precision + 1.0 / sigma0_sq);
    let slab_mean = slab_var * (mu0 / sigma0_sq + lik.score);
    let spike_probability = match policy {
        SelectionPolicy::Forced => 0.0,
        SelectionPolicy::Undetermined => {
            let beta_hat = lik.score / lik.precision;
            let data_var = 1.0 / lik.precision;
            let log_spike = (1.0 - w).ln() + log_normal_pdf(0.0, beta_hat, data_var);
            let log_slab = w.ln() + log_normal_pdf(mu0, beta_hat, sigma0_sq + data_var);
            if log_slab == f64::NEG_INFINITY {
                1.0
            } else if log_spike == f64::NEG_INFINITY {
                0.0
            } else {
                // 1 / (1 + exp(log_slab - log_spike))
                crate::stats::logistic(log_spike - log_slab)
            }
        }
    };
    if !spike_probability.is_finite() || !slab_mean.is_finite() || !slab_var.is_finite() {
        return Err(Error::numeric("non-finite coefficient conditional"));
    }
    Ok(CoefConditional {
        spike_probability,
        slab_mean,
        slab_var,
    })
}

/// Draw one coefficient from its spike/slab mixture conditional.
pub fn draw_coef<R: Rng + ?Sized>(rng: &mut R, cond: &CoefConditional) -> f64 {
    if cond.spike_probability > 0.0 && rng.random::<f64>() < cond.spike_probability {
        0.0
    } else {
        nonzero_normal(rng, cond.slab_mean, cond.slab_var)
    }
}

/// `w ~ Beta(a_w + #included, b_w + #excluded)` over undetermined coordinates.
pub fn update_w<R: Rng + ?Sized>(
    state: &mut SpikeSlabState,
    policies: &[SelectionPolicy],
    hyper: &Hyper,
    rng: &mut R,
) -> f64 {
    let (mut on, mut off) = (0usize, 0usize);
    for (z, p) in state.included.iter().zip(policies) {
        if *p == SelectionPolicy::Undetermined {
            if *z {
                on += 1;
            } else {
                off += 1;
            }
        }
    }
    state.w = beta(rng, hyper.a_w + on as f64, hyper.b_w + off as f64);
    state.w
}

/// mu0 | beta, sigma0^2, conjugate over the included coordinates.
pub fn update_mu0<R: Rng + ?Sized>(state: &mut SpikeSlabState, hyper: &Hyper, rng: &mut R) -> f64 {
    let n_in = state.n_included() as f64;
    let sum: f64 = state.beta.iter().sum();
    let var = 1.0 / (1.0 / hyper.mu0_var + n_in / state.sigma0_sq);
    let mean = var * sum / state.sigma0_sq;
    state.mu0 = normal(rng, mean, var);
    state.mu0
}

/// sigma0^2 | beta, mu0, conjugate Inverse-Gamma over the included coordinates.
pub fn update_sigma0<R: Rng + ?Sized>(state: &mut SpikeSlabState, hyper: &Hyper, rng: &mut R) -> f64 {
    let mut n_in = 0.0;
    let mut ss = 0.0;
    for (b, z) in state.beta.iter().zip(&state.included) {
        if *z {
            n_in += 1.0;
            ss += (b - state.mu0) * (b - state.mu0);
        }
    }
    state.sigma0_sq = inverse_gamma(rng, hyper.sigma0_shape + 0.5 * n_in, hyper.sigma0_scale + 0.5 * ss);
    state.sigma0_sq
}

/// sigma_b^2 | b = (nu_b + sum b_i^2) / chi^2_{nu_b + m}.
pub fn update_sigma_b<R: Rng + ?Sized>(b: &[f64], hyper: &Hyper, rng: &mut R) -> f64 {
    let ss: f64 = b.iter().map(|v| v * v).sum();
    inv_chisq_with_numerator(rng, hyper.nu_b + b.len() as f64, hyper.nu_b + ss)
}

/// sigma_b^2 from its prior, `nu_b / chi^2_{nu_b}`.
pub fn sigma_b_prior<R: Rng + ?Sized>(hyper: &Hyper, rng: &mut R) -> f64 {
    inv_chisq_with_numerator(rng, hyper.nu_b, hyper.nu_b)
}
