//! Random variate generation: the exact Polya-Gamma PG(1, c) sampler, its
//! truncated-series oracle, the scaled inverse chi-square, and the standard
//! conjugate draws used by the Gibbs samplers.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Beta, Binomial, ChiSquared, Distribution, Exp1, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::log_normal_cdf;

/// Parameters of PG(b, c).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgParams {
    b: f64,
    c: f64,
}

impl PgParams {
    pub fn new(b: f64, c: f64) -> Result<Self> {
        if !(b > 0.0) || !b.is_finite() {
            return Err(Error::invalid(format!("PG shape b must be positive, got {b}")));
        }
        if !c.is_finite() {
            return Err(Error::invalid(format!("PG tilt c must be finite, got {c}")));
        }
        Ok(PgParams { b, c })
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

/// E[PG(1, c)] = tanh(c/2) / (2c), with limit 1/4 at c = 0.
pub fn pg1_mean(c: f64) -> f64 {
    if c.abs() < 1e-6 {
        0.25 - c * c / 48.0
    } else {
        (0.5 * c).tanh() / (2.0 * c)
    }
}

/// Draw from PG(b, c). Only b = 1 is supported.
pub fn sample_pg<R: Rng + ?Sized>(rng: &mut R, params: PgParams) -> Result<f64> {
    if params.b != 1.0 {
        return Err(Error::Unsupported(format!(
            "PG sampler supports b = 1 only, got b = {}",
            params.b
        )));
    }
    Ok(sample_pg1(rng, params.c))
}

// Crossover between the inverse-Gaussian and exponential proposal pieces.
const TRUNC: f64 = 0.64;
const TRUNC_RECIP: f64 = 1.0 / TRUNC;

/// Exact PG(1, c) draw by alternating-series accept-reject on J*(1, |c|/2),
/// using PG(1, c) = J*(1, c/2) / 4.
pub fn sample_pg1<R: Rng + ?Sized>(rng: &mut R, c: f64) -> f64 {
    let z = 0.5 * c.abs();
    let k = 0.125 * PI * PI + 0.5 * z * z;
    let p_exp = mass_exponential_piece(z, k);
    loop {
        let x = if rng.random::<f64>() < p_exp {
            let e: f64 = Exp1.sample(rng);
            TRUNC + e / k
        } else {
            truncated_inverse_gaussian(rng, z)
        };
        let mut s = series_coefficient(0, x);
        let y = rng.random::<f64>() * s;
        let mut n = 0;
        loop {
            n += 1;
            if n % 2 == 1 {
                s -= series_coefficient(n, x);
                if y <= s {
                    return 0.25 * x;
                }
            } else {
                s += series_coefficient(n, x);
                if y > s {
                    break;
                }
            }
        }
    }
}

/// Probability that the proposal comes from the exponential piece right of TRUNC.
fn mass_exponential_piece(z: f64, k: f64) -> f64 {
    let sqrt_recip = (1.0 / TRUNC).sqrt();
    let b = sqrt_recip * (TRUNC * z - 1.0);
    let a = -sqrt_recip * (TRUNC * z + 1.0);
    let x0 = k.ln() + k * TRUNC;
    let xb = x0 - z + log_normal_cdf(b);
    let xa = x0 + z + log_normal_cdf(a);
    let q_over_p = 4.0 / PI * (xb.exp() + xa.exp());
    1.0 / (1.0 + q_over_p)
}

/// n-th term of the alternating series for the J*(1, 0) density, piecewise
/// around TRUNC.
fn series_coefficient(n: u32, x: f64) -> f64 {
    let kn = (n as f64 + 0.5) * PI;
    if x > TRUNC {
        kn * (-0.5 * kn * kn * x).exp()
    } else if x > 0.0 {
        let half = n as f64 + 0.5;
        let log_term = -1.5 * ((0.5 * PI).ln() + x.ln()) + kn.ln() - 2.0 * half * half / x;
        log_term.exp()
    } else {
        0.0
    }
}

/// Inverse-Gaussian(1/z, 1) truncated to (0, TRUNC).
fn truncated_inverse_gaussian<R: Rng + ?Sized>(rng: &mut R, z: f64) -> f64 {
    if TRUNC_RECIP > z {
        // mean beyond the truncation point: scaled truncated 1/chi-square
        // proposal, accepted with probability exp(-z^2 x / 2)
        loop {
            let (mut e1, mut e2): (f64, f64) = (Exp1.sample(rng), Exp1.sample(rng));
            while e1 * e1 > 2.0 * e2 / TRUNC {
                e1 = Exp1.sample(rng);
                e2 = Exp1.sample(rng);
            }
            let r = 1.0 + e1 * TRUNC;
            let x = TRUNC / (r * r);
            let alpha = (-0.5 * z * z * x).exp();
            if rng.random::<f64>() <= alpha {
                return x;
            }
        }
    } else {
        let mu = 1.0 / z;
        loop {
            let n: f64 = StandardNormal.sample(rng);
            let mu_y = mu * n * n;
            let half_mu = 0.5 * mu;
            let mut x = mu + half_mu * mu_y - half_mu * (4.0 * mu_y + mu_y * mu_y).sqrt();
            if rng.random::<f64>() > mu / (mu + x) {
                x = mu * mu / x;
            }
            if x < TRUNC {
                return x;
            }
        }
    }
}

/// Evaluate the Gamma-convolution series defining PG(b, c) at given
/// Gamma variates `g_1, ..., g_K`.
pub fn pg_series_value(gammas: &[f64], c: f64) -> f64 {
    let tilt = c * c / (4.0 * PI * PI);
    let sum: f64 = gammas
        .iter()
        .enumerate()
        .map(|(idx, g)| {
            let half = idx as f64 + 0.5;
            g / (half * half + tilt)
        })
        .sum();
    sum / (2.0 * PI * PI)
}

/// Approximate PG(b, c) draw from the first `truncation` terms of its series
/// representation. Test oracle only; biased low by O(1/truncation).
pub fn pg_series_oracle<R: Rng + ?Sized>(
    rng: &mut R,
    params: PgParams,
    truncation: usize,
) -> Result<f64> {
    if truncation == 0 {
        return Err(Error::invalid("series truncation must be at least 1"));
    }
    let gamma = Gamma::new(params.b, 1.0).map_err(|e| Error::invalid(e.to_string()))?;
    let gammas: Vec<f64> = (0..truncation).map(|_| gamma.sample(rng)).collect();
    Ok(pg_series_value(&gammas, params.c))
}

/// Scaled inverse chi-square in the Gelman convention: `df * scale / X`
/// with `X ~ chi^2_df`.
pub fn sample_scaled_inv_chisq<R: Rng + ?Sized>(rng: &mut R, df: f64, scale: f64) -> Result<f64> {
    if !(df > 0.0) || !df.is_finite() {
        return Err(Error::invalid(format!("degrees of freedom must be positive, got {df}")));
    }
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::invalid(format!("scale must be positive, got {scale}")));
    }
    Ok(df * scale / chi_square(rng, df))
}

/// `numerator / X` with `X ~ chi^2_df`; the form the variance updates use.
pub(crate) fn inv_chisq_with_numerator<R: Rng + ?Sized>(rng: &mut R, df: f64, numerator: f64) -> f64 {
    numerator / chi_square(rng, df)
}

fn chi_square<R: Rng + ?Sized>(rng: &mut R, df: f64) -> f64 {
    ChiSquared::new(df)
        .expect("validated degrees of freedom")
        .sample(rng)
}

/// The standard distributions used by the conjugate updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StandardDist {
    /// Normal with mean and variance.
    Normal { mean: f64, var: f64 },
    Beta { a: f64, b: f64 },
    /// Inverse-Gamma with shape and scale (density proportional to
    /// x^(-shape-1) exp(-scale/x)).
    InverseGamma { shape: f64, scale: f64 },
    Bernoulli { p: f64 },
    Binomial { n: u64, p: f64 },
    /// Gamma with unit scale.
    Gamma { shape: f64 },
}

pub fn sample_standard<R: Rng + ?Sized>(rng: &mut R, dist: StandardDist) -> Result<f64> {
    let positive = |name: &str, v: f64| -> Result<()> {
        if v > 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
        }
    };
    let probability = |v: f64| -> Result<()> {
        if (0.0..=1.0).contains(&v) {
            Ok(())
        } else {
            Err(Error::invalid(format!("probability must lie in [0, 1], got {v}")))
        }
    };
    match dist {
        StandardDist::Normal { mean, var } => {
            if !mean.is_finite() || !(var >= 0.0) || !var.is_finite() {
                return Err(Error::invalid(format!("invalid normal N({mean}, {var})")));
            }
            Ok(normal(rng, mean, var))
        }
        StandardDist::Beta { a, b } => {
            positive("beta a", a)?;
            positive("beta b", b)?;
            Ok(beta(rng, a, b))
        }
        StandardDist::InverseGamma { shape, scale } => {
            positive("inverse-gamma shape", shape)?;
            positive("inverse-gamma scale", scale)?;
            Ok(inverse_gamma(rng, shape, scale))
        }
        StandardDist::Bernoulli { p } => {
            probability(p)?;
            Ok(if bernoulli(rng, p) { 1.0 } else { 0.0 })
        }
        StandardDist::Binomial { n, p } => {
            probability(p)?;
            let dist = Binomial::new(n, p).map_err(|e| Error::invalid(e.to_string()))?;
            Ok(dist.sample(rng) as f64)
        }
        StandardDist::Gamma { shape } => {
            positive("gamma shape", shape)?;
            Ok(gamma_unit(rng, shape))
        }
    }
}

pub(crate) fn normal<R: Rng + ?Sized>(rng: &mut R, mean: f64, var: f64) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    mean + var.sqrt() * z
}

pub(crate) fn beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    Beta::new(a, b).expect("validated beta parameters").sample(rng)
}

pub(crate) fn gamma_unit<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    Gamma::new(shape, 1.0).expect("validated gamma shape").sample(rng)
}

pub(crate) fn inverse_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64, scale: f64) -> f64 {
    scale / gamma_unit(rng, shape)
}

pub(crate) fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    rng.random::<f64>() < p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use crate::stats::{iid_standard_error, ks_one_sample, ks_two_sample, mean, quantile};

    fn draws(n: usize, mut f: impl FnMut() -> f64) -> Vec<f64> {
        (0..n).map(|_| f()).collect()
    }

    #[test]
    fn pg_rejects_general_shape() {
        let mut rng = RngStream::new(1);
        let err = sample_pg(&mut rng, PgParams::new(2.0, 0.0).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Unsupported(_)));
        assert!(PgParams::new(0.0, 1.0).is_err());
        assert!(PgParams::new(1.0, f64::NAN).is_err());
    }

    #[test]
    fn pg_mean_at_zero_tilt() {
        let mut rng = RngStream::new(2);
        let xs = draws(100_000, || sample_pg1(&mut rng, 0.0));
        let se = iid_standard_error(&xs);
        assert!((mean(&xs) - 0.25).abs() < 3.0 * se, "mean {} se {se}", mean(&xs));
    }

    #[test]
    fn pg_mean_at_tilt_two() {
        let mut rng = RngStream::new(3);
        let xs = draws(100_000, || sample_pg1(&mut rng, 2.0));
        let target = 1f64.tanh() / 4.0;
        assert!((target - 0.190_399).abs() < 1e-6);
        let se = iid_standard_error(&xs);
        assert!((mean(&xs) - target).abs() < 3.0 * se);
    }

    #[test]
    fn pg_symmetric_in_tilt() {
        let mut a = RngStream::new(4);
        let mut b = RngStream::new(5);
        let xs = draws(10_000, || sample_pg1(&mut a, 1.7));
        let ys = draws(10_000, || sample_pg1(&mut b, -1.7));
        assert!(ks_two_sample(&xs, &ys).p_value > 0.01);
    }

    #[test]
    fn pg_draws_finite_positive_for_extreme_tilt() {
        let mut rng = RngStream::new(6);
        for c in [-40.0, -10.0, 0.0, 1e-9, 10.0, 40.0, 300.0] {
            for _ in 0..2000 {
                let x = sample_pg1(&mut rng, c);
                assert!(x.is_finite() && x > 0.0, "c = {c}, draw {x}");
            }
        }
    }

    #[test]
    fn series_single_term() {
        let v = pg_series_value(&[1.0], 0.0);
        assert!((v - 2.0 / (PI * PI)).abs() < 1e-15);
        assert!((v - 0.202_642).abs() < 1e-6);
    }

    #[test]
    fn series_oracle_means() {
        let mut rng = RngStream::new(7);
        let p0 = PgParams::new(1.0, 0.0).unwrap();
        let xs = draws(100_000, || pg_series_oracle(&mut rng, p0, 200).unwrap());
        assert!((mean(&xs) / 0.25 - 1.0).abs() < 0.01);

        let p3 = PgParams::new(1.0, 3.0).unwrap();
        let target = 1.5f64.tanh() / 6.0;
        assert!((target - 0.150_858).abs() < 1e-6);
        let xs = draws(20_000, || pg_series_oracle(&mut rng, p3, 200).unwrap());
        assert!((mean(&xs) / target - 1.0).abs() < 0.02);
        assert!(pg_series_oracle(&mut rng, p3, 0).is_err());
    }

    #[test]
    fn scaled_inv_chisq_mean_and_median() {
        let mut rng = RngStream::new(8);
        let xs = draws(100_000, || sample_scaled_inv_chisq(&mut rng, 4.0, 1.0).unwrap());
        // finite mean 2 but infinite variance at df = 4, so compare against a
        // loose band
        assert!((mean(&xs) - 2.0).abs() < 0.05, "mean {}", mean(&xs));

        let ys = draws(100_000, || sample_scaled_inv_chisq(&mut rng, 10.0, 0.5).unwrap());
        // median(chi^2_10) = 9.341_818 (numeric quantile)
        let target = 5.0 / 9.341_818;
        assert!((quantile(&ys, 0.5) / target - 1.0).abs() < 0.02);
    }

    #[test]
    fn scaled_inv_chisq_rejects_bad_parameters() {
        let mut rng = RngStream::new(9);
        assert!(sample_scaled_inv_chisq(&mut rng, 4.0, 0.0).is_err());
        assert!(sample_scaled_inv_chisq(&mut rng, 0.0, 1.0).is_err());
        assert!(sample_scaled_inv_chisq(&mut rng, -1.0, 1.0).is_err());
    }

    #[test]
    fn standard_draws() {
        let mut rng = RngStream::new(10);
        let z = sample_standard(&mut rng, StandardDist::Normal { mean: 0.0, var: 0.0 }).unwrap();
        assert_eq!(z, 0.0);

        let us = draws(10_000, || {
            sample_standard(&mut rng, StandardDist::Beta { a: 1.0, b: 1.0 }).unwrap()
        });
        assert!(ks_one_sample(&us, |x| x.clamp(0.0, 1.0)).p_value > 0.01);

        let n = 100_000;
        let above = (0..n)
            .filter(|_| {
                sample_standard(&mut rng, StandardDist::InverseGamma { shape: 1.0, scale: 1.0 })
                    .unwrap()
                    > 1.0
            })
            .count() as f64
            / n as f64;
        let target = 1.0 - (-1.0f64).exp();
        let se = (target * (1.0 - target) / n as f64).sqrt();
        assert!((above - target).abs() < 3.0 * se);
    }

    #[test]
    fn standard_domain_errors() {
        let mut rng = RngStream::new(11);
        assert!(sample_standard(&mut rng, StandardDist::Normal { mean: 0.0, var: -1.0 }).is_err());
        assert!(sample_standard(&mut rng, StandardDist::Beta { a: 0.0, b: 1.0 }).is_err());
        assert!(sample_standard(&mut rng, StandardDist::Bernoulli { p: 1.5 }).is_err());
        assert!(sample_standard(&mut rng, StandardDist::Binomial { n: 5, p: -0.1 }).is_err());
        assert!(sample_standard(&mut rng, StandardDist::Gamma { shape: 0.0 }).is_err());
        let k = sample_standard(&mut rng, StandardDist::Binomial { n: 20, p: 0.5 }).unwrap();
        assert!((0.0..=20.0).contains(&k) && k.fract() == 0.0);
    }
}
