//! Rubin's combining rules and the simulation-study metrics.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};
use crate::stats::{mean, variance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PooledEstimate {
    pub q_bar: f64,
    pub u_bar: f64,
    pub b_between: f64,
    pub t_total: f64,
    /// Infinite when the between-imputation variance is zero.
    pub df: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub fmi: f64,
}

impl PooledEstimate {
    pub fn se(&self) -> f64 {
        self.t_total.sqrt()
    }

    /// Two-sided p-value for the null of a zero coefficient.
    pub fn p_value(&self) -> f64 {
        let se = self.se();
        if se == 0.0 {
            return if self.q_bar == 0.0 { 1.0 } else { 0.0 };
        }
        let t = (self.q_bar / se).abs();
        2.0 * (1.0 - reference_cdf(self.df, t))
    }
}

// statrs' Student t loses accuracy (and its quantile search stops
// terminating) for very large df, which Rubin's df reaches whenever B is tiny
// relative to U.
const T_CDF_NORMAL_DF: f64 = 1e7;
const T_QUANTILE_EXPANSION_DF: f64 = 1e4;

fn reference_cdf(df: f64, x: f64) -> f64 {
    if df <= T_CDF_NORMAL_DF {
        StudentsT::new(0.0, 1.0, df).expect("positive df").cdf(x)
    } else {
        Normal::standard().cdf(x)
    }
}

fn reference_quantile(df: f64, p: f64) -> f64 {
    if df <= T_QUANTILE_EXPANSION_DF {
        return StudentsT::new(0.0, 1.0, df).expect("positive df").inverse_cdf(p);
    }
    let z = Normal::standard().inverse_cdf(p);
    if df.is_infinite() {
        return z;
    }
    // Cornish-Fisher expansion in 1/df
    let z3 = z.powi(3);
    z + (z3 + z) / (4.0 * df) + (5.0 * z.powi(5) + 16.0 * z3 + 3.0 * z) / (96.0 * df * df)
}

/// Pool M completed-data estimates and standard errors.
pub fn rubin_pool(estimates: &[f64], ses: &[f64]) -> Result<PooledEstimate> {
    let m = estimates.len();
    if m < 2 {
        return Err(Error::invalid(format!("pooling needs at least 2 copies, got {m}")));
    }
    if ses.len() != m {
        return Err(Error::invalid(format!("{m} estimates but {} standard errors", ses.len())));
    }
    if estimates.iter().any(|q| !q.is_finite()) {
        return Err(Error::invalid("estimates must be finite"));
    }
    if ses.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
        return Err(Error::invalid("standard errors must be positive"));
    }
    let mf = m as f64;
    let q_bar = mean(estimates);
    let u_bar = ses.iter().map(|s| s * s).sum::<f64>() / mf;
    let b_between = variance(estimates);
    if !(u_bar > 0.0 && u_bar.is_finite() && b_between.is_finite()) {
        return Err(Error::numeric(format!(
            "variance components out of floating-point range: within {u_bar}, between {b_between}"
        )));
    }
    let inflated = (1.0 + 1.0 / mf) * b_between;
    let t_total = u_bar + inflated;
    let (df, fmi) = if b_between > 0.0 {
        let df = (mf - 1.0) * (1.0 + u_bar / inflated).powi(2);
        let r = inflated / u_bar;
        (df, ((r + 2.0 / (df + 3.0)) / (r + 1.0)).clamp(0.0, 1.0))
    } else {
        (f64::INFINITY, 0.0)
    };
    let half = reference_quantile(df, 0.975) * t_total.sqrt();
    Ok(PooledEstimate {
        q_bar,
        u_bar,
        b_between,
        t_total,
        df,
        ci_low: q_bar - half,
        ci_high: q_bar + half,
        fmi,
    })
}

/// Metrics of one coefficient over Monte Carlo replicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Percent bias, or the absolute bias when `absolute_bias` is set.
    pub pb: f64,
    /// Set when the truth is exactly zero and percent bias is undefined.
    pub absolute_bias: bool,
    pub rmse: f64,
    pub se: f64,
    pub cr: f64,
    pub fmi: f64,
}

pub fn compute_metrics(truth: f64, pooled: &[PooledEstimate]) -> Result<Metrics> {
    if pooled.is_empty() {
        return Err(Error::invalid("metrics need at least one replicate"));
    }
    let n = pooled.len() as f64;
    let bias = pooled.iter().map(|p| p.q_bar).sum::<f64>() / n - truth;
    let (pb, absolute_bias) = if truth == 0.0 {
        (bias.abs(), true)
    } else {
        (100.0 * bias.abs() / truth.abs(), false)
    };
    let rmse = (pooled.iter().map(|p| (p.q_bar - truth).powi(2)).sum::<f64>() / n).sqrt();
    let se = pooled.iter().map(|p| p.se()).sum::<f64>() / n;
    let cr = pooled
        .iter()
        .filter(|p| p.ci_low <= truth && truth <= p.ci_high)
        .count() as f64
        / n;
    let fmi = pooled.iter().map(|p| p.fmi).sum::<f64>() / n;
    Ok(Metrics {
        pb,
        absolute_bias,
        rmse,
        se,
        cr,
        fmi,
    })
}

/// A single-analysis estimate treated as a degenerate pooled result with a
/// normal 95% interval. Used for arms without imputation.
pub fn single_estimate(estimate: f64, se: f64) -> PooledEstimate {
    let half = reference_quantile(f64::INFINITY, 0.975) * se;
    PooledEstimate {
        q_bar: estimate,
        u_bar: se * se,
        b_between: 0.0,
        t_total: se * se,
        df: f64::INFINITY,
        ci_low: estimate - half,
        ci_high: estimate + half,
        fmi: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distributions::normal;
    use crate::rng::RngStream;
    use proptest::prelude::*;

    #[test]
    fn hand_example() {
        let p = rubin_pool(&[1.0, 3.0], &[1.0, 1.0]).unwrap();
        assert_eq!(p.q_bar, 2.0);
        assert_eq!(p.u_bar, 1.0);
        assert_eq!(p.b_between, 2.0);
        assert_eq!(p.t_total, 4.0);
        assert_eq!(p.se(), 2.0);
        // nu = 1 * (1 + 1/3)^2 = 16/9, r = 3
        assert!((p.df - 16.0 / 9.0).abs() < 1e-12);
        let fmi = (3.0 + 2.0 / (16.0 / 9.0 + 3.0)) / 4.0;
        assert!((p.fmi - fmi).abs() < 1e-12);
        let t = StudentsT::new(0.0, 1.0, 16.0 / 9.0).unwrap().inverse_cdf(0.975);
        assert!((p.ci_high - (2.0 + 2.0 * t)).abs() < 1e-9);
    }

    #[test]
    fn t_quantile_is_continuous_at_large_df() {
        let exact = StudentsT::new(0.0, 1.0, T_QUANTILE_EXPANSION_DF).unwrap().inverse_cdf(0.975);
        let expanded = reference_quantile(T_QUANTILE_EXPANSION_DF * (1.0 + 1e-12), 0.975);
        assert!((exact - expanded).abs() < 1e-9);
        assert!((reference_quantile(1e12, 0.975) - 1.959_963_985).abs() < 1e-8);
        assert!((reference_cdf(1e15, 1.96) - 0.975_002_105).abs() < 1e-8);
    }

    #[test]
    fn identical_estimates() {
        let p = rubin_pool(&[0.5; 4], &[0.2, 0.2, 0.2, 0.2]).unwrap();
        assert_eq!(p.b_between, 0.0);
        assert_eq!(p.fmi, 0.0);
        assert!(p.df.is_infinite());
        assert!((p.t_total - 0.04).abs() < 1e-15);
        assert!((p.ci_high - p.q_bar - 1.959_963_985 * 0.2).abs() < 1e-8);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(rubin_pool(&[1.0], &[1.0]).is_err());
        assert!(rubin_pool(&[1.0, 2.0], &[1.0]).is_err());
        assert!(rubin_pool(&[1.0, 2.0], &[1.0, 0.0]).is_err());
        assert!(matches!(rubin_pool(&[1.0, 2.0], &[1e-200, 1e-200]), Err(Error::Numeric(_))));
        assert!(matches!(rubin_pool(&[-1e308, 1e308], &[1.0, 1.0]), Err(Error::Numeric(_))));
        assert!(compute_metrics(1.0, &[]).is_err());
    }

    #[test]
    fn fmi_large_m() {
        let mut rng = RngStream::new(1);
        let (tau2, s) = (0.5f64, 1.0f64);
        let q: Vec<f64> = (0..500).map(|_| normal(&mut rng, 3.0, tau2)).collect();
        let p = rubin_pool(&q, &vec![s; 500]).unwrap();
        assert!((p.fmi - tau2 / (tau2 + s * s)).abs() < 0.02, "{}", p.fmi);
    }

    #[test]
    fn metrics_hand_examples() {
        let exact = [single_estimate(1.0, 0.1), single_estimate(1.0, 0.3)];
        let m = compute_metrics(1.0, &exact).unwrap();
        assert_eq!((m.pb, m.rmse, m.cr), (0.0, 0.0, 1.0));
        assert!((m.se - 0.2).abs() < 1e-15);

        let m = compute_metrics(1.0, &[single_estimate(0.9, 0.01), single_estimate(1.1, 0.01)]).unwrap();
        assert!(m.pb.abs() < 1e-12);
        assert!((m.rmse - 0.1).abs() < 1e-12);
        assert_eq!(m.cr, 0.0);

        let m = compute_metrics(0.0, &[single_estimate(0.25, 1.0)]).unwrap();
        assert!(m.absolute_bias);
        assert_eq!(m.pb, 0.25);
        assert_eq!(m.cr, 1.0);
    }

    #[test]
    fn p_value_sanity() {
        let p = single_estimate(1.959_963_985, 1.0);
        assert!((p.p_value() - 0.05).abs() < 1e-8);
        assert_eq!(single_estimate(0.0, 1.0).p_value(), 1.0);
    }

    proptest! {
        #[test]
        fn permutation_invariant(q in proptest::collection::vec(-10.0f64..10.0, 2..12), seed in 0u64..1000) {
            let ses: Vec<f64> = q.iter().enumerate().map(|(i, _)| 0.1 + i as f64 * 0.05).collect();
            let a = rubin_pool(&q, &ses).unwrap();
            let mut idx: Vec<usize> = (0..q.len()).collect();
            idx.rotate_left((seed as usize) % q.len());
            idx.reverse();
            let qp: Vec<f64> = idx.iter().map(|&i| q[i]).collect();
            let sp: Vec<f64> = idx.iter().map(|&i| ses[i]).collect();
            let b = rubin_pool(&qp, &sp).unwrap();
            prop_assert!((a.q_bar - b.q_bar).abs() < 1e-9);
            prop_assert!((a.t_total - b.t_total).abs() < 1e-9 * (1.0 + a.t_total));
            prop_assert!((a.fmi - b.fmi).abs() < 1e-9);
        }

        #[test]
        fn scale_homogeneity(q in proptest::collection::vec(-5.0f64..5.0, 2..8), lambda in 0.01f64..100.0) {
            let ses = vec![0.7; q.len()];
            let a = rubin_pool(&q, &ses).unwrap();
            let qs: Vec<f64> = q.iter().map(|v| v * lambda).collect();
            let ss: Vec<f64> = ses.iter().map(|v| v * lambda).collect();
            let b = rubin_pool(&qs, &ss).unwrap();
            let tol = 1e-8 * lambda * (1.0 + a.q_bar.abs() + a.se());
            prop_assert!((b.q_bar - lambda * a.q_bar).abs() < tol);
            prop_assert!((b.se() - lambda * a.se()).abs() < tol);
            prop_assert!((b.ci_low - lambda * a.ci_low).abs() < 1e-6 * lambda * (1.0 + a.ci_low.abs()));
            prop_assert!((b.fmi - a.fmi).abs() < 1e-6);
        }

        #[test]
        fn structural_invariants(q in proptest::collection::vec(-5.0f64..5.0, 2..10), s in 0.01f64..3.0) {
            let ses = vec![s; q.len()];
            let p = rubin_pool(&q, &ses).unwrap();
            prop_assert!(p.t_total >= p.u_bar);
            prop_assert!(p.ci_low <= p.q_bar && p.q_bar <= p.ci_high);
            prop_assert!((0.0..=1.0).contains(&p.fmi));
            let m = q.len() as f64;
            prop_assert!((p.t_total - (p.u_bar + (1.0 + 1.0 / m) * p.b_between)).abs() < 1e-12 * (1.0 + p.t_total));
        }

        #[test]
        fn fmi_monotone_in_between_variance(s in 0.1f64..2.0, spread in 0.01f64..3.0, extra in 0.01f64..3.0) {
            let a = rubin_pool(&[-spread, 0.0, spread], &[s; 3]).unwrap();
            let b = rubin_pool(&[-spread - extra, 0.0, spread + extra], &[s; 3]).unwrap();
            prop_assert!(b.fmi >= a.fmi - 1e-12);
        }
    }
}
