//! Small statistical helpers: the one-sample t-test used by the
//! energy-drift experiment, and the normal/Kolmogorov distribution
//! functions backing the verification suite.

use crate::{Error, Result};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

/// One-sample two-sided t-test summary for a set of energy drifts.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DriftStats {
    pub mean: f64,
    pub sd: f64,
    pub t_statistic: f64,
    pub p_value: f64,
    /// Zero-variance input; the p-value is then 1 if the mean is exactly 0
    /// and 0 otherwise.
    pub degenerate: bool,
}

/// Tests the null hypothesis that the drifts have mean zero.
pub fn energy_drift_stats(drifts: &[f64]) -> Result<DriftStats> {
    let n = drifts.len();
    if n < 2 {
        return Err(Error::Diagnostic(format!(
            "t-test needs at least 2 observations, got {n}"
        )));
    }
    let mean = drifts.iter().sum::<f64>() / n as f64;
    let var = drifts.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    if sd == 0.0 {
        let p = if mean == 0.0 { 1.0 } else { 0.0 };
        return Ok(DriftStats {
            mean,
            sd,
            t_statistic: if mean == 0.0 { 0.0 } else { f64::INFINITY },
            p_value: p,
            degenerate: true,
        });
    }
    let t = mean / (sd / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64)
        .map_err(|e| Error::Diagnostic(format!("t-distribution: {e}")))?;
    let p = 2.0 * (1.0 - dist.cdf(t.abs()));
    Ok(DriftStats {
        mean,
        sd,
        t_statistic: t,
        p_value: p.clamp(0.0, 1.0),
        degenerate: false,
    })
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// Survival function of the Kolmogorov distribution,
/// `Q(lambda) = 2 sum_{j>=1} (-1)^{j-1} exp(-2 j^2 lambda^2)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j as f64) * (j as f64) * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov-Smirnov test of `sample` against the standard
/// normal, returning `(statistic, asymptotic p-value)`.
pub fn ks_test_std_normal(sample: &[f64]) -> Result<(f64, f64)> {
    let n = sample.len();
    if n < 10 {
        return Err(Error::Diagnostic(format!(
            "KS test needs at least 10 observations, got {n}"
        )));
    }
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n_f = n as f64;
    let mut d: f64 = 0.0;
    for (i, x) in xs.iter().enumerate() {
        let cdf = normal_cdf(*x);
        let upper = (i + 1) as f64 / n_f - cdf;
        let lower = cdf - i as f64 / n_f;
        d = d.max(upper.max(lower));
    }
    let lambda = (n_f.sqrt() + 0.12 + 0.11 / n_f.sqrt()) * d;
    Ok((d, kolmogorov_sf(lambda)))
}
