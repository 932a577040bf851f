use crate::{Error, Result};

/// Autocorrelation estimates `rho_0..rho_max_lag`.
#[derive(Debug, Clone)]
pub struct AcfResult {
    pub rho: Vec<f64>,
    /// Set when the series is constant; `rho_k` is then defined as 1 for
    /// every lag.
    pub degenerate: bool,
}

/// Sample autocorrelation function with the standard biased normalization
/// `rho_k = sum_t (x_t - xbar)(x_{t+k} - xbar) / sum_t (x_t - xbar)^2`.
pub fn acf(series: &[f64], max_lag: usize) -> Result<AcfResult> {
    let n = series.len();
    if max_lag < 1 || n <= max_lag {
        return Err(Error::Diagnostic(format!(
            "need series length > max_lag >= 1, got n = {n}, max_lag = {max_lag}"
        )));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let denom: f64 = series.iter().map(|x| (x - mean) * (x - mean)).sum();
    if denom == 0.0 {
        return Ok(AcfResult {
            rho: vec![1.0; max_lag + 1],
            degenerate: true,
        });
    }
    let mut rho = Vec::with_capacity(max_lag + 1);
    for k in 0..=max_lag {
        let num: f64 = (0..n - k)
            .map(|t| (series[t] - mean) * (series[t + k] - mean))
            .sum();
        rho.push(num / denom);
    }
    Ok(AcfResult {
        rho,
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct EssResult {
    pub ess: f64,
    pub degenerate: bool,
}

/// Effective sample size `n / (1 + 2 sum_k rho_k)` with the autocorrelation
/// sum truncated by Geyer's initial-positive-sequence rule: consecutive
/// pairs `rho_{2m} + rho_{2m+1}` are accumulated while they stay positive.
pub fn ess(series: &[f64]) -> Result<EssResult> {
    let n = series.len();
    if n < 10 {
        return Err(Error::Diagnostic(format!(
            "effective sample size needs n >= 10, got {n}"
        )));
    }
    let max_lag = (n - 1).min(n / 2);
    let acf_res = acf(series, max_lag)?;
    if acf_res.degenerate {
        return Ok(EssResult {
            ess: 1.0,
            degenerate: true,
        });
    }
    let rho = &acf_res.rho;
    // tau = -1 + 2 * sum of positive initial pairs (rho_0 covered twice)
    let mut tau = -1.0;
    let mut m = 0;
    while 2 * m + 1 <= max_lag {
        let pair = rho[2 * m] + rho[2 * m + 1];
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        m += 1;
    }
    let tau = tau.max(1e-12);
    let ess = (n as f64 / tau).min(n as f64 * 1.5);
    Ok(EssResult {
        ess,
        degenerate: false,
    })
}
