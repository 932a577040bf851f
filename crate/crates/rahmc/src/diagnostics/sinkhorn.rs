use super::EmpiricalMeasure;
use crate::{Error, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

/// How the entropic regularization strength is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaMode {
    /// `lambda` is used as-is.
    Absolute,
    /// Effective strength is `lambda * median(C)`, keeping behaviour
    /// scale-free across targets.
    Relative,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SinkhornParams {
    pub lambda: f64,
    pub lambda_mode: LambdaMode,
    pub max_iter: usize,
    /// L1 tolerance on the marginal violation.
    pub tol: f64,
}

impl Default for SinkhornParams {
    fn default() -> Self {
        Self {
            lambda: 0.05,
            lambda_mode: LambdaMode::Relative,
            max_iter: 1000,
            tol: 1e-9,
        }
    }
}

/// Outcome of a Sinkhorn run. `distance` is the square root of the
/// transport cost `sum_ij P_ij C_ij` under the entropic-optimal plan, which
/// is comparable to a 2-Wasserstein distance since the cost is squared
/// Euclidean.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SinkhornResult {
    pub distance: f64,
    pub converged: bool,
    pub iterations: usize,
    pub marginal_error: f64,
    /// Effective (absolute) regularization used.
    pub lambda: f64,
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Two-pass log-sum-exp of `body(k) = (pot[k] - cost_col[k]) / lambda +
/// log_w[k]` over a contiguous column view; written out longhand so the
/// inner loops stay allocation-free.
#[inline]
fn lse_update(cost_col: &[f64], pot: &[f64], log_w: &[f64], lambda: f64) -> f64 {
    let mut max = f64::NEG_INFINITY;
    for k in 0..cost_col.len() {
        let v = (pot[k] - cost_col[k]) / lambda + log_w[k];
        if v > max {
            max = v;
        }
    }
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut sum = 0.0;
    for k in 0..cost_col.len() {
        let v = (pot[k] - cost_col[k]) / lambda + log_w[k];
        sum += (v - max).exp();
    }
    max + sum.ln()
}

struct Potentials {
    /// Dual potentials in cost units; warm-started across annealing stages.
    f: Vec<f64>,
    g: Vec<f64>,
}

/// Problems below this entry count run single-threaded; the parallel
/// dispatch costs more than the sweep itself.
const PAR_THRESHOLD: usize = 65_536;

fn map_rows<F: Fn(usize) -> f64 + Sync + Send>(n: usize, small: bool, f: F) -> Vec<f64> {
    if small {
        (0..n).map(f).collect()
    } else {
        (0..n).into_par_iter().map(f).collect()
    }
}

/// One Sinkhorn sweep (u-update then v-update) at regularization `lambda`.
/// `cost` is `n x m`, `cost_t` its transpose; both column-major so each
/// update reads contiguous columns.
fn sweep(
    cost: &DMatrix<f64>,
    cost_t: &DMatrix<f64>,
    log_a: &[f64],
    log_b: &[f64],
    lambda: f64,
    pots: &mut Potentials,
) {
    let (n, m) = cost.shape();
    let small = n * m < PAR_THRESHOLD;
    // plan convention: log P_ij = (f_i + g_j - C_ij)/lambda + log a_i + log b_j,
    // so the softmin updates carry no weight term of their own
    let g = &pots.g;
    pots.f = map_rows(n, small, |i| {
        let col = &cost_t.as_slice()[i * m..(i + 1) * m];
        -lambda * lse_update(col, g, log_b, lambda)
    });
    let f = &pots.f;
    pots.g = map_rows(m, small, |j| {
        let col = &cost.as_slice()[j * n..(j + 1) * n];
        -lambda * lse_update(col, f, log_a, lambda)
    });
}

/// L1 deviation of the plan's marginals from the prescribed weights.
fn marginal_error(
    cost: &DMatrix<f64>,
    cost_t: &DMatrix<f64>,
    log_a: &[f64],
    log_b: &[f64],
    lambda: f64,
    pots: &Potentials,
) -> f64 {
    let (n, m) = cost.shape();
    let small = n * m < PAR_THRESHOLD;
    // log P_ij = (f_i + g_j - C_ij)/lambda + log a_i + log b_j
    let row_err: f64 = map_rows(n, small, |i| {
        let col = &cost_t.as_slice()[i * m..(i + 1) * m];
        let lse = lse_update(col, &pots.g, log_b, lambda) + pots.f[i] / lambda + log_a[i];
        (lse.exp() - log_a[i].exp()).abs()
    })
    .iter()
    .sum();
    let col_err: f64 = map_rows(m, small, |j| {
        let col = &cost.as_slice()[j * n..(j + 1) * n];
        let lse = lse_update(col, &pots.f, log_a, lambda) + pots.g[j] / lambda + log_b[j];
        (lse.exp() - log_b[j].exp()).abs()
    })
    .iter()
    .sum();
    row_err + col_err
}

/// Entropic-regularized optimal transport between two weighted point
/// clouds, with squared Euclidean cost and log-domain scaling iterations.
///
/// Small regularizations converge slowly from a cold start, so the solver
/// anneals: it starts at `lambda ~ median(C)` and halves down to the target,
/// warm-starting the dual potentials at each stage. Iterations stop once
/// both marginals of the plan match the input weights within `tol` in L1,
/// or after `max_iter` total sweeps (the result is then flagged as
/// non-converged and carries the last marginal error).
pub fn sinkhorn_distance(
    a: &EmpiricalMeasure,
    b: &EmpiricalMeasure,
    params: &SinkhornParams,
) -> Result<SinkhornResult> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Diagnostic("sinkhorn needs nonempty measures".into()));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    if !(params.lambda > 0.0) {
        return Err(Error::Diagnostic(format!(
            "regularization must be positive, got {}",
            params.lambda
        )));
    }

    let (n, m) = (a.len(), b.len());
    let mut cost = DMatrix::zeros(n, m);
    for i in 0..n {
        for j in 0..m {
            let mut d2 = 0.0;
            for k in 0..a.dim() {
                let diff = a.points[(i, k)] - b.points[(j, k)];
                d2 += diff * diff;
            }
            cost[(i, j)] = d2;
        }
    }
    let cost_t = cost.transpose();
    let med = median(cost.iter().copied().collect());

    let lambda = match params.lambda_mode {
        LambdaMode::Absolute => params.lambda,
        // degenerate all-zero cost: any positive value works
        LambdaMode::Relative => params.lambda * med.max(f64::MIN_POSITIVE),
    };

    let log_a: Vec<f64> = a.weights.iter().map(|w| w.ln()).collect();
    let log_b: Vec<f64> = b.weights.iter().map(|w| w.ln()).collect();

    let mut pots = Potentials {
        f: vec![0.0; n],
        g: vec![0.0; m],
    };
    let mut iterations = 0usize;
    let mut err = f64::INFINITY;
    let mut converged = false;

    // annealing schedule: halve from the cost scale down to the target,
    // reserving at least half the sweep budget for the final stage
    let mut stages = Vec::new();
    let mut stage = med.max(lambda);
    while stage > lambda * 1.5 {
        stages.push(stage);
        stage /= 2.0;
    }
    stages.push(lambda);
    let warm_budget = (params.max_iter / 2).max(1);
    let per_warm_stage = if stages.len() > 1 {
        (warm_budget / (stages.len() - 1)).clamp(1, 30)
    } else {
        0
    };

    'outer: for (k, &stage_lambda) in stages.iter().enumerate() {
        let last = k == stages.len() - 1;
        let stage_budget = if last { params.max_iter } else { per_warm_stage };
        let mut next_check = 1usize;
        let mut stage_iter = 0usize;
        while stage_iter < stage_budget && iterations < params.max_iter {
            sweep(&cost, &cost_t, &log_a, &log_b, stage_lambda, &mut pots);
            iterations += 1;
            stage_iter += 1;
            if stage_iter >= next_check || stage_iter == stage_budget {
                err = marginal_error(&cost, &cost_t, &log_a, &log_b, stage_lambda, &pots);
                if err <= params.tol {
                    if last {
                        converged = true;
                        break 'outer;
                    }
                    break;
                }
                if !last && err <= 1e-4 {
                    // warm enough for the next stage
                    break;
                }
                next_check = stage_iter + (stage_iter / 4).max(1);
            }
        }
        if iterations >= params.max_iter {
            break;
        }
    }

    let transport_cost: f64 = map_rows(m, n * m < PAR_THRESHOLD, |j| {
        let col = &cost.as_slice()[j * n..(j + 1) * n];
        let mut acc = 0.0;
        for i in 0..n {
            let log_p = (pots.f[i] + pots.g[j] - col[i]) / lambda + log_a[i] + log_b[j];
            if log_p > f64::NEG_INFINITY {
                acc += log_p.exp() * col[i];
            }
        }
        acc
    })
    .iter()
    .sum();

    Ok(SinkhornResult {
        distance: transport_cost.max(0.0).sqrt(),
        converged,
        iterations,
        marginal_error: err,
        lambda,
    })
}
