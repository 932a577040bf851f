//! Sample-quality metrics: entropic-regularized optimal transport,
//! autocorrelation and effective sample size, mode occupancy, and
//! energy-drift statistics. Everything here is a pure function of its
//! inputs.

mod series;
mod sinkhorn;
pub mod stats;

pub use series::{acf, ess, AcfResult, EssResult};
pub use sinkhorn::{sinkhorn_distance, LambdaMode, SinkhornParams, SinkhornResult};
pub use stats::{energy_drift_stats, DriftStats};

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// A weighted point cloud in `R^d`.
#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    /// `n x d`, one point per row.
    pub points: DMatrix<f64>,
    /// Nonnegative, summing to one.
    pub weights: Vec<f64>,
}

impl EmpiricalMeasure {
    pub fn new(points: DMatrix<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.nrows() == 0 {
            return Err(Error::Diagnostic("empirical measure needs at least one point".into()));
        }
        if weights.len() != points.nrows() {
            return Err(Error::Diagnostic(format!(
                "{} weights for {} points",
                weights.len(),
                points.nrows()
            )));
        }
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::Diagnostic("weights must be finite and nonnegative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Diagnostic(format!(
                "weights sum to {total}, expected 1 (within 1e-12)"
            )));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::Diagnostic("non-finite point in empirical measure".into()));
        }
        Ok(Self { points, weights })
    }

    /// Uniform weights over the rows of `points`.
    pub fn uniform(points: DMatrix<f64>) -> Result<Self> {
        let n = points.nrows();
        if n == 0 {
            return Err(Error::Diagnostic("empirical measure needs at least one point".into()));
        }
        let w = 1.0 / n as f64;
        let mut weights = vec![w; n];
        // remove the rounding residue so the sum is exactly 1
        let sum: f64 = weights.iter().sum();
        weights[n - 1] += 1.0 - sum;
        Self::new(points, weights)
    }

    pub fn len(&self) -> usize {
        self.points.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.points.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }
}

/// Closed-form 2-Wasserstein distance between one component of a symmetric
/// two-component mixture and the mixture itself: `||mu1 - mu2|| / sqrt(2)`.
/// A chain stuck in a single mode reports roughly this value.
pub fn w2_reference_two_component(mu1: &DVector<f64>, mu2: &DVector<f64>) -> f64 {
    (mu1 - mu2).norm() / 2f64.sqrt()
}

/// Expected margin of error `n^{-1/d}` of an `n`-point empirical measure in
/// `d` dimensions under the Wasserstein distance.
pub fn wasserstein_margin(n: usize, d: usize) -> f64 {
    assert!(n >= 1 && d >= 1);
    (n as f64).powf(-1.0 / d as f64)
}

/// Fraction of samples whose nearest mode (Euclidean) is each of `modes`.
/// Ties go to the lowest mode index. Fractions sum to one.
pub fn mode_occupancy(samples: &DMatrix<f64>, modes: &[DVector<f64>]) -> Vec<f64> {
    assert!(!modes.is_empty(), "need at least one mode");
    let mut counts = vec![0usize; modes.len()];
    for i in 0..samples.nrows() {
        let row = samples.row(i);
        let mut best = 0usize;
        let mut best_d2 = f64::INFINITY;
        for (k, mode) in modes.iter().enumerate() {
            let mut d2 = 0.0;
            for j in 0..samples.ncols() {
                let diff = row[j] - mode[j];
                d2 += diff * diff;
            }
            if d2 < best_d2 {
                best_d2 = d2;
                best = k;
            }
        }
        counts[best] += 1;
    }
    let n = samples.nrows() as f64;
    counts.iter().map(|c| *c as f64 / n).collect()
}

/// Deterministically subsamples `measure` down to at most `cap` points with
/// uniform weights, using a seeded Fisher-Yates prefix.
pub fn subsample(measure: &EmpiricalMeasure, cap: usize, seed: u64) -> Result<EmpiricalMeasure> {
    use rand::{Rng, SeedableRng};
    let n = measure.len();
    if n <= cap {
        return Ok(measure.clone());
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..cap {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut points = DMatrix::zeros(cap, measure.dim());
    for (r, &i) in idx[..cap].iter().enumerate() {
        points.row_mut(r).copy_from(&measure.points.row(i));
    }
    EmpiricalMeasure::uniform(points)
}
