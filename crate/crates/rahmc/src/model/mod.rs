//! Target distributions: unnormalized log-densities, analytic gradients, and
//! exact samplers where the target admits one.
//!
//! All log-densities are reported up to an additive constant, which is fixed
//! to 0 per target; samplers and diagnostics never depend on it. Targets are
//! immutable after construction and safe to share across threads.

mod funnel;
mod gaussian;
mod l1_shell;

pub use funnel::FunnelTarget;
pub use gaussian::{GaussianMixtureTarget, StdGaussianTarget};
pub use l1_shell::L1ShellTarget;

use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use std::fs;
use std::path::Path;

/// A target distribution `pi(q) ∝ exp(-U(q))` over `R^d`, exposed through its
/// unnormalized log-density `-U(q)` and gradient.
pub trait TargetDistribution: Send + Sync {
    fn dim(&self) -> usize;

    /// Identifier used in run metadata and reports.
    fn name(&self) -> &str;

    /// `log pi(q)` up to the target's additive constant.
    fn log_density(&self, q: &DVector<f64>) -> f64;

    /// Analytic gradient of [`Self::log_density`].
    fn grad_log_density(&self, q: &DVector<f64>) -> DVector<f64>;

    /// Draw `n` i.i.d. samples (rows) when the target supports it.
    fn exact_sample(&self, _rng: &mut dyn RngCore, _n: usize) -> Result<DMatrix<f64>> {
        Err(Error::ExactSamplingUnsupported(self.name().to_string()))
    }

    fn supports_exact_sampling(&self) -> bool {
        false
    }

    /// Mode locations, when known; used for occupancy diagnostics.
    fn known_modes(&self) -> Option<Vec<DVector<f64>>> {
        None
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) {
    assert_eq!(
        expected, got,
        "dimension mismatch: target has dimension {expected}, point has {got}"
    );
}

/// Numerically stable `ln(sum_i exp(x_i))`.
pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Loads the 20-component benchmark mixture: one mean per line, two
/// whitespace-separated numbers, equal weights, covariance `0.01 * I`.
pub fn load_benchmark_means<P: AsRef<Path>>(path: P) -> Result<GaussianMixtureTarget> {
    let text = fs::read_to_string(path.as_ref())?;
    let mut means = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected 2 numbers per line, found {}", fields.len()),
            });
        }
        let mut mean = [0.0f64; 2];
        for (j, field) in fields.iter().enumerate() {
            mean[j] = field.parse::<f64>().map_err(|e| Error::Parse {
                line: line_no,
                message: format!("invalid number {field:?}: {e}"),
            })?;
        }
        means.push(DVector::from_row_slice(&mean));
    }
    if means.len() != 20 {
        return Err(Error::Parse {
            line: text.lines().count(),
            message: format!("expected 20 rows of means, found {}", means.len()),
        });
    }
    let covs = vec![DMatrix::identity(2, 2) * 0.01; 20];
    let weights = vec![0.05; 20];
    GaussianMixtureTarget::new("benchmark20", weights, means, covs)
}


#[cfg(test)]
mod tests {
    use super::test_support::max_rel_grad_err;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::io::Write;

    fn random_point(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> DVector<f64> {
        DVector::from_fn(d, |_, _| {
            let z: f64 = StandardNormal.sample(rng);
            z * scale
        })
    }

    #[test]
    fn log_sum_exp_is_stable() {
        assert!((log_sum_exp(&[-1000.0, -1000.0]) - (-1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
        assert!((log_sum_exp(&[0.0]) - 0.0).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_finite_differences_on_all_targets() {
        let targets: Vec<Box<dyn TargetDistribution>> = vec![
            Box::new(StdGaussianTarget::new(3)),
            Box::new(GaussianMixtureTarget::bimodal_scaled(3).unwrap()),
            Box::new(GaussianMixtureTarget::anisotropic(2).unwrap()),
            Box::new(GaussianMixtureTarget::bivariate_example().unwrap()),
            Box::new(FunnelTarget::paper_default()),
            Box::new(L1ShellTarget::concentric(2).unwrap()),
            Box::new(L1ShellTarget::nested(3).unwrap()),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for target in &targets {
            for _ in 0..100 {
                let mut q = random_point(&mut rng, target.dim(), 2.0);
                // keep clear of the l1 coordinate hyperplanes where the
                // subgradient convention applies
                for x in q.iter_mut() {
                    if x.abs() < 1e-3 {
                        *x += 2e-3;
                    }
                }
                let err = max_rel_grad_err(target.as_ref(), &q);
                assert!(
                    err <= 1e-4,
                    "target {} at {q:?}: rel grad err {err}",
                    target.name()
                );
            }
        }
    }

    #[test]
    fn benchmark_file_roundtrip() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/kou_means.txt");
        let target = load_benchmark_means(path).unwrap();
        assert_eq!(target.dim(), 2);
        assert_eq!(target.num_components(), 20);
        assert!(target.weights().iter().all(|w| (w - 0.05).abs() < 1e-15));
    }

    #[test]
    fn benchmark_file_wrong_row_count() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for i in 0..19 {
            writeln!(f, "{} {}", i, i).unwrap();
        }
        f.flush().unwrap();
        match load_benchmark_means(f.path()) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("found 19")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn benchmark_file_malformed_line() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "1.0 2.0").unwrap();
        writeln!(f, "3.0 oops").unwrap();
        f.flush().unwrap();
        match load_benchmark_means(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn benchmark_duplicate_means_allowed() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for _ in 0..20 {
            writeln!(f, "1.5 -0.5").unwrap();
        }
        f.flush().unwrap();
        let target = load_benchmark_means(f.path()).unwrap();
        let q = DVector::from_row_slice(&[0.0, 0.0]);
        assert!(target.log_density(&q).is_finite());
    }
}
