use super::{check_dim, log_sum_exp, TargetDistribution};
use crate::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use std::f64::consts::TAU;

/// Standard isotropic Gaussian `N(0, I_d)`.
#[derive(Debug, Clone)]
pub struct StdGaussianTarget {
    dim: usize,
}

impl StdGaussianTarget {
    pub fn new(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Self { dim }
    }
}

impl TargetDistribution for StdGaussianTarget {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> &str {
        "std_gaussian"
    }

    fn log_density(&self, q: &DVector<f64>) -> f64 {
        check_dim(self.dim, q.len());
        -0.5 * q.norm_squared()
    }

    fn grad_log_density(&self, q: &DVector<f64>) -> DVector<f64> {
        check_dim(self.dim, q.len());
        -q
    }

    fn exact_sample(&self, rng: &mut dyn RngCore, n: usize) -> Result<DMatrix<f64>> {
        Ok(DMatrix::from_fn(n, self.dim, |_, _| {
            rng.sample::<f64, _>(StandardNormal)
        }))
    }

    fn supports_exact_sampling(&self) -> bool {
        true
    }

    fn known_modes(&self) -> Option<Vec<DVector<f64>>> {
        Some(vec![DVector::zeros(self.dim)])
    }
}

/// Finite mixture of multivariate Gaussians with precomputed precision
/// matrices, Cholesky factors, and log normalizers.
#[derive(Debug, Clone)]
pub struct GaussianMixtureTarget {
    name: String,
    dim: usize,
    weights: Vec<f64>,
    means: Vec<DVector<f64>>,
    precisions: Vec<DMatrix<f64>>,
    chols: Vec<DMatrix<f64>>,
    /// `ln w_k - 1/2 ln det Sigma_k - d/2 ln 2 pi`
    comp_log_consts: Vec<f64>,
}

impl GaussianMixtureTarget {
    pub fn new(
        name: &str,
        weights: Vec<f64>,
        means: Vec<DVector<f64>>,
        covs: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != covs.len() {
            return Err(Error::InvalidTarget(format!(
                "component count mismatch: {} weights, {} means, {} covariances",
                weights.len(),
                means.len(),
                covs.len()
            )));
        }
        if weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidTarget("negative mixture weight".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidTarget(format!(
                "mixture weights sum to {total}, expected 1"
            )));
        }
        let dim = means[0].len();
        let mut precisions = Vec::with_capacity(covs.len());
        let mut chols = Vec::with_capacity(covs.len());
        let mut comp_log_consts = Vec::with_capacity(covs.len());
        for (k, cov) in covs.iter().enumerate() {
            if means[k].len() != dim || cov.nrows() != dim || cov.ncols() != dim {
                return Err(Error::InvalidTarget(format!(
                    "component {k} has inconsistent dimensions"
                )));
            }
            let asym = (cov - cov.transpose()).abs().max();
            if asym > 1e-10 {
                return Err(Error::InvalidTarget(format!(
                    "covariance {k} is not symmetric (max asymmetry {asym:.2e})"
                )));
            }
            let chol = Cholesky::new(cov.clone()).ok_or_else(|| {
                Error::InvalidTarget(format!("covariance {k} is not positive definite"))
            })?;
            let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
            comp_log_consts
                .push(weights[k].ln() - 0.5 * log_det - 0.5 * dim as f64 * TAU.ln());
            precisions.push(chol.inverse());
            chols.push(chol.unpack());
        }
        Ok(Self {
            name: name.to_string(),
            dim,
            weights,
            means,
            precisions,
            chols,
            comp_log_consts,
        })
    }

    /// Bimodal isotropic mixture with means `±(5/√d) 1` and variance `1/d`,
    /// so the mode separation in energy units is dimension-free.
    pub fn bimodal_scaled(dim: usize) -> Result<Self> {
        let mu = DVector::from_element(dim, 5.0 / (dim as f64).sqrt());
        let cov = DMatrix::identity(dim, dim) / dim as f64;
        Self::new(
            "bimodal_scaled",
            vec![0.5, 0.5],
            vec![mu.clone(), -mu],
            vec![cov.clone(), cov],
        )
    }

    /// Anisotropic pair with means `±2·1` and Toeplitz covariances
    /// `[Sigma_1]_ij = 0.75^|i-j|` and `[Sigma_2]_ij = (-0.75)^|i-j|`, whose
    /// principal axes are perpendicular. At `d = 2` the second matrix equals
    /// `2I - Sigma_1`; the alternating-sign form keeps it positive definite
    /// in every dimension (`2I - Sigma_1` is indefinite for `d >= 3`).
    pub fn anisotropic(dim: usize) -> Result<Self> {
        let mu = DVector::from_element(dim, 2.0);
        let s1 = DMatrix::from_fn(dim, dim, |i, j| 0.75f64.powi((i as i32 - j as i32).abs()));
        let s2 = DMatrix::from_fn(dim, dim, |i, j| {
            (-0.75f64).powi((i as i32 - j as i32).abs())
        });
        Self::new("anisotropic", vec![0.5, 0.5], vec![mu.clone(), -mu], vec![s1, s2])
    }

    /// Bivariate mixture with means `±(3, 3)` and correlation `±0.5`; the
    /// workhorse example for the energy-drift experiments.
    pub fn bivariate_example() -> Result<Self> {
        let mu = DVector::from_row_slice(&[3.0, 3.0]);
        let s1 = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let s2 = DMatrix::from_row_slice(2, 2, &[1.0, -0.5, -0.5, 1.0]);
        Self::new(
            "bivariate_anisotropic",
            vec![0.5, 0.5],
            vec![mu.clone(), -mu],
            vec![s1, s2],
        )
    }

    /// Symmetric two-component isotropic mixture `0.5 N(b·1, s2 I) + 0.5 N(-b·1, s2 I)`.
    pub fn isotropic_pair(b: f64, dim: usize, sigma2: f64) -> Result<Self> {
        let mu = DVector::from_element(dim, b);
        let cov = DMatrix::identity(dim, dim) * sigma2;
        Self::new(
            "isotropic_pair",
            vec![0.5, 0.5],
            vec![mu.clone(), -mu],
            vec![cov.clone(), cov],
        )
    }

    pub fn num_components(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[DVector<f64>] {
        &self.means
    }

    fn component_terms(&self, q: &DVector<f64>) -> Vec<f64> {
        self.means
            .iter()
            .zip(&self.precisions)
            .zip(&self.comp_log_consts)
            .map(|((mu, prec), log_const)| {
                let diff = q - mu;
                log_const - 0.5 * (prec * &diff).dot(&diff)
            })
            .collect()
    }
}

impl TargetDistribution for GaussianMixtureTarget {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn log_density(&self, q: &DVector<f64>) -> f64 {
        check_dim(self.dim, q.len());
        log_sum_exp(&self.component_terms(q))
    }

    fn grad_log_density(&self, q: &DVector<f64>) -> DVector<f64> {
        check_dim(self.dim, q.len());
        let terms = self.component_terms(q);
        let total = log_sum_exp(&terms);
        let mut grad = DVector::zeros(self.dim);
        for (k, term) in terms.iter().enumerate() {
            let resp = (term - total).exp();
            if resp > 0.0 {
                let diff = &self.means[k] - q;
                grad += resp * (&self.precisions[k] * diff);
            }
        }
        grad
    }

    fn exact_sample(&self, rng: &mut dyn RngCore, n: usize) -> Result<DMatrix<f64>> {
        let mut out = DMatrix::zeros(n, self.dim);
        for row in 0..n {
            let u: f64 = rng.random();
            let mut k = 0;
            let mut acc = 0.0;
            for (idx, w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    k = idx;
                    break;
                }
                k = idx;
            }
            let z = DVector::from_fn(self.dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            let x = &self.means[k] + &self.chols[k] * z;
            out.row_mut(row).copy_from(&x.transpose());
        }
        Ok(out)
    }

    fn supports_exact_sampling(&self) -> bool {
        true
    }

    fn known_modes(&self) -> Option<Vec<DVector<f64>>> {
        Some(self.means.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn std_gaussian_basics() {
        let t = StdGaussianTarget::new(2);
        assert_eq!(t.log_density(&DVector::from_row_slice(&[0.0, 0.0])), 0.0);
        let g = t.grad_log_density(&DVector::from_row_slice(&[1.0, -2.0]));
        assert_eq!(g, DVector::from_row_slice(&[-1.0, 2.0]));
    }

    #[test]
    fn bimodal_scaled_is_symmetric() {
        let t = GaussianMixtureTarget::bimodal_scaled(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let q = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal) * 3.0);
            let neg = -q.clone();
            assert!((t.log_density(&q) - t.log_density(&neg)).abs() <= 1e-12);
        }
    }

    /// Direct evaluation shows the anisotropic pair is *not* symmetric under
    /// `q -> -q` (the covariances at the two modes differ); the true identity
    /// is that negating the point is equivalent to swapping the component
    /// covariances.
    #[test]
    fn anisotropic_reflection_swaps_covariances() {
        let t = GaussianMixtureTarget::anisotropic(2).unwrap();
        let mu = DVector::from_element(2, 2.0);
        let s1 = DMatrix::from_fn(2, 2, |i, j| 0.75f64.powi((i as i32 - j as i32).abs()));
        let s2 = DMatrix::from_fn(2, 2, |i, j| (-0.75f64).powi((i as i32 - j as i32).abs()));
        let swapped = GaussianMixtureTarget::new(
            "anisotropic_swapped",
            vec![0.5, 0.5],
            vec![mu.clone(), -mu],
            vec![s2, s1],
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut max_asym: f64 = 0.0;
        for _ in 0..100 {
            let q = DVector::from_fn(2, |_, _| rng.sample::<f64, _>(StandardNormal) * 2.5);
            let neg = -q.clone();
            assert!((t.log_density(&neg) - swapped.log_density(&q)).abs() <= 1e-12);
            max_asym = max_asym.max((t.log_density(&neg) - t.log_density(&q)).abs());
        }
        assert!(max_asym > 0.1, "mixture unexpectedly symmetric");
    }

    #[test]
    fn anisotropic_d2_matches_two_i_minus_sigma() {
        let s1 = DMatrix::from_fn(2, 2, |i, j| 0.75f64.powi((i as i32 - j as i32).abs()));
        let s2 = DMatrix::from_fn(2, 2, |i, j| (-0.75f64).powi((i as i32 - j as i32).abs()));
        assert_eq!(s2, DMatrix::identity(2, 2) * 2.0 - s1);
    }

    #[test]
    fn log_density_finite_at_component_means() {
        let t = GaussianMixtureTarget::bimodal_scaled(10).unwrap();
        for mu in t.means() {
            let v = t.log_density(mu);
            assert!(v.is_finite() && !v.is_nan());
        }
    }

    #[test]
    fn invalid_weights_rejected() {
        let mu = DVector::zeros(2);
        let cov = DMatrix::identity(2, 2);
        assert!(matches!(
            GaussianMixtureTarget::new("bad", vec![0.7, 0.7], vec![mu.clone(), mu.clone()], vec![cov.clone(), cov.clone()]),
            Err(Error::InvalidTarget(_))
        ));
        assert!(matches!(
            GaussianMixtureTarget::new("bad", vec![1.5, -0.5], vec![mu.clone(), mu], vec![cov.clone(), cov]),
            Err(Error::InvalidTarget(_))
        ));
    }

    #[test]
    fn non_spd_covariance_rejected() {
        let mu = DVector::zeros(2);
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            GaussianMixtureTarget::new("bad", vec![1.0], vec![mu], vec![cov]),
            Err(Error::InvalidTarget(_))
        ));
    }

    #[test]
    fn exact_sample_mean_and_reproducibility() {
        let t = StdGaussianTarget::new(2);
        let n = 10_000;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let xs = t.exact_sample(&mut rng, n).unwrap();
        for j in 0..2 {
            let mean = xs.column(j).sum() / n as f64;
            assert!(mean.abs() < 4.0 / (n as f64).sqrt(), "mean {mean}");
        }

        let mut r1 = ChaCha8Rng::seed_from_u64(42);
        let mut r2 = ChaCha8Rng::seed_from_u64(42);
        let a = t.exact_sample(&mut r1, 2).unwrap();
        let b = t.exact_sample(&mut r2, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exact_sample_halfspace_balance() {
        let t = GaussianMixtureTarget::bimodal_scaled(3).unwrap();
        let mu1 = t.means()[0].clone();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 10_000;
        let xs = t.exact_sample(&mut rng, n).unwrap();
        let mut in_half = 0usize;
        for i in 0..n {
            let row = xs.row(i).transpose();
            if row.dot(&mu1) > 0.0 {
                in_half += 1;
            }
        }
        let frac = in_half as f64 / n as f64;
        assert!((frac - 0.5).abs() <= 0.02, "halfspace fraction {frac}");
    }

    #[test]
    fn exact_sample_covariance_close_to_identity() {
        let t = StdGaussianTarget::new(3);
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let xs = t.exact_sample(&mut rng, n).unwrap();
        let mut means = [0.0f64; 3];
        for j in 0..3 {
            means[j] = xs.column(j).sum() / n as f64;
        }
        for i in 0..3 {
            for j in 0..3 {
                let mut cov = 0.0;
                for r in 0..n {
                    cov += (xs[(r, i)] - means[i]) * (xs[(r, j)] - means[j]);
                }
                cov /= (n - 1) as f64;
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!(
                    (cov - expected).abs() < 0.05,
                    "cov[{i},{j}] = {cov}"
                );
            }
        }
    }
}
