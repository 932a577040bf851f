use super::{check_dim, log_sum_exp, TargetDistribution};
use crate::{Error, Result};
use nalgebra::DVector;

/// Mixture of densities concentrated on the boundaries of l1 balls:
/// `log pi(q) = ln sum_i exp(-(||q - mu_i||_1 - r_i)^2 / (2 sigma^2))`.
///
/// The gradient uses the subgradient convention `sign(0) = 0` on the
/// coordinate hyperplanes, which keeps the integrator total and
/// deterministic; the hyperplanes have measure zero under the dynamics.
#[derive(Debug, Clone)]
pub struct L1ShellTarget {
    name: String,
    dim: usize,
    centers: Vec<DVector<f64>>,
    radii: Vec<f64>,
    sigma: f64,
}

fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl L1ShellTarget {
    pub fn new(name: &str, centers: Vec<DVector<f64>>, radii: Vec<f64>, sigma: f64) -> Result<Self> {
        if centers.is_empty() || centers.len() != radii.len() {
            return Err(Error::InvalidTarget(
                "need one radius per shell center".into(),
            ));
        }
        if sigma <= 0.0 {
            return Err(Error::InvalidTarget("sigma must be positive".into()));
        }
        if radii.iter().any(|r| *r <= 0.0) {
            return Err(Error::InvalidTarget("shell radii must be positive".into()));
        }
        let dim = centers[0].len();
        if centers.iter().any(|c| c.len() != dim) {
            return Err(Error::InvalidTarget(
                "shell centers have inconsistent dimensions".into(),
            ));
        }
        Ok(Self {
            name: name.to_string(),
            dim,
            centers,
            radii,
            sigma,
        })
    }

    /// Three concentric shells of radii 4, 8, 16 with `sigma = 0.5`.
    pub fn concentric(dim: usize) -> Result<Self> {
        Self::new(
            "concentric_l1",
            vec![DVector::zeros(dim); 3],
            vec![4.0, 8.0, 16.0],
            0.5,
        )
    }

    /// One large shell of radius 20 centered at the origin plus four small
    /// shells of radius 2 centered at the axis points `±2 e_1`, `±2 e_2`.
    pub fn nested(dim: usize) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidTarget(
                "nested shells need dimension >= 2".into(),
            ));
        }
        let mut centers = vec![DVector::zeros(dim)];
        for axis in 0..2 {
            for sign in [1.0, -1.0] {
                let mut c = DVector::zeros(dim);
                c[axis] = 2.0 * sign;
                centers.push(c);
            }
        }
        Self::new("nested_l1", centers, vec![20.0, 2.0, 2.0, 2.0, 2.0], 0.5)
    }

    fn shell_terms(&self, q: &DVector<f64>) -> Vec<f64> {
        self.centers
            .iter()
            .zip(&self.radii)
            .map(|(mu, r)| {
                let l1: f64 = q.iter().zip(mu.iter()).map(|(a, b)| (a - b).abs()).sum();
                let dev = l1 - r;
                -dev * dev / (2.0 * self.sigma * self.sigma)
            })
            .collect()
    }
}

impl TargetDistribution for L1ShellTarget {
    fn dim(&self) -> usize {
        self.dim
    }

    fn name(&self) -> &str {
        &self.name
    }

    fn log_density(&self, q: &DVector<f64>) -> f64 {
        check_dim(self.dim, q.len());
        log_sum_exp(&self.shell_terms(q))
    }

    fn grad_log_density(&self, q: &DVector<f64>) -> DVector<f64> {
        check_dim(self.dim, q.len());
        let terms = self.shell_terms(q);
        let total = log_sum_exp(&terms);
        let mut grad = DVector::zeros(self.dim);
        for (k, term) in terms.iter().enumerate() {
            let resp = (term - total).exp();
            if resp == 0.0 {
                continue;
            }
            let mu = &self.centers[k];
            let l1: f64 = q.iter().zip(mu.iter()).map(|(a, b)| (a - b).abs()).sum();
            let coeff = -resp * (l1 - self.radii[k]) / (self.sigma * self.sigma);
            for j in 0..self.dim {
                grad[j] += coeff * sign0(q[j] - mu[j]);
            }
        }
        grad
    }
}
