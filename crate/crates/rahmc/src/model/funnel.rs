use super::{check_dim, log_sum_exp, TargetDistribution};
use nalgebra::DVector;
use std::f64::consts::TAU;

/// Bimodal funnel in `R^2`: the second coordinate follows a two-component
/// Gaussian mixture `N(mu - 5, sigma) + N(mu + 5, sigma)`, and conditionally
/// on it the first coordinate follows `N(c, s) + N(-c, s)` with scale
/// `s = exp(c - mu - q2/2)`.
///
/// `N(m, s)` is parameterized by mean and *standard deviation* throughout,
/// so the conditional scale shrinks exponentially as `q2` grows and each
/// mixture component ends in a sharp funnel tip.
#[derive(Debug, Clone)]
pub struct FunnelTarget {
    mu: f64,
    sigma: f64,
    c: f64,
}

fn log_normal_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * z * z - sd.ln() - 0.5 * TAU.ln()
}

impl FunnelTarget {
    pub fn new(mu: f64, sigma: f64, c: f64) -> Self {
        assert!(sigma > 0.0, "sigma must be positive");
        Self { mu, sigma, c }
    }

    /// `mu = 3`, `sigma = 1`, `c = 1`.
    pub fn paper_default() -> Self {
        Self::new(3.0, 1.0, 1.0)
    }

    /// Standard deviation of the conditional distribution of `q1 | q2`.
    pub fn conditional_scale(&self, q2: f64) -> f64 {
        (self.c - self.mu - q2 / 2.0).exp()
    }

    /// Centers of the two high-density regions, one per marginal mode.
    pub fn tip_centers(&self) -> [DVector<f64>; 2] {
        [
            DVector::from_row_slice(&[0.0, self.mu - 5.0]),
            DVector::from_row_slice(&[0.0, self.mu + 5.0]),
        ]
    }
}

impl TargetDistribution for FunnelTarget {
    fn dim(&self) -> usize {
        2
    }

    fn name(&self) -> &str {
        "funnel"
    }

    fn log_density(&self, q: &DVector<f64>) -> f64 {
        check_dim(2, q.len());
        let (q1, q2) = (q[0], q[1]);
        let marginal = log_sum_exp(&[
            log_normal_pdf(q2, self.mu - 5.0, self.sigma),
            log_normal_pdf(q2, self.mu + 5.0, self.sigma),
        ]) - 2f64.ln();
        let s = self.conditional_scale(q2);
        let conditional = log_sum_exp(&[
            log_normal_pdf(q1, self.c, s),
            log_normal_pdf(q1, -self.c, s),
        ]) - 2f64.ln();
        marginal + conditional
    }

    fn grad_log_density(&self, q: &DVector<f64>) -> DVector<f64> {
        check_dim(2, q.len());
        let (q1, q2) = (q[0], q[1]);

        let marg_terms = [
            log_normal_pdf(q2, self.mu - 5.0, self.sigma),
            log_normal_pdf(q2, self.mu + 5.0, self.sigma),
        ];
        let marg_total = log_sum_exp(&marg_terms);
        let mut g2 = 0.0;
        for (term, mean) in marg_terms.iter().zip([self.mu - 5.0, self.mu + 5.0]) {
            let resp = (term - marg_total).exp();
            g2 += resp * (-(q2 - mean) / (self.sigma * self.sigma));
        }

        let s = self.conditional_scale(q2);
        let cond_terms = [
            log_normal_pdf(q1, self.c, s),
            log_normal_pdf(q1, -self.c, s),
        ];
        let cond_total = log_sum_exp(&cond_terms);
        let mut g1 = 0.0;
        for (term, mean) in cond_terms.iter().zip([self.c, -self.c]) {
            let resp = (term - cond_total).exp();
            g1 += resp * (-(q1 - mean) / (s * s));
            // d/dq2 of [-(q1-m)^2/(2 s^2) - ln s] with d(ln s)/dq2 = -1/2
            let z2 = (q1 - mean) * (q1 - mean) / (s * s);
            g2 += resp * (-0.5 * (z2 - 1.0));
        }

        DVector::from_row_slice(&[g1, g2])
    }
}
