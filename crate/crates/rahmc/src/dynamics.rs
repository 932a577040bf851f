//! Phase-space dynamics: Hamiltonian evaluation, the leapfrog and conformal
//! leapfrog integrators, the repelling/attracting flows and their
//! composition, and finite-difference Jacobian machinery used for
//! verification.
//!
//! The conformal step follows the splitting `eta ∘ xi1 ∘ xi2 ∘ xi1 ∘ eta`
//! where `eta` rescales the momentum by `exp(-gamma_signed * eps / 2)` and
//! the inner maps are the usual leapfrog half-kick/drift/half-kick. A
//! positive signed friction contracts momentum (attracting); a negative one
//! amplifies it (repelling). With `gamma_signed = 0` the momentum scale
//! factor is exactly `1.0`, so the step is bit-identical to plain leapfrog.
//!
//! Any non-finite intermediate aborts the trajectory with
//! [`Error::BlowUp`]; callers treat the proposal as rejected, which fails
//! identically on the reverse path and therefore preserves detailed balance.

use crate::model::TargetDistribution;
use crate::{Error, Result};
use nalgebra::{Cholesky, DMatrix, DVector};

/// A point `(q, p)` in the extended phase space `R^{2d}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseState {
    pub q: DVector<f64>,
    pub p: DVector<f64>,
}

impl PhaseState {
    pub fn new(q: DVector<f64>, p: DVector<f64>) -> Self {
        assert_eq!(q.len(), p.len(), "position/momentum dimension mismatch");
        Self { q, p }
    }

    pub fn dim(&self) -> usize {
        self.q.len()
    }

    pub fn is_finite(&self) -> bool {
        self.q.iter().all(|x| x.is_finite()) && self.p.iter().all(|x| x.is_finite())
    }

    pub fn norm(&self) -> f64 {
        (self.q.norm_squared() + self.p.norm_squared()).sqrt()
    }
}

/// Gaussian kinetic energy `K(p) = p' Sigma^{-1} p / 2` with cached inverse
/// and Cholesky factor of the mass matrix.
#[derive(Debug, Clone)]
pub struct KineticSpec {
    sigma: DMatrix<f64>,
    sigma_inv: DMatrix<f64>,
    chol: DMatrix<f64>,
    identity: bool,
}

impl KineticSpec {
    pub fn new(sigma: DMatrix<f64>) -> Result<Self> {
        if sigma.nrows() != sigma.ncols() {
            return Err(Error::Config("mass matrix must be square".into()));
        }
        let asym = (&sigma - sigma.transpose()).abs().max();
        if asym > 1e-10 {
            return Err(Error::Config("mass matrix must be symmetric".into()));
        }
        let chol = Cholesky::new(sigma.clone())
            .ok_or_else(|| Error::Config("mass matrix is not positive definite".into()))?;
        let sigma_inv = chol.inverse();
        let identity = sigma == DMatrix::identity(sigma.nrows(), sigma.ncols());
        Ok(Self {
            sigma,
            sigma_inv,
            chol: chol.unpack(),
            identity,
        })
    }

    /// Identity mass matrix in `d` dimensions.
    pub fn standard(dim: usize) -> Self {
        Self {
            sigma: DMatrix::identity(dim, dim),
            sigma_inv: DMatrix::identity(dim, dim),
            chol: DMatrix::identity(dim, dim),
            identity: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.sigma.nrows()
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn sigma_inv(&self) -> &DMatrix<f64> {
        &self.sigma_inv
    }

    /// Lower Cholesky factor `L` with `Sigma = L L'`.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// `Sigma^{-1} v`, skipping the multiply for the identity mass matrix.
    pub fn apply_inv(&self, v: &DVector<f64>) -> DVector<f64> {
        if self.identity {
            v.clone()
        } else {
            &self.sigma_inv * v
        }
    }

    /// `v' Sigma^{-1} v`
    pub fn quad_inv(&self, v: &DVector<f64>) -> f64 {
        if self.identity {
            v.norm_squared()
        } else {
            (&self.sigma_inv * v).dot(v)
        }
    }
}

/// Integrator parameters: step size, step count, friction.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IntegratorParams {
    pub epsilon: f64,
    /// Total number of steps `L`; the repelling and attracting stages each
    /// run `L/2` steps, silently dropping the remainder when `L` is odd.
    pub steps: usize,
    pub gamma: f64,
}

impl IntegratorParams {
    pub fn new(epsilon: f64, steps: usize, gamma: f64) -> Result<Self> {
        if !(epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {epsilon}")));
        }
        if steps < 2 {
            return Err(Error::Config(format!("step count must be >= 2, got {steps}")));
        }
        if !(gamma >= 0.0) {
            return Err(Error::Config(format!("gamma must be >= 0, got {gamma}")));
        }
        Ok(Self { epsilon, steps, gamma })
    }

    /// Total simulation time `T = epsilon * L`.
    pub fn total_time(&self) -> f64 {
        self.epsilon * self.steps as f64
    }

    pub fn half_steps(&self) -> usize {
        self.steps / 2
    }
}

/// Total energy `H(q, p) = U(q) + p' Sigma^{-1} p / 2` with `U = -log pi`.
pub fn hamiltonian(
    z: &PhaseState,
    target: &dyn TargetDistribution,
    kinetic: &KineticSpec,
) -> Result<f64> {
    let u = -target.log_density(&z.q);
    let k = 0.5 * kinetic.quad_inv(&z.p);
    let h = u + k;
    if h.is_finite() {
        Ok(h)
    } else {
        Err(Error::BlowUp { step: 0 })
    }
}

/// One leapfrog step: half-kick, drift, half-kick.
pub fn leapfrog_step(
    z: &PhaseState,
    target: &dyn TargetDistribution,
    kinetic: &KineticSpec,
    epsilon: f64,
) -> Result<PhaseState> {
    let half = 0.5 * epsilon;
    let mut p = &z.p + half * target.grad_log_density(&z.q);
    let q = &z.q + epsilon * kinetic.apply_inv(&p);
    p += half * target.grad_log_density(&q);
    let out = PhaseState { q, p };
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::BlowUp { step: 0 })
    }
}

/// One conformal leapfrog step with signed friction. Positive
/// `gamma_signed` contracts the momentum (attracting); negative amplifies
/// it (repelling).
pub fn conformal_leapfrog_step(
    z: &PhaseState,
    target: &dyn TargetDistribution,
    kinetic: &KineticSpec,
    epsilon: f64,
    gamma_signed: f64,
) -> Result<PhaseState> {
    let half = 0.5 * epsilon;
    let scale = (-gamma_signed * half).exp();
    let mut p = scale * &z.p + half * target.grad_log_density(&z.q);
    let q = &z.q + epsilon * kinetic.apply_inv(&p);
    p += half * target.grad_log_density(&q);
    p *= scale;
    let out = PhaseState { q, p };
    if out.is_finite() {
        Ok(out)
    } else {
        Err(Error::BlowUp { step: 0 })
    }
}

fn run_stage(
    z: &PhaseState,
    target: &dyn TargetDistribution,
    kinetic: &KineticSpec,
    epsilon: f64,
    gamma_signed: f64,
    steps: usize,
) -> Result<PhaseState> {
    let mut state = z.clone();
    for step in 0..steps {
        state = conformal_leapfrog_step(&state, target, kinetic, epsilon, gamma_signed)
            .map_err(|_| Error::BlowUp { step })?;
    }
    Ok(state)
}

/// Repelling stage: `L/2` conformal steps with negative friction, driving
/// the trajectory up the energy landscape and away from its current mode.
pub fn flow_repel(
    z: &PhaseState,
    target: &dyn TargetDistribution,
    kinetic: &KineticSpec,
    params: &IntegratorParams,
) -> Result<PhaseState> {
    run_stage(z, target, kinetic, params.epsilon, -params.gamma, params.half_steps())
}

/// Attracting stage: `L/2` conformal steps with positive friction, settling
/// the trajectory toward a (possibly different) mode.
pub fn flow_attract(
    z: &PhaseState,
    target: &dyn TargetDistribution,
    kinetic: &KineticSpec,
    params: &IntegratorParams,
) -> Result<PhaseState> {
    run_stage(z, target, kinetic, params.epsilon, params.gamma, params.half_steps())
}

/// Full proposal flow: attracting stage after repelling stage. The momentum
/// is *not* flipped here; compose with [`momentum_flip`] for the involutive
/// proposal map.
pub fn rahmc_flow(
    z: &PhaseState,
    target: &dyn TargetDistribution,
    kinetic: &KineticSpec,
    params: &IntegratorParams,
) -> Result<PhaseState> {
    let mid = flow_repel(z, target, kinetic, params)?;
    flow_attract(&mid, target, kinetic, params)
}

/// `(q, p) -> (q, -p)`; self-inverse and energy-preserving.
pub fn momentum_flip(z: &PhaseState) -> PhaseState {
    PhaseState {
        q: z.q.clone(),
        p: -&z.p,
    }
}

/// Householder reflection of the momentum across the hyperplane orthogonal
/// to `grad U(q)`. A no-op when the gradient vanishes to machine precision.
pub fn reflect_momentum(z: &PhaseState, target: &dyn TargetDistribution) -> PhaseState {
    let grad_u = -target.grad_log_density(&z.q);
    let norm_sq = grad_u.norm_squared();
    if norm_sq < 1e-12 {
        return z.clone();
    }
    let p = &z.p - 2.0 * z.p.dot(&grad_u) / norm_sq * &grad_u;
    PhaseState { q: z.q.clone(), p }
}

/// Central-difference Jacobian determinant of a phase-space map, intended
/// for verification in low dimensions (`2d x 2d` costs `O(d^2)` map
/// evaluations).
pub fn numeric_jacobian_det<F>(map: F, z: &PhaseState, h: f64) -> Result<f64>
where
    F: Fn(&PhaseState) -> Result<PhaseState>,
{
    assert!(h > 0.0, "step must be positive");
    let d = z.dim();
    assert!(d <= 5, "jacobian determinant is guarded to d <= 5");
    let n = 2 * d;

    let perturb = |idx: usize, delta: f64| -> PhaseState {
        let mut out = z.clone();
        if idx < d {
            out.q[idx] += delta;
        } else {
            out.p[idx - d] += delta;
        }
        out
    };
    let flatten = |s: &PhaseState| -> DVector<f64> {
        let mut v = DVector::zeros(n);
        v.rows_mut(0, d).copy_from(&s.q);
        v.rows_mut(d, d).copy_from(&s.p);
        v
    };

    let mut jac = DMatrix::zeros(n, n);
    for j in 0..n {
        let hi = flatten(&map(&perturb(j, h))?);
        let lo = flatten(&map(&perturb(j, -h))?);
        jac.set_column(j, &((hi - lo) / (2.0 * h)));
    }
    let det = jac.lu().determinant();
    if !det.is_finite() || det.abs() < 1e-12 {
        return Err(Error::Diagnostic(format!(
            "numeric Jacobian is singular to machine precision (det = {det})"
        )));
    }
    Ok(det)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GaussianMixtureTarget, StdGaussianTarget};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    struct FlatTarget {
        dim: usize,
    }

    impl crate::model::TargetDistribution for FlatTarget {
        fn dim(&self) -> usize {
            self.dim
        }
        fn name(&self) -> &str {
            "flat"
        }
        fn log_density(&self, _q: &DVector<f64>) -> f64 {
            0.0
        }
        fn grad_log_density(&self, q: &DVector<f64>) -> DVector<f64> {
            DVector::zeros(q.len())
        }
    }

    fn random_state(rng: &mut ChaCha8Rng, d: usize) -> PhaseState {
        PhaseState::new(
            DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal)),
            DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal)),
        )
    }

    #[test]
    fn hamiltonian_values() {
        let target = StdGaussianTarget::new(2);
        let kinetic = KineticSpec::standard(2);
        let zero = PhaseState::new(DVector::zeros(2), DVector::zeros(2));
        assert_eq!(hamiltonian(&zero, &target, &kinetic).unwrap(), 0.0);

        let p = DVector::from_row_slice(&[1.0, 2.0]);
        let z = PhaseState::new(DVector::zeros(2), p.clone());
        assert_abs_diff_eq!(
            hamiltonian(&z, &target, &kinetic).unwrap(),
            0.5 * p.norm_squared()
        );
    }

    #[test]
    fn hamiltonian_invariant_under_flip() {
        let target = GaussianMixtureTarget::anisotropic(2).unwrap();
        let kinetic = KineticSpec::standard(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let z = random_state(&mut rng, 2);
            let h1 = hamiltonian(&z, &target, &kinetic).unwrap();
            let h2 = hamiltonian(&momentum_flip(&z), &target, &kinetic).unwrap();
            assert_eq!(h1, h2);
        }
    }

    #[test]
    fn leapfrog_flat_potential_is_pure_drift() {
        let target = FlatTarget { dim: 2 };
        let kinetic = KineticSpec::standard(2);
        let z = PhaseState::new(
            DVector::from_row_slice(&[1.0, -1.0]),
            DVector::from_row_slice(&[0.5, 2.0]),
        );
        let out = leapfrog_step(&z, &target, &kinetic, 0.3).unwrap();
        assert_eq!(out.p, z.p);
        assert_eq!(out.q, &z.q + 0.3 * &z.p);
    }

    /// Local error against the exact rotation flow of the harmonic
    /// oscillator is third order: halving the step shrinks it ~8x.
    #[test]
    fn leapfrog_local_error_is_third_order() {
        let target = StdGaussianTarget::new(1);
        let kinetic = KineticSpec::standard(1);
        let z = PhaseState::new(
            DVector::from_row_slice(&[1.0]),
            DVector::from_row_slice(&[0.5]),
        );
        let exact = |eps: f64| {
            PhaseState::new(
                DVector::from_row_slice(&[z.q[0] * eps.cos() + z.p[0] * eps.sin()]),
                DVector::from_row_slice(&[z.p[0] * eps.cos() - z.q[0] * eps.sin()]),
            )
        };
        let err = |eps: f64| {
            let num = leapfrog_step(&z, &target, &kinetic, eps).unwrap();
            let ex = exact(eps);
            ((&num.q - &ex.q).norm_squared() + (&num.p - &ex.p).norm_squared()).sqrt()
        };
        let e1 = err(0.1);
        let e2 = err(0.05);
        let ratio = e1 / e2;
        assert!(
            (6.0..10.0).contains(&ratio),
            "expected ~8x shrink for O(eps^3) local error, got {ratio}"
        );
    }

    #[test]
    fn conformal_with_zero_gamma_is_bitwise_leapfrog() {
        let target = GaussianMixtureTarget::bivariate_example().unwrap();
        let kinetic = KineticSpec::standard(2);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let z = random_state(&mut rng, 2);
            let a = leapfrog_step(&z, &target, &kinetic, 0.05).unwrap();
            let b = conformal_leapfrog_step(&z, &target, &kinetic, 0.05, 0.0).unwrap();
            assert_eq!(a.q, b.q);
            assert_eq!(a.p, b.p);
        }
    }

    #[test]
    fn conformal_flat_potential_scales_momentum() {
        let target = FlatTarget { dim: 2 };
        let kinetic = KineticSpec::standard(2);
        let z = PhaseState::new(
            DVector::from_row_slice(&[0.0, 0.0]),
            DVector::from_row_slice(&[1.0, -2.0]),
        );
        let (eps, gamma) = (0.2, 0.7);
        let out = conformal_leapfrog_step(&z, &target, &kinetic, eps, gamma).unwrap();
        let scale_half = (-gamma * eps / 2.0).exp();
        assert_abs_diff_eq!(out.p[0], (-gamma * eps).exp() * z.p[0], epsilon = 1e-15);
        assert_abs_diff_eq!(out.p[1], (-gamma * eps).exp() * z.p[1], epsilon = 1e-15);
        assert_abs_diff_eq!(out.q[0], z.q[0] + eps * scale_half * z.p[0], epsilon = 1e-15);
    }

    #[test]
    fn repelling_step_increases_energy() {
        let target = StdGaussianTarget::new(2);
        let kinetic = KineticSpec::standard(2);
        let z = PhaseState::new(
            DVector::from_row_slice(&[0.5, -0.2]),
            DVector::from_row_slice(&[1.0, 0.7]),
        );
        let h0 = hamiltonian(&z, &target, &kinetic).unwrap();
        let out = conformal_leapfrog_step(&z, &target, &kinetic, 1e-3, -0.8).unwrap();
        let h1 = hamiltonian(&out, &target, &kinetic).unwrap();
        assert!(h1 > h0, "repelling step should accrue energy");
    }

    #[test]
    fn attract_fixed_point_at_mode() {
        let target = StdGaussianTarget::new(2);
        let kinetic = KineticSpec::standard(2);
        let params = IntegratorParams::new(0.01, 10, 0.5).unwrap();
        let z = PhaseState::new(DVector::zeros(2), DVector::zeros(2));
        let out = flow_attract(&z, &target, &kinetic, &params).unwrap();
        assert_eq!(out.q, z.q);
        assert_eq!(out.p, z.p);
    }

    #[test]
    fn attract_energy_nonincreasing_small_steps() {
        let target = StdGaussianTarget::new(2);
        let kinetic = KineticSpec::standard(2);
        let mut z = PhaseState::new(
            DVector::from_row_slice(&[1.0, -0.4]),
            DVector::from_row_slice(&[0.8, 0.3]),
        );
        let mut h_prev = hamiltonian(&z, &target, &kinetic).unwrap();
        for _ in 0..500 {
            z = conformal_leapfrog_step(&z, &target, &kinetic, 1e-3, 0.5).unwrap();
            let h = hamiltonian(&z, &target, &kinetic).unwrap();
            assert!(h <= h_prev + 1e-9, "energy increased under attraction");
            h_prev = h;
        }
    }

    #[test]
    fn flow_with_two_steps_is_one_conformal_step() {
        let target = GaussianMixtureTarget::bivariate_example().unwrap();
        let kinetic = KineticSpec::standard(2);
        let params = IntegratorParams::new(0.05, 2, 0.4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let z = random_state(&mut rng, 2);
        let staged = flow_repel(&z, &target, &kinetic, &params).unwrap();
        let single = conformal_leapfrog_step(&z, &target, &kinetic, 0.05, -0.4).unwrap();
        assert_eq!(staged.q, single.q);
        assert_eq!(staged.p, single.p);
    }

    #[test]
    fn odd_step_count_drops_remainder() {
        let target = StdGaussianTarget::new(2);
        let kinetic = KineticSpec::standard(2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let z = random_state(&mut rng, 2);
        let odd = IntegratorParams::new(0.05, 9, 0.3).unwrap();
        let even = IntegratorParams::new(0.05, 8, 0.3).unwrap();
        let a = rahmc_flow(&z, &target, &kinetic, &odd).unwrap();
        let b = rahmc_flow(&z, &target, &kinetic, &even).unwrap();
        assert_eq!(a.q, b.q);
        assert_eq!(a.p, b.p);
    }

    #[test]
    fn gamma_zero_flow_is_plain_leapfrog() {
        let target = GaussianMixtureTarget::anisotropic(2).unwrap();
        let kinetic = KineticSpec::standard(2);
        let params = IntegratorParams::new(0.02, 20, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let z = random_state(&mut rng, 2);
        let conf = rahmc_flow(&z, &target, &kinetic, &params).unwrap();
        let mut plain = z.clone();
        for _ in 0..20 {
            plain = leapfrog_step(&plain, &target, &kinetic, 0.02).unwrap();
        }
        assert_eq!(conf.q, plain.q);
        assert_eq!(conf.p, plain.p);
    }

    #[test]
    fn flip_involution_and_fixed_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let z = random_state(&mut rng, 3);
        assert_eq!(momentum_flip(&momentum_flip(&z)), z);
        let rest = PhaseState::new(z.q.clone(), DVector::zeros(3));
        assert_eq!(momentum_flip(&rest), rest);
    }

    #[test]
    fn rahmc_proposal_is_involution() {
        let target = GaussianMixtureTarget::anisotropic(2).unwrap();
        let kinetic = KineticSpec::standard(2);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let z = random_state(&mut rng, 2);
            let eps = 10f64.powf(rng.random_range(-3.0..-1.0));
            let gamma = rng.random_range(0.0..1.0);
            let steps = 2 * rng.random_range(1..=50);
            let params = IntegratorParams::new(eps, steps, gamma).unwrap();
            let fwd = momentum_flip(&rahmc_flow(&z, &target, &kinetic, &params).unwrap());
            let back = momentum_flip(&rahmc_flow(&fwd, &target, &kinetic, &params).unwrap());
            let err = (&back.q - &z.q).norm().hypot((&back.p - &z.p).norm());
            assert!(
                err <= 1e-8 * z.norm().max(1.0),
                "round trip error {err} at eps={eps} gamma={gamma} L={steps}"
            );
        }
    }

    #[test]
    fn reflection_properties() {
        let target = StdGaussianTarget::new(2);
        // grad U = q; pick q along e1
        let q = DVector::from_row_slice(&[2.0, 0.0]);

        let parallel = PhaseState::new(q.clone(), DVector::from_row_slice(&[1.5, 0.0]));
        let r = reflect_momentum(&parallel, &target);
        assert_abs_diff_eq!(r.p[0], -1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(r.p[1], 0.0, epsilon = 1e-14);

        let orth = PhaseState::new(q.clone(), DVector::from_row_slice(&[0.0, -0.7]));
        let r = reflect_momentum(&orth, &target);
        assert_abs_diff_eq!(r.p[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.p[1], -0.7, epsilon = 1e-14);

        let mixed = PhaseState::new(q, DVector::from_row_slice(&[0.3, 0.9]));
        let twice = reflect_momentum(&reflect_momentum(&mixed, &target), &target);
        assert_abs_diff_eq!(twice.p[0], mixed.p[0], epsilon = 1e-14);
        assert_abs_diff_eq!(twice.p[1], mixed.p[1], epsilon = 1e-14);
        let r = reflect_momentum(&mixed, &target);
        assert_abs_diff_eq!(r.p.norm(), mixed.p.norm(), epsilon = 1e-14);

        // critical point: no-op
        let critical = PhaseState::new(DVector::zeros(2), DVector::from_row_slice(&[1.0, 2.0]));
        assert_eq!(reflect_momentum(&critical, &target), critical);
    }

    #[test]
    fn jacobian_of_identity_map() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let z = random_state(&mut rng, 2);
        let det = numeric_jacobian_det(|s| Ok(s.clone()), &z, 1e-5).unwrap();
        assert_abs_diff_eq!(det, 1.0, epsilon = 1e-10);
    }

    /// The momentum rescale acts twice per step on d coordinates, so one
    /// repelling step has determinant `exp(+d * gamma * eps)`.
    #[test]
    fn jacobian_of_single_conformal_step() {
        let target = GaussianMixtureTarget::bivariate_example().unwrap();
        let kinetic = KineticSpec::standard(2);
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let z = random_state(&mut rng, 2);
        let (eps, gamma) = (0.05, 0.6);
        let det = numeric_jacobian_det(
            |s| conformal_leapfrog_step(s, &target, &kinetic, eps, -gamma),
            &z,
            1e-5,
        )
        .unwrap();
        let expected = (2.0 * gamma * eps).exp();
        assert!(
            (det - expected).abs() <= 1e-4 * expected,
            "det {det} vs expected {expected}"
        );
    }

    #[test]
    fn jacobian_of_full_flow_is_one() {
        let target = GaussianMixtureTarget::anisotropic(2).unwrap();
        let kinetic = KineticSpec::standard(2);
        let params = IntegratorParams::new(0.02, 16, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let z = random_state(&mut rng, 2);
        let det = numeric_jacobian_det(
            |s| rahmc_flow(s, &target, &kinetic, &params),
            &z,
            1e-5,
        )
        .unwrap();
        assert!((det - 1.0).abs() <= 1e-4, "det {det}");
    }

    #[test]
    fn kinetic_spec_invariants() {
        let sigma = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let k = KineticSpec::new(sigma.clone()).unwrap();
        let eye = k.sigma_inv() * &sigma;
        assert!((eye - DMatrix::identity(2, 2)).abs().max() < 1e-10);
        let rebuilt = k.chol() * k.chol().transpose();
        assert!((rebuilt - sigma).abs().max() < 1e-10);
        assert!(KineticSpec::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0])).is_err());
    }

    #[test]
    fn blow_up_is_reported() {
        let target = StdGaussianTarget::new(1);
        let kinetic = KineticSpec::standard(1);
        let z = PhaseState::new(
            DVector::from_row_slice(&[1.0]),
            DVector::from_row_slice(&[1.0]),
        );
        // enormous negative friction over many steps overflows the momentum
        let params = IntegratorParams::new(10.0, 400, 200.0).unwrap();
        match rahmc_flow(&z, &target, &kinetic, &params) {
            Err(Error::BlowUp { .. }) => {}
            other => panic!("expected blow-up, got {other:?}"),
        }
    }
}
