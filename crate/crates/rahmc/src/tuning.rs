//! Dual-averaging adaptation of the step size and friction coefficient.
//!
//! The primal iterate is `x = (ln epsilon, ln gamma)`. Each warm-up
//! iteration feeds the statistic `f_i = delta - alpha_i`, where `alpha_i`
//! is the Metropolis acceptance probability the kernel actually used (a
//! blown-up trajectory counts as `alpha_i = 0`), and updates
//!
//! ```text
//! x_{t+1}    = mu - sqrt(t)/omega * 1/(t0 + t) * sum_{i<=t} g_i
//! xbar_{t+1} = eta_t x_{t+1} + (1 - eta_t) xbar_t,   eta_t = t^{-k}
//! ```
//!
//! with `g_i = (f_i, f_i)`. The anchor is `mu = (ln 10*eps0, ln 10*gamma0)`
//! with `eps0` found by the doubling/halving heuristic and `gamma0 = 1`.
//! The trajectory length is re-derived from the current step size each
//! iteration as `L = T / epsilon`, rounded to the nearest even integer.

use crate::dynamics::{hamiltonian, leapfrog_step, IntegratorParams, KineticSpec, PhaseState};
use crate::model::TargetDistribution;
use crate::samplers::{resample_momentum, transition, SamplerConfig, SamplerKind};
use crate::{Error, Result};
use nalgebra::DVector;
use rand::RngCore;
use serde::Serialize;

/// Hard cap on the per-iteration step count; protects the warm-up loop from
/// transient step-size collapse (`L = T / epsilon` has no natural bound).
pub const MAX_STEPS: usize = 100_000;

/// Primal/dual iterates of the Nesterov dual-averaging scheme over
/// `(ln epsilon, ln gamma)`.
#[derive(Debug, Clone, Serialize)]
pub struct DualAveragingState {
    pub x: [f64; 2],
    pub x_bar: [f64; 2],
    g_sum: [f64; 2],
    pub t: u64,
    pub mu: [f64; 2],
    pub omega: f64,
    pub t0: f64,
    pub k: f64,
    pub delta: f64,
    pub sim_length: f64,
}

impl DualAveragingState {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        epsilon0: f64,
        gamma0: f64,
        delta: f64,
        sim_length: f64,
        omega: f64,
        t0: f64,
        k: f64,
    ) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0, 1), got {delta}")));
        }
        if !(sim_length > 0.0) {
            return Err(Error::Config("simulation length must be positive".into()));
        }
        if !(omega > 0.0) || !(t0 >= 0.0) || !(k > 0.5 && k <= 1.0) {
            return Err(Error::Config(
                "dual-averaging constants out of range (omega > 0, t0 >= 0, k in (0.5, 1])".into(),
            ));
        }
        if !(epsilon0 > 0.0) || !(gamma0 > 0.0) {
            return Err(Error::Config("initial epsilon and gamma must be positive".into()));
        }
        let x = [epsilon0.ln(), gamma0.ln()];
        Ok(Self {
            x,
            x_bar: x,
            g_sum: [0.0, 0.0],
            t: 0,
            mu: [(10.0 * epsilon0).ln(), (10.0 * gamma0).ln()],
            omega,
            t0,
            k,
            delta,
            sim_length,
        })
    }

    /// One update with statistic `f` (both gradient components equal `f`).
    pub fn da_update(&mut self, f: f64) {
        self.t += 1;
        let t = self.t as f64;
        let eta = t.powf(-self.k);
        let rate = t.sqrt() / (self.omega * (self.t0 + t));
        for i in 0..2 {
            self.g_sum[i] += f;
            self.x[i] = self.mu[i] - rate * self.g_sum[i];
            self.x_bar[i] = eta * self.x[i] + (1.0 - eta) * self.x_bar[i];
        }
    }

    /// Current primal `(epsilon, gamma)`.
    pub fn current(&self) -> (f64, f64) {
        (self.x[0].exp(), self.x[1].exp())
    }

    /// Dual-averaged `(epsilon, gamma)`; the values frozen after warm-up.
    pub fn averaged(&self) -> (f64, f64) {
        (self.x_bar[0].exp(), self.x_bar[1].exp())
    }
}

/// `L = T / epsilon` rounded to the nearest even integer, clamped to
/// `[2, MAX_STEPS]`.
pub fn steps_for(sim_length: f64, epsilon: f64) -> usize {
    let raw = sim_length / epsilon;
    if !raw.is_finite() {
        return MAX_STEPS;
    }
    let even = 2.0 * (raw / 2.0).round();
    (even as usize).clamp(2, MAX_STEPS)
}

/// Doubling/halving search for an initial step size: starting from
/// `epsilon = 1`, scale by 2 in the direction indicated by the first
/// one-step acceptance until the acceptance probability crosses 1/2, and
/// return the crossing value. Degenerate targets whose acceptance never
/// crosses (e.g. an exactly flat potential) exhaust the 100-iteration
/// budget and report a tuner error.
pub fn init_epsilon(
    target: &dyn TargetDistribution,
    kinetic: &KineticSpec,
    q0: &DVector<f64>,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    let p = resample_momentum(rng, kinetic);
    let z = PhaseState::new(q0.clone(), p);
    let h0 = hamiltonian(&z, target, kinetic)?;
    let log_alpha = |eps: f64| -> f64 {
        leapfrog_step(&z, target, kinetic, eps)
            .and_then(|z1| hamiltonian(&z1, target, kinetic))
            .map(|h1| h0 - h1)
            .unwrap_or(f64::NEG_INFINITY)
    };

    let ln_half = 0.5f64.ln();
    let mut eps = 1.0f64;
    let upward = log_alpha(eps) > ln_half;
    for _ in 0..100 {
        let la = log_alpha(eps);
        let crossed = if upward { la <= ln_half } else { la > ln_half };
        if crossed {
            return Ok(eps);
        }
        eps *= if upward { 2.0 } else { 0.5 };
    }
    Err(Error::Tuner(
        "one-step acceptance never crossed 1/2 within 100 doublings/halvings".into(),
    ))
}

/// Knobs of the warm-up tuner. The shrinkage constants follow the standard
/// dual-averaging choices; `sim_length` is the fixed total simulation time
/// `T = epsilon * L`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TunerSettings {
    pub delta: f64,
    pub sim_length: f64,
    pub gamma0: f64,
    pub omega: f64,
    pub t0: f64,
    pub k: f64,
}

impl TunerSettings {
    pub fn new(delta: f64, sim_length: f64) -> Self {
        Self {
            delta,
            sim_length,
            gamma0: 1.0,
            omega: 0.05,
            t0: 10.0,
            k: 0.75,
        }
    }
}

/// Result of a tuning run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TunedParams {
    pub epsilon: f64,
    pub gamma: f64,
    pub steps: usize,
    pub epsilon0: f64,
    pub warmup_acceptance: f64,
}

pub(crate) struct WarmupOutcome {
    pub params: IntegratorParams,
    pub tuned: TunedParams,
}

/// Adapts `(epsilon, gamma)` over `warmup` transitions, advancing `state`
/// with the usual accept/reject rule. Tuning changes the kernel parameters,
/// never the kernel itself.
pub(crate) fn warmup_adapt(
    state: &mut DVector<f64>,
    warmup: usize,
    rng: &mut dyn RngCore,
    target: &dyn TargetDistribution,
    base: &SamplerConfig,
    settings: &TunerSettings,
) -> Result<WarmupOutcome> {
    if warmup == 0 {
        return Ok(WarmupOutcome {
            params: base.params,
            tuned: TunedParams {
                epsilon: base.params.epsilon,
                gamma: base.params.gamma,
                steps: base.params.steps,
                epsilon0: base.params.epsilon,
                warmup_acceptance: f64::NAN,
            },
        });
    }

    let epsilon0 = init_epsilon(target, &base.kinetic, state, rng)?;
    let mut da = DualAveragingState::new(
        epsilon0,
        settings.gamma0,
        settings.delta,
        settings.sim_length,
        settings.omega,
        settings.t0,
        settings.k,
    )?;

    let mut accepted = 0usize;
    let mut blown_up = 0usize;
    for _ in 0..warmup {
        let (eps, gamma) = da.current();
        let steps = steps_for(settings.sim_length, eps);
        let mut config = base.clone();
        config.params = IntegratorParams::new(eps, steps, gamma)?;
        let (next, rec) = transition(state, rng, target, &config)?;
        *state = next;
        if rec.accepted {
            accepted += 1;
        }
        if rec.blown_up {
            blown_up += 1;
        }
        da.da_update(settings.delta - rec.alpha);
    }
    if blown_up == warmup {
        return Err(Error::Tuner(format!(
            "all {warmup} warm-up proposals blew up (epsilon0 = {epsilon0:.3e}, final x = {:?})",
            da.x
        )));
    }

    let (eps_star, gamma_star) = da.averaged();
    let steps_star = steps_for(settings.sim_length, eps_star);
    let gamma_final = match base.kind {
        SamplerKind::Rahmc => gamma_star,
        SamplerKind::Hmc => 0.0,
    };
    let params = IntegratorParams::new(eps_star, steps_star, gamma_final)?;
    Ok(WarmupOutcome {
        params,
        tuned: TunedParams {
            epsilon: eps_star,
            gamma: gamma_final,
            steps: steps_star,
            epsilon0,
            warmup_acceptance: accepted as f64 / warmup as f64,
        },
    })
}

/// Tunes `(epsilon, gamma, L)` for the repelling-attracting kernel on
/// `target`, starting from `q0` (drawn from `N(0, I)` when absent).
pub fn tune_rahmc(
    target: &dyn TargetDistribution,
    kinetic: &KineticSpec,
    q0: Option<&DVector<f64>>,
    warmup: usize,
    delta: f64,
    sim_length: f64,
    rng: &mut dyn RngCore,
) -> Result<TunedParams> {
    tune_kernel(SamplerKind::Rahmc, target, kinetic, q0, warmup, delta, sim_length, rng)
}

/// Same warm-up adaptation driving the plain HMC kernel; the friction
/// coordinate is carried along but the returned `gamma` is 0.
pub fn tune_hmc(
    target: &dyn TargetDistribution,
    kinetic: &KineticSpec,
    q0: Option<&DVector<f64>>,
    warmup: usize,
    delta: f64,
    sim_length: f64,
    rng: &mut dyn RngCore,
) -> Result<TunedParams> {
    tune_kernel(SamplerKind::Hmc, target, kinetic, q0, warmup, delta, sim_length, rng)
}

#[allow(clippy::too_many_arguments)]
fn tune_kernel(
    kind: SamplerKind,
    target: &dyn TargetDistribution,
    kinetic: &KineticSpec,
    q0: Option<&DVector<f64>>,
    warmup: usize,
    delta: f64,
    sim_length: f64,
    rng: &mut dyn RngCore,
) -> Result<TunedParams> {
    if warmup < 1 {
        return Err(Error::Config("tuning requires warmup >= 1".into()));
    }
    let mut state = match q0 {
        Some(q) => q.clone(),
        None => {
            use rand::Rng;
            DVector::from_fn(target.dim(), |_, _| {
                rng.sample::<f64, _>(rand_distr::StandardNormal)
            })
        }
    };
    let base = SamplerConfig::new(
        kind,
        IntegratorParams::new(1.0, 2, if kind == SamplerKind::Rahmc { 1.0 } else { 0.0 })?,
        kinetic.clone(),
    );
    let settings = TunerSettings::new(delta, sim_length);
    let outcome = warmup_adapt(&mut state, warmup, rng, target, &base, &settings)?;
    Ok(outcome.tuned)
}
