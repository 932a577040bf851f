//! Metropolis-filtered transition kernels and chain execution.
//!
//! Both kernels share one code path: resample the momentum, integrate the
//! deterministic flow, flip the momentum, and accept with probability
//! `min(1, exp(H_current - H_proposed))`. A trajectory that produces a
//! non-finite state is treated as a rejected proposal with acceptance
//! probability zero.

use crate::dynamics::{
    self, hamiltonian, momentum_flip, reflect_momentum, IntegratorParams, KineticSpec, PhaseState,
};
use crate::model::TargetDistribution;
use crate::{Error, Result};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    Hmc,
    Rahmc,
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SamplerKind::Hmc => write!(f, "hmc"),
            SamplerKind::Rahmc => write!(f, "rahmc"),
        }
    }
}

/// Kernel configuration. For HMC the friction coefficient is ignored
/// (treated as zero).
#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub kind: SamplerKind,
    pub params: IntegratorParams,
    pub kinetic: KineticSpec,
    /// Reflect the momentum across the gradient hyperplane between the
    /// repelling and attracting stages. Off by default; the dynamics do not
    /// need it to transition between modes.
    pub reflect_midpoint: bool,
}

impl SamplerConfig {
    pub fn new(kind: SamplerKind, params: IntegratorParams, kinetic: KineticSpec) -> Self {
        Self {
            kind,
            params,
            kinetic,
            reflect_midpoint: false,
        }
    }

    /// Effective friction: zero for HMC regardless of `params.gamma`.
    pub fn effective_gamma(&self) -> f64 {
        match self.kind {
            SamplerKind::Hmc => 0.0,
            SamplerKind::Rahmc => self.params.gamma,
        }
    }
}

/// Per-iteration record of the Metropolis step.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TransitionRecord {
    pub accepted: bool,
    pub alpha: f64,
    pub h_current: f64,
    pub h_proposed: f64,
    pub blown_up: bool,
}

/// An executed chain: post-warm-up samples with per-iteration diagnostics.
#[derive(Debug, Clone)]
pub struct Chain {
    /// `n x d` matrix, one sample per row.
    pub samples: DMatrix<f64>,
    pub accepted: Vec<bool>,
    pub alpha: Vec<f64>,
    pub h_current: Vec<f64>,
    /// `+inf` marks a blown-up trajectory.
    pub h_proposed: Vec<f64>,
    pub acceptance_rate: f64,
    pub seed: u64,
    pub chain_index: u64,
    pub target_name: String,
    pub kind: SamplerKind,
    /// Parameters actually used after warm-up (tuned values when a tuner ran).
    pub params: IntegratorParams,
    pub warmup: usize,
}

impl Chain {
    pub fn len(&self) -> usize {
        self.samples.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.samples.ncols()
    }

    /// One coordinate as a time series.
    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.samples.column(j).iter().copied().collect()
    }
}

/// Derives the per-chain generator from `(master_seed, chain_index)` via
/// splitmix64, so chains are reproducible and mutually independent.
pub fn chain_rng(master_seed: u64, chain_index: u64) -> ChaCha8Rng {
    let mut x = master_seed ^ chain_index.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^= x >> 31;
    ChaCha8Rng::seed_from_u64(x)
}

/// Draws `p ~ N(0, Sigma)` through the Cholesky factor of the mass matrix.
pub fn resample_momentum(rng: &mut dyn RngCore, kinetic: &KineticSpec) -> DVector<f64> {
    let z = DVector::from_fn(kinetic.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
    kinetic.chol() * z
}

fn propose(
    z: &PhaseState,
    target: &dyn TargetDistribution,
    config: &SamplerConfig,
) -> Result<PhaseState> {
    match config.kind {
        SamplerKind::Hmc => {
            let mut state = z.clone();
            for step in 0..config.params.steps {
                state = dynamics::leapfrog_step(&state, target, &config.kinetic, config.params.epsilon)
                    .map_err(|_| Error::BlowUp { step })?;
            }
            Ok(state)
        }
        SamplerKind::Rahmc => {
            let mid = dynamics::flow_repel(z, target, &config.kinetic, &config.params)?;
            let mid = if config.reflect_midpoint {
                reflect_momentum(&mid, target)
            } else {
                mid
            };
            dynamics::flow_attract(&mid, target, &config.kinetic, &config.params)
        }
    }
}

/// One Metropolis-filtered transition from `state`. Always consumes `d`
/// normals and one uniform from `rng`, so kernels with the same seed and
/// the same `(epsilon, L)` stay stream-aligned across sampler kinds.
pub fn transition(
    state: &DVector<f64>,
    rng: &mut dyn RngCore,
    target: &dyn TargetDistribution,
    config: &SamplerConfig,
) -> Result<(DVector<f64>, TransitionRecord)> {
    if state.len() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: state.len(),
        });
    }
    if config.kinetic.dim() != target.dim() {
        return Err(Error::DimensionMismatch {
            expected: target.dim(),
            got: config.kinetic.dim(),
        });
    }

    let p = resample_momentum(rng, &config.kinetic);
    let z = PhaseState::new(state.clone(), p);
    let h_current = hamiltonian(&z, target, &config.kinetic)?;

    let proposal = propose(&z, target, config).and_then(|z_end| {
        let flipped = momentum_flip(&z_end);
        hamiltonian(&flipped, target, &config.kinetic).map(|h| (flipped, h))
    });

    let (alpha, h_proposed, proposed_q, blown_up) = match proposal {
        Ok((flipped, h_prop)) => {
            let alpha = (h_current - h_prop).exp().min(1.0);
            (alpha, h_prop, Some(flipped.q), false)
        }
        Err(Error::BlowUp { .. }) => (0.0, f64::INFINITY, None, true),
        Err(e) => return Err(e),
    };

    let u: f64 = rng.random();
    let (next, accepted) = if u < alpha {
        (proposed_q.expect("alpha > 0 implies a finite proposal"), true)
    } else {
        (state.clone(), false)
    };

    Ok((
        next,
        TransitionRecord {
            accepted,
            alpha,
            h_current,
            h_proposed,
            blown_up,
        },
    ))
}

/// Runs one chain: `warmup` discarded iterations followed by `n` recorded
/// ones. When `tuner` is supplied, dual averaging adapts `(epsilon, gamma)`
/// during warm-up only and the recorded phase uses the frozen tuned values.
/// The chain draws from a generator derived from `(seed, 0)`.
pub fn run_chain(
    initial: Option<&DVector<f64>>,
    n: usize,
    warmup: usize,
    seed: u64,
    target: &dyn TargetDistribution,
    config: &SamplerConfig,
    tuner: Option<&crate::tuning::TunerSettings>,
) -> Result<Chain> {
    run_chain_indexed(initial, n, warmup, seed, 0, target, config, tuner)
}

/// [`run_chain`] with an explicit chain index; parallel chains share the
/// master seed and differ in index.
#[allow(clippy::too_many_arguments)]
pub fn run_chain_indexed(
    initial: Option<&DVector<f64>>,
    n: usize,
    warmup: usize,
    seed: u64,
    chain_index: u64,
    target: &dyn TargetDistribution,
    config: &SamplerConfig,
    tuner: Option<&crate::tuning::TunerSettings>,
) -> Result<Chain> {
    if n < 1 {
        return Err(Error::Config("chain length must be >= 1".into()));
    }
    let d = target.dim();
    let mut rng = chain_rng(seed, chain_index);
    let mut state = match initial {
        Some(q0) => {
            if q0.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: q0.len(),
                });
            }
            q0.clone()
        }
        None => DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal)),
    };

    let mut frozen = config.clone();
    match tuner {
        Some(settings) => {
            let outcome = crate::tuning::warmup_adapt(
                &mut state,
                warmup,
                &mut rng,
                target,
                &frozen,
                settings,
            )?;
            frozen.params = outcome.params;
        }
        None => {
            for _ in 0..warmup {
                let (next, _) = transition(&state, &mut rng, target, &frozen)?;
                state = next;
            }
        }
    }

    let mut samples = DMatrix::zeros(n, d);
    let mut accepted = Vec::with_capacity(n);
    let mut alpha = Vec::with_capacity(n);
    let mut h_current = Vec::with_capacity(n);
    let mut h_proposed = Vec::with_capacity(n);
    for i in 0..n {
        let (next, rec) = transition(&state, &mut rng, target, &frozen)?;
        state = next;
        samples.row_mut(i).copy_from(&state.transpose());
        accepted.push(rec.accepted);
        alpha.push(rec.alpha);
        h_current.push(rec.h_current);
        h_proposed.push(rec.h_proposed);
    }

    let acceptance_rate = accepted.iter().filter(|a| **a).count() as f64 / n as f64;
    Ok(Chain {
        samples,
        accepted,
        alpha,
        h_current,
        h_proposed,
        acceptance_rate,
        seed,
        chain_index,
        target_name: target.name().to_string(),
        kind: config.kind,
        params: frozen.params,
        warmup,
    })
}
