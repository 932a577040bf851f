//! Numerical certification of the dynamical properties the sampler relies
//! on: the proposal map is an involution after a momentum flip, preserves
//! phase-space volume, converges at second order, creates/dissipates energy
//! at the predicted rate, keeps zero net drift over a full proposal, and
//! respects the mode-transition bound for plain HMC. Each check is
//! deterministic given its seed and emits a machine-readable report.

use crate::diagnostics::stats::{energy_drift_stats, ks_test_std_normal};
use crate::dynamics::{
    flow_attract, flow_repel, hamiltonian, leapfrog_step, momentum_flip, numeric_jacobian_det,
    rahmc_flow, IntegratorParams, KineticSpec, PhaseState,
};
use crate::model::{GaussianMixtureTarget, StdGaussianTarget, TargetDistribution};
use crate::samplers::{chain_rng, run_chain, SamplerConfig, SamplerKind};
use crate::{Error, Result};
use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use serde_json::{json, Value};
use std::time::Instant;

/// Outcome of one verification check. `pass` is a deterministic function of
/// the measured values and thresholds.
#[derive(Debug, Clone, Serialize)]
pub struct VerificationReport {
    pub name: String,
    pub pass: bool,
    pub measured: Value,
    pub thresholds: Value,
    pub seed: u64,
    pub runtime_seconds: f64,
}

pub const CHECK_NAMES: &[&str] = &[
    "involution",
    "volume",
    "order",
    "energy_rate",
    "energy_drift",
    "mode_transition",
    "statistical",
];

fn random_state(rng: &mut ChaCha8Rng, d: usize, q_scale: f64) -> PhaseState {
    PhaseState::new(
        DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal) * q_scale),
        DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal)),
    )
}

/// Proposition check: `(flip ∘ F)` composed with itself is the identity.
pub fn check_involution(
    target: &dyn TargetDistribution,
    trials: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let d = target.dim();
    let kinetic = KineticSpec::standard(d);
    let mut rng = chain_rng(seed, 1);
    let mut max_rel = 0.0f64;
    let mut blowups = 0usize;
    for _ in 0..trials {
        let z = random_state(&mut rng, d, 2.0);
        let eps = 10f64.powf(rng.random_range(-3.0..=-1.0));
        let gamma: f64 = rng.random_range(0.0..=1.0);
        let steps = 2 * rng.random_range(1..=50usize);
        let params = IntegratorParams::new(eps, steps, gamma)?;
        let round_trip = rahmc_flow(&z, target, &kinetic, &params)
            .map(|f| momentum_flip(&f))
            .and_then(|f| rahmc_flow(&f, target, &kinetic, &params))
            .map(|f| momentum_flip(&f));
        match round_trip {
            Ok(back) => {
                let err = ((&back.q - &z.q).norm_squared() + (&back.p - &z.p).norm_squared())
                    .sqrt()
                    / z.norm().max(1.0);
                max_rel = max_rel.max(err);
            }
            Err(Error::BlowUp { .. }) => blowups += 1,
            Err(e) => return Err(e),
        }
    }
    let tol = 1e-8;
    Ok(VerificationReport {
        name: "involution".into(),
        pass: max_rel <= tol && blowups < trials,
        measured: json!({
            "max_relative_round_trip_error": max_rel,
            "trials": trials,
            "blowups_excluded": blowups,
            "target": target.name(),
        }),
        thresholds: json!({ "max_relative_round_trip_error": tol }),
        seed,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Proposition check: the flow preserves volume, and the two stages carry
/// reciprocal determinants `exp(±d γ ε L/2)`.
pub fn check_volume(
    target: &dyn TargetDistribution,
    trials: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let d = target.dim();
    let kinetic = KineticSpec::standard(d);
    let mut rng = chain_rng(seed, 2);
    let h = 1e-5;

    let mut max_full_dev = 0.0f64;
    let mut max_stage_dev = 0.0f64;
    let mut max_product_dev = 0.0f64;
    for _ in 0..trials {
        let z = random_state(&mut rng, d, 1.5);
        let eps = rng.random_range(0.005..=0.05);
        let gamma: f64 = rng.random_range(0.0..=1.0);
        let steps = 2 * rng.random_range(1..=20usize);
        let params = IntegratorParams::new(eps, steps, gamma)?;

        let det_full = numeric_jacobian_det(|s| rahmc_flow(s, target, &kinetic, &params), &z, h)?;
        max_full_dev = max_full_dev.max((det_full - 1.0).abs());

        let det_repel =
            numeric_jacobian_det(|s| flow_repel(s, target, &kinetic, &params), &z, h)?;
        let det_attract =
            numeric_jacobian_det(|s| flow_attract(s, target, &kinetic, &params), &z, h)?;
        let exponent = d as f64 * gamma * eps * params.half_steps() as f64;
        let dev_plus = (det_repel - exponent.exp()).abs() / exponent.exp().max(1.0);
        let dev_minus = (det_attract - (-exponent).exp()).abs() / (-exponent).exp().max(1.0);
        max_stage_dev = max_stage_dev.max(dev_plus.max(dev_minus));
        max_product_dev = max_product_dev.max((det_repel * det_attract - 1.0).abs());
    }

    let (tol_full, tol_stage) = (1e-4, 1e-3);
    Ok(VerificationReport {
        name: "volume".into(),
        pass: max_full_dev <= tol_full && max_stage_dev <= tol_stage && max_product_dev <= tol_full,
        measured: json!({
            "max_full_flow_det_deviation": max_full_dev,
            "max_stage_det_relative_deviation": max_stage_dev,
            "max_stage_product_deviation": max_product_dev,
            "trials": trials,
            "target": target.name(),
        }),
        thresholds: json!({
            "full_flow_det": tol_full,
            "stage_det_vs_exp_d_gamma_eps_halfL": tol_stage,
            "stage_product": tol_full,
        }),
        seed,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Proposition check: with `T = eps L` fixed, the flow converges to its
/// continuous-time limit at second order. The reference solution uses
/// `eps/16`; passing requires the observed order in `[1.7, 2.3]`.
pub fn check_order(
    target: &dyn TargetDistribution,
    z: &PhaseState,
    total_time: f64,
    gamma: f64,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let kinetic = KineticSpec::standard(target.dim());
    let base_steps = 20usize;
    let eps = total_time / base_steps as f64;

    let run = |eps_i: f64, steps_i: usize| -> Result<PhaseState> {
        let params = IntegratorParams::new(eps_i, steps_i, gamma)?;
        rahmc_flow(z, target, &kinetic, &params)
    };

    let reference = run(eps / 16.0, base_steps * 16);
    let (order, blow_up) = match (&reference, run(eps, base_steps), run(eps / 2.0, base_steps * 2)) {
        (Ok(reference), Ok(coarse), Ok(fine)) => {
            let err = |approx: &PhaseState| {
                ((&approx.q - &reference.q).norm_squared()
                    + (&approx.p - &reference.p).norm_squared())
                .sqrt()
            };
            ((err(&coarse) / err(&fine)).log2(), false)
        }
        _ => (f64::NAN, true),
    };

    let (lo, hi) = (1.7, 2.3);
    Ok(VerificationReport {
        name: "order".into(),
        pass: !blow_up && order >= lo && order <= hi,
        measured: json!({
            "observed_order": order,
            "blow_up": blow_up,
            "epsilon": eps,
            "gamma": gamma,
            "total_time": total_time,
            "target": target.name(),
        }),
        thresholds: json!({ "order_band": [lo, hi] }),
        seed: 0,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Lemma check: over one conformal step at `eps = 1e-4`, the energy changes
/// at rate `±gamma p' Sigma^{-1} p` to within 5% relative error.
pub fn check_energy_rate(
    target: &dyn TargetDistribution,
    trials: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let d = target.dim();
    let kinetic = KineticSpec::standard(d);
    let mut rng = chain_rng(seed, 3);
    let eps = 1e-4;

    let mut max_rel = 0.0f64;
    for _ in 0..trials {
        let mut z = random_state(&mut rng, d, 1.5);
        // keep the kinetic term bounded away from zero so the relative
        // error is well defined
        while kinetic.quad_inv(&z.p) < 0.5 {
            z.p = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        }
        let gamma: f64 = rng.random_range(0.1..=1.0);
        let rate = gamma * kinetic.quad_inv(&z.p);
        let h0 = hamiltonian(&z, target, &kinetic)?;
        for (gamma_signed, expected) in [(-gamma, rate), (gamma, -rate)] {
            let z1 = crate::dynamics::conformal_leapfrog_step(&z, target, &kinetic, eps, gamma_signed)?;
            let dh = hamiltonian(&z1, target, &kinetic)? - h0;
            let rel = (dh / eps - expected).abs() / expected.abs();
            max_rel = max_rel.max(rel);
        }
    }

    let tol = 0.05;
    Ok(VerificationReport {
        name: "energy_rate".into(),
        pass: max_rel <= tol,
        measured: json!({
            "max_relative_rate_error": max_rel,
            "trials": trials,
            "epsilon": eps,
            "target": target.name(),
        }),
        thresholds: json!({ "relative_rate_error": tol }),
        seed,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

pub(crate) fn drift_samples(
    target: &GaussianMixtureTarget,
    n: usize,
    seed: u64,
    repel_only: bool,
) -> Result<Vec<f64>> {
    let d = target.dim();
    let kinetic = KineticSpec::standard(d);
    let mut rng = chain_rng(seed, 4);
    let mut drifts = Vec::with_capacity(n);
    while drifts.len() < n {
        let q0 = target.exact_sample(&mut rng, 1)?.row(0).transpose();
        let p0 = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let z = PhaseState::new(q0, p0);
        let gamma: f64 = rng.random_range(0.0..1.0);
        let steps = rng.random_range(1..=200usize);
        let params = IntegratorParams::new(1e-3, steps.max(2), gamma)?;
        let flow = if repel_only {
            flow_repel(&z, target, &kinetic, &params)
        } else {
            rahmc_flow(&z, target, &kinetic, &params)
        };
        match flow {
            Ok(z_end) => {
                let dh = hamiltonian(&z_end, target, &kinetic)?
                    - hamiltonian(&z, target, &kinetic)?;
                drifts.push(dh);
            }
            Err(Error::BlowUp { .. }) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(drifts)
}

/// Experiment check: over random trajectories (`eps = 1e-3`, length
/// uniform on `{1..200}`, friction uniform on `(0,1)`) the net energy
/// drift is statistically indistinguishable from zero (two-sided t-test,
/// `p > 0.01`).
pub fn check_energy_drift(
    target: &GaussianMixtureTarget,
    n: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let drifts = drift_samples(target, n, seed, false)?;
    let stats = energy_drift_stats(&drifts)?;
    let level = 0.01;
    Ok(VerificationReport {
        name: "energy_drift".into(),
        pass: stats.p_value > level,
        measured: json!({
            "mean_drift": stats.mean,
            "sd": stats.sd,
            "t_statistic": stats.t_statistic,
            "p_value": stats.p_value,
            "trajectories": n,
            "target": target.name(),
        }),
        thresholds: json!({ "p_value_greater_than": level }),
        seed,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Proposition check: starting uniformly in the high-density ball around
/// one mode of a symmetric isotropic pair, the frequency of HMC proposals
/// landing nearer the opposite mode stays below the analytic bound
/// `exp(-(d/2)(v - 1 - ln v))` with `v = (b^2 - alpha^2) / (2 sigma^2)`.
pub fn check_mode_transition_bound(
    b: f64,
    d: usize,
    alpha: f64,
    sigma: f64,
    trials: usize,
    seed: u64,
) -> Result<VerificationReport> {
    let start = Instant::now();
    if b < (alpha * alpha + 2.0 * sigma * sigma).sqrt() {
        return Err(Error::Config(format!(
            "bound requires b >= sqrt(alpha^2 + 2 sigma^2); got b = {b}"
        )));
    }
    let target = GaussianMixtureTarget::isotropic_pair(b, d, sigma * sigma)?;
    let kinetic = KineticSpec::standard(d);
    let mut rng = chain_rng(seed, 5);
    let mode = DVector::from_element(d, b);

    let v = (b * b - alpha * alpha) / (2.0 * sigma * sigma);
    let bound = (-(d as f64 / 2.0) * (v - 1.0 - v.ln())).exp();

    let eps = 1e-3;
    let total_time = 5.0;
    let steps = (total_time / eps) as usize;

    let mut crossings = 0usize;
    for _ in 0..trials {
        // uniform draw from the ball of radius alpha*sqrt(d) around the mode
        let dir = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let radius = alpha * (d as f64).sqrt() * rng.random::<f64>().powf(1.0 / d as f64);
        let q0 = &mode + dir.normalize() * radius;
        let p0 = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let mut z = PhaseState::new(q0, p0);
        for _ in 0..steps {
            z = leapfrog_step(&z, &target, &kinetic, eps)?;
        }
        if (&z.q + &mode).norm() <= (&z.q - &mode).norm() {
            crossings += 1;
        }
    }
    let freq = crossings as f64 / trials as f64;
    let stderr = (bound * (1.0 - bound) / trials as f64).sqrt();
    let limit = bound + 3.0 * stderr;
    Ok(VerificationReport {
        name: "mode_transition".into(),
        pass: freq <= limit,
        measured: json!({
            "crossing_frequency": freq,
            "bound": bound,
            "binomial_stderr": stderr,
            "v": v,
            "trials": trials,
            "b": b, "d": d, "alpha": alpha, "sigma": sigma,
            "epsilon": eps,
            "total_time": total_time,
            "note": "bound stated for the exact flow; approximated with eps = 1e-3 leapfrog",
        }),
        thresholds: json!({ "frequency_at_most": limit }),
        seed,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// End-to-end kernel validity: chains on 1-d and 2-d standard Gaussians
/// pass a per-coordinate KS test against `N(0, 1)` at level 0.01 on a
/// majority of 3 seeds, for both samplers.
pub fn check_statistical_correctness(seed: u64) -> Result<VerificationReport> {
    let start = Instant::now();
    let level = 0.01;
    let mut all_pass = true;
    let mut detail = Vec::new();
    for kind in [SamplerKind::Hmc, SamplerKind::Rahmc] {
        for d in [1usize, 2] {
            let target = StdGaussianTarget::new(d);
            let mut seed_passes = 0;
            let mut p_values = Vec::new();
            for s in 0..3u64 {
                let config = SamplerConfig::new(
                    kind,
                    IntegratorParams::new(0.3, 16, 0.2)?,
                    KineticSpec::standard(d),
                );
                let chain = run_chain(
                    None,
                    20_000,
                    500,
                    seed.wrapping_add(s),
                    &target,
                    &config,
                    None,
                )?;
                let mut coord_pass = true;
                for j in 0..d {
                    let xs = chain.coordinate(j);
                    let (_, p) = ks_test_std_normal(&xs)?;
                    p_values.push(p);
                    if p <= level {
                        coord_pass = false;
                    }
                }
                if coord_pass {
                    seed_passes += 1;
                }
            }
            if seed_passes < 2 {
                all_pass = false;
            }
            detail.push(json!({
                "kind": kind.to_string(),
                "d": d,
                "seeds_passed": seed_passes,
                "p_values": p_values,
            }));
        }
    }
    Ok(VerificationReport {
        name: "statistical".into(),
        pass: all_pass,
        measured: json!({ "cases": detail, "iterations": 20_000 }),
        thresholds: json!({ "ks_level": level, "seeds_majority": 2 }),
        seed,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Runs one named check with its default configuration.
pub fn run_check(name: &str, seed: u64) -> Result<VerificationReport> {
    match name {
        "involution" => {
            let target = GaussianMixtureTarget::anisotropic(2)?;
            check_involution(&target, 100, seed)
        }
        "volume" => {
            let target = GaussianMixtureTarget::anisotropic(2)?;
            check_volume(&target, 50, seed)
        }
        "order" => {
            let harmonic = StdGaussianTarget::new(2);
            let aniso = GaussianMixtureTarget::anisotropic(2)?;
            let mut rng = chain_rng(seed, 6);
            let z = random_state(&mut rng, 2, 1.0);
            let a = check_order(&harmonic, &z, 1.0, 0.5)?;
            let b = check_order(&aniso, &z, 1.0, 0.5)?;
            let c = check_order(&harmonic, &z, 1.0, 0.0)?;
            let pass = a.pass && b.pass && c.pass;
            Ok(VerificationReport {
                name: "order".into(),
                pass,
                measured: json!({
                    "harmonic": a.measured,
                    "anisotropic": b.measured,
                    "harmonic_gamma_zero": c.measured,
                }),
                thresholds: a.thresholds,
                seed,
                runtime_seconds: a.runtime_seconds + b.runtime_seconds + c.runtime_seconds,
            })
        }
        "energy_rate" => {
            let target = GaussianMixtureTarget::bivariate_example()?;
            check_energy_rate(&target, 50, seed)
        }
        "energy_drift" => {
            let target = GaussianMixtureTarget::bivariate_example()?;
            check_energy_drift(&target, 100, seed)
        }
        "mode_transition" => check_mode_transition_bound(3.0, 2, 1.0, 1.0, 2000, seed),
        "statistical" => check_statistical_correctness(seed),
        other => Err(Error::Config(format!(
            "unknown check {other:?}; valid names: {}",
            CHECK_NAMES.join(", ")
        ))),
    }
}

/// Runs the selected checks (all of them when `names` is empty) in
/// parallel; each check owns its derived random stream.
pub fn run_suite(names: &[String], seed: u64) -> Result<Vec<VerificationReport>> {
    use rayon::prelude::*;
    let selected: Vec<String> = if names.is_empty() {
        CHECK_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        names.to_vec()
    };
    for name in &selected {
        if !CHECK_NAMES.contains(&name.as_str()) {
            return Err(Error::Config(format!(
                "unknown check {name:?}; valid names: {}",
                CHECK_NAMES.join(", ")
            )));
        }
    }
    selected
        .par_iter()
        .map(|name| run_check(name, seed))
        .collect()
}
