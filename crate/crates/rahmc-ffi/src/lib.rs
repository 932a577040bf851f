//! C ABI for the rahmc toolkit.
//!
//! Targets and chains are opaque handles created and destroyed through
//! paired constructor/free functions. Every fallible call returns a
//! [`RahmcStatus`]; on failure a thread-local message is retrievable via
//! [`rahmc_last_error`]. Panics are caught at the boundary and reported as
//! `RAHMC_STATUS_PANIC` instead of unwinding into the caller.

use libc::{c_char, size_t};
use nalgebra::DVector;
use rahmc::dynamics::{IntegratorParams, KineticSpec};
use rahmc::model::{
    load_benchmark_means, FunnelTarget, GaussianMixtureTarget, L1ShellTarget, StdGaussianTarget,
    TargetDistribution,
};
use rahmc::samplers::{chain_rng, run_chain, Chain, SamplerConfig, SamplerKind};
use rahmc::tuning::{tune_hmc, tune_rahmc};
use std::cell::RefCell;
use std::ffi::{CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

/// Status code returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RahmcStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    RuntimeError = 3,
    Panic = 4,
}

/// Sampler kind selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RahmcSampler {
    Hmc = 0,
    Rahmc = 1,
}

impl From<RahmcSampler> for SamplerKind {
    fn from(value: RahmcSampler) -> Self {
        match value {
            RahmcSampler::Hmc => SamplerKind::Hmc,
            RahmcSampler::Rahmc => SamplerKind::Rahmc,
        }
    }
}

/// Opaque target-distribution handle.
pub struct RahmcTarget {
    inner: Box<dyn TargetDistribution>,
}

/// Opaque chain handle holding post-warm-up samples and diagnostics.
pub struct RahmcChain {
    inner: Chain,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let cstring = CString::new(message).unwrap_or_else(|_| CString::new("invalid error").unwrap());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(cstring));
}

fn status_for(err: &rahmc::Error) -> RahmcStatus {
    match err {
        rahmc::Error::Config(_)
        | rahmc::Error::InvalidTarget(_)
        | rahmc::Error::Parse { .. }
        | rahmc::Error::DimensionMismatch { .. } => RahmcStatus::InvalidArgument,
        _ => RahmcStatus::RuntimeError,
    }
}

/// Message for the most recent failure on this thread, or NULL when the
/// last call succeeded. The pointer stays valid until the next failing call
/// on the same thread.
#[no_mangle]
pub extern "C" fn rahmc_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| {
        slot.borrow()
            .as_ref()
            .map_or(ptr::null(), |message| message.as_ptr())
    })
}

fn guarded<F: FnOnce() -> RahmcStatus>(f: F) -> RahmcStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic in rahmc".to_string());
            set_error(message);
            RahmcStatus::Panic
        }
    }
}

fn emit_target(
    out: *mut *mut RahmcTarget,
    build: impl FnOnce() -> rahmc::Result<Box<dyn TargetDistribution>>,
) -> RahmcStatus {
    if out.is_null() {
        set_error("output pointer is null".into());
        return RahmcStatus::NullPointer;
    }
    match build() {
        Ok(inner) => {
            let handle = Box::new(RahmcTarget { inner });
            unsafe { *out = Box::into_raw(handle) };
            RahmcStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            status_for(&e)
        }
    }
}

/// Standard Gaussian `N(0, I_dim)`.
#[no_mangle]
pub extern "C" fn rahmc_target_std_gaussian(dim: size_t, out: *mut *mut RahmcTarget) -> RahmcStatus {
    guarded(|| {
        if dim == 0 {
            set_error("dimension must be positive".into());
            return RahmcStatus::InvalidArgument;
        }
        emit_target(out, || Ok(Box::new(StdGaussianTarget::new(dim))))
    })
}

/// Bimodal isotropic mixture with means `±(5/sqrt(dim)) 1` and variance `1/dim`.
#[no_mangle]
pub extern "C" fn rahmc_target_bimodal_scaled(
    dim: size_t,
    out: *mut *mut RahmcTarget,
) -> RahmcStatus {
    guarded(|| {
        emit_target(out, || {
            Ok(Box::new(GaussianMixtureTarget::bimodal_scaled(dim)?) as _)
        })
    })
}

/// Anisotropic two-component mixture with perpendicular principal axes.
#[no_mangle]
pub extern "C" fn rahmc_target_anisotropic(dim: size_t, out: *mut *mut RahmcTarget) -> RahmcStatus {
    guarded(|| {
        emit_target(out, || {
            Ok(Box::new(GaussianMixtureTarget::anisotropic(dim)?) as _)
        })
    })
}

/// Bimodal funnel in two dimensions.
#[no_mangle]
pub extern "C" fn rahmc_target_funnel(
    mu: f64,
    sigma: f64,
    c: f64,
    out: *mut *mut RahmcTarget,
) -> RahmcStatus {
    guarded(|| {
        if !(sigma > 0.0) {
            set_error("sigma must be positive".into());
            return RahmcStatus::InvalidArgument;
        }
        emit_target(out, || Ok(Box::new(FunnelTarget::new(mu, sigma, c))))
    })
}

/// Three concentric l1 shells of radii 4, 8, 16.
#[no_mangle]
pub extern "C" fn rahmc_target_concentric_l1(
    dim: size_t,
    out: *mut *mut RahmcTarget,
) -> RahmcStatus {
    guarded(|| emit_target(out, || Ok(Box::new(L1ShellTarget::concentric(dim)?) as _)))
}

/// Nested l1 shells (one radius-20 shell plus four radius-2 satellites).
#[no_mangle]
pub extern "C" fn rahmc_target_nested_l1(dim: size_t, out: *mut *mut RahmcTarget) -> RahmcStatus {
    guarded(|| emit_target(out, || Ok(Box::new(L1ShellTarget::nested(dim)?) as _)))
}

/// 20-component benchmark mixture loaded from a means file (20 lines, two
/// numbers each).
#[no_mangle]
pub unsafe extern "C" fn rahmc_target_benchmark_file(
    path: *const c_char,
    out: *mut *mut RahmcTarget,
) -> RahmcStatus {
    guarded(|| {
        if path.is_null() {
            set_error("path is null".into());
            return RahmcStatus::NullPointer;
        }
        let path = match unsafe { CStr::from_ptr(path) }.to_str() {
            Ok(s) => s.to_string(),
            Err(_) => {
                set_error("path is not valid UTF-8".into());
                return RahmcStatus::InvalidArgument;
            }
        };
        emit_target(out, || Ok(Box::new(load_benchmark_means(path)?) as _))
    })
}

/// Frees a target handle; NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn rahmc_target_free(target: *mut RahmcTarget) {
    if !target.is_null() {
        drop(unsafe { Box::from_raw(target) });
    }
}

/// Dimension of the target's state space; 0 when the handle is NULL.
#[no_mangle]
pub unsafe extern "C" fn rahmc_target_dim(target: *const RahmcTarget) -> size_t {
    if target.is_null() {
        return 0;
    }
    unsafe { &*target }.inner.dim()
}

unsafe fn point_arg<'a>(
    target: &'a RahmcTarget,
    q: *const f64,
    len: size_t,
) -> Result<DVector<f64>, RahmcStatus> {
    if q.is_null() {
        set_error("point pointer is null".into());
        return Err(RahmcStatus::NullPointer);
    }
    if len != target.inner.dim() {
        set_error(format!(
            "point has length {len}, target dimension is {}",
            target.inner.dim()
        ));
        return Err(RahmcStatus::InvalidArgument);
    }
    let slice = unsafe { std::slice::from_raw_parts(q, len) };
    Ok(DVector::from_row_slice(slice))
}

/// Unnormalized log-density at `q` (length `len == dim`).
#[no_mangle]
pub unsafe extern "C" fn rahmc_log_density(
    target: *const RahmcTarget,
    q: *const f64,
    len: size_t,
    out: *mut f64,
) -> RahmcStatus {
    guarded(|| {
        if target.is_null() || out.is_null() {
            set_error("null pointer argument".into());
            return RahmcStatus::NullPointer;
        }
        let target = unsafe { &*target };
        match unsafe { point_arg(target, q, len) } {
            Ok(point) => {
                unsafe { *out = target.inner.log_density(&point) };
                RahmcStatus::Ok
            }
            Err(status) => status,
        }
    })
}

/// Gradient of the log-density at `q`; `out` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn rahmc_grad_log_density(
    target: *const RahmcTarget,
    q: *const f64,
    len: size_t,
    out: *mut f64,
) -> RahmcStatus {
    guarded(|| {
        if target.is_null() || out.is_null() {
            set_error("null pointer argument".into());
            return RahmcStatus::NullPointer;
        }
        let target = unsafe { &*target };
        match unsafe { point_arg(target, q, len) } {
            Ok(point) => {
                let grad = target.inner.grad_log_density(&point);
                unsafe { ptr::copy_nonoverlapping(grad.as_slice().as_ptr(), out, len) };
                RahmcStatus::Ok
            }
            Err(status) => status,
        }
    })
}

fn emit_chain(out: *mut *mut RahmcChain, chain: rahmc::Result<Chain>) -> RahmcStatus {
    match chain {
        Ok(inner) => {
            unsafe { *out = Box::into_raw(Box::new(RahmcChain { inner })) };
            RahmcStatus::Ok
        }
        Err(e) => {
            set_error(e.to_string());
            status_for(&e)
        }
    }
}

/// Runs one chain with fixed integrator parameters: `warmup` discarded
/// iterations followed by `n` recorded ones, identity mass matrix.
#[no_mangle]
pub unsafe extern "C" fn rahmc_run_chain(
    target: *const RahmcTarget,
    kind: RahmcSampler,
    epsilon: f64,
    steps: size_t,
    gamma: f64,
    n: size_t,
    warmup: size_t,
    seed: u64,
    out: *mut *mut RahmcChain,
) -> RahmcStatus {
    guarded(|| {
        if target.is_null() || out.is_null() {
            set_error("null pointer argument".into());
            return RahmcStatus::NullPointer;
        }
        let target = unsafe { &*target };
        let dim = target.inner.dim();
        let config = match IntegratorParams::new(epsilon, steps, gamma) {
            Ok(params) => SamplerConfig::new(kind.into(), params, KineticSpec::standard(dim)),
            Err(e) => {
                set_error(e.to_string());
                return RahmcStatus::InvalidArgument;
            }
        };
        emit_chain(
            out,
            run_chain(None, n, warmup, seed, target.inner.as_ref(), &config, None),
        )
    })
}

/// Tunes `(epsilon, gamma, L)` by dual averaging over `warmup` iterations.
/// For HMC the returned `gamma` is 0.
#[no_mangle]
pub unsafe extern "C" fn rahmc_tune(
    target: *const RahmcTarget,
    kind: RahmcSampler,
    delta: f64,
    sim_length: f64,
    warmup: size_t,
    seed: u64,
    epsilon_out: *mut f64,
    gamma_out: *mut f64,
    steps_out: *mut size_t,
) -> RahmcStatus {
    guarded(|| {
        if target.is_null() || epsilon_out.is_null() || gamma_out.is_null() || steps_out.is_null()
        {
            set_error("null pointer argument".into());
            return RahmcStatus::NullPointer;
        }
        let target = unsafe { &*target };
        let kinetic = KineticSpec::standard(target.inner.dim());
        let mut rng = chain_rng(seed, 0);
        let tuned = match SamplerKind::from(kind) {
            SamplerKind::Rahmc => tune_rahmc(
                target.inner.as_ref(),
                &kinetic,
                None,
                warmup,
                delta,
                sim_length,
                &mut rng,
            ),
            SamplerKind::Hmc => tune_hmc(
                target.inner.as_ref(),
                &kinetic,
                None,
                warmup,
                delta,
                sim_length,
                &mut rng,
            ),
        };
        match tuned {
            Ok(tuned) => {
                unsafe {
                    *epsilon_out = tuned.epsilon;
                    *gamma_out = tuned.gamma;
                    *steps_out = tuned.steps;
                }
                RahmcStatus::Ok
            }
            Err(e) => {
                set_error(e.to_string());
                status_for(&e)
            }
        }
    })
}

/// Frees a chain handle; NULL is a no-op.
#[no_mangle]
pub unsafe extern "C" fn rahmc_chain_free(chain: *mut RahmcChain) {
    if !chain.is_null() {
        drop(unsafe { Box::from_raw(chain) });
    }
}

/// Number of recorded samples.
#[no_mangle]
pub unsafe extern "C" fn rahmc_chain_len(chain: *const RahmcChain) -> size_t {
    if chain.is_null() {
        return 0;
    }
    unsafe { &*chain }.inner.len()
}

/// State-space dimension of the samples.
#[no_mangle]
pub unsafe extern "C" fn rahmc_chain_dim(chain: *const RahmcChain) -> size_t {
    if chain.is_null() {
        return 0;
    }
    unsafe { &*chain }.inner.dim()
}

/// Fraction of accepted proposals.
#[no_mangle]
pub unsafe extern "C" fn rahmc_chain_acceptance_rate(chain: *const RahmcChain) -> f64 {
    if chain.is_null() {
        return f64::NAN;
    }
    unsafe { &*chain }.inner.acceptance_rate
}

/// Integrator parameters the recorded phase actually used (tuned values
/// when a tuner ran during warm-up).
#[no_mangle]
pub unsafe extern "C" fn rahmc_chain_params(
    chain: *const RahmcChain,
    epsilon_out: *mut f64,
    gamma_out: *mut f64,
    steps_out: *mut size_t,
) -> RahmcStatus {
    guarded(|| {
        if chain.is_null() || epsilon_out.is_null() || gamma_out.is_null() || steps_out.is_null() {
            set_error("null pointer argument".into());
            return RahmcStatus::NullPointer;
        }
        let params = unsafe { &*chain }.inner.params;
        unsafe {
            *epsilon_out = params.epsilon;
            *gamma_out = params.gamma;
            *steps_out = params.steps;
        }
        RahmcStatus::Ok
    })
}

/// Copies the samples into `out` in row-major order (`len >= n * dim`).
#[no_mangle]
pub unsafe extern "C" fn rahmc_chain_samples(
    chain: *const RahmcChain,
    out: *mut f64,
    len: size_t,
) -> RahmcStatus {
    guarded(|| {
        if chain.is_null() || out.is_null() {
            set_error("null pointer argument".into());
            return RahmcStatus::NullPointer;
        }
        let chain = unsafe { &*chain };
        let (n, d) = (chain.inner.len(), chain.inner.dim());
        if len < n * d {
            set_error(format!("buffer holds {len} doubles, need {}", n * d));
            return RahmcStatus::InvalidArgument;
        }
        for i in 0..n {
            for j in 0..d {
                unsafe { *out.add(i * d + j) = chain.inner.samples[(i, j)] };
            }
        }
        RahmcStatus::Ok
    })
}

/// Runs the tuned sampler: dual averaging during `warmup`, frozen
/// parameters for the `n` recorded iterations.
#[no_mangle]
pub unsafe extern "C" fn rahmc_run_tuned_chain(
    target: *const RahmcTarget,
    kind: RahmcSampler,
    delta: f64,
    sim_length: f64,
    n: size_t,
    warmup: size_t,
    seed: u64,
    out: *mut *mut RahmcChain,
) -> RahmcStatus {
    guarded(|| {
        if target.is_null() || out.is_null() {
            set_error("null pointer argument".into());
            return RahmcStatus::NullPointer;
        }
        let target = unsafe { &*target };
        let dim = target.inner.dim();
        let config = SamplerConfig::new(
            kind.into(),
            match IntegratorParams::new(1.0, 2, 1.0) {
                Ok(p) => p,
                Err(_) => unreachable!(),
            },
            KineticSpec::standard(dim),
        );
        let settings = rahmc::tuning::TunerSettings::new(delta, sim_length);
        if !(delta > 0.0 && delta < 1.0) || !(sim_length > 0.0) {
            set_error("delta must lie in (0,1) and sim_length must be positive".into());
            return RahmcStatus::InvalidArgument;
        }
        emit_chain(
            out,
            run_chain(
                None,
                n,
                warmup,
                seed,
                target.inner.as_ref(),
                &config,
                Some(&settings),
            ),
        )
    })
}
