//! Exercises the C ABI exactly as a foreign caller would: raw pointers,
//! status codes, and explicit frees.

use rahmc_ffi::*;
use std::ffi::CStr;
use std::ptr;

fn last_error() -> String {
    let ptr = rahmc_last_error();
    assert!(!ptr.is_null());
    unsafe { CStr::from_ptr(ptr) }.to_string_lossy().into_owned()
}

#[test]
fn target_lifecycle_and_density() {
    let mut target: *mut RahmcTarget = ptr::null_mut();
    let status = rahmc_target_std_gaussian(2, &mut target);
    assert_eq!(status, RahmcStatus::Ok);
    assert!(!target.is_null());
    assert_eq!(unsafe { rahmc_target_dim(target) }, 2);

    let q = [0.0f64, 0.0];
    let mut value = f64::NAN;
    let status = unsafe { rahmc_log_density(target, q.as_ptr(), 2, &mut value) };
    assert_eq!(status, RahmcStatus::Ok);
    assert_eq!(value, 0.0);

    let q = [1.0f64, -2.0];
    let mut grad = [0.0f64; 2];
    let status = unsafe { rahmc_grad_log_density(target, q.as_ptr(), 2, grad.as_mut_ptr()) };
    assert_eq!(status, RahmcStatus::Ok);
    assert_eq!(grad, [-1.0, 2.0]);

    unsafe { rahmc_target_free(target) };
}

#[test]
fn dimension_mismatch_reports_invalid_argument() {
    let mut target: *mut RahmcTarget = ptr::null_mut();
    assert_eq!(rahmc_target_std_gaussian(3, &mut target), RahmcStatus::Ok);
    let q = [0.0f64; 2];
    let mut value = 0.0;
    let status = unsafe { rahmc_log_density(target, q.as_ptr(), 2, &mut value) };
    assert_eq!(status, RahmcStatus::InvalidArgument);
    assert!(last_error().contains("length 2"));
    unsafe { rahmc_target_free(target) };
}

#[test]
fn null_pointers_are_rejected() {
    assert_eq!(
        rahmc_target_std_gaussian(2, ptr::null_mut()),
        RahmcStatus::NullPointer
    );
    let mut value = 0.0;
    let status = unsafe { rahmc_log_density(ptr::null(), ptr::null(), 0, &mut value) };
    assert_eq!(status, RahmcStatus::NullPointer);
    assert_eq!(unsafe { rahmc_chain_len(ptr::null()) }, 0);
    unsafe { rahmc_target_free(ptr::null_mut()) };
    unsafe { rahmc_chain_free(ptr::null_mut()) };
}

#[test]
fn invalid_dimension_is_reported() {
    let mut target: *mut RahmcTarget = ptr::null_mut();
    assert_eq!(
        rahmc_target_std_gaussian(0, &mut target),
        RahmcStatus::InvalidArgument
    );
    assert!(last_error().contains("dimension"));
}

#[test]
fn chains_run_and_are_deterministic() {
    let mut target: *mut RahmcTarget = ptr::null_mut();
    assert_eq!(rahmc_target_bimodal_scaled(3, &mut target), RahmcStatus::Ok);

    let run = || {
        let mut chain: *mut RahmcChain = ptr::null_mut();
        let status = unsafe {
            rahmc_run_chain(
                target,
                RahmcSampler::Rahmc,
                0.5,
                10,
                0.5,
                50,
                10,
                42,
                &mut chain,
            )
        };
        assert_eq!(status, RahmcStatus::Ok);
        let n = unsafe { rahmc_chain_len(chain) };
        let d = unsafe { rahmc_chain_dim(chain) };
        assert_eq!((n, d), (50, 3));
        let mut buf = vec![0.0f64; n * d];
        assert_eq!(
            unsafe { rahmc_chain_samples(chain, buf.as_mut_ptr(), buf.len()) },
            RahmcStatus::Ok
        );
        let rate = unsafe { rahmc_chain_acceptance_rate(chain) };
        assert!((0.0..=1.0).contains(&rate));
        unsafe { rahmc_chain_free(chain) };
        buf
    };
    let a = run();
    let b = run();
    assert_eq!(a, b);
    unsafe { rahmc_target_free(target) };
}

#[test]
fn short_buffer_is_invalid() {
    let mut target: *mut RahmcTarget = ptr::null_mut();
    assert_eq!(rahmc_target_std_gaussian(2, &mut target), RahmcStatus::Ok);
    let mut chain: *mut RahmcChain = ptr::null_mut();
    let status = unsafe {
        rahmc_run_chain(target, RahmcSampler::Hmc, 0.5, 8, 0.0, 10, 0, 1, &mut chain)
    };
    assert_eq!(status, RahmcStatus::Ok);
    let mut buf = vec![0.0f64; 5];
    assert_eq!(
        unsafe { rahmc_chain_samples(chain, buf.as_mut_ptr(), buf.len()) },
        RahmcStatus::InvalidArgument
    );
    unsafe { rahmc_chain_free(chain) };
    unsafe { rahmc_target_free(target) };
}

#[test]
fn bad_integrator_parameters_are_invalid() {
    let mut target: *mut RahmcTarget = ptr::null_mut();
    assert_eq!(rahmc_target_std_gaussian(2, &mut target), RahmcStatus::Ok);
    let mut chain: *mut RahmcChain = ptr::null_mut();
    let status = unsafe {
        rahmc_run_chain(
            target,
            RahmcSampler::Rahmc,
            -0.5,
            10,
            0.5,
            10,
            0,
            1,
            &mut chain,
        )
    };
    assert_eq!(status, RahmcStatus::InvalidArgument);
    assert!(last_error().contains("epsilon"));
    unsafe { rahmc_target_free(target) };
}

#[test]
fn tuning_through_the_abi() {
    let mut target: *mut RahmcTarget = ptr::null_mut();
    assert_eq!(rahmc_target_std_gaussian(2, &mut target), RahmcStatus::Ok);
    let (mut eps, mut gamma, mut steps) = (0.0f64, 0.0f64, 0usize);
    let status = unsafe {
        rahmc_tune(
            target,
            RahmcSampler::Rahmc,
            0.6,
            5.0,
            200,
            7,
            &mut eps,
            &mut gamma,
            &mut steps,
        )
    };
    assert_eq!(status, RahmcStatus::Ok);
    assert!(eps > 0.0 && gamma > 0.0);
    assert!(steps >= 2 && steps % 2 == 0);

    let mut chain: *mut RahmcChain = ptr::null_mut();
    let status = unsafe {
        rahmc_run_tuned_chain(
            target,
            RahmcSampler::Rahmc,
            0.6,
            5.0,
            100,
            200,
            7,
            &mut chain,
        )
    };
    assert_eq!(status, RahmcStatus::Ok);
    let (mut ce, mut cg, mut cl) = (0.0f64, 0.0f64, 0usize);
    assert_eq!(
        unsafe { rahmc_chain_params(chain, &mut ce, &mut cg, &mut cl) },
        RahmcStatus::Ok
    );
    assert!(ce > 0.0 && cl >= 2);
    unsafe { rahmc_chain_free(chain) };
    unsafe { rahmc_target_free(target) };
}

#[test]
fn benchmark_target_from_file() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/kou_means.txt\0");
    let mut target: *mut RahmcTarget = ptr::null_mut();
    let status = unsafe {
        rahmc_target_benchmark_file(path.as_ptr() as *const libc::c_char, &mut target)
    };
    assert_eq!(status, RahmcStatus::Ok);
    assert_eq!(unsafe { rahmc_target_dim(target) }, 2);
    unsafe { rahmc_target_free(target) };

    let missing = "/nonexistent/means.txt\0";
    let mut target: *mut RahmcTarget = ptr::null_mut();
    let status = unsafe {
        rahmc_target_benchmark_file(missing.as_ptr() as *const libc::c_char, &mut target)
    };
    assert_ne!(status, RahmcStatus::Ok);
}

#[test]
fn generated_header_covers_the_surface() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/rahmc.h");
    let text = std::fs::read_to_string(header).expect("header generated by build script");
    for symbol in [
        "rahmc_target_std_gaussian",
        "rahmc_run_chain",
        "rahmc_run_tuned_chain",
        "rahmc_tune",
        "rahmc_chain_samples",
        "rahmc_last_error",
        "RahmcStatus",
        "RahmcSampler",
    ] {
        assert!(text.contains(symbol), "header missing {symbol}");
    }
}
