//! C ABI over the core library: opaque handles for point clouds and noise
//! schedules, flat-buffer in/out parameters, and integer status codes.
//!
//! Conventions: every function returns a `DistdiffStatus`; outputs are
//! written through caller-supplied pointers only on `Ok`. Point buffers are
//! row-major `count * dim` doubles. Handles must be released with the
//! matching `_free`, which accepts null.

use std::panic::{catch_unwind, AssertUnwindSafe};

use distdiff::denoisers::{ideal_denoise, Denoiser};
use distdiff::geometry::{smoothed_sq_distance, PointCloud, TargetSet};
use distdiff::rng;
use distdiff::samplers::{self, InitRule, SamplerKind, SamplerSpec};
use distdiff::schedules::{beta_star, limit_ratios, NoiseSchedule};
use distdiff::Error;

/// Status codes shared by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistdiffStatus {
    Ok = 0,
    NullPointer = 1,
    DimensionMismatch = 2,
    NonUniqueProjection = 3,
    UndefinedRatio = 4,
    InvalidParam = 5,
    InternalPanic = 6,
}

fn status_of(e: &Error) -> DistdiffStatus {
    match e {
        Error::DimensionMismatch { .. } => DistdiffStatus::DimensionMismatch,
        Error::NonUniqueProjection(_) => DistdiffStatus::NonUniqueProjection,
        Error::UndefinedRatio => DistdiffStatus::UndefinedRatio,
        _ => DistdiffStatus::InvalidParam,
    }
}

/// Opaque point-cloud handle.
pub struct DistdiffCloud {
    cloud: PointCloud,
}

/// Opaque schedule handle.
pub struct DistdiffSchedule {
    schedule: NoiseSchedule,
}

unsafe fn slice_arg<'a>(ptr: *const f64, len: usize) -> Option<&'a [f64]> {
    if ptr.is_null() {
        None
    } else {
        Some(std::slice::from_raw_parts(ptr, len))
    }
}

macro_rules! nonnull {
    ($ptr:expr) => {
        if $ptr.is_null() {
            return DistdiffStatus::NullPointer;
        }
    };
}

/// Build a cloud from `count` points of dimension `dim`, row-major.
///
/// # Safety
/// `data` must point to `count * dim` readable doubles and `out` to a
/// writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn distdiff_cloud_new(
    data: *const f64,
    count: usize,
    dim: usize,
    out: *mut *mut DistdiffCloud,
) -> DistdiffStatus {
    nonnull!(data);
    nonnull!(out);
    if count == 0 || dim == 0 {
        return DistdiffStatus::InvalidParam;
    }
    let flat = std::slice::from_raw_parts(data, count * dim);
    let points: Vec<Vec<f64>> = flat.chunks(dim).map(|c| c.to_vec()).collect();
    match PointCloud::new(points) {
        Ok(cloud) => {
            *out = Box::into_raw(Box::new(DistdiffCloud { cloud }));
            DistdiffStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// # Safety
/// `handle` must come from `distdiff_cloud_new` (or be null).
#[no_mangle]
pub unsafe extern "C" fn distdiff_cloud_free(handle: *mut DistdiffCloud) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be a live cloud handle; out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn distdiff_cloud_info(
    handle: *const DistdiffCloud,
    out_count: *mut usize,
    out_dim: *mut usize,
    out_diameter: *mut f64,
) -> DistdiffStatus {
    nonnull!(handle);
    let c = &(*handle).cloud;
    if !out_count.is_null() {
        *out_count = c.len();
    }
    if !out_dim.is_null() {
        *out_dim = c.dim();
    }
    if !out_diameter.is_null() {
        *out_diameter = c.diameter();
    }
    DistdiffStatus::Ok
}

/// # Safety
/// `x` must hold `dim` doubles matching the cloud dimension.
#[no_mangle]
pub unsafe extern "C" fn distdiff_cloud_distance(
    handle: *const DistdiffCloud,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> DistdiffStatus {
    nonnull!(handle);
    nonnull!(out);
    let Some(x) = slice_arg(x, dim) else { return DistdiffStatus::NullPointer };
    match (*handle).cloud.distance(x) {
        Ok(d) => {
            *out = d;
            DistdiffStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Nearest point, its distance, the point index, and the tie flag
/// (1 when a second point attains the distance within tolerance).
///
/// # Safety
/// `x` and `out_nearest` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn distdiff_cloud_project(
    handle: *const DistdiffCloud,
    x: *const f64,
    dim: usize,
    out_nearest: *mut f64,
    out_distance: *mut f64,
    out_index: *mut usize,
    out_tie: *mut i32,
) -> DistdiffStatus {
    nonnull!(handle);
    let Some(x) = slice_arg(x, dim) else { return DistdiffStatus::NullPointer };
    match (*handle).cloud.project(x) {
        Ok(p) => {
            if !out_nearest.is_null() {
                std::ptr::copy_nonoverlapping(p.nearest.as_ptr(), out_nearest, p.nearest.len());
            }
            if !out_distance.is_null() {
                *out_distance = p.distance;
            }
            if !out_index.is_null() {
                *out_index = p.index.unwrap_or(usize::MAX);
            }
            if !out_tie.is_null() {
                *out_tie = p.tie as i32;
            }
            DistdiffStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Soft-minimum of squared distances at temperature `sigma^2`.
///
/// # Safety
/// `x` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn distdiff_smoothed_sq_distance(
    handle: *const DistdiffCloud,
    x: *const f64,
    dim: usize,
    sigma: f64,
    out: *mut f64,
) -> DistdiffStatus {
    nonnull!(handle);
    nonnull!(out);
    let Some(x) = slice_arg(x, dim) else { return DistdiffStatus::NullPointer };
    match smoothed_sq_distance(x, &(*handle).cloud, sigma) {
        Ok(v) => {
            *out = v;
            DistdiffStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Closed-form denoiser over the cloud; writes the noise estimate and the
/// implied clean point.
///
/// # Safety
/// `x`, `out_epsilon`, `out_x0_hat` must hold `dim` doubles each.
#[no_mangle]
pub unsafe extern "C" fn distdiff_ideal_denoise(
    handle: *const DistdiffCloud,
    x: *const f64,
    dim: usize,
    sigma: f64,
    out_epsilon: *mut f64,
    out_x0_hat: *mut f64,
) -> DistdiffStatus {
    nonnull!(handle);
    let Some(x) = slice_arg(x, dim) else { return DistdiffStatus::NullPointer };
    match ideal_denoise(x, sigma, &(*handle).cloud) {
        Ok(out) => {
            if !out_epsilon.is_null() {
                std::ptr::copy_nonoverlapping(out.epsilon.as_ptr(), out_epsilon, dim);
            }
            if !out_x0_hat.is_null() {
                std::ptr::copy_nonoverlapping(out.x0_hat.as_ptr(), out_x0_hat, dim);
            }
            DistdiffStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Largest admissible constant step size for error level `eta` and ratio
/// slack `nu` over `n_steps` steps.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn distdiff_beta_star(
    eta: f64,
    nu: f64,
    n_steps: usize,
    out: *mut f64,
) -> DistdiffStatus {
    nonnull!(out);
    match beta_star(eta, nu, n_steps) {
        Ok(b) => {
            *out = b;
            DistdiffStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Large-step-count limits: the total sigma ratio and the total distance
/// ratio of the constant-step schedule.
///
/// # Safety
/// Out-pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn distdiff_limit_ratios(
    eta: f64,
    nu: f64,
    out_sigma_ratio: *mut f64,
    out_dist_ratio: *mut f64,
) -> DistdiffStatus {
    nonnull!(out_sigma_ratio);
    nonnull!(out_dist_ratio);
    match limit_ratios(eta, nu) {
        Ok((s, d)) => {
            *out_sigma_ratio = s;
            *out_dist_ratio = d;
            DistdiffStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Geometric schedule from `sigma_top` down to `sigma_bottom` in `steps`.
///
/// # Safety
/// `out` must point to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn distdiff_schedule_loglinear(
    sigma_top: f64,
    sigma_bottom: f64,
    steps: usize,
    out: *mut *mut DistdiffSchedule,
) -> DistdiffStatus {
    nonnull!(out);
    match NoiseSchedule::loglinear(sigma_top, sigma_bottom, steps) {
        Ok(schedule) => {
            *out = Box::into_raw(Box::new(DistdiffSchedule { schedule }));
            DistdiffStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// Constant-step schedule with per-step shrink `beta`.
///
/// # Safety
/// `out` must point to a writable handle slot.
#[no_mangle]
pub unsafe extern "C" fn distdiff_schedule_constant_beta(
    sigma_top: f64,
    beta: f64,
    steps: usize,
    out: *mut *mut DistdiffSchedule,
) -> DistdiffStatus {
    nonnull!(out);
    match NoiseSchedule::constant_beta(sigma_top, beta, steps) {
        Ok(schedule) => {
            *out = Box::into_raw(Box::new(DistdiffSchedule { schedule }));
            DistdiffStatus::Ok
        }
        Err(e) => status_of(&e),
    }
}

/// # Safety
/// `handle` must come from a schedule constructor (or be null).
#[no_mangle]
pub unsafe extern "C" fn distdiff_schedule_free(handle: *mut DistdiffSchedule) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be a live schedule handle.
#[no_mangle]
pub unsafe extern "C" fn distdiff_schedule_num_steps(
    handle: *const DistdiffSchedule,
    out: *mut usize,
) -> DistdiffStatus {
    nonnull!(handle);
    nonnull!(out);
    *out = (*handle).schedule.num_steps();
    DistdiffStatus::Ok
}

/// `sigma_t` for `t` in `0..=num_steps`.
///
/// # Safety
/// `handle` must be a live schedule handle.
#[no_mangle]
pub unsafe extern "C" fn distdiff_schedule_sigma(
    handle: *const DistdiffSchedule,
    t: usize,
    out: *mut f64,
) -> DistdiffStatus {
    nonnull!(handle);
    nonnull!(out);
    let s = &(*handle).schedule;
    if t > s.num_steps() {
        return DistdiffStatus::InvalidParam;
    }
    *out = s.sigma(t);
    DistdiffStatus::Ok
}

/// Two-sided admissibility verdict for the `(eta, nu)` error model;
/// writes 1 when admissible.
///
/// # Safety
/// `handle` must be a live schedule handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn distdiff_schedule_is_admissible(
    handle: *const DistdiffSchedule,
    eta: f64,
    nu: f64,
    out: *mut i32,
) -> DistdiffStatus {
    nonnull!(handle);
    nonnull!(out);
    let model = match distdiff::denoisers::ErrorModel::new(eta, nu) {
        Ok(m) => m,
        Err(e) => return status_of(&e),
    };
    *out = (*handle).schedule.is_admissible(&model, None).admissible as i32;
    DistdiffStatus::Ok
}

/// Sampler selector for `distdiff_sample`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DistdiffSampler {
    Ddim = 0,
    Ddpm = 1,
    GradientEstimation = 2,
}

/// Run one trajectory with the closed-form denoiser over the cloud,
/// Gaussian-initialized at the top noise level. Writes the terminal point
/// and its distance to the cloud.
///
/// # Safety
/// `out_final` must hold `dim` doubles; handles must be live.
#[no_mangle]
pub unsafe extern "C" fn distdiff_sample(
    cloud: *const DistdiffCloud,
    schedule: *const DistdiffSchedule,
    sampler: DistdiffSampler,
    gamma: f64,
    terminal_full_step: i32,
    seed: u64,
    out_final: *mut f64,
    out_distance: *mut f64,
) -> DistdiffStatus {
    nonnull!(cloud);
    nonnull!(schedule);
    let result = catch_unwind(AssertUnwindSafe(|| {
        let set = TargetSet::Cloud((*cloud).cloud.clone());
        let sched = &(*schedule).schedule;
        let kind = match sampler {
            DistdiffSampler::Ddim => SamplerKind::Ddim,
            DistdiffSampler::Ddpm => SamplerKind::Ddpm,
            DistdiffSampler::GradientEstimation => SamplerKind::GradientEstimation,
        };
        let spec = SamplerSpec { kind, gamma, terminal_full_step: terminal_full_step != 0 };
        let denoiser = Denoiser::Ideal((*cloud).cloud.clone());
        let mut rng = rng::seeded(seed);
        let n = set.dim();
        let sigma_top = sched.sigma(sched.num_steps());
        let x_top = samplers::init_x_top(sigma_top, n, &InitRule::Gaussian, &set, &mut rng)?;
        let traj = samplers::run(&spec, sched, &denoiser, &set, x_top, &mut rng)?;
        let d = set.distance(&traj.final_x0)?;
        Ok::<(Vec<f64>, f64), Error>((traj.final_x0, d))
    }));
    match result {
        Ok(Ok((x, d))) => {
            if !out_final.is_null() {
                std::ptr::copy_nonoverlapping(x.as_ptr(), out_final, x.len());
            }
            if !out_distance.is_null() {
                *out_distance = d;
            }
            DistdiffStatus::Ok
        }
        Ok(Err(e)) => status_of(&e),
        Err(_) => DistdiffStatus::InternalPanic,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn make_cloud() -> *mut DistdiffCloud {
        let data = [0.0, 0.0, 3.0, 4.0];
        let mut handle: *mut DistdiffCloud = std::ptr::null_mut();
        let st = unsafe { distdiff_cloud_new(data.as_ptr(), 2, 2, &mut handle) };
        assert_eq!(st, DistdiffStatus::Ok);
        handle
    }

    #[test]
    fn cloud_lifecycle_and_distance() {
        let handle = make_cloud();
        let mut count = 0usize;
        let mut dim = 0usize;
        let mut diam = 0.0f64;
        unsafe {
            assert_eq!(
                distdiff_cloud_info(handle, &mut count, &mut dim, &mut diam),
                DistdiffStatus::Ok
            );
        }
        assert_eq!((count, dim), (2, 2));
        assert!((diam - 5.0).abs() < 1e-12);
        let x = [3.0, 0.0];
        let mut d = 0.0;
        unsafe {
            assert_eq!(
                distdiff_cloud_distance(handle, x.as_ptr(), 2, &mut d),
                DistdiffStatus::Ok
            );
            distdiff_cloud_free(handle);
        }
        assert!((d - 3.0).abs() < 1e-12);
    }

    #[test]
    fn project_reports_tie() {
        let data = [-1.0, 0.0, 1.0, 0.0];
        let mut handle: *mut DistdiffCloud = std::ptr::null_mut();
        unsafe {
            distdiff_cloud_new(data.as_ptr(), 2, 2, &mut handle);
            let x = [0.0, 0.0];
            let mut nearest = [0.0; 2];
            let mut dist = 0.0;
            let mut index = 0usize;
            let mut tie = 0i32;
            let st = distdiff_cloud_project(
                handle,
                x.as_ptr(),
                2,
                nearest.as_mut_ptr(),
                &mut dist,
                &mut index,
                &mut tie,
            );
            assert_eq!(st, DistdiffStatus::Ok);
            assert_eq!(tie, 1);
            assert_eq!(index, 0);
            distdiff_cloud_free(handle);
        }
    }

    #[test]
    fn null_and_domain_errors() {
        unsafe {
            let mut out = 0.0;
            assert_eq!(
                distdiff_beta_star(0.1, 2.0, 50, std::ptr::null_mut()),
                DistdiffStatus::NullPointer
            );
            assert_eq!(distdiff_beta_star(0.0, 2.0, 50, &mut out), DistdiffStatus::InvalidParam);
            let handle = make_cloud();
            let x = [1.0, 2.0, 3.0];
            let mut d = 0.0;
            assert_eq!(
                distdiff_cloud_distance(handle, x.as_ptr(), 3, &mut d),
                DistdiffStatus::DimensionMismatch
            );
            distdiff_cloud_free(handle);
        }
    }

    #[test]
    fn beta_star_worked_example() {
        let mut b = 0.0;
        unsafe {
            assert_eq!(distdiff_beta_star(0.1, 2.0, 50, &mut b), DistdiffStatus::Ok);
        }
        assert!((1.0 - b - 0.879).abs() < 5e-4);
        let mut s = 0.0;
        let mut d = 0.0;
        unsafe {
            assert_eq!(distdiff_limit_ratios(0.1, 2.0, &mut s, &mut d), DistdiffStatus::Ok);
        }
        assert!((s - 2f64.powi(-10)).abs() < 1e-15);
        assert!((d - 2f64.powi(-9)).abs() < 1e-15);
    }

    #[test]
    fn schedule_and_sampling_round_trip() {
        unsafe {
            let mut sched: *mut DistdiffSchedule = std::ptr::null_mut();
            assert_eq!(
                distdiff_schedule_loglinear(2.0, 0.01, 20, &mut sched),
                DistdiffStatus::Ok
            );
            let mut n = 0usize;
            distdiff_schedule_num_steps(sched, &mut n);
            assert_eq!(n, 20);
            let mut adm = 0;
            assert_eq!(
                distdiff_schedule_is_admissible(sched, 0.1, 2.0, &mut adm),
                DistdiffStatus::Ok
            );

            let cloud = make_cloud();
            let mut x = [0.0f64; 2];
            let mut dist = f64::NAN;
            let st = distdiff_sample(
                cloud,
                sched,
                DistdiffSampler::Ddim,
                1.0,
                1,
                42,
                x.as_mut_ptr(),
                &mut dist,
            );
            assert_eq!(st, DistdiffStatus::Ok);
            assert!(dist.is_finite());
            assert!(dist < 0.1, "terminal distance {dist}");

            // Same seed reproduces; gamma = 1 extrapolation matches DDIM.
            let mut x2 = [0.0f64; 2];
            let mut dist2 = f64::NAN;
            distdiff_sample(
                cloud,
                sched,
                DistdiffSampler::GradientEstimation,
                1.0,
                1,
                42,
                x2.as_mut_ptr(),
                &mut dist2,
            );
            assert_eq!(x, x2);
            assert_eq!(dist, dist2);

            distdiff_cloud_free(cloud);
            distdiff_schedule_free(sched);
        }
    }
}
