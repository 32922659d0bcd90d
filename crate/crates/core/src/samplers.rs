//! DDIM, DDPM, and gradient-estimation sampling loops in sigma coordinates,
//! plus the original-coordinate twins used for equivalence testing.
//!
//! Every sampler consumes exactly N denoiser evaluations: the
//! gradient-estimation loop reuses the previous step's output instead of
//! re-evaluating. Each step is instrumented with the distance to the set,
//! the relative projection error of the noise estimate actually applied, and
//! the ratio `sqrt(n) * sigma_t / dist(x_t)`.

use crate::denoisers::{relative_projection_error, Denoiser};
use crate::error::{Error, Result};
use crate::geometry::TargetSet;
use crate::rng::{self, Prng};
use crate::schedules::NoiseSchedule;
use crate::vecmath as vm;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    Ddim,
    Ddpm,
    GradientEstimation,
}

/// Sampler configuration. `gamma` only matters for the gradient-estimation
/// kind; `gamma = 1` reduces it to DDIM exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerSpec {
    pub kind: SamplerKind,
    pub gamma: f64,
    /// Return `x1 - sigma_1 * eps_bar` instead of `x_0` (the full-step
    /// terminal heuristic). On for generation runs, off for bound checks,
    /// which need the untruncated trajectory.
    pub terminal_full_step: bool,
}

impl SamplerSpec {
    pub fn ddim() -> Self {
        Self { kind: SamplerKind::Ddim, gamma: 1.0, terminal_full_step: false }
    }

    pub fn ddpm() -> Self {
        Self { kind: SamplerKind::Ddpm, gamma: 1.0, terminal_full_step: false }
    }

    pub fn gradient_estimation(gamma: f64) -> Self {
        Self { kind: SamplerKind::GradientEstimation, gamma, terminal_full_step: false }
    }

    pub fn with_terminal_full_step(mut self, on: bool) -> Self {
        self.terminal_full_step = on;
        self
    }
}

/// Instrumentation for one time index.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub sigma: f64,
    pub x: Vec<f64>,
    /// The noise estimate applied at this step; at `t = 0` the cached value
    /// from the final evaluation.
    pub epsilon: Vec<f64>,
    pub distance: f64,
    /// NaN when the query lies on the set or the projection ties.
    pub rel_proj_error: f64,
    /// `sqrt(n) * sigma_t / dist(x_t)`; infinite on the set.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// From `t = N` down to `t = 0`, length N+1.
    pub records: Vec<StepRecord>,
    pub final_x0: Vec<f64>,
    /// Number of denoiser evaluations consumed (always N).
    pub evaluations: usize,
}

impl Trajectory {
    pub fn terminal_distance(&self, set: &TargetSet) -> Result<f64> {
        set.distance(&self.final_x0)
    }
}

fn require_decreasing(sigma_t: f64, sigma_prev: f64) -> Result<()> {
    if !(sigma_prev < sigma_t) {
        return Err(Error::InvalidParam(format!(
            "step requires sigma_{{t-1}} < sigma_t, got {sigma_prev} >= {sigma_t}"
        )));
    }
    Ok(())
}

/// `x_{t-1} = x_t + (sigma_{t-1} - sigma_t) * eps`.
pub fn ddim_step(x_t: &[f64], sigma_t: f64, sigma_prev: f64, eps: &[f64]) -> Result<Vec<f64>> {
    require_decreasing(sigma_t, sigma_prev)?;
    Ok(vm::axpy(x_t, sigma_prev - sigma_t, eps))
}

/// Stochastic step: `x_{t-1} = x_t + (sigma_t' - sigma_t) eps + scale * w`
/// with `sigma_t' = sigma_{t-1}^2 / sigma_t` and
/// `scale = sqrt(sigma_{t-1}^2 - sigma_t'^2)`.
pub fn ddpm_step(
    x_t: &[f64],
    sigma_t: f64,
    sigma_prev: f64,
    eps: &[f64],
    w: &[f64],
) -> Result<Vec<f64>> {
    require_decreasing(sigma_t, sigma_prev)?;
    let sigma_tp = sigma_prev * sigma_prev / sigma_t;
    let scale = (sigma_prev * sigma_prev - sigma_tp * sigma_tp).sqrt();
    Ok(vm::axpy(&vm::axpy(x_t, sigma_tp - sigma_t, eps), scale, w))
}

/// Extrapolated step: `eps_bar = gamma * eps_t + (1 - gamma) * eps_next`,
/// then the DDIM-form update. `eps_next` is the cached output from the
/// previous (higher-sigma) step.
pub fn ge_step(
    x_t: &[f64],
    sigma_t: f64,
    sigma_prev: f64,
    eps_t: &[f64],
    eps_next: &[f64],
    gamma: f64,
) -> Result<Vec<f64>> {
    let eps_bar = extrapolate_eps(eps_t, eps_next, gamma);
    ddim_step(x_t, sigma_t, sigma_prev, &eps_bar)
}

pub fn extrapolate_eps(eps_t: &[f64], eps_next: &[f64], gamma: f64) -> Vec<f64> {
    eps_t
        .iter()
        .zip(eps_next)
        .map(|(a, b)| gamma * a + (1.0 - gamma) * b)
        .collect()
}

/// Original-coordinate DDIM update:
/// `z_{t-1} = sqrt(ab_{t-1}) * z0_hat + sqrt(1 - ab_{t-1}) * eps`.
pub fn ddim_step_z(z_t: &[f64], ab_t: f64, ab_prev: f64, eps: &[f64]) -> Result<Vec<f64>> {
    check_alphabar_pair(ab_t, ab_prev)?;
    let z0_hat = z0_estimate(z_t, ab_t, eps);
    Ok(vm::axpy(&vm::scale(&z0_hat, ab_prev.sqrt()), (1.0 - ab_prev).sqrt(), eps))
}

/// Original-coordinate DDPM update with explicit noise `w`.
pub fn ddpm_step_z(
    z_t: &[f64],
    ab_t: f64,
    ab_prev: f64,
    eps: &[f64],
    w: &[f64],
) -> Result<Vec<f64>> {
    check_alphabar_pair(ab_t, ab_prev)?;
    let alpha_t = ab_t / ab_prev;
    let z0_hat = z0_estimate(z_t, ab_t, eps);
    let c0 = ab_prev.sqrt() * (1.0 - alpha_t) / (1.0 - ab_t);
    let c1 = alpha_t.sqrt() * (1.0 - ab_prev) / (1.0 - ab_t);
    let cw = ((1.0 - ab_prev) / (1.0 - ab_t) * (1.0 - alpha_t)).sqrt();
    let mut z = vm::scale(&z0_hat, c0);
    z = vm::axpy(&z, c1, z_t);
    Ok(vm::axpy(&z, cw, w))
}

fn z0_estimate(z_t: &[f64], ab_t: f64, eps: &[f64]) -> Vec<f64> {
    vm::scale(&vm::axpy(z_t, -(1.0 - ab_t).sqrt(), eps), 1.0 / ab_t.sqrt())
}

fn check_alphabar_pair(ab_t: f64, ab_prev: f64) -> Result<()> {
    for ab in [ab_t, ab_prev] {
        if !(ab > 0.0 && ab < 1.0) {
            return Err(Error::InvalidParam("alphabar must be in (0,1)".into()));
        }
    }
    if !(ab_prev > ab_t) {
        return Err(Error::InvalidParam("alphabar must increase as t decreases".into()));
    }
    Ok(())
}

/// Weighting-matrix reduction for the extrapolation coefficient: for
/// `W = [[aI, bI], [bI, cI]]` positive definite, the error-minimizing
/// combination is `gamma = (a + b) / (a + c + 2b)`.
pub fn gamma_from_weights(a: f64, b: f64, c: f64) -> Result<f64> {
    if !(a > 0.0 && c > 0.0 && a * c - b * b > 0.0) {
        return Err(Error::InvalidParam(format!(
            "W must be positive definite: a={a}, b={b}, c={c}"
        )));
    }
    Ok((a + b) / (a + c + 2.0 * b))
}

/// Initialization rule for `x_N`.
#[derive(Debug, Clone)]
pub enum InitRule {
    /// `sigma_N * N(0, I)`.
    Gaussian,
    /// A point at distance exactly `sqrt(n) * sigma_N` from the set, built
    /// from a base point and an outward unit direction (verified by
    /// projection for clouds). Direction is random when not supplied.
    ExactDistance { direction: Option<Vec<f64>> },
    /// A supplied starting point.
    Explicit(Vec<f64>),
}

pub fn init_x_top(
    sigma_top: f64,
    n: usize,
    rule: &InitRule,
    set: &TargetSet,
    rng: &mut Prng,
) -> Result<Vec<f64>> {
    if !(sigma_top > 0.0) {
        return Err(Error::InvalidParam("sigma_N must be positive".into()));
    }
    match rule {
        InitRule::Gaussian => Ok(vm::scale(&rng::normal_vec(rng, n), sigma_top)),
        InitRule::Explicit(x) => {
            vm::check_dim(n, x.len())?;
            Ok(x.clone())
        }
        InitRule::ExactDistance { direction } => {
            let target = (n as f64).sqrt() * sigma_top;
            match set {
                TargetSet::Manifold(m) => {
                    let dir = match direction {
                        Some(d) => {
                            let norm = vm::norm(d);
                            if norm == 0.0 {
                                return Err(Error::InvalidParam("zero direction".into()));
                            }
                            vm::scale(d, 1.0 / norm)
                        }
                        None => rng::unit_vec(rng, n),
                    };
                    // Outward radial offset keeps the distance exact.
                    let base = m.point_from_direction(&dir)?;
                    let outward = vm::sub(&base, &m.center);
                    let on = vm::norm(&outward);
                    Ok(vm::axpy(&base, target / on, &outward))
                }
                TargetSet::Cloud(cloud) => {
                    for attempt in 0..256 {
                        let base_idx = if cloud.len() == 1 {
                            0
                        } else {
                            (rng.next_u64() % cloud.len() as u64) as usize
                        };
                        let dir = match direction {
                            Some(d) if attempt == 0 => {
                                let norm = vm::norm(d);
                                if norm == 0.0 {
                                    return Err(Error::InvalidParam("zero direction".into()));
                                }
                                vm::scale(d, 1.0 / norm)
                            }
                            _ => rng::unit_vec(rng, n),
                        };
                        let x = vm::axpy(&cloud.points()[base_idx], target, &dir);
                        let proj = cloud.project(&x)?;
                        if proj.index == Some(base_idx)
                            && !proj.tie
                            && (proj.distance - target).abs() <= 1e-9 * target
                        {
                            return Ok(x);
                        }
                    }
                    Err(Error::InvalidParam(
                        "could not place an exact-distance start; sigma_N may be too large \
                         relative to the cloud spread"
                            .into(),
                    ))
                }
            }
        }
    }
}

use rand::RngCore;

/// Run a full sampling loop with per-step instrumentation.
pub fn run(
    spec: &SamplerSpec,
    schedule: &NoiseSchedule,
    denoiser: &Denoiser,
    set: &TargetSet,
    x_top: Vec<f64>,
    rng: &mut Prng,
) -> Result<Trajectory> {
    let n_steps = schedule.num_steps();
    let dim = set.dim();
    vm::check_dim(dim, x_top.len())?;
    if !spec.gamma.is_finite() {
        return Err(Error::InvalidParam("gamma must be finite".into()));
    }

    let mut records = Vec::with_capacity(n_steps + 1);
    let mut x = x_top;
    let mut cached_eps: Option<Vec<f64>> = None; // previous raw denoiser output
    let mut evaluations = 0usize;
    let mut last_applied: Vec<f64> = vec![0.0; dim];
    let mut x_before_last: Vec<f64> = x.clone();
    let mut sigma_last = schedule.sigma(n_steps);

    for t in (1..=n_steps).rev() {
        let sigma_t = schedule.sigma(t);
        let sigma_prev = schedule.sigma(t - 1);
        let out = denoiser.denoise(&x, sigma_t, rng).map_err(|e| {
            Error::InvalidParam(format!("denoiser failed at step t={t}: {e}"))
        })?;
        evaluations += 1;

        let applied = match spec.kind {
            SamplerKind::Ddim | SamplerKind::Ddpm => out.epsilon.clone(),
            SamplerKind::GradientEstimation => match &cached_eps {
                // The first iteration is a plain DDIM step.
                None => out.epsilon.clone(),
                Some(prev) => extrapolate_eps(&out.epsilon, prev, spec.gamma),
            },
        };

        records.push(instrument(t, sigma_t, &x, &applied, set)?);

        let x_next = match spec.kind {
            SamplerKind::Ddim | SamplerKind::GradientEstimation => {
                ddim_step(&x, sigma_t, sigma_prev, &applied)?
            }
            SamplerKind::Ddpm => {
                let w = rng::normal_vec(rng, dim);
                ddpm_step(&x, sigma_t, sigma_prev, &applied, &w)?
            }
        };

        cached_eps = Some(out.epsilon);
        x_before_last = x;
        sigma_last = sigma_t;
        last_applied = applied;
        x = x_next;
    }

    // No evaluation happens at t = 0; the record keeps the cached epsilon for
    // replay but its relative projection error is undefined.
    let mut final_rec = instrument(0, schedule.sigma(0), &x, &last_applied, set)?;
    final_rec.rel_proj_error = f64::NAN;
    records.push(final_rec);

    let final_x0 = if spec.terminal_full_step {
        // Full-step heuristic: return x0_hat from the last evaluation.
        vm::axpy(&x_before_last, -sigma_last, &last_applied)
    } else {
        x
    };

    Ok(Trajectory { records, final_x0, evaluations })
}

fn instrument(
    t: usize,
    sigma: f64,
    x: &[f64],
    applied: &[f64],
    set: &TargetSet,
) -> Result<StepRecord> {
    let distance = set.distance(x)?;
    let rel_proj_error = if distance > 0.0 {
        relative_projection_error(x, sigma, applied, set).unwrap_or(f64::NAN)
    } else {
        f64::NAN
    };
    let n = x.len() as f64;
    let ratio = if distance > 0.0 { n.sqrt() * sigma / distance } else { f64::INFINITY };
    Ok(StepRecord {
        t,
        sigma,
        x: x.to_vec(),
        epsilon: applied.to_vec(),
        distance,
        rel_proj_error,
        ratio,
    })
}
