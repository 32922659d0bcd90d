//! Numerical verification harness: concentration Monte Carlo, ideal-denoiser
//! tail bounds, cosine-similarity matrices, gamma sweeps, trajectory bound
//! checks, and empirical (eta, nu) estimation.
//!
//! Everything here is report-producing and deterministic given the seed.
//! Trials use one child PRNG stream per trial index, so results do not depend
//! on execution order; per-trial values are collected in trial order and
//! reduced sequentially to keep floating-point sums reproducible.

use rayon::prelude::*;

use crate::denoisers::{Denoiser, ErrorModel};
use crate::error::{Error, Result};
use crate::geometry::{ManifoldSpec, PointCloud, TargetSet};
use crate::rng;
use crate::samplers::{self, InitRule, SamplerSpec, Trajectory};
use crate::schedules::{BoundEnvelope, NoiseSchedule};
use crate::vecmath as vm;

/// `kappa(t) = sqrt((sqrt(d)+t)^2 + (sqrt(n-d)+t)^2)`.
pub fn kappa(d: usize, n: usize, t: f64) -> f64 {
    let sd = (d as f64).sqrt();
    let snd = ((n - d) as f64).sqrt();
    ((sd + t) * (sd + t) + (snd + t) * (snd + t)).sqrt()
}

#[derive(Debug, Clone)]
pub struct ConcentrationParams {
    pub manifold: ManifoldSpec,
    pub sigma: f64,
    pub t: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Outcome of the oracle-denoising concentration experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ConcentrationReport {
    pub hypothesis_met: bool,
    pub skip_reason: Option<String>,
    pub trials: usize,
    /// Fraction of trials where both sides of the distance bound held.
    pub freq_distance: f64,
    /// Fraction of trials where the projection-error bound held.
    pub freq_proj_error: f64,
    pub distance_lower: f64,
    pub distance_upper: f64,
    /// Coefficient of dist in the projection-error bound.
    pub proj_error_coeff: f64,
    pub kappa: f64,
    /// Mean of `||proj(x_sigma) - x0|| / dist(x_sigma)` over valid trials.
    pub mean_proj_error_ratio: f64,
    /// Mean of `||proj(x_sigma) - x0||` itself; scales linearly with sigma.
    pub mean_proj_error: f64,
}

/// Monte Carlo check of the two-sided distance bound
/// `sigma (sqrt(n-d) - sqrt(d) - 2t) <= dist(x_sigma) <= sigma (sqrt(n-d) + sqrt(d) + 2t)`
/// and the companion projection-error bound, for points sampled on the
/// manifold plus `sigma * N(0, I)` noise.
pub fn concentration_experiment(p: &ConcentrationParams) -> Result<ConcentrationReport> {
    if !(p.sigma > 0.0 && p.t > 0.0) {
        return Err(Error::InvalidParam("sigma and t must be positive".into()));
    }
    if p.trials == 0 {
        return Err(Error::InvalidParam("trials must be >= 1".into()));
    }
    let n = p.manifold.dim();
    let d = p.manifold.intrinsic_dim();
    let sd = (d as f64).sqrt();
    let snd = ((n - d) as f64).sqrt();
    let gap = snd - sd - 2.0 * p.t;
    let kap = kappa(d, n, p.t);
    let reach = p.manifold.reach();

    let mut report = ConcentrationReport {
        hypothesis_met: true,
        skip_reason: None,
        trials: p.trials,
        freq_distance: 0.0,
        freq_proj_error: 0.0,
        distance_lower: p.sigma * gap,
        distance_upper: p.sigma * (snd + sd + 2.0 * p.t),
        proj_error_coeff: 0.0,
        kappa: kap,
        mean_proj_error_ratio: 0.0,
        mean_proj_error: 0.0,
    };
    if gap <= 0.0 {
        report.hypothesis_met = false;
        report.skip_reason =
            Some(format!("sqrt(n-d) - sqrt(d) - 2t = {gap} is not positive"));
        return Ok(report);
    }
    if !(reach > p.sigma * kap) {
        report.hypothesis_met = false;
        report.skip_reason = Some(format!(
            "reach {reach} does not exceed sigma * kappa(t) = {}",
            p.sigma * kap
        ));
        return Ok(report);
    }
    let c_t = reach / (reach - p.sigma * kap);
    let coeff = c_t * (sd + p.t) / gap;
    report.proj_error_coeff = coeff;

    // (dist ok, proj ok, error ratio, absolute error) per trial, in trial order.
    let rows: Vec<(bool, bool, f64, f64)> = (0..p.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = rng::child(p.seed, trial as u64);
            let dir = rng::unit_vec(&mut rng, n);
            let base = p.manifold.point_from_direction(&dir).expect("on-manifold sample");
            let noise = rng::normal_vec(&mut rng, n);
            let x = vm::axpy(&base, p.sigma, &noise);
            let dist = p.manifold.distance(&x).expect("analytic distance");
            let dist_ok = report.distance_lower <= dist && dist <= report.distance_upper;
            let (proj_ok, ratio, err) = match p.manifold.project(&x) {
                Ok(proj) => {
                    let err = vm::dist(&proj.nearest, &base);
                    (err <= coeff * dist, if dist > 0.0 { err / dist } else { 0.0 }, err)
                }
                Err(_) => (false, f64::NAN, f64::NAN),
            };
            (dist_ok, proj_ok, ratio, err)
        })
        .collect();

    let mut dist_hits = 0usize;
    let mut proj_hits = 0usize;
    let mut ratio_sum = 0.0;
    let mut err_sum = 0.0;
    let mut ratio_count = 0usize;
    for (dist_ok, proj_ok, ratio, err) in rows {
        dist_hits += dist_ok as usize;
        proj_hits += proj_ok as usize;
        if ratio.is_finite() {
            ratio_sum += ratio;
            err_sum += err;
            ratio_count += 1;
        }
    }
    report.freq_distance = dist_hits as f64 / p.trials as f64;
    report.freq_proj_error = proj_hits as f64 / p.trials as f64;
    report.mean_proj_error_ratio =
        if ratio_count > 0 { ratio_sum / ratio_count as f64 } else { f64::NAN };
    report.mean_proj_error =
        if ratio_count > 0 { err_sum / ratio_count as f64 } else { f64::NAN };
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct TailBoundParams {
    pub cloud: PointCloud,
    pub x: Vec<f64>,
    pub sigma: f64,
    pub alpha: f64,
    pub eta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailBoundReport {
    pub skipped: bool,
    pub skip_reason: Option<String>,
    pub dist: f64,
    /// Smallest alpha admitted by the threshold inequality.
    pub alpha_threshold: f64,
    pub tail_size: usize,
    pub tail_norm: f64,
    pub budget: f64,
    pub holds: bool,
    /// `sup over the near set of ||x0 - proj(x)||`.
    pub c_x_alpha: f64,
    /// `||full - near - tail||`, internal consistency of the decomposition.
    pub decomposition_residual: f64,
}

/// Brute-force check of the softmax tail bound: with
/// `alpha >= 1 + (2 sigma^2 / dist^2)(1/e + log(m / eta))`, the weighted sum
/// of displacements over points farther than `alpha * dist` has norm at most
/// `eta * dist`.
pub fn tail_bound_check(p: &TailBoundParams) -> Result<TailBoundReport> {
    if !(p.sigma > 0.0) {
        return Err(Error::InvalidParam("sigma must be positive".into()));
    }
    if !(p.eta > 0.0) {
        return Err(Error::InvalidParam("eta must be positive".into()));
    }
    if !(p.alpha >= 1.0) {
        return Err(Error::InvalidParam("alpha must be >= 1".into()));
    }
    let m = p.cloud.len() as f64;
    let proj = p.cloud.project(&p.x)?;
    let dist = proj.distance;
    let mut report = TailBoundReport {
        skipped: false,
        skip_reason: None,
        dist,
        alpha_threshold: f64::NAN,
        tail_size: 0,
        tail_norm: 0.0,
        budget: f64::NAN,
        holds: false,
        c_x_alpha: 0.0,
        decomposition_residual: 0.0,
    };
    if proj.tie {
        report.skipped = true;
        report.skip_reason = Some("projection tie; nearest point not unique".into());
        return Ok(report);
    }
    if dist == 0.0 {
        // Query on the set: tail is empty at any alpha >= 1.
        report.alpha_threshold = 1.0;
        report.budget = 0.0;
        report.holds = true;
        return Ok(report);
    }
    let threshold = 1.0
        + (2.0 * p.sigma * p.sigma / (dist * dist))
            * (1.0 / std::f64::consts::E + (m / p.eta).ln());
    report.alpha_threshold = threshold;
    if p.alpha < threshold {
        report.skipped = true;
        report.skip_reason = Some(format!(
            "alpha {} below the threshold {threshold} (margin {})",
            p.alpha,
            threshold - p.alpha
        ));
        return Ok(report);
    }

    let w = crate::geometry::softmax_weights(&p.x, &p.cloud, p.sigma)?;
    let cut = p.alpha * dist; // boundary points belong to the near set
    let n = p.cloud.dim();
    let mut tail = vec![0.0; n];
    let mut near = vec![0.0; n];
    let mut full = vec![0.0; n];
    for (wi, x0) in w.iter().zip(p.cloud.points()) {
        let disp: Vec<f64> = proj.nearest.iter().zip(x0).map(|(a, b)| wi * (a - b)).collect();
        let far = vm::dist(&p.x, x0) > cut;
        for i in 0..n {
            full[i] += disp[i];
            if far {
                tail[i] += disp[i];
            } else {
                near[i] += disp[i];
            }
        }
        if far {
            report.tail_size += 1;
        } else {
            let sep = vm::dist(x0, &proj.nearest);
            if sep > report.c_x_alpha {
                report.c_x_alpha = sep;
            }
        }
    }
    report.tail_norm = vm::norm(&tail);
    report.budget = p.eta * dist;
    report.holds = report.tail_norm <= report.budget;
    let recomposed = vm::add(&near, &tail);
    report.decomposition_residual = vm::dist(&full, &recomposed);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CosineMatrix {
    /// `m[i][j]` is the cosine between the epsilon records at steps i and j;
    /// NaN where either vector is zero.
    pub m: Vec<Vec<f64>>,
    /// Minimum over defined entries.
    pub min_entry: f64,
    pub undefined_entries: usize,
}

/// Pairwise cosine similarity of the noise estimates along a trajectory.
pub fn cosine_matrix(traj: &Trajectory) -> CosineMatrix {
    let eps: Vec<&Vec<f64>> = traj.records.iter().map(|r| &r.epsilon).collect();
    let k = eps.len();
    let mut m = vec![vec![0.0; k]; k];
    let mut min_entry = f64::INFINITY;
    let mut undefined = 0usize;
    for i in 0..k {
        for j in i..k {
            let c = match vm::cosine(eps[i], eps[j]) {
                Some(c) => c,
                None => {
                    undefined += 1;
                    f64::NAN
                }
            };
            m[i][j] = c;
            m[j][i] = c;
            if c.is_finite() && c < min_entry {
                min_entry = c;
            }
        }
    }
    CosineMatrix { m, min_entry, undefined_entries: undefined }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GammaSweepRow {
    pub n: usize,
    pub gamma: f64,
    pub trials: usize,
    pub mean_terminal_distance: f64,
    pub mean_terminal_rel_error: f64,
}

/// Grid of (N, gamma) runs with shared per-trial noise streams, so gamma
/// columns are paired and the gamma = 1 column is the DDIM baseline exactly.
#[allow(clippy::too_many_arguments)]
pub fn gamma_sweep(
    set: &TargetSet,
    denoiser: &Denoiser,
    sigma_top: f64,
    sigma_bottom: f64,
    gammas: &[f64],
    ns: &[usize],
    trials: usize,
    seed: u64,
) -> Result<Vec<GammaSweepRow>> {
    if trials == 0 {
        return Err(Error::InvalidParam("trials must be >= 1".into()));
    }
    let dim = set.dim();
    let mut rows = Vec::with_capacity(gammas.len() * ns.len());
    for &n in ns {
        let schedule = NoiseSchedule::loglinear(sigma_top, sigma_bottom, n)?;
        for &gamma in gammas {
            let spec = SamplerSpec::gradient_estimation(gamma).with_terminal_full_step(true);
            let per_trial: Vec<Result<(f64, f64)>> = (0..trials)
                .into_par_iter()
                .map(|trial| {
                    let mut rng = rng::child(seed, trial as u64);
                    let x_top = samplers::init_x_top(
                        sigma_top,
                        dim,
                        &InitRule::Gaussian,
                        set,
                        &mut rng,
                    )?;
                    let traj = samplers::run(&spec, &schedule, denoiser, set, x_top, &mut rng)?;
                    let d = set.distance(&traj.final_x0)?;
                    let last = traj.records.last().expect("nonempty trajectory");
                    Ok((d, last.rel_proj_error))
                })
                .collect();
            let mut dist_sum = 0.0;
            let mut err_sum = 0.0;
            let mut err_count = 0usize;
            for r in per_trial {
                let (d, e) = r?;
                dist_sum += d;
                if e.is_finite() {
                    err_sum += e;
                    err_count += 1;
                }
            }
            rows.push(GammaSweepRow {
                n,
                gamma,
                trials,
                mean_terminal_distance: dist_sum / trials as f64,
                mean_terminal_rel_error: if err_count > 0 {
                    err_sum / err_count as f64
                } else {
                    f64::NAN
                },
            });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryCheckReport {
    pub all_hold: bool,
    pub first_failure_t: Option<usize>,
    /// Worst signed slack of `dist(x_{t-1})/dist(x_N) - L_t` (negative = violation).
    pub worst_lower_margin: f64,
    /// Worst signed slack of `U_t - dist(x_{t-1})/dist(x_N)`.
    pub worst_upper_margin: f64,
    /// Worst signed slack of the ratio band `[1/nu, nu]`.
    pub worst_ratio_margin: f64,
    /// Worst signed slack of `eta - rel_proj_error` over in-band steps.
    pub worst_error_margin: f64,
}

/// Per-step check of the distance-descent bound families on an instrumented
/// trajectory: distance bracketing against the envelope, ratio maintenance in
/// `[1/nu, nu]`, and the in-band relative projection error staying below eta.
/// Comparisons carry a 1e-9 relative tolerance.
pub fn verify_trajectory(
    traj: &Trajectory,
    model: &ErrorModel,
    envelope: &BoundEnvelope,
) -> Result<TrajectoryCheckReport> {
    let n = envelope.num_steps();
    if traj.records.len() != n + 1 {
        return Err(Error::DimensionMismatch { expected: n + 1, got: traj.records.len() });
    }
    let tol = 1e-9;
    let dist_top = traj.records[0].distance;
    if dist_top == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    let mut report = TrajectoryCheckReport {
        all_hold: true,
        first_failure_t: None,
        worst_lower_margin: f64::INFINITY,
        worst_upper_margin: f64::INFINITY,
        worst_ratio_margin: f64::INFINITY,
        worst_error_margin: f64::INFINITY,
    };
    let fail = |report: &mut TrajectoryCheckReport, t: usize| {
        report.all_hold = false;
        if report.first_failure_t.is_none() {
            report.first_failure_t = Some(t);
        }
    };
    for rec in &traj.records {
        // Bracketing applies to x_{t-1} for steps t = N..1, i.e. every
        // record below the top one.
        if rec.t < n {
            let t = rec.t + 1;
            let ratio_to_top = rec.distance / dist_top;
            let lm = ratio_to_top - envelope.lower(t);
            let um = envelope.upper(t) - ratio_to_top;
            if lm < report.worst_lower_margin {
                report.worst_lower_margin = lm;
            }
            if um < report.worst_upper_margin {
                report.worst_upper_margin = um;
            }
            if lm < -tol * ratio_to_top.max(1.0) || um < -tol * ratio_to_top.max(1.0) {
                fail(&mut report, rec.t);
            }
        }
        if rec.ratio.is_finite() {
            let rm = (rec.ratio - 1.0 / model.nu).min(model.nu - rec.ratio);
            if rm < report.worst_ratio_margin {
                report.worst_ratio_margin = rm;
            }
            if rm < -tol * model.nu {
                fail(&mut report, rec.t);
            }
            let in_band = rec.ratio >= 1.0 / model.nu && rec.ratio <= model.nu;
            if in_band && rec.rel_proj_error.is_finite() {
                let em = model.eta - rec.rel_proj_error;
                if em < report.worst_error_margin {
                    report.worst_error_margin = em;
                }
                if em < -tol {
                    fail(&mut report, rec.t);
                }
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorModelFit {
    pub eta_hat: f64,
    pub nu_hat: f64,
    pub steps_seen: usize,
}

/// Empirical Def-3.1 constants over a batch: `nu_hat` is the worst ratio or
/// inverse ratio, `eta_hat` the worst in-band relative projection error.
pub fn error_model_fit(batch: &[Trajectory]) -> Result<ErrorModelFit> {
    if batch.is_empty() {
        return Err(Error::InvalidParam("batch must be nonempty".into()));
    }
    let mut nu_hat: f64 = 1.0;
    let mut eta_hat: f64 = 0.0;
    let mut steps = 0usize;
    for traj in batch {
        for rec in &traj.records {
            if rec.ratio.is_finite() && rec.ratio > 0.0 {
                nu_hat = nu_hat.max(rec.ratio).max(1.0 / rec.ratio);
            }
            if rec.rel_proj_error.is_finite() {
                eta_hat = eta_hat.max(rec.rel_proj_error);
            }
            steps += 1;
        }
    }
    Ok(ErrorModelFit { eta_hat, nu_hat, steps_seen: steps })
}

/// Brute-force oracle for the weighting-matrix extrapolation coefficient:
/// minimizes `a (e - mu_t)^2 + 2b (e - mu_t)(e - mu_next) + c (e - mu_next)^2`
/// over scalar `e` by ternary search and reports the implied gamma through
/// `e* = gamma mu_t + (1 - gamma) mu_next`.
pub fn gamma_argmin_bruteforce(a: f64, b: f64, c: f64, mu_t: f64, mu_next: f64) -> Result<f64> {
    if !(a > 0.0 && c > 0.0 && a * c - b * b > 0.0) {
        return Err(Error::InvalidParam("W must be positive definite".into()));
    }
    if mu_t == mu_next {
        return Err(Error::InvalidParam("mu_t and mu_next must differ".into()));
    }
    let obj = |e: f64| {
        a * (e - mu_t) * (e - mu_t)
            + 2.0 * b * (e - mu_t) * (e - mu_next)
            + c * (e - mu_next) * (e - mu_next)
    };
    // Fine grid, then a three-point parabolic refinement around the grid
    // argmin. The refinement is exact for a quadratic, so accuracy is set by
    // rounding, not by the grid pitch or the flat region near the minimum.
    let span = 10.0 * (mu_t.abs() + mu_next.abs() + 1.0);
    let k = 2000usize;
    let h = 2.0 * span / k as f64;
    let mut best = 0usize;
    let mut best_val = f64::INFINITY;
    for i in 0..=k {
        let v = obj(-span + i as f64 * h);
        if v < best_val {
            best_val = v;
            best = i;
        }
    }
    let i = best.clamp(1, k - 1);
    let em = -span + i as f64 * h;
    let (jm1, j0, jp1) = (obj(em - h), obj(em), obj(em + h));
    let denom = jp1 - 2.0 * j0 + jm1;
    let e_star =
        if denom > 0.0 { em - 0.5 * h * (jp1 - jm1) / denom } else { em };
    Ok((e_star - mu_next) / (mu_t - mu_next))
}
