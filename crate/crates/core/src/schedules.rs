//! Noise-schedule construction, admissibility testing, and the constant
//! step-size boundary.
//!
//! A schedule is the strictly decreasing sequence `sigma_N > ... > sigma_0 > 0`
//! with per-step shrink rates `beta_t = 1 - sigma_{t-1}/sigma_t`. Admissibility
//! ties the schedule to the relative-error constants `(eta, nu)` through the
//! two-sided product condition
//!
//! `(1/nu) U_t <= prod_{i=t}^{N} (1 - beta_i) <= nu L_t`
//!
//! where `L_t = prod (1 - beta_i (eta+1))` and `U_t = prod (1 + beta_i (eta-1))`.
//! All products are evaluated as sums of logarithms so the limit checks stay
//! accurate out to N = 10^6.

use crate::denoisers::ErrorModel;
use crate::error::{Error, Result};

/// Default log-space tolerance absorbing roundoff at the admissibility boundary.
pub const ADMISSIBILITY_LOG_TOL: f64 = 1e-12;

/// Strictly decreasing noise levels `sigma_N ... sigma_0`, stored indexed by
/// `t` (so `sigma(0)` is the smallest level).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSchedule {
    sigmas: Vec<f64>, // sigmas[t] = sigma_t, ascending in t
}

impl NoiseSchedule {
    /// Build from levels listed top-down (`sigma_N` first), as they appear in
    /// sampler configurations.
    pub fn from_sigmas_desc(desc: Vec<f64>) -> Result<Self> {
        let mut sigmas = desc;
        sigmas.reverse();
        Self::from_sigmas_asc(sigmas)
    }

    fn from_sigmas_asc(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.len() < 2 {
            return Err(Error::InvalidParam("schedule needs at least one step".into()));
        }
        for pair in sigmas.windows(2) {
            if !(pair[0] > 0.0) {
                return Err(Error::InvalidParam("sigma levels must be positive".into()));
            }
            if !(pair[0] < pair[1]) {
                return Err(Error::InvalidParam(
                    "sigma levels must be strictly decreasing from t=N to t=0".into(),
                ));
            }
        }
        Ok(Self { sigmas })
    }

    /// Number of steps N (one less than the number of levels).
    pub fn num_steps(&self) -> usize {
        self.sigmas.len() - 1
    }

    pub fn sigma(&self, t: usize) -> f64 {
        self.sigmas[t]
    }

    /// `beta_t = 1 - sigma_{t-1}/sigma_t` for `t` in `1..=N`; always in (0,1).
    pub fn beta(&self, t: usize) -> f64 {
        1.0 - self.sigmas[t - 1] / self.sigmas[t]
    }

    pub fn sigmas_asc(&self) -> &[f64] {
        &self.sigmas
    }

    /// Geometric schedule: `sigma_t = sigma_N * r^(N-t)` with
    /// `r = (sigma_0/sigma_N)^(1/N)`; constant beta.
    pub fn loglinear(sigma_top: f64, sigma_bottom: f64, n: usize) -> Result<Self> {
        if !(sigma_bottom > 0.0 && sigma_bottom < sigma_top) {
            return Err(Error::InvalidParam(
                "loglinear schedule requires 0 < sigma_0 < sigma_N".into(),
            ));
        }
        if n < 1 {
            return Err(Error::InvalidParam("need at least one step".into()));
        }
        let log_top = sigma_top.ln();
        let log_bot = sigma_bottom.ln();
        let sigmas = (0..=n)
            .map(|t| (log_bot + (log_top - log_bot) * t as f64 / n as f64).exp())
            .collect();
        Self::from_sigmas_asc(sigmas)
    }

    /// Constant shrink rate: `sigma_{t-1} = (1 - beta) sigma_t`.
    pub fn constant_beta(sigma_top: f64, beta: f64, n: usize) -> Result<Self> {
        if !(0.0 < beta && beta < 1.0) {
            return Err(Error::InvalidParam("beta must be in (0,1)".into()));
        }
        if !(sigma_top > 0.0) {
            return Err(Error::InvalidParam("sigma_N must be positive".into()));
        }
        // Log-space so the construction survives very large N.
        let log_r = (1.0 - beta).ln();
        let log_top = sigma_top.ln();
        let sigmas = (0..=n)
            .map(|t| (log_top + log_r * (n - t) as f64).exp())
            .collect();
        Self::from_sigmas_asc(sigmas)
    }

    /// Rho-warped interpolation between `sigma_max` (t = N) and `sigma_min`
    /// (t = 0): `sigma = (sigma_max^(1/rho) + (i/N)(sigma_min^(1/rho) -
    /// sigma_max^(1/rho)))^rho`.
    pub fn edm(sigma_max: f64, sigma_min: f64, rho: f64, n: usize) -> Result<Self> {
        if !(sigma_min > 0.0 && sigma_min < sigma_max) {
            return Err(Error::InvalidParam("require 0 < sigma_min < sigma_max".into()));
        }
        if !(rho > 0.0) {
            return Err(Error::InvalidParam("rho must be positive".into()));
        }
        let a = sigma_max.powf(1.0 / rho);
        let b = sigma_min.powf(1.0 / rho);
        // i = 0 at the top (t = N), i = N at the bottom (t = 0).
        let sigmas = (0..=n)
            .map(|t| {
                let i = (n - t) as f64 / n as f64;
                (a + i * (b - a)).powf(rho)
            })
            .collect();
        Self::from_sigmas_asc(sigmas)
    }

    /// Evenly spaced subsampling of the discrete linear-variance training
    /// grid. The grid is `beta_i` linear from `beta1` to `beta_t_train` over
    /// `t_train` steps with `alphabar_i = prod (1 - beta_j)` and
    /// `sigma_i = sqrt((1 - alphabar_i)/alphabar_i)`. The offset variant
    /// truncates the grid to start at the largest grid sigma `<= offset`.
    pub fn ddim_linear(
        beta1: f64,
        beta_t: f64,
        t_train: usize,
        n: usize,
        offset_sigma_top: Option<f64>,
    ) -> Result<Self> {
        if !(0.0 < beta1 && beta1 < beta_t && beta_t < 1.0) {
            return Err(Error::InvalidParam("require 0 < beta1 < betaT < 1".into()));
        }
        if t_train < 2 || n < 1 || n + 1 > t_train {
            return Err(Error::InvalidParam(
                "require T_train >= 2 and N + 1 <= T_train".into(),
            ));
        }
        // Training grid sigma_1 .. sigma_T, ascending.
        let mut grid = Vec::with_capacity(t_train);
        let mut log_alphabar = 0.0;
        for i in 0..t_train {
            let beta = beta1 + (beta_t - beta1) * i as f64 / (t_train - 1) as f64;
            log_alphabar += (1.0 - beta).ln();
            let alphabar = log_alphabar.exp();
            grid.push(((1.0 - alphabar) / alphabar).sqrt());
        }
        if let Some(top) = offset_sigma_top {
            let keep = grid.iter().take_while(|&&s| s <= top).count();
            if keep < n + 1 {
                return Err(Error::InvalidParam(format!(
                    "offset sigma_N={top} leaves only {keep} grid levels, need {}",
                    n + 1
                )));
            }
            grid.truncate(keep);
        }
        let m = grid.len();
        let sigmas: Vec<f64> = (0..=n)
            .map(|k| {
                let idx = (k as f64 * (m - 1) as f64 / n as f64).round() as usize;
                grid[idx]
            })
            .collect();
        Self::from_sigmas_asc(sigmas)
    }

    /// Derived alphabar grid: `alphabar_t = 1 / (1 + sigma_t^2)`.
    pub fn to_alphabar(&self) -> AlphaBarSchedule {
        AlphaBarSchedule {
            alphabars: self.sigmas.iter().map(|&s| sigma_to_alphabar(s)).collect(),
        }
    }

    /// Per-step lower/upper trajectory envelopes at error level `eta`.
    pub fn bound_envelope(&self, eta: f64) -> Result<BoundEnvelope> {
        if eta < 0.0 {
            return Err(Error::InvalidParam("eta must be nonnegative".into()));
        }
        let n = self.num_steps();
        let mut lower = vec![0.0; n];
        let mut upper = vec![0.0; n];
        let mut vacuous_below = None;
        // Accumulate from t = N down so each entry is the product over i = t..N.
        let mut log_l = 0.0;
        let mut log_u = 0.0;
        for t in (1..=n).rev() {
            let beta = self.beta(t);
            let lf = 1.0 - beta * (eta + 1.0);
            let uf = 1.0 + beta * (eta - 1.0);
            if lf <= 0.0 {
                vacuous_below = Some(t);
                log_l = f64::NEG_INFINITY;
            } else {
                log_l += lf.ln();
            }
            log_u += uf.ln();
            lower[t - 1] = log_l.exp();
            upper[t - 1] = log_u.exp();
        }
        Ok(BoundEnvelope { lower, upper, vacuous_below })
    }

    /// Check the two-sided admissibility products for every `t`, in log space.
    pub fn is_admissible(&self, model: &ErrorModel, tol: Option<f64>) -> AdmissibilityReport {
        let tol = tol.unwrap_or(ADMISSIBILITY_LOG_TOL);
        let n = self.num_steps();
        let log_nu = model.nu.ln();
        let mut margins = Vec::with_capacity(n);
        let mut admissible = true;
        let mut reason = None;
        let (mut log_mid, mut log_l, mut log_u) = (0.0f64, 0.0f64, 0.0f64);
        // Walk t = N..1 accumulating the three log products over i = t..N.
        let mut rev = Vec::with_capacity(n);
        for t in (1..=n).rev() {
            let beta = self.beta(t);
            let lf = 1.0 - beta * (model.eta + 1.0);
            log_mid += (1.0 - beta).ln();
            log_u += (1.0 + beta * (model.eta - 1.0)).ln();
            if lf <= 0.0 {
                log_l = f64::NEG_INFINITY;
                if reason.is_none() {
                    reason = Some(format!(
                        "factor 1 - beta_{t}*(eta+1) = {lf} is nonpositive; lower envelope vacuous"
                    ));
                }
            } else if log_l.is_finite() {
                log_l += lf.ln();
            }
            let lower_margin = log_mid - (log_u - log_nu); // >= -tol required
            let upper_margin = (log_nu + log_l) - log_mid; // >= -tol required
            if lower_margin < -tol || upper_margin < -tol {
                admissible = false;
            }
            rev.push(StepMargin { t, lower_margin, upper_margin });
        }
        rev.reverse();
        margins.extend(rev);
        if !admissible && reason.is_none() {
            let worst = margins
                .iter()
                .map(|m| m.lower_margin.min(m.upper_margin))
                .fold(f64::INFINITY, f64::min);
            reason = Some(format!("product condition violated; worst log margin {worst:e}"));
        }
        if admissible {
            reason = None;
        }
        AdmissibilityReport { admissible, margins, reason }
    }
}

/// Per-step slack of the admissibility condition, in log space. Both margins
/// must be `>= -tol` for the schedule to pass.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMargin {
    pub t: usize,
    pub lower_margin: f64,
    pub upper_margin: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub admissible: bool,
    pub margins: Vec<StepMargin>,
    pub reason: Option<String>,
}

/// Per-step products bounding the trajectory distance ratio. Indexed by
/// `t - 1` for `t` in `1..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundEnvelope {
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// The lower envelope is vacuous (factor <= 0) at and below this `t`.
    vacuous_below: Option<usize>,
}

impl BoundEnvelope {
    /// `L_t = prod_{i=t}^{N} (1 - beta_i (eta + 1))`.
    pub fn lower(&self, t: usize) -> f64 {
        self.lower[t - 1]
    }

    /// `U_t = prod_{i=t}^{N} (1 + beta_i (eta - 1))`.
    pub fn upper(&self, t: usize) -> f64 {
        self.upper[t - 1]
    }

    pub fn num_steps(&self) -> usize {
        self.lower.len()
    }

    pub fn vacuous_below(&self) -> Option<usize> {
        self.vacuous_below
    }
}

/// Largest constant shrink rate keeping a constant-beta schedule admissible:
/// `beta_* = c / (eta + c)` with `c = 1 - nu^(-1/N)`.
pub fn beta_star(eta: f64, nu: f64, n: usize) -> Result<f64> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParam("beta_star requires eta > 0".into()));
    }
    if !(nu >= 1.0) {
        return Err(Error::InvalidParam("beta_star requires nu >= 1".into()));
    }
    if n < 1 {
        return Err(Error::InvalidParam("beta_star requires N >= 1".into()));
    }
    // c = 1 - nu^{-1/N}, via expm1 for accuracy at large N.
    let c = -(-nu.ln() / n as f64).exp_m1();
    Ok(c / (eta + c))
}

/// Limits of the constant-beta-star schedule as N grows:
/// the sigma ratio `nu^(-1/eta)` and the distance ratio `nu^((eta-1)/eta)`.
pub fn limit_ratios(eta: f64, nu: f64) -> Result<(f64, f64)> {
    if !(eta > 0.0) {
        return Err(Error::InvalidParam("limit ratios require eta > 0".into()));
    }
    if !(nu >= 1.0) {
        return Err(Error::InvalidParam("limit ratios require nu >= 1".into()));
    }
    Ok((nu.powf(-1.0 / eta), nu.powf((eta - 1.0) / eta)))
}

/// `alphabar = 1 / (1 + sigma^2)`.
pub fn sigma_to_alphabar(sigma: f64) -> f64 {
    1.0 / (1.0 + sigma * sigma)
}

/// `sigma = sqrt((1 - alphabar) / alphabar)`.
pub fn alphabar_to_sigma(alphabar: f64) -> Result<f64> {
    if !(alphabar > 0.0 && alphabar < 1.0) {
        return Err(Error::InvalidParam("alphabar must be in (0,1)".into()));
    }
    Ok(((1.0 - alphabar) / alphabar).sqrt())
}

/// Alphabar grid, strictly decreasing in `t`; the coordinate system the
/// original sampler definitions use.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaBarSchedule {
    alphabars: Vec<f64>, // alphabars[t], descending in t
}

impl AlphaBarSchedule {
    pub fn new(alphabars: Vec<f64>) -> Result<Self> {
        if alphabars.len() < 2 {
            return Err(Error::InvalidParam("need at least one step".into()));
        }
        for pair in alphabars.windows(2) {
            if !(pair[1] > 0.0 && pair[1] < 1.0 && pair[0] > 0.0 && pair[0] < 1.0) {
                return Err(Error::InvalidParam("alphabar values must be in (0,1)".into()));
            }
            if !(pair[1] < pair[0]) {
                return Err(Error::InvalidParam(
                    "alphabar must be strictly decreasing in t".into(),
                ));
            }
        }
        Ok(Self { alphabars })
    }

    pub fn alphabar(&self, t: usize) -> f64 {
        self.alphabars[t]
    }

    pub fn num_steps(&self) -> usize {
        self.alphabars.len() - 1
    }

    pub fn to_noise_schedule(&self) -> Result<NoiseSchedule> {
        let sigmas: Result<Vec<f64>> =
            self.alphabars.iter().map(|&a| alphabar_to_sigma(a)).collect();
        NoiseSchedule::from_sigmas_asc(sigmas?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loglinear_powers_of_two() {
        let s = NoiseSchedule::loglinear(8.0, 1.0, 3).unwrap();
        let got: Vec<f64> = (0..=3).rev().map(|t| s.sigma(t)).collect();
        for (g, e) in got.iter().zip([8.0, 4.0, 2.0, 1.0]) {
            assert!((g - e).abs() < 1e-12);
        }
        for t in 1..=3 {
            assert!((s.beta(t) - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn loglinear_ratio_is_constant() {
        let s = NoiseSchedule::loglinear(40.0, 0.01, 17).unwrap();
        let r0 = s.sigma(0) / s.sigma(1);
        for t in 1..=17 {
            assert!((s.sigma(t - 1) / s.sigma(t) - r0).abs() < 1e-12);
        }
    }

    #[test]
    fn edm_endpoints_and_monotone() {
        let s = NoiseSchedule::edm(80.0, 0.002, 7.0, 10).unwrap();
        assert_eq!(s.sigma(10), 80.0);
        assert!((s.sigma(0) - 0.002).abs() < 1e-15);
        for t in 1..=10 {
            assert!(s.sigma(t - 1) < s.sigma(t));
        }
    }

    #[test]
    fn edm_rho_one_is_linear() {
        let s = NoiseSchedule::edm(10.0, 1.0, 1.0, 9).unwrap();
        for t in 0..=9 {
            assert!((s.sigma(t) - (1.0 + t as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn ddim_linear_grid_top_near_157() {
        let s = NoiseSchedule::ddim_linear(1e-4, 0.02, 1000, 10, None).unwrap();
        let top = s.sigma(10);
        assert!((top - 157.0).abs() < 2.0, "sigma_N = {top}");
    }

    #[test]
    fn ddim_linear_identity_subsampling() {
        let s = NoiseSchedule::ddim_linear(1e-4, 0.02, 100, 99, None).unwrap();
        assert_eq!(s.num_steps(), 99);
        // All 100 grid levels present, strictly increasing.
        for t in 1..=99 {
            assert!(s.sigma(t - 1) < s.sigma(t));
        }
    }

    #[test]
    fn ddim_linear_offset_caps_top() {
        let s = NoiseSchedule::ddim_linear(1e-4, 0.02, 1000, 10, Some(40.0)).unwrap();
        assert!(s.sigma(10) <= 40.0);
    }

    #[test]
    fn beta_star_matches_worked_example() {
        let b = beta_star(0.1, 2.0, 50).unwrap();
        let ratio = 1.0 - b;
        assert!(ratio > 0.8785 && ratio < 0.8795, "ratio = {ratio}");
    }

    #[test]
    fn beta_star_degenerate_nu_one() {
        assert_eq!(beta_star(0.3, 1.0, 10).unwrap(), 0.0);
    }

    #[test]
    fn beta_star_rejects_eta_zero() {
        assert!(beta_star(0.0, 2.0, 10).is_err());
    }

    #[test]
    fn beta_star_large_n_approaches_limit() {
        let (sig_lim, _) = limit_ratios(0.1, 2.0).unwrap();
        let b = beta_star(0.1, 2.0, 100_000).unwrap();
        let finite = ((1.0 - b).ln() * 1e5).exp();
        assert!((finite - sig_lim).abs() <= 0.01 * sig_lim);
        assert!((sig_lim - 1.0 / 1024.0).abs() < 1e-15);
    }

    #[test]
    fn limit_ratios_examples() {
        let (a, b) = limit_ratios(0.1, 2.0).unwrap();
        assert!((a - 1.0 / 1024.0).abs() < 1e-18);
        assert!((b - 1.0 / 512.0).abs() < 1e-18);
        assert_eq!(limit_ratios(0.5, 1.0).unwrap(), (1.0, 1.0));
        // eta -> 1: distance-ratio limit -> 1.
        let (_, d) = limit_ratios(1.0 - 1e-12, 3.0).unwrap();
        assert!((d - 1.0).abs() < 1e-9);
    }

    #[test]
    fn admissible_at_beta_star_boundary() {
        let model = ErrorModel::new(0.1, 2.0).unwrap();
        let b = beta_star(0.1, 2.0, 50).unwrap();
        let sched = NoiseSchedule::constant_beta(40.0, b, 50).unwrap();
        let report = sched.is_admissible(&model, None);
        assert!(report.admissible, "reason: {:?}", report.reason);
        // Just above the boundary it fails.
        let sched_bad = NoiseSchedule::constant_beta(40.0, b * (1.0 + 1e-3), 50).unwrap();
        assert!(!sched_bad.is_admissible(&model, None).admissible);
    }

    #[test]
    fn near_constant_sigma_is_admissible() {
        // beta -> 0 keeps all products near 1; sigma_0 = 0 is disallowed so we
        // use a tiny beta rather than a perfectly flat schedule.
        let model = ErrorModel::new(0.9, 1.0).unwrap();
        let sched = NoiseSchedule::constant_beta(1.0, 1e-14, 20).unwrap();
        assert!(sched.is_admissible(&model, Some(1e-10)).admissible);
    }

    #[test]
    fn envelope_eta_zero_telescopes() {
        let sched = NoiseSchedule::loglinear(16.0, 1.0, 4).unwrap();
        let env = sched.bound_envelope(0.0).unwrap();
        for t in 1..=4 {
            let expect = sched.sigma(t - 1) / sched.sigma(4);
            assert!((env.lower(t) - expect).abs() < 1e-12);
            assert!((env.upper(t) - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_single_step() {
        let sched = NoiseSchedule::from_sigmas_desc(vec![2.0, 1.0]).unwrap(); // beta = 0.5
        let env = sched.bound_envelope(0.1).unwrap();
        assert!((env.lower(1) - 0.45).abs() < 1e-15);
        assert!((env.upper(1) - 0.55).abs() < 1e-15);
    }

    #[test]
    fn envelope_constant_beta_power_form() {
        let n = 6;
        let beta = 0.2;
        let eta = 0.15;
        let sched = NoiseSchedule::constant_beta(10.0, beta, n).unwrap();
        let env = sched.bound_envelope(eta).unwrap();
        for t in 1..=n {
            let k = (n - t + 1) as i32;
            assert!((env.lower(t) - (1.0 - beta * (eta + 1.0)).powi(k)).abs() < 1e-12);
            assert!((env.upper(t) - (1.0 + beta * (eta - 1.0)).powi(k)).abs() < 1e-12);
        }
    }

    #[test]
    fn envelope_flags_vacuous_lower_factor() {
        // beta = 0.75, eta = 0.5 gives 1 - 0.75*1.5 < 0.
        let sched = NoiseSchedule::constant_beta(8.0, 0.75, 3).unwrap();
        let env = sched.bound_envelope(0.5).unwrap();
        assert!(env.vacuous_below().is_some());
        let model = ErrorModel::new(0.5, 2.0).unwrap();
        let report = sched.is_admissible(&model, None);
        assert!(!report.admissible);
        assert!(report.reason.as_deref().unwrap_or("").contains("nonpositive"));
    }

    #[test]
    fn conversion_round_trip() {
        assert!((alphabar_to_sigma(0.5).unwrap() - 1.0).abs() < 1e-15);
        let expect = 1.0 / (1.0 + 157.0f64 * 157.0);
        assert!((sigma_to_alphabar(157.0) - expect).abs() < 1e-18);
        // 12 decades of sigma. The alphabar -> sigma -> alphabar direction is
        // well conditioned everywhere and must round-trip to 1e-15 relative.
        // The sigma -> alphabar -> sigma direction loses information for
        // sigma << 1 (alphabar is within an ulp of 1), so its tolerance
        // carries the condition factor (1 + sigma^2) / sigma^2.
        for k in -60..=60 {
            let sigma = 10f64.powf(k as f64 / 10.0);
            let ab = sigma_to_alphabar(sigma);
            let ab_back = sigma_to_alphabar(alphabar_to_sigma(ab).unwrap());
            assert!(
                (ab_back - ab).abs() <= 1e-15 * ab,
                "ab={ab} back={ab_back}"
            );
            let back = alphabar_to_sigma(ab).unwrap();
            let cond = (1.0 + sigma * sigma) / (sigma * sigma);
            assert!(
                (back - sigma).abs() <= 1e-15 * cond.max(1.0) * sigma,
                "sigma={sigma} back={back}"
            );
        }
    }

    #[test]
    fn limit_convergence_is_monotone_over_n() {
        for (eta, nu) in [(0.1, 2.0), (0.2, 4.0), (0.5, 1.5), (0.05, 1.2), (0.4, 8.0)] {
            let (lim, _) = limit_ratios(eta, nu).unwrap();
            let mut prev = f64::INFINITY;
            for n in [100usize, 1000, 10_000, 100_000] {
                let b = beta_star(eta, nu, n).unwrap();
                let v = ((1.0 - b).ln() * n as f64).exp();
                let gap = (v - lim).abs();
                assert!(gap <= prev + 1e-18, "eta={eta} nu={nu} n={n}");
                prev = gap;
            }
        }
    }

    #[test]
    fn schedule_rejects_bad_inputs() {
        assert!(NoiseSchedule::loglinear(1.0, 2.0, 5).is_err());
        assert!(NoiseSchedule::edm(1.0, 2.0, 7.0, 5).is_err());
        assert!(NoiseSchedule::from_sigmas_desc(vec![1.0, 1.0]).is_err());
        assert!(NoiseSchedule::from_sigmas_desc(vec![1.0, 0.0]).is_err());
    }
}
