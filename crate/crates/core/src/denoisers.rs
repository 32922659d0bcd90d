//! Closed-form denoisers and the error-injecting wrapper.
//!
//! All denoisers return both the noise estimate `epsilon` and the implied
//! clean point `x0_hat = x - sigma * epsilon`; the pair is kept consistent by
//! construction. The ideal denoiser is the softmax-weighted mean over a
//! finite cloud (uniform data distribution); the error-injected wrapper
//! perturbs an inner denoiser by exactly `eta * dist(x)` in the clean-point
//! coordinates, realizing the relative-error budget.

use crate::error::{Error, Result};
use crate::geometry::{softmax_weights, PointCloud, TargetSet};
use crate::rng::{self, Prng};
use crate::vecmath as vm;

/// The relative-error constants `(eta, nu)` governing admissibility checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorModel {
    pub eta: f64,
    pub nu: f64,
}

impl ErrorModel {
    pub fn new(eta: f64, nu: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&eta) {
            return Err(Error::InvalidParam(format!("eta must be in [0,1), got {eta}")));
        }
        if !(nu >= 1.0) {
            return Err(Error::InvalidParam(format!("nu must be >= 1, got {nu}")));
        }
        Ok(Self { eta, nu })
    }
}

/// Output of a single denoiser evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseOutput {
    pub epsilon: Vec<f64>,
    pub x0_hat: Vec<f64>,
    /// Softmax weights over the cloud; ideal denoiser only.
    pub weights: Option<Vec<f64>>,
}

impl DenoiseOutput {
    fn from_x0(x: &[f64], sigma: f64, x0_hat: Vec<f64>, weights: Option<Vec<f64>>) -> Self {
        let epsilon = vm::scale(&vm::sub(x, &x0_hat), 1.0 / sigma);
        Self { epsilon, x0_hat, weights }
    }

    fn from_epsilon(x: &[f64], sigma: f64, epsilon: Vec<f64>) -> Self {
        let x0_hat = vm::axpy(x, -sigma, &epsilon);
        Self { epsilon, x0_hat, weights: None }
    }
}

/// How the error-injected wrapper orients its perturbation.
#[derive(Debug, Clone, PartialEq)]
pub enum ErrorDirection {
    /// Uniform direction orthogonal to the inner epsilon.
    RandomOrthogonal,
    /// Aligned with `x - proj(x)`, the worst case for distance decrease.
    Adversarial,
    /// A supplied unit vector.
    FixedVector(Vec<f64>),
}

/// Denoiser variants. Everything is closed-form; no learned components.
#[derive(Debug, Clone)]
pub enum Denoiser {
    /// Softmax-weighted mean over the cloud, the exact minimizer of the
    /// denoising loss for the uniform distribution on the cloud.
    Ideal(PointCloud),
    /// Returns the known clean point regardless of input.
    Oracle(Vec<f64>),
    /// `x0_hat = proj(x)` exactly; a (0,1)-approximate projection.
    ExactProjection(TargetSet),
    /// `x0_hat = mean(cloud)` regardless of input.
    ConvexMean(PointCloud),
    /// Wraps an inner denoiser, perturbing its output in clean-point
    /// coordinates by exactly `eta * dist(x)` toward `direction`.
    ErrorInjected {
        inner: Box<Denoiser>,
        eta: f64,
        direction: ErrorDirection,
        set: TargetSet,
    },
    /// Perturbs the inner epsilon itself by exactly `eta` in a random
    /// direction: the alternative error form stated on the noise prediction
    /// rather than on the implied clean point.
    EpsilonDirectionError { inner: Box<Denoiser>, eta: f64 },
}

impl Denoiser {
    pub fn error_injected(
        inner: Denoiser,
        eta: f64,
        direction: ErrorDirection,
        set: TargetSet,
    ) -> Result<Denoiser> {
        if !(0.0..1.0).contains(&eta) {
            return Err(Error::InvalidParam(format!("eta must be in [0,1), got {eta}")));
        }
        if let ErrorDirection::FixedVector(v) = &direction {
            if (vm::norm(v) - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParam("fixed direction must be a unit vector".into()));
            }
        }
        Ok(Denoiser::ErrorInjected { inner: Box::new(inner), eta, direction, set })
    }

    /// Evaluate the denoiser at `(x, sigma)`.
    pub fn denoise(&self, x: &[f64], sigma: f64, rng: &mut Prng) -> Result<DenoiseOutput> {
        if !(sigma > 0.0) {
            return Err(Error::InvalidParam("sigma must be positive".into()));
        }
        match self {
            Denoiser::Ideal(cloud) => ideal_denoise(x, sigma, cloud),
            Denoiser::Oracle(x0) => oracle_denoise(x, sigma, x0),
            Denoiser::ExactProjection(set) => exact_projection_denoise(x, sigma, set),
            Denoiser::ConvexMean(cloud) => convex_mean_denoise(x, sigma, cloud),
            Denoiser::ErrorInjected { inner, eta, direction, set } => {
                let base = inner.denoise(x, sigma, rng)?;
                let dist = set.distance(x)?;
                inject_error(&base, *eta, dist, sigma, direction, set, x, rng)
            }
            Denoiser::EpsilonDirectionError { inner, eta } => {
                let base = inner.denoise(x, sigma, rng)?;
                let dir = rng::unit_vec(rng, x.len());
                let epsilon = vm::axpy(&base.epsilon, *eta, &dir);
                Ok(DenoiseOutput::from_epsilon(x, sigma, epsilon))
            }
        }
    }
}

/// Softmax-weighted closed form over a finite cloud:
/// `epsilon* = sum w(x, x0) (x - x0) / sigma`, `x0_hat = sum w(x, x0) x0`.
pub fn ideal_denoise(x: &[f64], sigma: f64, cloud: &PointCloud) -> Result<DenoiseOutput> {
    let w = softmax_weights(x, cloud, sigma)?;
    let mut x0_hat = vec![0.0; cloud.dim()];
    for (wi, p) in w.iter().zip(cloud.points()) {
        for (acc, pi) in x0_hat.iter_mut().zip(p) {
            *acc += wi * pi;
        }
    }
    Ok(DenoiseOutput::from_x0(x, sigma, x0_hat, Some(w)))
}

/// `x0_hat = proj(x)`; errors when the projection is not unique.
pub fn exact_projection_denoise(x: &[f64], sigma: f64, set: &TargetSet) -> Result<DenoiseOutput> {
    let proj = set.project(x)?;
    if proj.tie {
        return Err(Error::NonUniqueProjection(
            "tie between nearest points; exact-projection denoiser undefined".into(),
        ));
    }
    Ok(DenoiseOutput::from_x0(x, sigma, proj.nearest, None))
}

/// Returns the known clean point `x0` used to generate the noisy sample.
pub fn oracle_denoise(x: &[f64], sigma: f64, x0: &[f64]) -> Result<DenoiseOutput> {
    vm::check_dim(x.len(), x0.len())?;
    Ok(DenoiseOutput::from_x0(x, sigma, x0.to_vec(), None))
}

/// `x0_hat = mean(cloud)` for every input; useful in the large-noise regime.
pub fn convex_mean_denoise(x: &[f64], sigma: f64, cloud: &PointCloud) -> Result<DenoiseOutput> {
    vm::check_dim(cloud.dim(), x.len())?;
    Ok(DenoiseOutput::from_x0(x, sigma, cloud.mean(), None))
}

/// Perturb `inner` so that `||sigma*eps' - sigma*eps_inner|| = eta * dist`
/// exactly, oriented per `direction`.
#[allow(clippy::too_many_arguments)]
pub fn inject_error(
    inner: &DenoiseOutput,
    eta: f64,
    dist: f64,
    sigma: f64,
    direction: &ErrorDirection,
    set: &TargetSet,
    x: &[f64],
    rng: &mut Prng,
) -> Result<DenoiseOutput> {
    if !(0.0..1.0).contains(&eta) {
        return Err(Error::InvalidParam(format!("eta must be in [0,1), got {eta}")));
    }
    if dist < 0.0 {
        return Err(Error::InvalidParam("dist must be nonnegative".into()));
    }
    if eta == 0.0 {
        return Ok(inner.clone());
    }
    let n = inner.epsilon.len();
    let dir = match direction {
        ErrorDirection::RandomOrthogonal => orthogonal_unit(&inner.epsilon, rng),
        ErrorDirection::Adversarial => {
            let proj = set.project(x)?;
            let g = vm::sub(x, &proj.nearest);
            let gn = vm::norm(&g);
            if gn == 0.0 {
                rng::unit_vec(rng, n)
            } else {
                vm::scale(&g, 1.0 / gn)
            }
        }
        ErrorDirection::FixedVector(v) => {
            vm::check_dim(n, v.len())?;
            v.clone()
        }
    };
    // Perturbation of norm eta*dist on sigma*epsilon, i.e. eta*dist/sigma on epsilon.
    let epsilon = vm::axpy(&inner.epsilon, eta * dist / sigma, &dir);
    Ok(DenoiseOutput::from_epsilon(x, sigma, epsilon))
}

/// Gaussian direction with the component along `reference` removed, then
/// renormalized; falls back to the raw normalized Gaussian when the
/// reference is zero.
fn orthogonal_unit(reference: &[f64], rng: &mut Prng) -> Vec<f64> {
    let n = reference.len();
    let rn = vm::norm(reference);
    if rn == 0.0 {
        return rng::unit_vec(rng, n);
    }
    loop {
        let g = rng::normal_vec(rng, n);
        let along = vm::dot(&g, reference) / (rn * rn);
        let orth = vm::axpy(&g, -along, reference);
        let on = vm::norm(&orth);
        if on > 1e-12 {
            return vm::scale(&orth, 1.0 / on);
        }
    }
}

/// The left-hand side of the relative-error definition divided by dist:
/// `||x - sigma*eps - proj(x)|| / dist(x)`.
pub fn relative_projection_error(
    x: &[f64],
    sigma: f64,
    epsilon: &[f64],
    set: &TargetSet,
) -> Result<f64> {
    let dist = set.distance(x)?;
    if dist == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    let proj = set.project(x)?;
    let x0_hat = vm::axpy(x, -sigma, epsilon);
    Ok(vm::dist(&x0_hat, &proj.nearest) / dist)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PointCloud;
    use crate::rng::seeded;

    fn cloud(pts: &[&[f64]]) -> PointCloud {
        PointCloud::new(pts.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn ideal_singleton_matches_oracle() {
        let c = cloud(&[&[1.0, 0.0]]);
        let out = ideal_denoise(&[3.0, 0.0], 0.5, &c).unwrap();
        assert_eq!(out.x0_hat, vec![1.0, 0.0]);
        assert_eq!(out.epsilon, vec![4.0, 0.0]); // (x - x0)/sigma
    }

    #[test]
    fn ideal_symmetric_pair_gives_zero_at_midpoint() {
        let c = cloud(&[&[-1.0, 0.0], &[1.0, 0.0]]);
        let out = ideal_denoise(&[0.0, 0.0], 0.7, &c).unwrap();
        assert!(vm::norm(&out.epsilon) < 1e-15);
        assert!(vm::norm(&out.x0_hat) < 1e-15);
    }

    #[test]
    fn ideal_weights_are_convex() {
        let c = cloud(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 2.0], &[3.0, 3.0]]);
        let out = ideal_denoise(&[0.4, 0.8], 0.6, &c).unwrap();
        let w = out.weights.unwrap();
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&wi| wi >= 0.0));
        // x0_hat stays inside the bounding box.
        let (lo, hi) = c.bounding_box();
        for i in 0..2 {
            assert!(out.x0_hat[i] >= lo[i] - 1e-12 && out.x0_hat[i] <= hi[i] + 1e-12);
        }
    }

    #[test]
    fn ideal_matches_unshifted_brute_force() {
        // Direct evaluation without max-shifting as the oracle, at moderate
        // sigma so nothing underflows.
        let mut rng = seeded(11);
        let pts: Vec<Vec<f64>> = (0..20).map(|_| rng::normal_vec(&mut rng, 4)).collect();
        let c = PointCloud::new(pts.clone()).unwrap();
        let x = rng::normal_vec(&mut rng, 4);
        let sigma = 0.9;
        let out = ideal_denoise(&x, sigma, &c).unwrap();

        let raw: Vec<f64> = pts
            .iter()
            .map(|p| (-vm::sq_dist(&x, p) / (2.0 * sigma * sigma)).exp())
            .collect();
        let total: f64 = raw.iter().sum();
        let mut expect = vec![0.0; 4];
        for (r, p) in raw.iter().zip(&pts) {
            for (e, pi) in expect.iter_mut().zip(p) {
                *e += r / total * pi;
            }
        }
        assert!(vm::dist(&out.x0_hat, &expect) < 1e-10);
    }

    #[test]
    fn exact_projection_x0_invariant_to_sigma() {
        let set = TargetSet::Cloud(cloud(&[&[0.0, 0.0]]));
        let x = [2.0, 0.0];
        let a = exact_projection_denoise(&x, 0.1, &set).unwrap();
        let b = exact_projection_denoise(&x, 1.0, &set).unwrap();
        let c = exact_projection_denoise(&x, 10.0, &set).unwrap();
        assert_eq!(a.x0_hat, b.x0_hat);
        assert_eq!(b.x0_hat, c.x0_hat);
        assert_eq!(b.epsilon, vec![2.0, 0.0]);
    }

    #[test]
    fn exact_projection_has_zero_relative_error() {
        let mut rng = seeded(3);
        let pts: Vec<Vec<f64>> = (0..30).map(|_| rng::normal_vec(&mut rng, 6)).collect();
        let set = TargetSet::Cloud(PointCloud::new(pts).unwrap());
        for _ in 0..1000 {
            let x = vm::scale(&rng::normal_vec(&mut rng, 6), 3.0);
            if set.distance(&x).unwrap() == 0.0 {
                continue;
            }
            let out = exact_projection_denoise(&x, 1.0, &set).unwrap();
            let err = relative_projection_error(&x, 1.0, &out.epsilon, &set).unwrap();
            assert!(err < 1e-12);
        }
    }

    #[test]
    fn oracle_recovers_true_noise() {
        let x0 = vec![1.0, -2.0, 0.5];
        let eps_true = vec![0.3, 0.1, -0.7];
        let sigma = 1.7;
        let x = vm::axpy(&x0, sigma, &eps_true);
        let out = oracle_denoise(&x, sigma, &x0).unwrap();
        assert!(vm::dist(&out.epsilon, &eps_true) < 1e-14);
        // x = x0 gives the zero vector.
        let out0 = oracle_denoise(&x0, sigma, &x0).unwrap();
        assert!(vm::norm(&out0.epsilon) == 0.0);
    }

    #[test]
    fn convex_mean_ignores_query() {
        let c = cloud(&[&[0.0, 0.0], &[2.0, 0.0]]);
        for x in [[5.0, 5.0], [-1.0, 3.0]] {
            let out = convex_mean_denoise(&x, 2.0, &c).unwrap();
            assert_eq!(out.x0_hat, vec![1.0, 0.0]);
        }
    }

    #[test]
    fn convex_mean_on_singleton_equals_ideal() {
        let c = cloud(&[&[4.0, -1.0]]);
        let x = [1.0, 1.0];
        let a = convex_mean_denoise(&x, 0.8, &c).unwrap();
        let b = ideal_denoise(&x, 0.8, &c).unwrap();
        assert!(vm::dist(&a.epsilon, &b.epsilon) < 1e-14);
    }

    #[test]
    fn inject_zero_eta_is_identity() {
        let set = TargetSet::Cloud(cloud(&[&[0.0, 0.0]]));
        let x = [2.0, 1.0];
        let base = exact_projection_denoise(&x, 1.0, &set).unwrap();
        let out = inject_error(
            &base,
            0.0,
            set.distance(&x).unwrap(),
            1.0,
            &ErrorDirection::RandomOrthogonal,
            &set,
            &x,
            &mut seeded(0),
        )
        .unwrap();
        assert_eq!(out.epsilon, base.epsilon);
    }

    #[test]
    fn injected_perturbation_norm_is_exact() {
        let set = TargetSet::Cloud(cloud(&[&[0.0, 0.0, 0.0]]));
        let x = [2.0, 1.0, -1.0];
        let sigma = 0.7;
        let dist = set.distance(&x).unwrap();
        let base = exact_projection_denoise(&x, sigma, &set).unwrap();
        let mut rng = seeded(5);
        for (eta, mode) in [
            (0.1, ErrorDirection::RandomOrthogonal),
            (0.3, ErrorDirection::Adversarial),
            (0.5, ErrorDirection::FixedVector(vec![0.0, 0.0, 1.0])),
        ] {
            let out = inject_error(&base, eta, dist, sigma, &mode, &set, &x, &mut rng).unwrap();
            let gap = sigma * vm::dist(&out.epsilon, &base.epsilon);
            assert!((gap - eta * dist).abs() < 1e-12, "mode {mode:?}");
        }
    }

    #[test]
    fn eta_out_of_range_errors() {
        let set = TargetSet::Cloud(cloud(&[&[0.0]]));
        let base = exact_projection_denoise(&[1.0], 1.0, &set).unwrap();
        let mut rng = seeded(0);
        for eta in [-0.1, 1.0, 1.5] {
            assert!(inject_error(
                &base,
                eta,
                1.0,
                1.0,
                &ErrorDirection::RandomOrthogonal,
                &set,
                &[1.0],
                &mut rng
            )
            .is_err());
        }
    }

    #[test]
    fn relative_error_on_set_is_undefined() {
        let set = TargetSet::Cloud(cloud(&[&[0.0, 0.0]]));
        assert!(matches!(
            relative_projection_error(&[0.0, 0.0], 1.0, &[0.0, 0.0], &set),
            Err(Error::UndefinedRatio)
        ));
    }

    #[test]
    fn ideal_sigma_limits() {
        let mut rng = seeded(21);
        let pts: Vec<Vec<f64>> = (0..10).map(|_| rng::normal_vec(&mut rng, 5)).collect();
        let c = PointCloud::new(pts).unwrap();
        let set = TargetSet::Cloud(c.clone());
        let x = vm::scale(&rng::normal_vec(&mut rng, 5), 2.0);
        let proj = set.project(&x).unwrap();
        assert!(!proj.tie);
        let n = 5.0f64;
        // sigma -> 0: x0_hat -> proj(x).
        let mut prev = f64::INFINITY;
        for k in 1..=3 {
            let sigma = proj.distance / n.sqrt() * 10f64.powi(-k);
            let out = ideal_denoise(&x, sigma, &c).unwrap();
            let gap = vm::dist(&out.x0_hat, &proj.nearest);
            assert!(gap <= prev + 1e-12);
            prev = gap;
        }
        // sigma -> infinity: x0_hat -> mean.
        let out = ideal_denoise(&x, 1e6 * c.diameter(), &c).unwrap();
        assert!(vm::dist(&out.x0_hat, &c.mean()) < 1e-6);
    }
}
