//! Exact and smoothed distance/projection operators.
//!
//! Supports two kinds of target sets: finite point clouds (brute-force,
//! exact) and analytic manifolds (circles and spheres, closed-form). The
//! smoothed squared distance is a soft minimum over the cloud with
//! temperature set by `sigma^2`, normalized so the singleton value equals the
//! exact squared distance.

use crate::error::{Error, Result};
use crate::vecmath as vm;

/// Relative tolerance under which two candidate nearest points count as a tie.
pub const TIE_RELATIVE_TOL: f64 = 1e-9;

/// A finite point set in `R^n` with cached diameter.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
    dim: usize,
    diameter: f64,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidParam("point cloud must be nonempty".into()));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::InvalidParam("points must have dimension >= 1".into()));
        }
        for p in &points {
            vm::check_dim(dim, p.len())?;
            if !vm::all_finite(p) {
                return Err(Error::InvalidParam("point coordinates must be finite".into()));
            }
        }
        let diameter = brute_force_diameter(&points);
        Ok(Self { points, dim, diameter })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // nonempty by construction
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Max pairwise distance, 0 for a singleton. Computed once at construction.
    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    /// Unweighted mean of the cloud.
    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for p in &self.points {
            for (mi, pi) in m.iter_mut().zip(p) {
                *mi += pi;
            }
        }
        let inv = 1.0 / self.points.len() as f64;
        for mi in &mut m {
            *mi *= inv;
        }
        m
    }

    /// Componentwise bounding box, `(low, high)`.
    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let mut lo = self.points[0].clone();
        let mut hi = self.points[0].clone();
        for p in &self.points[1..] {
            for i in 0..self.dim {
                lo[i] = lo[i].min(p[i]);
                hi[i] = hi[i].max(p[i]);
            }
        }
        (lo, hi)
    }

    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        vm::check_dim(self.dim, x.len())?;
        Ok(self
            .points
            .iter()
            .map(|p| vm::sq_dist(x, p))
            .fold(f64::INFINITY, f64::min)
            .sqrt())
    }

    /// Exact brute-force nearest point. Ties (within [`TIE_RELATIVE_TOL`]
    /// relative) are broken by lowest index and flagged.
    pub fn project(&self, x: &[f64]) -> Result<ProjectionResult> {
        vm::check_dim(self.dim, x.len())?;
        let mut best = 0usize;
        let mut best_sq = f64::INFINITY;
        for (i, p) in self.points.iter().enumerate() {
            let d = vm::sq_dist(x, p);
            if d < best_sq {
                best_sq = d;
                best = i;
            }
        }
        let best_d = best_sq.sqrt();
        let tie_tol = TIE_RELATIVE_TOL * (1.0 + best_d);
        let tie = self.points.iter().enumerate().any(|(i, p)| {
            i != best && (vm::sq_dist(x, p).sqrt() - best_d).abs() <= tie_tol
        });
        Ok(ProjectionResult {
            nearest: self.points[best].clone(),
            distance: best_d,
            index: Some(best),
            tie,
        })
    }
}

fn brute_force_diameter(points: &[Vec<f64>]) -> f64 {
    let mut best = 0.0f64;
    for i in 0..points.len() {
        for j in (i + 1)..points.len() {
            best = best.max(vm::sq_dist(&points[i], &points[j]));
        }
    }
    best.sqrt()
}

/// Nearest point on a set, its distance, and tie information.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult {
    pub nearest: Vec<f64>,
    pub distance: f64,
    /// Index within the cloud; `None` for analytic manifolds.
    pub index: Option<usize>,
    pub tie: bool,
}

/// Analytic manifold kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ManifoldKind {
    /// 1-sphere in the plane of the first two coordinates.
    Circle,
    /// (n-1)-sphere in the full ambient space.
    Sphere,
}

/// A circle or sphere with known reach (= radius).
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldSpec {
    pub kind: ManifoldKind,
    pub center: Vec<f64>,
    pub radius: f64,
}

impl ManifoldSpec {
    pub fn sphere(center: Vec<f64>, radius: f64) -> Result<Self> {
        Self::new(ManifoldKind::Sphere, center, radius)
    }

    /// Circle of radius `r` in the plane spanned by the first two coordinate
    /// axes through `center`. Requires ambient dimension >= 3 so that the
    /// embedded dimension is strictly below the ambient one.
    pub fn circle(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.len() < 3 {
            return Err(Error::InvalidParam(
                "circle requires ambient dimension >= 3".into(),
            ));
        }
        Self::new(ManifoldKind::Circle, center, radius)
    }

    fn new(kind: ManifoldKind, center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidParam("radius must be positive".into()));
        }
        if center.is_empty() || !vm::all_finite(&center) {
            return Err(Error::InvalidParam("center must be finite and nonempty".into()));
        }
        Ok(Self { kind, center, radius })
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Intrinsic dimension d of the manifold.
    pub fn intrinsic_dim(&self) -> usize {
        match self.kind {
            ManifoldKind::Circle => 1,
            ManifoldKind::Sphere => self.center.len() - 1,
        }
    }

    /// Largest tube radius with unique projection; analytic for both kinds.
    pub fn reach(&self) -> f64 {
        self.radius
    }

    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        vm::check_dim(self.dim(), x.len())?;
        match self.kind {
            ManifoldKind::Sphere => Ok((vm::dist(x, &self.center) - self.radius).abs()),
            ManifoldKind::Circle => {
                let (in_plane, out_sq) = self.circle_split(x);
                let radial = in_plane - self.radius;
                Ok((radial * radial + out_sq).sqrt())
            }
        }
    }

    pub fn project(&self, x: &[f64]) -> Result<ProjectionResult> {
        vm::check_dim(self.dim(), x.len())?;
        match self.kind {
            ManifoldKind::Sphere => {
                let r = vm::sub(x, &self.center);
                let n = vm::norm(&r);
                if n == 0.0 {
                    return Err(Error::NonUniqueProjection(
                        "query point is the sphere center".into(),
                    ));
                }
                let nearest = vm::axpy(&self.center, self.radius / n, &r);
                Ok(ProjectionResult {
                    distance: vm::dist(x, &nearest),
                    nearest,
                    index: None,
                    tie: false,
                })
            }
            ManifoldKind::Circle => {
                let (in_plane, _) = self.circle_split(x);
                if in_plane == 0.0 {
                    return Err(Error::NonUniqueProjection(
                        "query point lies on the circle axis".into(),
                    ));
                }
                let s = self.radius / in_plane;
                let mut nearest = self.center.clone();
                nearest[0] += s * (x[0] - self.center[0]);
                nearest[1] += s * (x[1] - self.center[1]);
                Ok(ProjectionResult {
                    distance: vm::dist(x, &nearest),
                    nearest,
                    index: None,
                    tie: false,
                })
            }
        }
    }

    /// `(||in-plane component||, ||out-of-plane component||^2)` relative to the
    /// circle's plane.
    fn circle_split(&self, x: &[f64]) -> (f64, f64) {
        let dx = x[0] - self.center[0];
        let dy = x[1] - self.center[1];
        let in_plane = (dx * dx + dy * dy).sqrt();
        let out_sq: f64 = x[2..]
            .iter()
            .zip(&self.center[2..])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        (in_plane, out_sq)
    }

    /// A point on the manifold parameterized by a direction; used by
    /// dataset generators and Monte Carlo experiments.
    pub fn point_from_direction(&self, dir: &[f64]) -> Result<Vec<f64>> {
        vm::check_dim(self.dim(), dir.len())?;
        match self.kind {
            ManifoldKind::Sphere => {
                let n = vm::norm(dir);
                if n == 0.0 {
                    return Err(Error::InvalidParam("zero direction".into()));
                }
                Ok(vm::axpy(&self.center, self.radius / n, dir))
            }
            ManifoldKind::Circle => {
                let n = (dir[0] * dir[0] + dir[1] * dir[1]).sqrt();
                if n == 0.0 {
                    return Err(Error::InvalidParam("zero in-plane direction".into()));
                }
                let mut p = self.center.clone();
                p[0] += self.radius * dir[0] / n;
                p[1] += self.radius * dir[1] / n;
                Ok(p)
            }
        }
    }
}

/// Either a finite cloud or an analytic manifold.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSet {
    Cloud(PointCloud),
    Manifold(ManifoldSpec),
}

impl TargetSet {
    pub fn dim(&self) -> usize {
        match self {
            TargetSet::Cloud(c) => c.dim(),
            TargetSet::Manifold(m) => m.dim(),
        }
    }

    pub fn distance(&self, x: &[f64]) -> Result<f64> {
        match self {
            TargetSet::Cloud(c) => c.distance(x),
            TargetSet::Manifold(m) => m.distance(x),
        }
    }

    pub fn project(&self, x: &[f64]) -> Result<ProjectionResult> {
        match self {
            TargetSet::Cloud(c) => c.project(x),
            TargetSet::Manifold(m) => m.project(x),
        }
    }

    pub fn as_cloud(&self) -> Option<&PointCloud> {
        match self {
            TargetSet::Cloud(c) => Some(c),
            TargetSet::Manifold(_) => None,
        }
    }
}

/// Gradient of `x -> 1/2 dist(x)^2`, i.e. `x - proj(x)`.
///
/// Fails when the projection is not unique (a tie for clouds, a singular
/// point for manifolds).
pub fn grad_half_sq_distance(x: &[f64], set: &TargetSet) -> Result<Vec<f64>> {
    let proj = set.project(x)?;
    if proj.tie {
        return Err(Error::NonUniqueProjection(
            "tie between nearest points; gradient undefined".into(),
        ));
    }
    Ok(vm::sub(x, &proj.nearest))
}

/// Smoothed squared distance to a finite cloud:
///
/// `-2 sigma^2 * log sum_{x0 in K} exp(-||x0 - x||^2 / (2 sigma^2))`
///
/// computed with max-shifted log-sum-exp. Always a lower bound on the exact
/// squared distance and differentiable everywhere; half its gradient equals
/// `sigma * epsilon_star` for the closed-form denoiser over the same cloud.
pub fn smoothed_sq_distance(x: &[f64], cloud: &PointCloud, sigma: f64) -> Result<f64> {
    vm::check_dim(cloud.dim(), x.len())?;
    if !(sigma > 0.0) {
        return Err(Error::InvalidParam("sigma must be positive".into()));
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    let exponents: Vec<f64> = cloud
        .points()
        .iter()
        .map(|p| -vm::sq_dist(x, p) * inv)
        .collect();
    let m = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = exponents.iter().map(|e| (e - m).exp()).sum();
    Ok(-2.0 * sigma * sigma * (m + sum.ln()))
}

/// Softmax weights `w(x, x0)` over the cloud at temperature `sigma^2`,
/// max-shifted. Weights below the underflow threshold are exactly zero.
pub fn softmax_weights(x: &[f64], cloud: &PointCloud, sigma: f64) -> Result<Vec<f64>> {
    vm::check_dim(cloud.dim(), x.len())?;
    if !(sigma > 0.0) {
        return Err(Error::InvalidParam("sigma must be positive".into()));
    }
    let inv = 1.0 / (2.0 * sigma * sigma);
    let exponents: Vec<f64> = cloud
        .points()
        .iter()
        .map(|p| -vm::sq_dist(x, p) * inv)
        .collect();
    let m = exponents.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = exponents.iter().map(|e| (e - m).exp()).collect();
    let total: f64 = w.iter().sum();
    for wi in &mut w {
        *wi /= total;
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cloud(pts: &[&[f64]]) -> PointCloud {
        PointCloud::new(pts.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn distance_point_in_set_is_zero() {
        let c = cloud(&[&[0.0, 0.0]]);
        assert_eq!(c.distance(&[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn distance_pythagorean() {
        let c = cloud(&[&[0.0, 0.0]]);
        assert_eq!(c.distance(&[3.0, 4.0]).unwrap(), 5.0);
    }

    #[test]
    fn distance_to_sphere_is_radial() {
        let n = 8;
        let mut x = vec![0.0; n];
        x[0] = 2.0;
        let s = ManifoldSpec::sphere(vec![0.0; n], 1.0).unwrap();
        assert!((s.distance(&x).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn distance_dimension_mismatch_errors() {
        let c = cloud(&[&[0.0, 0.0]]);
        assert!(matches!(
            c.distance(&[0.0, 0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn project_tie_breaks_to_lowest_index() {
        let c = cloud(&[&[0.0, 0.0], &[6.0, 8.0]]);
        let p = c.project(&[3.0, 4.0]).unwrap();
        assert_eq!(p.index, Some(0));
        assert!(p.tie);
        assert!((p.distance - 5.0).abs() < 1e-12);
    }

    #[test]
    fn project_unique_nearest() {
        let c = cloud(&[&[0.0, 0.0], &[2.0, 0.0]]);
        let p = c.project(&[0.5, 0.0]).unwrap();
        assert_eq!(p.nearest, vec![0.0, 0.0]);
        assert!(!p.tie);
        assert_eq!(p.distance, 0.5);
    }

    #[test]
    fn project_onto_sphere() {
        let s = ManifoldSpec::sphere(vec![0.0, 0.0], 1.0).unwrap();
        let p = s.project(&[2.0, 0.0]).unwrap();
        assert_eq!(p.nearest, vec![1.0, 0.0]);
        assert!((p.distance - 1.0).abs() < 1e-15);
    }

    #[test]
    fn project_sphere_center_is_singular() {
        let s = ManifoldSpec::sphere(vec![0.0, 0.0], 1.0).unwrap();
        assert!(matches!(
            s.project(&[0.0, 0.0]),
            Err(Error::NonUniqueProjection(_))
        ));
    }

    #[test]
    fn circle_axis_is_singular() {
        let c = ManifoldSpec::circle(vec![0.0, 0.0, 0.0], 1.0).unwrap();
        assert!(matches!(
            c.project(&[0.0, 0.0, 5.0]),
            Err(Error::NonUniqueProjection(_))
        ));
    }

    #[test]
    fn circle_distance_combines_in_and_out_of_plane() {
        let c = ManifoldSpec::circle(vec![0.0, 0.0, 0.0], 1.0).unwrap();
        // In-plane gap 1, out-of-plane 1: dist = sqrt(2).
        let d = c.distance(&[2.0, 0.0, 1.0]).unwrap();
        assert!((d - 2.0f64.sqrt()).abs() < 1e-15);
        let p = c.project(&[2.0, 0.0, 1.0]).unwrap();
        assert_eq!(p.nearest, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn grad_is_x_minus_projection() {
        let set = TargetSet::Cloud(cloud(&[&[0.0, 0.0]]));
        let g = grad_half_sq_distance(&[0.5, 0.0], &set).unwrap();
        assert_eq!(g, vec![0.5, 0.0]);
        // On the set the gradient is zero.
        let g0 = grad_half_sq_distance(&[0.0, 0.0], &set).unwrap();
        assert_eq!(g0, vec![0.0, 0.0]);
    }

    #[test]
    fn grad_tie_errors() {
        let set = TargetSet::Cloud(cloud(&[&[0.0, 0.0], &[6.0, 8.0]]));
        assert!(matches!(
            grad_half_sq_distance(&[3.0, 4.0], &set),
            Err(Error::NonUniqueProjection(_))
        ));
    }

    #[test]
    fn smoothed_singleton_is_exact_sq_distance() {
        let c = cloud(&[&[1.0, 2.0]]);
        for sigma in [0.1, 1.0, 10.0] {
            let v = smoothed_sq_distance(&[4.0, 6.0], &c, sigma).unwrap();
            assert!((v - 25.0).abs() < 1e-10 * 25.0, "sigma={sigma} v={v}");
        }
    }

    #[test]
    fn smoothed_converges_to_exact_as_sigma_shrinks() {
        let c = cloud(&[&[0.0, 0.0], &[2.0, 0.0]]);
        let x = [0.5, 0.3];
        let exact = c.distance(&x).unwrap().powi(2);
        let mut prev_gap = f64::INFINITY;
        for sigma in [1.0, 0.1, 0.01] {
            let v = smoothed_sq_distance(&x, &c, sigma).unwrap();
            assert!(v <= exact + 1e-12);
            let gap = exact - v;
            assert!(gap <= prev_gap + 1e-12, "gap should shrink with sigma");
            prev_gap = gap;
        }
        assert!(prev_gap < 1e-6);
    }

    #[test]
    fn smoothed_sigma_nonpositive_errors() {
        let c = cloud(&[&[0.0]]);
        assert!(smoothed_sq_distance(&[1.0], &c, 0.0).is_err());
        assert!(smoothed_sq_distance(&[1.0], &c, -1.0).is_err());
    }

    #[test]
    fn diameter_examples() {
        assert_eq!(cloud(&[&[0.0, 0.0], &[3.0, 4.0]]).diameter(), 5.0);
        assert_eq!(cloud(&[&[1.0, 1.0]]).diameter(), 0.0);
    }

    #[test]
    fn softmax_weights_sum_to_one() {
        let c = cloud(&[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 3.0]]);
        let w = softmax_weights(&[0.2, 0.1], &c, 0.7).unwrap();
        let total: f64 = w.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!(w.iter().all(|&wi| wi >= 0.0));
    }
}
