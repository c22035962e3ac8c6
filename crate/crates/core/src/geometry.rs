//! Constraint sets, target sets, Euclidean projections and seeded samplers.
//!
//! Every set here admits an exact (or, for intersections, convergent)
//! nearest-point map, so distances to the target set are exact up to
//! floating-point rounding. Samplers are deterministic functions of the
//! plan's seed and their call parameters.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpasError};

/// A state in the ambient space.
pub type Point = DVector<f64>;

/// Builds a [`Point`] from a slice.
pub fn point(coords: &[f64]) -> Point {
    DVector::from_column_slice(coords)
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(SpasError::DimensionMismatch { expected, got })
    }
}

const DYKSTRA_TOL: f64 = 1e-10;
const DYKSTRA_MAX_SWEEPS: usize = 10_000;
const ORTHONORMAL_TOL: f64 = 1e-10;

/// Closed convex set `Ξ` that constrains the state.
///
/// `Halfspace` is `{x : normal·x ≤ offset}`. `AffineSubspace` is
/// `{offset + B c}` where the columns of `B` (given as `basis`) are
/// orthonormal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConstraintSet {
    AllSpace { dim: usize },
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Ball { center: Vec<f64>, radius: f64 },
    Halfspace { normal: Vec<f64>, offset: f64 },
    AffineSubspace { basis: Vec<Vec<f64>>, offset: Vec<f64> },
    Intersection { sets: Vec<ConstraintSet> },
}

impl ConstraintSet {
    pub fn all_space(dim: usize) -> Self {
        ConstraintSet::AllSpace { dim }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConstraintSet::AllSpace { dim } => *dim,
            ConstraintSet::Box { lo, .. } => lo.len(),
            ConstraintSet::Ball { center, .. } => center.len(),
            ConstraintSet::Halfspace { normal, .. } => normal.len(),
            ConstraintSet::AffineSubspace { offset, .. } => offset.len(),
            ConstraintSet::Intersection { sets } => sets.first().map_or(0, |s| s.dim()),
        }
    }

    /// Checks the structural invariants (ordering of box bounds, positive
    /// radius, orthonormal basis, flat intersections of equal dimension).
    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match self {
            ConstraintSet::AllSpace { dim } => {
                if *dim == 0 {
                    return Err(SpasError::InvalidSet("AllSpace needs dim >= 1".into()));
                }
            }
            ConstraintSet::Box { lo, hi } => {
                if lo.is_empty() || lo.len() != hi.len() {
                    return Err(SpasError::InvalidSet("Box bounds must be nonempty and of equal length".into()));
                }
                if lo.iter().zip(hi).any(|(l, h)| !(l <= h)) {
                    return Err(SpasError::InvalidSet("Box requires lo <= hi componentwise".into()));
                }
            }
            ConstraintSet::Ball { center, radius } => {
                if center.is_empty() || !finite(center) || !(*radius > 0.0) || !radius.is_finite() {
                    return Err(SpasError::InvalidSet("Ball requires a finite center and radius > 0".into()));
                }
            }
            ConstraintSet::Halfspace { normal, offset } => {
                let norm: f64 = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
                if normal.is_empty() || !finite(normal) || !(norm > 0.0) || !offset.is_finite() {
                    return Err(SpasError::InvalidSet("Halfspace requires a finite nonzero normal".into()));
                }
            }
            ConstraintSet::AffineSubspace { basis, offset } => {
                let n = offset.len();
                if n == 0 || !finite(offset) {
                    return Err(SpasError::InvalidSet("AffineSubspace offset must be finite and nonempty".into()));
                }
                for (i, bi) in basis.iter().enumerate() {
                    if bi.len() != n {
                        return Err(SpasError::InvalidSet(format!("basis column {i} has wrong length")));
                    }
                    for (j, bj) in basis.iter().enumerate().skip(i) {
                        let dot: f64 = bi.iter().zip(bj).map(|(a, b)| a * b).sum();
                        let want = if i == j { 1.0 } else { 0.0 };
                        if (dot - want).abs() > ORTHONORMAL_TOL {
                            return Err(SpasError::InvalidSet(format!(
                                "basis columns {i},{j} not orthonormal (dot = {dot})"
                            )));
                        }
                    }
                }
            }
            ConstraintSet::Intersection { sets } => {
                if sets.is_empty() {
                    return Err(SpasError::InvalidSet("empty intersection".into()));
                }
                let n = sets[0].dim();
                for s in sets {
                    if matches!(s, ConstraintSet::Intersection { .. }) {
                        return Err(SpasError::InvalidSet("nested intersections are not supported".into()));
                    }
                    s.validate()?;
                    check_dim(n, s.dim())?;
                }
            }
        }
        Ok(())
    }

    /// Euclidean projection `P_Ξ(x)`.
    pub fn project(&self, x: &Point) -> Result<Point> {
        check_dim(self.dim(), x.len())?;
        match self {
            ConstraintSet::Intersection { sets } => dykstra(sets, x),
            primitive => Ok(primitive.project_primitive(x)),
        }
    }

    fn project_primitive(&self, x: &Point) -> Point {
        match self {
            ConstraintSet::AllSpace { .. } => x.clone(),
            ConstraintSet::Box { lo, hi } => {
                Point::from_iterator(x.len(), x.iter().enumerate().map(|(i, v)| v.clamp(lo[i], hi[i])))
            }
            ConstraintSet::Ball { center, radius } => {
                let c = point(center);
                let d = x - &c;
                let norm = d.norm();
                if norm <= *radius {
                    x.clone()
                } else {
                    c + d * (*radius / norm)
                }
            }
            ConstraintSet::Halfspace { normal, offset } => {
                let a = point(normal);
                let excess = a.dot(x) - offset;
                if excess <= 0.0 {
                    x.clone()
                } else {
                    x - &a * (excess / a.norm_squared())
                }
            }
            ConstraintSet::AffineSubspace { basis, offset } => {
                let o = point(offset);
                let d = x - &o;
                let mut out = o;
                for b in basis {
                    let b = point(b);
                    out += &b * b.dot(&d);
                }
                out
            }
            ConstraintSet::Intersection { .. } => unreachable!("intersections go through dykstra"),
        }
    }

    /// Distance-like membership residual; zero iff `x` lies in the set.
    pub fn residual(&self, x: &Point) -> f64 {
        match self {
            ConstraintSet::AllSpace { .. } => 0.0,
            ConstraintSet::Box { lo, hi } => x
                .iter()
                .enumerate()
                .map(|(i, v)| (lo[i] - v).max(v - hi[i]).max(0.0))
                .fold(0.0, f64::max),
            ConstraintSet::Ball { center, radius } => ((x - point(center)).norm() - radius).max(0.0),
            ConstraintSet::Halfspace { normal, offset } => {
                let a = point(normal);
                ((a.dot(x) - offset) / a.norm()).max(0.0)
            }
            ConstraintSet::AffineSubspace { .. } => (x - self.project_primitive(x)).norm(),
            ConstraintSet::Intersection { sets } => sets.iter().map(|s| s.residual(x)).fold(0.0, f64::max),
        }
    }

    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        self.residual(x) <= tol
    }
}

/// Dykstra's alternating projections onto an intersection of primitives.
fn dykstra(sets: &[ConstraintSet], x0: &Point) -> Result<Point> {
    let mut x = x0.clone();
    let mut increments = vec![Point::zeros(x0.len()); sets.len()];
    for _ in 0..DYKSTRA_MAX_SWEEPS {
        let start = x.clone();
        let mut increment_change = 0.0;
        for (set, inc) in sets.iter().zip(increments.iter_mut()) {
            let shifted = &x + &*inc;
            let projected = set.project_primitive(&shifted);
            let new_inc = shifted - &projected;
            increment_change += (&new_inc - &*inc).norm_squared();
            *inc = new_inc;
            x = projected;
        }
        if (&x - &start).norm() <= DYKSTRA_TOL && increment_change.sqrt() <= DYKSTRA_TOL {
            return Ok(x);
        }
    }
    let residual = sets.iter().map(|s| s.residual(&x)).fold(0.0, f64::max);
    Err(SpasError::IntersectionNonconvergence { sweeps: DYKSTRA_MAX_SWEEPS, residual })
}

/// Compact target set `𝒜`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSet {
    Singleton { point: Vec<f64> },
    PointCloud { points: Vec<Vec<f64>> },
    Ball { center: Vec<f64>, radius: f64 },
}

impl TargetSet {
    pub fn singleton(p: &[f64]) -> Self {
        TargetSet::Singleton { point: p.to_vec() }
    }

    pub fn ball(center: &[f64], radius: f64) -> Self {
        TargetSet::Ball { center: center.to_vec(), radius }
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetSet::Singleton { point } => point.len(),
            TargetSet::PointCloud { points } => points.first().map_or(0, |p| p.len()),
            TargetSet::Ball { center, .. } => center.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| !v.is_empty() && v.iter().all(|x| x.is_finite());
        match self {
            TargetSet::Singleton { point } if finite(point) => Ok(()),
            TargetSet::PointCloud { points }
                if !points.is_empty() && points.iter().all(|p| finite(p) && p.len() == points[0].len()) =>
            {
                Ok(())
            }
            TargetSet::Ball { center, radius } if finite(center) && *radius > 0.0 && radius.is_finite() => Ok(()),
            _ => Err(SpasError::InvalidSet(format!("malformed target set {self:?}"))),
        }
    }

    /// Checks `𝒜 ⊆ Ξ` on the target's representatives.
    pub fn validate_inside(&self, constraint: &ConstraintSet, plan: &SamplingPlan) -> Result<()> {
        self.validate()?;
        check_dim(constraint.dim(), self.dim())?;
        for a in self.representatives(plan) {
            let moved = (constraint.project(&a)? - &a).norm();
            if moved > plan.membership_tol {
                return Err(SpasError::InvalidSet(format!(
                    "target representative {:?} lies outside the constraint set (displacement {moved:e})",
                    a.as_slice()
                )));
            }
        }
        Ok(())
    }

    /// Nearest point of `𝒜`; ties in a point cloud go to the lowest index.
    pub fn project(&self, x: &Point) -> Result<Point> {
        check_dim(self.dim(), x.len())?;
        Ok(match self {
            TargetSet::Singleton { point: p } => point(p),
            TargetSet::PointCloud { points } => {
                let mut best = 0;
                let mut best_d = f64::INFINITY;
                for (i, p) in points.iter().enumerate() {
                    let d = sq_dist(x, p);
                    if d < best_d {
                        best_d = d;
                        best = i;
                    }
                }
                point(&points[best])
            }
            TargetSet::Ball { center, radius } => ConstraintSet::Ball { center: center.clone(), radius: *radius }
                .project_primitive(x),
        })
    }

    /// `‖x − P_𝒜(x)‖`.
    pub fn dist(&self, x: &Point) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        Ok(self.dist_unchecked(x))
    }

    pub(crate) fn dist_unchecked(&self, x: &Point) -> f64 {
        match self {
            TargetSet::Singleton { point } => sq_dist(x, point).sqrt(),
            TargetSet::PointCloud { points } => {
                points.iter().map(|p| sq_dist(x, p)).fold(f64::INFINITY, f64::min).sqrt()
            }
            TargetSet::Ball { center, radius } => (sq_dist(x, center).sqrt() - radius).max(0.0),
        }
    }

    /// Points of `𝒜` used for audits: the singleton, the cloud, or the ball's
    /// center together with boundary points along the plan's directions.
    pub fn representatives(&self, plan: &SamplingPlan) -> Vec<Point> {
        match self {
            TargetSet::Singleton { point: p } => vec![point(p)],
            TargetSet::PointCloud { points } => points.iter().map(|p| point(p)).collect(),
            TargetSet::Ball { center, radius } => {
                let c = point(center);
                let dirs = unit_directions(c.len(), plan.directions_per_shell, plan.rng_seed, TAG_REPRESENTATIVES);
                let mut reps = vec![c.clone()];
                for d in dirs {
                    reps.push(&c + &d * (0.5 * radius));
                    reps.push(&c + d * *radius);
                }
                reps
            }
        }
    }

    /// Rays leaving the target set. A point at parameter `t ≥ 0` along a
    /// ray has distance exactly `t` for singletons and balls, and at most
    /// `t` for point clouds.
    pub(crate) fn rays(&self, plan: &SamplingPlan) -> Vec<Ray> {
        let dirs = unit_directions(self.dim(), plan.directions_per_shell, plan.rng_seed, TAG_DIRECTIONS);
        match self {
            TargetSet::Singleton { point: p } => {
                let anchor = point(p);
                dirs.into_iter().map(|dir| Ray { anchor: anchor.clone(), offset: 0.0, dir }).collect()
            }
            TargetSet::PointCloud { points } => points
                .iter()
                .flat_map(|p| {
                    let anchor = point(p);
                    dirs.iter().map(move |d| Ray { anchor: anchor.clone(), offset: 0.0, dir: d.clone() })
                })
                .collect(),
            TargetSet::Ball { center, radius } => {
                let anchor = point(center);
                dirs.into_iter().map(|dir| Ray { anchor: anchor.clone(), offset: *radius, dir }).collect()
            }
        }
    }

    /// Most negative admissible ray parameter: balls can be entered down to
    /// their center.
    fn interior_depth(&self) -> f64 {
        match self {
            TargetSet::Ball { radius, .. } => *radius,
            _ => 0.0,
        }
    }
}

fn sq_dist(x: &Point, p: &[f64]) -> f64 {
    x.iter().zip(p).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Ray `anchor + (offset + t)·dir`; `offset` is the ball radius for ball
/// targets so that `t` measures distance from the set.
#[derive(Debug, Clone)]
pub(crate) struct Ray {
    pub anchor: Point,
    pub offset: f64,
    pub dir: Point,
}

impl Ray {
    pub fn at(&self, t: f64) -> Point {
        &self.anchor + &self.dir * (self.offset + t)
    }

    /// Same anchor, new unit direction.
    pub fn turned(&self, dir: Point) -> Ray {
        Ray { anchor: self.anchor.clone(), offset: self.offset, dir }
    }
}

/// Sampling resolution shared by every sampled check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingPlan {
    pub directions_per_shell: usize,
    pub radial_refinements: usize,
    pub rng_seed: u64,
    pub boundary_tol: f64,
    pub membership_tol: f64,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            directions_per_shell: 256,
            radial_refinements: 16,
            rng_seed: 0x5eed,
            boundary_tol: 1e-6,
            membership_tol: 1e-9,
        }
    }
}

impl SamplingPlan {
    pub fn with_directions(mut self, directions: usize) -> Self {
        self.directions_per_shell = directions;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.rng_seed = seed;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.directions_per_shell < 2 * dim {
            return Err(SpasError::Precondition(format!(
                "directions_per_shell = {} must be at least 2n = {}",
                self.directions_per_shell,
                2 * dim
            )));
        }
        if self.radial_refinements == 0 {
            return Err(SpasError::Precondition("radial_refinements must be positive".into()));
        }
        if !(self.boundary_tol > 0.0) || !(self.membership_tol > 0.0) {
            return Err(SpasError::Precondition("tolerances must be positive".into()));
        }
        Ok(())
    }
}

pub(crate) const TAG_DIRECTIONS: u64 = 0x6469_7265;
pub(crate) const TAG_REPRESENTATIVES: u64 = 0x7265_7072;
pub(crate) const TAG_SEEDS: u64 = 0x7365_6564;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator derived from the plan seed, a purpose tag and call parameters.
pub(crate) fn derived_rng(seed: u64, tag: u64, params: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix64(seed ^ splitmix64(tag));
    for p in params {
        h = splitmix64(h ^ *p);
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// `count` unit vectors: first `+e_i`, then `−e_i`, then uniform on the sphere.
pub fn unit_directions(dim: usize, count: usize, seed: u64, tag: u64) -> Vec<Point> {
    let mut dirs = Vec::with_capacity(count);
    for sign in [1.0, -1.0] {
        for i in 0..dim {
            if dirs.len() < count {
                let mut e = Point::zeros(dim);
                e[i] = sign;
                dirs.push(e);
            }
        }
    }
    let mut rng = derived_rng(seed, tag, &[dim as u64, count as u64]);
    while dirs.len() < count {
        if let Some(d) = random_direction(dim, &mut rng) {
            dirs.push(d);
        }
    }
    dirs
}

pub(crate) fn random_direction<R: Rng>(dim: usize, rng: &mut R) -> Option<Point> {
    let g = Point::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
    let n = g.norm();
    (n > 1e-12).then(|| g / n)
}

/// Points at distance `r` from `𝒜`, one per ray that stays on the shell.
pub fn sample_shell(target: &TargetSet, r: f64, plan: &SamplingPlan) -> Result<Vec<Point>> {
    if !(r > 0.0) {
        return Err(SpasError::Precondition(format!("shell radius must be positive, got {r}")));
    }
    let tol = plan.boundary_tol;
    Ok(target
        .rays(plan)
        .into_iter()
        .map(|ray| ray.at(r))
        .filter(|p| (target.dist_unchecked(p) - r).abs() <= tol)
        .collect())
}

/// Deterministic samples of `Ξ ∩ (B̄_{r_out}(𝒜) \ B_{r_in}(𝒜))`.
///
/// Each ray is sampled at `radial_refinements + 1` evenly spaced radii
/// including both ends, then projected onto `Ξ`; projections that fall
/// inside `B_{r_in}(𝒜)` are discarded. An empty result means the annulus
/// misses `Ξ` at this resolution.
pub fn sample_region(
    target: &TargetSet,
    r_in: f64,
    r_out: f64,
    constraint: &ConstraintSet,
    plan: &SamplingPlan,
) -> Result<Vec<Point>> {
    if !(r_in >= 0.0) || !(r_out > r_in) {
        return Err(SpasError::Precondition(format!("need r_out > r_in >= 0, got [{r_in}, {r_out}]")));
    }
    check_dim(constraint.dim(), target.dim())?;
    let layers = plan.radial_refinements.max(1);
    let rays = target.rays(plan);
    let depth = target.interior_depth();
    let mut candidates = Vec::new();
    if r_in == 0.0 && depth > 0.0 {
        // interior of a ball target, center included once
        candidates.push(rays[0].at(-depth));
        for k in 1..layers {
            let t = -depth * (1.0 - k as f64 / layers as f64);
            candidates.extend(rays.iter().map(|ray| ray.at(t)));
        }
    }
    for ray in &rays {
        for k in 0..=layers {
            let t = r_in + (r_out - r_in) * k as f64 / layers as f64;
            candidates.push(ray.at(t));
        }
    }
    let tol = plan.boundary_tol;
    let projected: Vec<Option<Point>> = candidates
        .par_iter()
        .map(|p| -> Result<Option<Point>> {
            let q = constraint.project(p)?;
            let d = target.dist_unchecked(&q);
            Ok((d >= r_in - tol && d <= r_out + tol).then_some(q))
        })
        .collect::<Result<_>>()?;
    Ok(projected.into_iter().flatten().collect())
}

/// `n` random initial states in `Ξ ∩ (B̄_{r_out}(𝒜) \ B_{r_in}(𝒜))`.
///
/// The first rays along `±e_i` are placed exactly on the outer shell so
/// that the extreme initial distance is always represented; the rest are
/// uniform in direction and volume-uniform in radius.
pub fn sample_seeds(
    target: &TargetSet,
    r_in: f64,
    r_out: f64,
    constraint: &ConstraintSet,
    plan: &SamplingPlan,
    n: usize,
) -> Result<Vec<Point>> {
    if !(r_in >= 0.0) || !(r_out > r_in) {
        return Err(SpasError::Precondition(format!("need r_out > r_in >= 0, got [{r_in}, {r_out}]")));
    }
    check_dim(constraint.dim(), target.dim())?;
    let dim = target.dim();
    let rays = target.rays(plan);
    let mut rng = derived_rng(plan.rng_seed, TAG_SEEDS, &[r_in.to_bits(), r_out.to_bits(), n as u64]);
    let tol = plan.boundary_tol;
    let accept = |q: &Point| {
        let d = target.dist_unchecked(q);
        d >= r_in - tol && d <= r_out + tol
    };
    let mut seeds = Vec::with_capacity(n);
    for ray in rays.iter().take((2 * dim).min(n)) {
        let q = constraint.project(&ray.at(r_out))?;
        if accept(&q) {
            seeds.push(q);
        }
    }
    let t_lo = if r_in == 0.0 { -target.interior_depth() } else { r_in };
    let budget = 100 * n.max(1);
    let mut attempts = 0;
    while seeds.len() < n {
        if attempts >= budget {
            return Err(SpasError::SamplingStarved(format!(
                "only {} of {n} seeds found in the region [{r_in}, {r_out}] after {budget} draws",
                seeds.len()
            )));
        }
        attempts += 1;
        let dir = match random_direction(dim, &mut rng) {
            Some(d) => d,
            None => continue,
        };
        let ray = rays[rng.random_range(0..rays.len())].turned(dir);
        let u: f64 = rng.random();
        let t = if t_lo >= 0.0 {
            let p = dim as f64;
            (t_lo.powf(p) + u * (r_out.powf(p) - t_lo.powf(p))).powf(1.0 / p)
        } else {
            t_lo + u * (r_out - t_lo)
        };
        let q = constraint.project(&ray.at(t))?;
        if accept(&q) {
            seeds.push(q);
        }
    }
    Ok(seeds)
}
