//! Lyapunov candidates: evaluation, `ΔV` along the dynamics, audits of
//! positive definiteness and radial unboundedness, and the shell / level-set
//! extremizers every construction is built from.
//!
//! Extremizers are sampling estimates. Shell extrema are taken over the
//! rays of [`TargetSet::rays`] and then polished by a derivative-free
//! pattern search over the ray direction. Level-set radii come from a
//! doubling search along each ray followed by bisection.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpasError};
use crate::geometry::{sample_region, ConstraintSet, Point, Ray, SamplingPlan, TargetSet};
use crate::report::{argmax, argmin, worst_slack, ConditionReport};
use crate::system::{GainVector, ParamSystem};

pub type ValueFn = dyn Fn(&Point) -> f64 + Send + Sync;
pub type GradientFn = dyn Fn(&Point) -> Point + Send + Sync;

/// Candidate Lyapunov function `V ≥ 0`, optionally with its gradient.
#[derive(Clone)]
pub struct LyapunovFn {
    value: Arc<ValueFn>,
    gradient: Option<Arc<GradientFn>>,
}

impl fmt::Debug for LyapunovFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LyapunovFn").field("has_gradient", &self.gradient.is_some()).finish()
    }
}

impl LyapunovFn {
    pub fn new<F>(value: F) -> Self
    where
        F: Fn(&Point) -> f64 + Send + Sync + 'static,
    {
        LyapunovFn { value: Arc::new(value), gradient: None }
    }

    pub fn with_gradient<G>(mut self, gradient: G) -> Self
    where
        G: Fn(&Point) -> Point + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(gradient));
        self
    }

    /// `V(x) = c·dist(x, 𝒜)²` with gradient `2c(x − P_𝒜(x))`.
    pub fn scaled_dist_squared(target: TargetSet, c: f64) -> Self {
        let t = target.clone();
        LyapunovFn::new(move |x| c * t.dist_unchecked(x).powi(2)).with_gradient(move |x| {
            let p = target.project(x).expect("dimension checked by caller");
            (x - p) * (2.0 * c)
        })
    }

    /// `V(x) = Σ w_i (x_i − c_i)²`.
    pub fn weighted_quadratic(weights: Vec<f64>, center: Vec<f64>) -> Self {
        let (w, c) = (weights.clone(), center.clone());
        LyapunovFn::new(move |x| x.iter().enumerate().map(|(i, v)| w[i] * (v - c[i]).powi(2)).sum())
            .with_gradient(move |x| {
                Point::from_iterator(x.len(), x.iter().enumerate().map(|(i, v)| 2.0 * weights[i] * (v - center[i])))
            })
    }

    pub fn value(&self, x: &Point) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &Point) -> Option<Point> {
        self.gradient.as_ref().map(|g| g(x))
    }

    pub fn has_gradient(&self) -> bool {
        self.gradient.is_some()
    }
}

/// A sampled extremum of `V` over a shell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelEstimate {
    pub level: f64,
    pub achieved_at: Vec<f64>,
    pub samples_used: usize,
    pub tol: f64,
}

/// A sampled extremal distance from `𝒜` over a level set boundary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiusEstimate {
    pub radius: f64,
    pub achieved_at: Vec<f64>,
    pub samples_used: usize,
    pub tol: f64,
    /// Rays on which `V − l` changed sign more than once on the doubling grid.
    pub nonmonotone_rays: usize,
}

/// `ΔV(ξ) = V(P_Ξ[f(ξ; π)]) − V(ξ)`.
pub fn delta_v(sys: &ParamSystem, v: &LyapunovFn, x: &Point, gain: &GainVector) -> Result<f64> {
    let next = sys.step(x, gain)?;
    Ok(v.value(&next) - v.value(x))
}

/// Positive definiteness audit on `B̄_{r_max}(𝒜)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositiveDefiniteAudit {
    pub pass: bool,
    pub vanishes_on_target: ConditionReport,
    pub positive_off_target: ConditionReport,
}

const ZERO_TOL: f64 = 1e-9;

pub fn audit_positive_definite(
    v: &LyapunovFn,
    target: &TargetSet,
    r_max: f64,
    plan: &SamplingPlan,
) -> Result<PositiveDefiniteAudit> {
    if !(r_max > 0.0) {
        return Err(SpasError::Precondition(format!("r_max must be positive, got {r_max}")));
    }
    let reps = target.representatives(plan);
    let on_target = worst_slack(&reps, |a| Ok(ZERO_TOL - v.value(a)))?;
    let vanishes = ConditionReport::from_worst("V vanishes on target", on_target, reps.len());

    let space = ConstraintSet::all_space(target.dim());
    let off: Vec<Point> = sample_region(target, 0.0, r_max, &space, plan)?
        .into_iter()
        .filter(|x| target.dist_unchecked(x) > plan.boundary_tol)
        .collect();
    let off_target = worst_slack(&off, |x| Ok(v.value(x)))?;
    let mut positive = ConditionReport::from_worst("V positive off target", off_target, off.len());
    // strict inequality: zero slack is a failure
    if positive.worst_margin.is_some_and(|m| m <= 0.0) {
        positive.pass = false;
    }
    Ok(PositiveDefiniteAudit { pass: vanishes.pass && positive.pass, vanishes_on_target: vanishes, positive_off_target: positive })
}

/// Heuristic radial unboundedness audit: shell minima must increase and the
/// last must exceed the first by `growth_factor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialAudit {
    pub pass: bool,
    pub radii: Vec<f64>,
    pub shell_minima: Vec<f64>,
    pub growth_factor: f64,
    pub note: String,
}

pub const DEFAULT_GROWTH_FACTOR: f64 = 4.0;

pub fn audit_radially_unbounded(
    v: &LyapunovFn,
    target: &TargetSet,
    radii: &[f64],
    plan: &SamplingPlan,
    growth_factor: f64,
) -> Result<RadialAudit> {
    if radii.len() < 2 {
        return Err(SpasError::Precondition("need at least two radii".into()));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) || !(radii[0] > 0.0) {
        return Err(SpasError::Precondition(format!("radii must be positive and increasing: {radii:?}")));
    }
    let minima = radii
        .iter()
        .map(|r| min_v_on_shell(v, target, *r, plan).map(|e| e.level))
        .collect::<Result<Vec<_>>>()?;
    let increasing = minima.windows(2).all(|w| w[1] > w[0]);
    let (first, last) = (minima[0], minima[minima.len() - 1]);
    let grows = if first > 0.0 { last >= growth_factor * first } else { last > 0.0 };
    Ok(RadialAudit {
        pass: increasing && grows,
        radii: radii.to_vec(),
        shell_minima: minima,
        growth_factor,
        note: "heuristic audit on sampled shells, not a proof".into(),
    })
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Extreme {
    Max,
    Min,
}

impl Extreme {
    fn better(self, candidate: f64, incumbent: f64) -> bool {
        match self {
            Extreme::Max => candidate > incumbent,
            Extreme::Min => candidate < incumbent,
        }
    }

    fn pick(self, values: &[f64]) -> Option<(usize, f64)> {
        match self {
            Extreme::Max => argmax(values),
            Extreme::Min => argmin(values),
        }
    }
}

/// Coordinate-wise pattern search over the unit direction of `ray`,
/// maximizing or minimizing `objective` (which returns `None` for
/// candidates it rejects). The step is halved `rounds` times.
fn refine_direction<F>(ray: &Ray, start: f64, rounds: usize, extreme: Extreme, objective: F) -> Result<(Ray, f64, usize)>
where
    F: Fn(&Ray) -> Result<Option<f64>>,
{
    let dim = ray.dir.len();
    let mut best_ray = ray.clone();
    let mut best = start;
    let mut evals = 0;
    if dim < 2 {
        return Ok((best_ray, best, evals));
    }
    let mut step = 0.5;
    for _ in 0..rounds {
        let mut improved = true;
        let mut sweeps = 0;
        while improved && sweeps < 8 {
            improved = false;
            sweeps += 1;
            for i in 0..dim {
                for sign in [1.0, -1.0] {
                    let mut d = best_ray.dir.clone();
                    d[i] += sign * step;
                    let n = d.norm();
                    if n < 1e-12 {
                        continue;
                    }
                    let cand = best_ray.turned(d / n);
                    evals += 1;
                    if let Some(val) = objective(&cand)? {
                        if extreme.better(val, best) {
                            best = val;
                            best_ray = cand;
                            improved = true;
                        }
                    }
                }
            }
        }
        step *= 0.5;
    }
    Ok((best_ray, best, evals))
}

const POLISHED_CANDIDATES: usize = 4;

fn extremize_on_shell(
    v: &LyapunovFn,
    target: &TargetSet,
    r: f64,
    plan: &SamplingPlan,
    extreme: Extreme,
) -> Result<LevelEstimate> {
    if !(r > 0.0) {
        return Err(SpasError::Precondition(format!("shell radius must be positive, got {r}")));
    }
    let tol = plan.boundary_tol;
    let rays: Vec<Ray> = target
        .rays(plan)
        .into_iter()
        .filter(|ray| (target.dist_unchecked(&ray.at(r)) - r).abs() <= tol)
        .collect();
    if rays.is_empty() {
        return Err(SpasError::SamplingStarved(format!("no shell samples at radius {r}")));
    }
    let values: Vec<f64> = rays.par_iter().map(|ray| v.value(&ray.at(r))).collect();
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = values[a].total_cmp(&values[b]);
        let ord = if extreme == Extreme::Max { ord.reverse() } else { ord };
        ord.then(a.cmp(&b))
    });
    let objective = |ray: &Ray| -> Result<Option<f64>> {
        let p = ray.at(r);
        Ok(((target.dist_unchecked(&p) - r).abs() <= tol).then(|| v.value(&p)))
    };
    let polished = order
        .iter()
        .take(POLISHED_CANDIDATES)
        .map(|&i| refine_direction(&rays[i], values[i], plan.radial_refinements, extreme, objective))
        .collect::<Result<Vec<_>>>()?;
    let mut samples_used = values.len();
    let mut best_val = values[order[0]];
    let mut best_at = rays[order[0]].at(r);
    for (ray, val, evals) in polished {
        samples_used += evals;
        if extreme.better(val, best_val) {
            best_val = val;
            best_at = ray.at(r);
        }
    }
    Ok(LevelEstimate { level: best_val, achieved_at: best_at.as_slice().to_vec(), samples_used, tol })
}

/// Sampled `max V` over `{ξ : dist(ξ, 𝒜) = r}`.
pub fn max_v_on_shell(v: &LyapunovFn, target: &TargetSet, r: f64, plan: &SamplingPlan) -> Result<LevelEstimate> {
    extremize_on_shell(v, target, r, plan, Extreme::Max)
}

/// Sampled `min V` over `{ξ : dist(ξ, 𝒜) = r}`.
pub fn min_v_on_shell(v: &LyapunovFn, target: &TargetSet, r: f64, plan: &SamplingPlan) -> Result<LevelEstimate> {
    extremize_on_shell(v, target, r, plan, Extreme::Min)
}

const RAY_T_MIN_EXP: i32 = -12;
const RAY_T_MAX_EXP: i32 = 40;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Crossing {
    First,
    Last,
}

struct RayHit {
    t: f64,
    nonmonotone: bool,
    evals: usize,
}

/// Boundary of `Γ_l` along a ray. The doubling grid `2^k`, `k` from
/// `RAY_T_MIN_EXP` to `RAY_T_MAX_EXP`, brackets the first or the last
/// crossing of `V = l`, which bisection then resolves. The returned `t`
/// is on the `V ≤ l` side of the bracket.
fn level_crossing(v: &LyapunovFn, ray: &Ray, level: f64, which: Crossing) -> Result<RayHit> {
    let exceeds = |t: f64| {
        let val = v.value(&ray.at(t));
        !(val <= level)
    };
    let grid: Vec<f64> = (RAY_T_MIN_EXP..=RAY_T_MAX_EXP).map(|k| 2f64.powi(k)).collect();
    let above: Vec<bool> = grid.iter().map(|&t| exceeds(t)).collect();
    let mut evals = grid.len();
    let mut sign_changes = 0;
    let mut prev = false; // V(anchor) = 0 ≤ l
    for &a in &above {
        if a != prev {
            sign_changes += 1;
        }
        prev = a;
    }
    let bracket = match which {
        Crossing::First => above.iter().position(|&a| a),
        Crossing::Last => {
            if *above.last().unwrap() {
                above.iter().rposition(|&a| !a).map(|k| k + 1).or(Some(0))
            } else {
                None
            }
        }
    };
    let k = bracket.ok_or_else(|| SpasError::RayUnbounded { direction: ray.dir.as_slice().to_vec(), level })?;
    let mut hi = grid[k];
    let mut lo = if k == 0 { 0.0 } else { grid[k - 1] };
    for _ in 0..200 {
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        evals += 1;
        if exceeds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(RayHit { t: lo, nonmonotone: sign_changes > 1, evals })
}

fn extremize_on_levelset(
    v: &LyapunovFn,
    target: &TargetSet,
    level: f64,
    plan: &SamplingPlan,
    extreme: Extreme,
) -> Result<RadiusEstimate> {
    if !(level > 0.0) {
        return Err(SpasError::Precondition(format!("level must be positive, got {level}")));
    }
    let which = match extreme {
        Extreme::Max => Crossing::Last,
        Extreme::Min => Crossing::First,
    };
    let rays = target.rays(plan);
    let hits: Vec<RayHit> = rays.par_iter().map(|ray| level_crossing(v, ray, level, which)).collect::<Result<_>>()?;
    let radii: Vec<f64> = rays.iter().zip(&hits).map(|(ray, h)| target.dist_unchecked(&ray.at(h.t))).collect();
    let (best_idx, mut best) = extreme.pick(&radii).expect("at least one ray");
    let mut samples_used: usize = hits.iter().map(|h| h.evals).sum();
    let nonmonotone_rays = hits.iter().filter(|h| h.nonmonotone).count();

    let objective = |ray: &Ray| -> Result<Option<f64>> {
        let hit = level_crossing(v, ray, level, which)?;
        Ok(Some(target.dist_unchecked(&ray.at(hit.t))))
    };
    let (ray, val, evals) = refine_direction(&rays[best_idx], best, plan.radial_refinements, extreme, objective)?;
    // each pattern-search evaluation is a full ray search
    samples_used += evals * (RAY_T_MAX_EXP - RAY_T_MIN_EXP + 1) as usize;
    let mut at = rays[best_idx].at(hits[best_idx].t);
    if extreme.better(val, best) {
        best = val;
        at = ray.at(level_crossing(v, &ray, level, which)?.t);
    }
    Ok(RadiusEstimate {
        radius: best,
        achieved_at: at.as_slice().to_vec(),
        samples_used,
        tol: plan.boundary_tol,
        nonmonotone_rays,
    })
}

/// Radius of the smallest ball around `𝒜` containing `Γ_l` (last crossing
/// along each ray).
pub fn max_dist_on_levelset(v: &LyapunovFn, target: &TargetSet, level: f64, plan: &SamplingPlan) -> Result<RadiusEstimate> {
    extremize_on_levelset(v, target, level, plan, Extreme::Max)
}

/// Radius of the largest ball around `𝒜` inside `Γ_l` (first crossing
/// along each ray).
pub fn min_dist_on_levelset(v: &LyapunovFn, target: &TargetSet, level: f64, plan: &SamplingPlan) -> Result<RadiusEstimate> {
    extremize_on_levelset(v, target, level, plan, Extreme::Min)
}

/// Boundary points of `Γ_l` along every ray (last crossing), for plotting
/// and containment checks.
pub fn levelset_boundary(v: &LyapunovFn, target: &TargetSet, level: f64, plan: &SamplingPlan) -> Result<Vec<Point>> {
    if !(level > 0.0) {
        return Err(SpasError::Precondition(format!("level must be positive, got {level}")));
    }
    target
        .rays(plan)
        .par_iter()
        .map(|ray| level_crossing(v, ray, level, Crossing::Last).map(|h| ray.at(h.t)))
        .collect()
}
