//! Sampled verification of the Lyapunov conditions, scalar gain search and
//! the trajectory-level checks of stability and attractivity.
//!
//! Every check evaluates a finite sample. A pass means no violation was
//! found at the plan's resolution, which each report records.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpasError};
use crate::geometry::{sample_region, sample_seeds, ConstraintSet, Point, SamplingPlan, TargetSet};
use crate::lyapunov::{delta_v, max_dist_on_levelset, LyapunovFn};
use crate::report::{worst_slack, ConditionReport};
use crate::system::{GainBox, GainVector, ParamSystem};

/// Margin for strict inequalities.
pub const STRICT_MARGIN: f64 = 1e-9;
/// Margin for set containment along trajectories.
pub const CONTAINMENT_MARGIN: f64 = 1e-6;

pub type MarginFn = dyn Fn(&Point, &GainVector) -> f64 + Send + Sync;

/// Certificate parameters `(σ_o, ε_o, ρ_o, b_o)` and the margin function
/// `W_{σ_o,ε_o}` whose positivity and domination of `−ΔV` are checked.
#[derive(Clone)]
pub struct CertificateSpec {
    pub sigma_o: f64,
    pub eps_o: f64,
    pub rho_o: f64,
    pub b_o: f64,
    w: Arc<MarginFn>,
}

impl fmt::Debug for CertificateSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CertificateSpec")
            .field("sigma_o", &self.sigma_o)
            .field("eps_o", &self.eps_o)
            .field("rho_o", &self.rho_o)
            .field("b_o", &self.b_o)
            .finish_non_exhaustive()
    }
}

impl CertificateSpec {
    pub fn new<W>(sigma_o: f64, eps_o: f64, rho_o: f64, b_o: f64, w: W) -> Result<Self>
    where
        W: Fn(&Point, &GainVector) -> f64 + Send + Sync + 'static,
    {
        Self::from_arc(sigma_o, eps_o, rho_o, b_o, Arc::new(w))
    }

    pub fn from_arc(sigma_o: f64, eps_o: f64, rho_o: f64, b_o: f64, w: Arc<MarginFn>) -> Result<Self> {
        if !(eps_o >= 0.0) || !(rho_o > 0.0) || !(b_o > 0.0) {
            return Err(SpasError::Precondition(format!(
                "need eps_o >= 0, rho_o > 0, b_o > 0 (got {eps_o}, {rho_o}, {b_o})"
            )));
        }
        if !(sigma_o > eps_o + rho_o) || !sigma_o.is_finite() {
            return Err(SpasError::Precondition(format!(
                "sigma_o = {sigma_o} must exceed eps_o + rho_o = {}",
                eps_o + rho_o
            )));
        }
        Ok(CertificateSpec { sigma_o, eps_o, rho_o, b_o, w })
    }

    pub fn w(&self, x: &Point, gain: &GainVector) -> f64 {
        (self.w)(x, gain)
    }

    pub fn margin_fn(&self) -> Arc<MarginFn> {
        self.w.clone()
    }
}

/// Per-condition outcome of [`verify_conditions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationReport {
    pub pass: bool,
    pub gain: Vec<f64>,
    pub sigma_o: f64,
    pub eps_o: f64,
    pub rho_o: f64,
    pub b_o: f64,
    pub conditions: Vec<ConditionReport>,
    pub resolution: SamplingPlan,
}

impl VerificationReport {
    pub fn condition(&self, name: &str) -> Option<&ConditionReport> {
        self.conditions.iter().find(|c| c.condition == name)
    }
}

/// Checks, on samples,
/// P1: `W > 0` on `Ξ ∩ (B̄_{σ_o} \ B_{ε_o+ρ_o})`,
/// P2: `ΔV ≤ −W` on the same region, and
/// P3: `ΔV ≤ b_o` on `Ξ ∩ B̄_{ε_o+ρ_o}`.
pub fn verify_conditions(
    sys: &ParamSystem,
    v: &LyapunovFn,
    target: &TargetSet,
    spec: &CertificateSpec,
    gain: &GainVector,
    plan: &SamplingPlan,
) -> Result<VerificationReport> {
    let xi = sys.constraint();
    let inner_radius = spec.eps_o + spec.rho_o;
    let annulus = sample_region(target, inner_radius, spec.sigma_o, xi, plan)?;
    let core = sample_region(target, 0.0, inner_radius, xi, plan)?;

    let p1 = worst_slack(&annulus, |x| Ok(spec.w(x, gain) - STRICT_MARGIN))?;
    let mut p1 = ConditionReport::from_worst("P1", p1, annulus.len());
    if p1.worst_margin.is_some_and(|m| m <= 0.0) {
        p1.pass = false;
    }
    let p2 = worst_slack(&annulus, |x| Ok(-spec.w(x, gain) - delta_v(sys, v, x, gain)? + STRICT_MARGIN))?;
    let p2 = ConditionReport::from_worst("P2", p2, annulus.len());
    let p3 = worst_slack(&core, |x| Ok(spec.b_o - delta_v(sys, v, x, gain)? + STRICT_MARGIN))?;
    let p3 = ConditionReport::from_worst("P3", p3, core.len());

    let conditions = vec![p1, p2, p3];
    Ok(VerificationReport {
        pass: conditions.iter().all(|c| c.pass),
        gain: gain.0.clone(),
        sigma_o: spec.sigma_o,
        eps_o: spec.eps_o,
        rho_o: spec.rho_o,
        b_o: spec.b_o,
        conditions,
        resolution: plan.clone(),
    })
}

/// One evaluation of the admissibility predicate during gain search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainProbe {
    pub alpha: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainSearchResult {
    pub alpha_hat: f64,
    pub gain_box: GainBox,
    pub trace: Vec<GainProbe>,
}

pub const GAIN_REL_TOL: f64 = 1e-3;

/// Largest `α̂ ∈ (0, α_max]` at which [`verify_conditions`] passes, found by
/// bisection under the assumption that admissible gains are down-closed.
/// The assumption is spot-checked at `α̂/2` and `α̂/10`.
pub fn gain_search<F>(
    sys: &ParamSystem,
    v: &LyapunovFn,
    target: &TargetSet,
    spec_family: F,
    plan: &SamplingPlan,
    alpha_max: f64,
) -> Result<GainSearchResult>
where
    F: Fn(f64) -> Result<CertificateSpec>,
{
    if sys.gain_dim() != 1 {
        return Err(SpasError::Precondition(format!("gain search needs a scalar gain, system has {}", sys.gain_dim())));
    }
    if !(alpha_max > 0.0) || !alpha_max.is_finite() {
        return Err(SpasError::Precondition(format!("alpha_max must be positive, got {alpha_max}")));
    }
    let mut trace = Vec::new();
    let mut admissible = |alpha: f64| -> Result<bool> {
        let pass = match spec_family(alpha) {
            Err(e) => {
                log::debug!("no certificate at alpha = {alpha}: {e}");
                false
            }
            Ok(spec) => match verify_conditions(sys, v, target, &spec, &GainVector::scalar(alpha), plan) {
                Ok(report) => report.pass,
                Err(SpasError::NonfiniteState { .. }) => false,
                Err(e) => return Err(e),
            },
        };
        trace.push(GainProbe { alpha, pass });
        Ok(pass)
    };

    let alpha_hat = if admissible(alpha_max)? {
        alpha_max
    } else {
        let mut lo = alpha_max * 1e-6;
        if !admissible(lo)? {
            return Err(SpasError::NoAdmissibleGain {
                alpha_max,
                reason: format!("conditions fail even at alpha = {lo:e}"),
            });
        }
        let mut hi = alpha_max;
        while hi - lo > GAIN_REL_TOL * hi {
            let mid = 0.5 * (lo + hi);
            if admissible(mid)? {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    for alpha in [alpha_hat / 2.0, alpha_hat / 10.0] {
        if !admissible(alpha)? {
            return Err(SpasError::NotDownClosed { alpha });
        }
    }
    Ok(GainSearchResult { alpha_hat, gain_box: GainBox::new(vec![alpha_hat])?, trace })
}

/// Where and when a trajectory broke a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryEvent {
    pub seed: usize,
    pub t: usize,
    pub state: Vec<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvarianceReport {
    pub pass: bool,
    pub level: f64,
    pub seeds: usize,
    pub horizon: usize,
    pub exits: usize,
    /// Largest `V(ξ(t)) − l` seen over all seeds and times.
    pub max_overshoot: f64,
    pub first_exit: Option<TrajectoryEvent>,
}

/// Initial states in `Γ_l ∩ Ξ` by rejection from `B̄_{σ̂}(𝒜)`, where `σ̂` is
/// the radius of the smallest ball containing `Γ_l`.
pub fn sample_sublevel_seeds(
    sys: &ParamSystem,
    v: &LyapunovFn,
    target: &TargetSet,
    level: f64,
    plan: &SamplingPlan,
    n: usize,
) -> Result<Vec<Point>> {
    let sigma_hat = max_dist_on_levelset(v, target, level, plan)?.radius;
    let mut draws = 4 * n.max(1);
    loop {
        let pool = sample_seeds(target, 0.0, sigma_hat, sys.constraint(), plan, draws)?;
        let accepted: Vec<Point> = pool.into_iter().filter(|x| v.value(x) <= level).take(n).collect();
        if accepted.len() == n {
            return Ok(accepted);
        }
        if draws >= 256 * n.max(1) {
            return Err(SpasError::SamplingStarved(format!(
                "only {} of {n} initial states found in the sublevel set at level {level}",
                accepted.len()
            )));
        }
        draws *= 4;
    }
}

/// Rolls out from seeds in `Γ_l ∩ Ξ` and records any exit from `Γ_l`.
#[allow(clippy::too_many_arguments)]
pub fn check_forward_invariance(
    sys: &ParamSystem,
    v: &LyapunovFn,
    target: &TargetSet,
    level: f64,
    gain: &GainVector,
    plan: &SamplingPlan,
    horizon: usize,
    n_seeds: usize,
) -> Result<InvarianceReport> {
    if !(level > 0.0) {
        return Err(SpasError::Precondition(format!("level must be positive, got {level}")));
    }
    let seeds = sample_sublevel_seeds(sys, v, target, level, plan, n_seeds)?;
    let margin = CONTAINMENT_MARGIN * level.max(1.0);
    let per_seed: Vec<(f64, Option<TrajectoryEvent>)> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, x0)| -> Result<_> {
            let traj = sys.rollout(x0, gain, horizon)?;
            let mut overshoot = f64::NEG_INFINITY;
            let mut exit = None;
            for (t, x) in traj.states.iter().enumerate() {
                let val = v.value(x);
                overshoot = overshoot.max(val - level);
                if exit.is_none() && val > level + margin {
                    exit = Some(TrajectoryEvent { seed: i, t, state: x.as_slice().to_vec(), value: val });
                }
            }
            Ok((overshoot, exit))
        })
        .collect::<Result<_>>()?;
    let exits = per_seed.iter().filter(|(_, e)| e.is_some()).count();
    Ok(InvarianceReport {
        pass: exits == 0,
        level,
        seeds: seeds.len(),
        horizon,
        exits,
        max_overshoot: per_seed.iter().map(|(o, _)| *o).fold(f64::NEG_INFINITY, f64::max),
        first_exit: per_seed.into_iter().find_map(|(_, e)| e),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityReport {
    pub pass: bool,
    pub delta: f64,
    pub rho_s: f64,
    pub seeds: usize,
    pub horizon: usize,
    /// Seeds whose trajectory left `B̄_{ρ_s}(𝒜)`.
    pub violations: usize,
    pub max_excursion: f64,
    /// Seed and time of the largest excursion.
    pub worst: Option<TrajectoryEvent>,
}

/// Trajectories from `B̄_δ(𝒜) ∩ Ξ` must stay in `B̄_{ρ_s}(𝒜)` up to `T`.
#[allow(clippy::too_many_arguments)]
pub fn check_practical_stability(
    sys: &ParamSystem,
    target: &TargetSet,
    delta: f64,
    rho_s: f64,
    gain: &GainVector,
    plan: &SamplingPlan,
    horizon: usize,
    n_seeds: usize,
) -> Result<StabilityReport> {
    if !(delta > 0.0 && delta <= rho_s) {
        return Err(SpasError::Precondition(format!("need 0 < delta <= rho_s, got delta = {delta}, rho_s = {rho_s}")));
    }
    let seeds = sample_seeds(target, 0.0, delta, sys.constraint(), plan, n_seeds)?;
    let per_seed: Vec<(TrajectoryEvent, bool)> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, x0)| -> Result<_> {
            let traj = sys.rollout(x0, gain, horizon)?;
            let mut worst = TrajectoryEvent { seed: i, t: 0, state: Vec::new(), value: f64::NEG_INFINITY };
            for (t, x) in traj.states.iter().enumerate() {
                let d = target.dist_unchecked(x);
                if d > worst.value {
                    worst = TrajectoryEvent { seed: i, t, state: x.as_slice().to_vec(), value: d };
                }
            }
            let violated = worst.value > rho_s + CONTAINMENT_MARGIN;
            Ok((worst, violated))
        })
        .collect::<Result<_>>()?;
    let violations = per_seed.iter().filter(|(_, v)| *v).count();
    let worst = per_seed
        .into_iter()
        .map(|(w, _)| w)
        .reduce(|a, b| if b.value > a.value { b } else { a });
    Ok(StabilityReport {
        pass: violations == 0,
        delta,
        rho_s,
        seeds: seeds.len(),
        horizon,
        violations,
        max_excursion: worst.as_ref().map_or(0.0, |w| w.value),
        worst,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AttractivityReport {
    pub pass: bool,
    pub sigma: f64,
    pub rho_a: f64,
    pub epsilon: f64,
    pub seeds: usize,
    pub horizon: usize,
    /// Smallest `T` after which every trajectory stays in `B̄_{ρ_a+ε}(𝒜)`.
    pub hitting_time: Option<usize>,
    pub never_entered: usize,
    pub re_exited: usize,
    /// Largest distance over all seeds at times `t ≥ T` (or over the whole
    /// horizon when no `T` exists).
    pub terminal_radius: f64,
    pub first_failure: Option<TrajectoryEvent>,
}

/// Uniform attractivity of `B̄_{ρ_a}(𝒜)` on `B̄_σ(𝒜)`: every trajectory must
/// enter `B̄_{ρ_a+ε}(𝒜)` by `T_max` and stay there.
#[allow(clippy::too_many_arguments)]
pub fn check_uniform_attractivity(
    sys: &ParamSystem,
    target: &TargetSet,
    sigma: f64,
    rho_a: f64,
    epsilon: f64,
    gain: &GainVector,
    plan: &SamplingPlan,
    t_max: usize,
    n_seeds: usize,
) -> Result<AttractivityReport> {
    if !(sigma > rho_a) || !(rho_a >= 0.0) || !(epsilon > 0.0) {
        return Err(SpasError::Precondition(format!(
            "need sigma > rho_a >= 0 and epsilon > 0 (got {sigma}, {rho_a}, {epsilon})"
        )));
    }
    let inflated = sample_region(target, 0.0, rho_a + epsilon, sys.constraint(), plan)?;
    if let Some(p) = inflated.iter().find(|p| target.dist_unchecked(p) > sigma + plan.boundary_tol) {
        return Err(SpasError::Precondition(format!(
            "B_eps(B_rho_a) is not inside B_sigma: {:?} is at distance {}",
            p.as_slice(),
            target.dist_unchecked(p)
        )));
    }
    let threshold = rho_a + epsilon + CONTAINMENT_MARGIN;
    let seeds = sample_seeds(target, 0.0, sigma, sys.constraint(), plan, n_seeds)?;

    struct Outcome {
        entry: Option<usize>,
        re_exit: Option<TrajectoryEvent>,
        dists: Vec<f64>,
        last: TrajectoryEvent,
    }
    let outcomes: Vec<Outcome> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, x0)| -> Result<Outcome> {
            let traj = sys.rollout(x0, gain, t_max.max(1))?;
            let states = &traj.states[..=t_max];
            let dists: Vec<f64> = states.iter().map(|x| target.dist_unchecked(x)).collect();
            let entry = dists.iter().position(|&d| d <= threshold);
            let re_exit = entry.and_then(|e| {
                (e..dists.len()).find(|&t| dists[t] > threshold).map(|t| TrajectoryEvent {
                    seed: i,
                    t,
                    state: states[t].as_slice().to_vec(),
                    value: dists[t],
                })
            });
            let last = TrajectoryEvent {
                seed: i,
                t: t_max,
                state: states[t_max].as_slice().to_vec(),
                value: dists[t_max],
            };
            Ok(Outcome { entry, re_exit, dists, last })
        })
        .collect::<Result<_>>()?;

    let never_entered = outcomes.iter().filter(|o| o.entry.is_none()).count();
    let re_exited = outcomes.iter().filter(|o| o.re_exit.is_some()).count();
    let pass = never_entered == 0 && re_exited == 0;
    let hitting_time = pass.then(|| outcomes.iter().filter_map(|o| o.entry).max().unwrap_or(0));
    let from = hitting_time.unwrap_or(0);
    let terminal_radius = outcomes
        .iter()
        .flat_map(|o| o.dists[from..].iter().copied())
        .fold(0.0, f64::max);
    let first_failure = outcomes.into_iter().find_map(|o| match (o.entry, o.re_exit) {
        (None, _) => Some(o.last),
        (Some(_), Some(ev)) => Some(ev),
        _ => None,
    });
    Ok(AttractivityReport {
        pass,
        sigma,
        rho_a,
        epsilon,
        seeds: seeds.len(),
        horizon: t_max,
        hitting_time,
        never_entered,
        re_exited,
        terminal_radius,
        first_failure,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeBound {
    pub gamma: f64,
    pub gamma_witness: Vec<f64>,
    pub v_sup: f64,
    pub t_bound: u64,
    pub samples_used: usize,
}

/// `γ = min W` over `(B̄_{σ̂} \ B_ε(B̄_{ρ_a})) ∩ Ξ` and the descent bound
/// `T ≤ ⌈V_sup / γ⌉` that follows from `V(ξ⁺) ≤ V(ξ) − γ`.
///
/// When `v_sup` is `None` it is the sampled maximum of `V` over
/// `B̄_{σ̂}(𝒜) ∩ Ξ`.
#[allow(clippy::too_many_arguments)]
pub fn gamma_and_time_bound(
    w: &MarginFn,
    target: &TargetSet,
    sigma_hat: f64,
    rho_a: f64,
    epsilon: f64,
    constraint: &ConstraintSet,
    gain: &GainVector,
    plan: &SamplingPlan,
    v: &LyapunovFn,
    v_sup: Option<f64>,
) -> Result<TimeBound> {
    let region = sample_region(target, rho_a + epsilon, sigma_hat, constraint, plan)?;
    let worst = worst_slack(&region, |x| Ok(w(x, gain)))?
        .ok_or_else(|| SpasError::Precondition("the descent region has no samples".into()))?;
    if !(worst.slack > 0.0) {
        return Err(SpasError::NonpositiveGamma { gamma: worst.slack });
    }
    let v_sup = match v_sup {
        Some(s) => s,
        None => sample_region(target, 0.0, sigma_hat, constraint, plan)?
            .iter()
            .map(|x| v.value(x))
            .fold(0.0, f64::max),
    };
    let t_bound = (v_sup / worst.slack).ceil().max(0.0) as u64;
    Ok(TimeBound {
        gamma: worst.slack,
        gamma_witness: worst.at.as_slice().to_vec(),
        v_sup,
        t_bound,
        samples_used: region.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpspReport {
    pub pass: bool,
    pub near_target: ConditionReport,
    pub descent: ConditionReport,
    pub phi_positive: ConditionReport,
    /// Samples farther than `σ` from `𝒜`.
    pub ignored: usize,
}

/// Pointwise pseudogradient inequalities for sampled (point, direction)
/// pairs: `∇V·s ≥ −b` on `B̄_ε(𝒜)` and `∇V·s ≥ φ > 0` on `B̄_σ \ B_ε`.
/// Points are assumed to lie in `Ξ`.
pub fn check_spsp<Phi>(
    samples: &[(Point, Point)],
    v: &LyapunovFn,
    target: &TargetSet,
    epsilon: f64,
    b: f64,
    sigma: f64,
    phi: Phi,
) -> Result<SpspReport>
where
    Phi: Fn(&Point) -> f64 + Sync,
{
    if !v.has_gradient() {
        return Err(SpasError::Precondition("the SPSP check needs the gradient of V".into()));
    }
    if !(sigma > epsilon) || !(epsilon >= 0.0) || !(b >= 0.0) {
        return Err(SpasError::Precondition(format!("need sigma > epsilon >= 0 and b >= 0 (got {sigma}, {epsilon}, {b})")));
    }
    let mut near = Vec::new();
    let mut ring = Vec::new();
    let mut ignored = 0;
    for (i, (y, _)) in samples.iter().enumerate() {
        let d = target.dist(y)?;
        if d <= epsilon {
            near.push(i);
        } else if d <= sigma {
            ring.push(i);
        } else {
            ignored += 1;
        }
    }
    let pairing = |idx: &[usize]| idx.iter().map(|&i| samples[i].0.clone()).collect::<Vec<_>>();
    let lookup = |p: &Point| -> &Point {
        &samples.iter().find(|(y, _)| y == p).expect("sample point").1
    };
    let dot = |y: &Point| -> f64 { v.gradient(y).expect("gradient checked").dot(lookup(y)) };

    let near_pts = pairing(&near);
    let ring_pts = pairing(&ring);
    let w = worst_slack(&near_pts, |y| Ok(dot(y) + b + STRICT_MARGIN))?;
    let near_target = ConditionReport::from_worst("grad V . s >= -b near target", w, near_pts.len());
    let w = worst_slack(&ring_pts, |y| Ok(dot(y) - phi(y) + STRICT_MARGIN))?;
    let descent = ConditionReport::from_worst("grad V . s >= phi on annulus", w, ring_pts.len());
    let w = worst_slack(&ring_pts, |y| Ok(phi(y)))?;
    let mut phi_positive = ConditionReport::from_worst("phi > 0 on annulus", w, ring_pts.len());
    if phi_positive.worst_margin.is_some_and(|m| m <= 0.0) {
        phi_positive.pass = false;
    }
    // an empty near-target band is vacuous
    let near_ok = near_target.pass || near_pts.is_empty();
    Ok(SpspReport {
        pass: near_ok && descent.pass && phi_positive.pass,
        near_target,
        descent,
        phi_positive,
        ignored,
    })
}

/// Pairs each sample of `Ξ ∩ B̄_σ(𝒜)` with the direction field at it.
pub fn direction_samples<S>(
    target: &TargetSet,
    sigma: f64,
    constraint: &ConstraintSet,
    plan: &SamplingPlan,
    field: S,
) -> Result<Vec<(Point, Point)>>
where
    S: Fn(&Point) -> Point,
{
    Ok(sample_region(target, 0.0, sigma, constraint, plan)?
        .into_iter()
        .map(|y| {
            let s = field(&y);
            (y, s)
        })
        .collect())
}

/// Combined trajectory-level verdict: practical stability and uniform
/// attractivity at one gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpasVerdict {
    pub pass: bool,
    pub gain: Vec<f64>,
    pub gain_box: Option<GainBox>,
    pub stability: StabilityReport,
    pub attractivity: AttractivityReport,
}

impl SpasVerdict {
    pub fn new(gain: &GainVector, gain_box: Option<GainBox>, stability: StabilityReport, attractivity: AttractivityReport) -> Self {
        SpasVerdict {
            pass: stability.pass && attractivity.pass,
            gain: gain.0.clone(),
            gain_box,
            stability,
            attractivity,
        }
    }
}
