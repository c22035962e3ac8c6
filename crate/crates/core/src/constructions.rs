//! Nested ball / sublevel-set constructions that turn a Lyapunov candidate
//! into explicit radii and levels, plus a sampled check of the containment
//! chain they are supposed to satisfy.
//!
//! Notation: `Γ_l = {ξ : V(ξ) ≤ l}` and `B̄_r = B̄_r(𝒜)`.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpasError};
use crate::geometry::{sample_region, ConstraintSet, SamplingPlan, TargetSet};
use crate::lyapunov::{levelset_boundary, max_dist_on_levelset, max_v_on_shell, min_dist_on_levelset, min_v_on_shell, LyapunovFn};
use crate::report::{worst_slack, ConditionReport};

/// Safety margin applied to the strict inequalities of the constructions.
pub const DEFAULT_SLACK: f64 = 1e-6;

/// `Γ_{l̂}` is the smallest sublevel set containing `B̄_{σ̃}`, and
/// `B̄_{σ̂}` the smallest ball containing `Γ_{l̂}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuterConstruction {
    pub sigma_tilde: f64,
    pub l_hat: f64,
    pub sigma_hat: f64,
}

/// Inflation of `B̄_{ε_o}` through two sublevel sets, ending at the
/// practical-stability floor `ρ̌_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnerConstruction {
    pub eps_o: f64,
    pub l_o: f64,
    pub delta_check: f64,
    pub l_check: f64,
    pub rho_check_s: f64,
}

/// Shrinking of `B̄_{ρ_s}` through two sublevel sets, giving the
/// practical-stability `δ` and the certificate radius `ρ_{o,s}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackwardConstruction {
    pub rho_s: f64,
    pub eps_o: f64,
    pub l_rho_s: f64,
    pub delta: f64,
    pub l_delta: f64,
    pub rho_o_s: f64,
}

pub fn construct_outer(v: &LyapunovFn, target: &TargetSet, sigma_tilde: f64, plan: &SamplingPlan) -> Result<OuterConstruction> {
    if !(sigma_tilde > 0.0) {
        return Err(SpasError::Precondition(format!("sigma_tilde must be positive, got {sigma_tilde}")));
    }
    let l_hat = max_v_on_shell(v, target, sigma_tilde, plan)?.level;
    let sigma_hat = max_dist_on_levelset(v, target, l_hat, plan)?.radius;
    Ok(OuterConstruction { sigma_tilde, l_hat, sigma_hat })
}

pub fn construct_inner(v: &LyapunovFn, target: &TargetSet, eps_o: f64, plan: &SamplingPlan) -> Result<InnerConstruction> {
    if !(eps_o >= 0.0) {
        return Err(SpasError::Precondition(format!("eps_o must be nonnegative, got {eps_o}")));
    }
    if eps_o == 0.0 {
        return Ok(InnerConstruction { eps_o, l_o: 0.0, delta_check: 0.0, l_check: 0.0, rho_check_s: 0.0 });
    }
    let l_o = max_v_on_shell(v, target, eps_o, plan)?.level;
    let delta_check = max_dist_on_levelset(v, target, l_o, plan)?.radius;
    let l_check = max_v_on_shell(v, target, delta_check, plan)?.level;
    let rho_check_s = max_dist_on_levelset(v, target, l_check, plan)?.radius;
    Ok(InnerConstruction { eps_o, l_o, delta_check, l_check, rho_check_s })
}

/// The backward chain without the `ρ_s > ρ̌_s` and `ρ_{o,s} > 0` checks.
/// Useful at the pivot `ρ_s = ρ̌_s`, where it should reproduce the inner
/// construction.
pub fn backward_chain(
    v: &LyapunovFn,
    target: &TargetSet,
    rho_s: f64,
    eps_o: f64,
    plan: &SamplingPlan,
) -> Result<BackwardConstruction> {
    if !(rho_s > 0.0) {
        return Err(SpasError::Precondition(format!("rho_s must be positive, got {rho_s}")));
    }
    let l_rho_s = min_v_on_shell(v, target, rho_s, plan)?.level;
    let delta = min_dist_on_levelset(v, target, l_rho_s, plan)?.radius;
    let l_delta = min_v_on_shell(v, target, delta, plan)?.level;
    let rho_o_s = min_dist_on_levelset(v, target, l_delta, plan)?.radius - eps_o;
    Ok(BackwardConstruction { rho_s, eps_o, l_rho_s, delta, l_delta, rho_o_s })
}

pub fn construct_backward(
    v: &LyapunovFn,
    target: &TargetSet,
    rho_s: f64,
    eps_o: f64,
    plan: &SamplingPlan,
) -> Result<BackwardConstruction> {
    let inner = construct_inner(v, target, eps_o, plan)?;
    if !(rho_s > inner.rho_check_s + DEFAULT_SLACK) {
        return Err(SpasError::Construction(format!(
            "rho_s = {rho_s} must exceed the practical-stability floor rho_check_s = {}",
            inner.rho_check_s
        )));
    }
    let chain = backward_chain(v, target, rho_s, eps_o, plan)?;
    if !(chain.rho_o_s > DEFAULT_SLACK) {
        return Err(SpasError::Construction(format!(
            "rho_o_s = {:e} is not positive although rho_s = {rho_s} exceeds rho_check_s = {}; \
             the sampling is too coarse to resolve the level sets",
            chain.rho_o_s, inner.rho_check_s
        )));
    }
    Ok(chain)
}

/// Level `l̃` of the smallest sublevel set containing `B̄_{ε_o+ρ̃}`; sublevel
/// sets between `l̃` and `l̂` are the ones made forward invariant.
pub fn invariance_floor_level(v: &LyapunovFn, target: &TargetSet, eps_o: f64, rho_tilde: f64, plan: &SamplingPlan) -> Result<f64> {
    Ok(max_v_on_shell(v, target, eps_o + rho_tilde, plan)?.level)
}

/// Sampled check of
/// `B̄_{ρ_s} ⊇ Γ_{l_ρs} ⊇ B̄_δ ⊇ Γ_{l_δ} ⊇ B̄_{ε_o+ρ_{o,s}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainReport {
    pub pass: bool,
    pub tolerance: f64,
    pub worst_violation: f64,
    pub links: Vec<ConditionReport>,
}

pub fn verify_containment_chain(
    result: &BackwardConstruction,
    v: &LyapunovFn,
    target: &TargetSet,
    plan: &SamplingPlan,
    tolerance: f64,
) -> Result<ChainReport> {
    let space = ConstraintSet::all_space(target.dim());
    let mut links = Vec::with_capacity(4);

    // Γ_l ⊆ B̄_r, checked on the outermost boundary crossings of Γ_l
    let level_in_ball = |name: &str, level: f64, radius: f64| -> Result<ConditionReport> {
        let pts = if level > 0.0 { levelset_boundary(v, target, level, plan)? } else { Vec::new() };
        let worst = worst_slack(&pts, |p| Ok(radius - target.dist_unchecked(p)))?;
        Ok(report(name, worst, pts.len(), tolerance))
    };
    // B̄_r ⊆ Γ_l, checked on samples filling the ball
    let ball_in_level = |name: &str, radius: f64, level: f64| -> Result<ConditionReport> {
        let pts = if radius > 0.0 { sample_region(target, 0.0, radius, &space, plan)? } else { Vec::new() };
        let worst = worst_slack(&pts, |p| Ok(level - v.value(p)))?;
        Ok(report(name, worst, pts.len(), tolerance))
    };

    links.push(level_in_ball("Gamma(l_rho_s) in B(rho_s)", result.l_rho_s, result.rho_s)?);
    links.push(ball_in_level("B(delta) in Gamma(l_rho_s)", result.delta, result.l_rho_s)?);
    links.push(level_in_ball("Gamma(l_delta) in B(delta)", result.l_delta, result.delta)?);
    links.push(ball_in_level("B(eps_o + rho_o_s) in Gamma(l_delta)", result.eps_o + result.rho_o_s, result.l_delta)?);

    let worst_violation = links
        .iter()
        .filter_map(|l| l.worst_margin)
        .map(|m| (-m).max(0.0))
        .fold(0.0, f64::max);
    Ok(ChainReport { pass: links.iter().all(|l| l.pass), tolerance, worst_violation, links })
}

fn report(name: &str, worst: Option<crate::report::Worst>, n: usize, tolerance: f64) -> ConditionReport {
    let mut r = ConditionReport::from_worst(name, worst, n);
    match r.worst_margin {
        Some(m) => r.pass = m >= -tolerance,
        // an empty set is trivially contained
        None => {
            r.pass = true;
            r.note = Some("empty set".into());
        }
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn origin() -> TargetSet {
        TargetSet::singleton(&[0.0, 0.0])
    }

    fn ellipse() -> LyapunovFn {
        LyapunovFn::weighted_quadratic(vec![1.0, 4.0], vec![0.0, 0.0])
    }

    fn sphere() -> LyapunovFn {
        LyapunovFn::weighted_quadratic(vec![1.0, 1.0], vec![0.0, 0.0])
    }

    fn plan() -> SamplingPlan {
        SamplingPlan::default().with_directions(512)
    }

    fn near(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn outer_examples() {
        let o = construct_outer(&sphere(), &origin(), 3.0, &plan()).unwrap();
        assert!(near(o.l_hat, 9.0, 1e-9) && near(o.sigma_hat, 3.0, 1e-9));
        let o = construct_outer(&ellipse(), &origin(), 1.0, &plan()).unwrap();
        assert!(near(o.l_hat, 4.0, 1e-3) && near(o.sigma_hat, 2.0, 1e-3));
        let ball = TargetSet::ball(&[0.0, 0.0], 1.0);
        let half = LyapunovFn::scaled_dist_squared(ball.clone(), 0.5);
        let o = construct_outer(&half, &ball, 2.0, &plan()).unwrap();
        assert!(near(o.l_hat, 2.0, 1e-9) && near(o.sigma_hat, 2.0, 1e-9));
    }

    #[test]
    fn inner_examples() {
        let i = construct_inner(&ellipse(), &origin(), 0.0, &plan()).unwrap();
        assert_eq!((i.l_o, i.delta_check, i.l_check, i.rho_check_s), (0.0, 0.0, 0.0, 0.0));
        let i = construct_inner(&sphere(), &origin(), 1.0, &plan()).unwrap();
        for q in [i.l_o, i.delta_check, i.l_check, i.rho_check_s] {
            assert!(near(q, 1.0, 1e-9));
        }
        // two rounds of ellipse inflation: semi-axes ratio 2 each time
        let i = construct_inner(&ellipse(), &origin(), 1.0, &plan()).unwrap();
        assert!(near(i.l_o, 4.0, 1e-2));
        assert!(near(i.delta_check, 2.0, 1e-2));
        assert!(near(i.l_check, 16.0, 1e-2));
        assert!(near(i.rho_check_s, 4.0, 1e-2));
        assert!(i.eps_o <= i.delta_check && i.delta_check <= i.rho_check_s);
    }

    #[test]
    fn backward_examples() {
        let b = construct_backward(&sphere(), &origin(), 2.0, 0.0, &plan()).unwrap();
        for (q, want) in [(b.l_rho_s, 4.0), (b.delta, 2.0), (b.l_delta, 4.0), (b.rho_o_s, 2.0)] {
            assert!(near(q, want, 1e-9));
        }
        let b = construct_backward(&ellipse(), &origin(), 2.0, 0.0, &plan()).unwrap();
        for (q, want) in [(b.l_rho_s, 4.0), (b.delta, 1.0), (b.l_delta, 1.0), (b.rho_o_s, 0.5)] {
            assert!(near(q, want, 1e-2), "{q} vs {want}");
        }
        let b = construct_backward(&ellipse(), &origin(), 2.0, 0.4, &plan()).unwrap();
        assert!(near(b.rho_o_s, 0.1, 1e-2));
    }

    #[test]
    fn backward_rejects_rho_below_floor() {
        // ε_o = 1 gives ρ̌_s = 4 for the ellipse
        let err = construct_backward(&ellipse(), &origin(), 3.0, 1.0, &plan()).unwrap_err();
        assert!(matches!(err, SpasError::Construction(ref m) if m.contains("floor")));
    }

    #[test]
    fn pivot_reproduces_inner_construction() {
        let p = plan();
        let inner = construct_inner(&ellipse(), &origin(), 1.0, &p).unwrap();
        let b = backward_chain(&ellipse(), &origin(), inner.rho_check_s, 1.0, &p).unwrap();
        let tol = 2.0 * 1e-3;
        assert!(near(b.l_rho_s, inner.l_check, tol * inner.l_check));
        assert!(near(b.delta, inner.delta_check, tol));
        assert!(near(b.l_delta, inner.l_o, tol * inner.l_o));
    }

    #[test]
    fn dist_squared_constructions_are_identities() {
        let ball = TargetSet::ball(&[1.0, -1.0], 0.5);
        let v = LyapunovFn::scaled_dist_squared(ball.clone(), 3.0);
        let p = plan();
        let o = construct_outer(&v, &ball, 1.5, &p).unwrap();
        assert!(near(o.sigma_hat, 1.5, 1e-6));
        let i = construct_inner(&v, &ball, 0.5, &p).unwrap();
        assert!(near(i.delta_check, 0.5, 1e-6) && near(i.rho_check_s, 0.5, 1e-6));
        let b = construct_backward(&v, &ball, 1.0, 0.5, &p).unwrap();
        assert!(near(b.delta, 1.0, 1e-6) && near(b.rho_o_s, 0.5, 1e-6));
    }

    #[test]
    fn outer_level_is_monotone() {
        let p = plan();
        let mut prev = 0.0;
        for s in [0.5, 1.0, 1.5, 3.0] {
            let o = construct_outer(&ellipse(), &origin(), s, &p).unwrap();
            assert!(o.l_hat >= prev);
            assert!(o.sigma_hat >= s - 1e-6);
            prev = o.l_hat;
        }
    }

    #[test]
    fn containment_chain_and_negative_control() {
        let p = plan();
        let b = construct_backward(&sphere(), &origin(), 2.0, 0.0, &p).unwrap();
        let r = verify_containment_chain(&b, &sphere(), &origin(), &p, 1e-6).unwrap();
        assert!(r.pass && r.worst_violation <= 1e-9);

        let b = construct_backward(&ellipse(), &origin(), 2.0, 0.0, &p).unwrap();
        let r = verify_containment_chain(&b, &ellipse(), &origin(), &p, 1e-3).unwrap();
        assert!(r.pass, "{r:?}");
        assert!(r.worst_violation <= 1e-3);

        let mut corrupted = b.clone();
        corrupted.l_delta *= 2.0;
        let r = verify_containment_chain(&corrupted, &ellipse(), &origin(), &p, 1e-3).unwrap();
        assert!(!r.pass);
        assert!(!r.links[2].pass);
        assert!(r.worst_violation > 0.1);
    }

    #[test]
    fn floor_level_for_claim() {
        let l = invariance_floor_level(&sphere(), &origin(), 0.5, 0.5, &plan()).unwrap();
        assert!(near(l, 1.0, 1e-9));
    }
}
