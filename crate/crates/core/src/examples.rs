//! Built-in systems with closed-form constants: a biased projected
//! iteration `y⁺ = P_Ξ[y − α s(y)]` toward a target set, and decentralized
//! consensus optimization with quadratic local objectives.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::certify::CertificateSpec;
use crate::error::{Result, SpasError};
use crate::geometry::{check_dim, sample_region, ConstraintSet, Point, SamplingPlan, TargetSet};
use crate::lyapunov::LyapunovFn;
use crate::report::worst_slack;
use crate::system::ParamSystem;

pub type DirectionFn = dyn Fn(&Point) -> Point + Send + Sync;

/// Outer radius of the region on which the `τ` inequality is audited.
pub const TAU_AUDIT_RADIUS: f64 = 10.0;
pub const TAU_AUDIT_MARGIN: f64 = 1e-9;
pub const LIPSCHITZ_INFLATION: f64 = 1.1;
const DEGENERATE_SSTAR: f64 = 1e-12;

/// `y⁺ = P_Ξ[y − α s(y)]` where `s` satisfies
/// `(y − P_𝒜(y))ᵀ s(y) ≥ τ ‖y − P_𝒜(y)‖²` but need not vanish on `𝒜`.
#[derive(Clone)]
pub struct BiasedGradientSystem {
    pub target: TargetSet,
    pub tau: f64,
    pub constraint: ConstraintSet,
    s: Arc<DirectionFn>,
}

impl fmt::Debug for BiasedGradientSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BiasedGradientSystem")
            .field("target", &self.target)
            .field("tau", &self.tau)
            .field("constraint", &self.constraint)
            .finish_non_exhaustive()
    }
}

impl BiasedGradientSystem {
    pub fn new<S>(target: TargetSet, s: S, tau: f64, constraint: ConstraintSet) -> Result<Self>
    where
        S: Fn(&Point) -> Point + Send + Sync + 'static,
    {
        target.validate()?;
        constraint.validate()?;
        check_dim(target.dim(), constraint.dim())?;
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(SpasError::Precondition(format!("tau must be positive, got {tau}")));
        }
        Ok(BiasedGradientSystem { target, tau, constraint, s: Arc::new(s) })
    }

    /// Unit disc in the plane, `s` the identity, `τ = 1`, no constraint.
    pub fn unit_ball_identity() -> Self {
        Self::new(TargetSet::ball(&[0.0, 0.0], 1.0), |y| y.clone(), 1.0, ConstraintSet::all_space(2))
            .expect("reference instance is valid")
    }

    pub fn s(&self, y: &Point) -> Point {
        (self.s)(y)
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }
}

/// `s* = max ‖s(P_𝒜(y))‖²` over representatives of `𝒜`.
pub fn ex1_sstar(sys: &BiasedGradientSystem, plan: &SamplingPlan) -> Result<f64> {
    let mut s_star: f64 = 0.0;
    for y in sys.target.representatives(plan) {
        s_star = s_star.max(sys.s(&sys.target.project(&y)?).norm_squared());
    }
    if s_star <= DEGENERATE_SSTAR {
        return Err(SpasError::DegenerateSearchDirection);
    }
    Ok(s_star)
}

/// Empirical `L_s`: the largest `‖s(y) − s(P_𝒜(y))‖ / dist(y, 𝒜)` over
/// samples of `B̄_{σ_o}(𝒜)`, inflated by [`LIPSCHITZ_INFLATION`].
pub fn ex1_lipschitz(sys: &BiasedGradientSystem, sigma_o: f64, plan: &SamplingPlan) -> Result<f64> {
    if !(sigma_o > 0.0) {
        return Err(SpasError::Precondition(format!("sigma_o must be positive, got {sigma_o}")));
    }
    let space = ConstraintSet::all_space(sys.dim());
    let mut worst: f64 = 0.0;
    for y in sample_region(&sys.target, 0.0, sigma_o, &space, plan)? {
        let p = sys.target.project(&y)?;
        let d = (&y - &p).norm();
        if d > plan.boundary_tol {
            worst = worst.max((sys.s(&y) - sys.s(&p)).norm() / d);
        }
    }
    Ok(worst * LIPSCHITZ_INFLATION)
}

/// The three gain limits and their minimum `α̂`. `α_W` is infinite when
/// `L_s = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainBounds {
    pub alpha_bo: f64,
    pub alpha_rho_o: f64,
    pub alpha_w: f64,
    pub alpha_hat: f64,
}

pub fn ex1_gain_bounds(tau: f64, l_s: f64, s_star: f64, rho_o: f64, b_o: f64) -> Result<GainBounds> {
    if !(tau > 0.0 && s_star > 0.0 && rho_o > 0.0 && b_o > 0.0 && l_s >= 0.0) {
        return Err(SpasError::Precondition(format!(
            "need tau, s*, rho_o, b_o > 0 and L_s >= 0 (got {tau}, {s_star}, {rho_o}, {b_o}, {l_s})"
        )));
    }
    let alpha_bo = (b_o / s_star).sqrt();
    let alpha_rho_o = rho_o * rho_o * tau / (s_star + rho_o * rho_o * l_s * l_s);
    let alpha_w = if l_s == 0.0 { f64::INFINITY } else { tau / (l_s * l_s) };
    Ok(GainBounds { alpha_bo, alpha_rho_o, alpha_w, alpha_hat: alpha_bo.min(alpha_rho_o).min(alpha_w) })
}

/// `W(y) = α(τ − αL_s²)·(dist(y, 𝒜)² − α s* / (τ − αL_s²))`.
pub fn ex1_w_function(
    tau: f64,
    l_s: f64,
    s_star: f64,
    alpha: f64,
    target: &TargetSet,
) -> Result<impl Fn(&Point) -> f64 + Send + Sync + Clone + 'static> {
    let lead = tau - alpha * l_s * l_s;
    if !(lead > 0.0) {
        return Err(SpasError::GainTooLarge { alpha, limit: tau / (l_s * l_s) });
    }
    let target = target.clone();
    let root = alpha * s_star / lead;
    Ok(move |y: &Point| alpha * lead * (target.dist_unchecked(y).powi(2) - root))
}

/// Certificate with the closed-form margin at `ε_o = 0`, read off the gain.
/// The margin is used in its expanded form
/// `W(y; α) = α(τ − αL_s²)·dist(y, 𝒜)² − α² s*`, which stays defined (and
/// negative) for `α ≥ τ/L_s²`, so over-large gains fail P1 instead of
/// erroring.
pub fn ex1_certificate(
    target: &TargetSet,
    tau: f64,
    l_s: f64,
    s_star: f64,
    sigma_o: f64,
    rho_o: f64,
    b_o: f64,
) -> Result<CertificateSpec> {
    let target = target.clone();
    CertificateSpec::new(sigma_o, 0.0, rho_o, b_o, move |y, g| {
        let a = g.alpha();
        a * (tau - a * l_s * l_s) * target.dist_unchecked(y).powi(2) - a * a * s_star
    })
}

/// The projected iteration and `V = ½ dist(·, 𝒜)²`, after auditing the `τ`
/// inequality on `Ξ ∩ B̄_R(𝒜)` and that `s` does not vanish on `𝒜`.
pub fn ex1_build(sys: &BiasedGradientSystem, plan: &SamplingPlan) -> Result<(ParamSystem, LyapunovFn)> {
    let target = sys.target.clone();
    let region = sample_region(&target, 0.0, TAU_AUDIT_RADIUS, &sys.constraint, plan)?;
    let worst = worst_slack(&region, |y| {
        let r = y - target.project(y)?;
        let d2 = r.norm_squared();
        Ok(r.dot(&sys.s(y)) - sys.tau * d2 + TAU_AUDIT_MARGIN * d2.max(1.0))
    })?;
    if let Some(w) = worst.filter(|w| w.slack < 0.0) {
        return Err(SpasError::PseudogradientViolation { witness: w.at.as_slice().to_vec(), slack: w.slack });
    }
    ex1_sstar(sys, plan)?;

    let s = sys.s.clone();
    let map = ParamSystem::new(sys.dim(), 1, sys.constraint.clone(), move |y, g| y - s(y) * g.alpha())?;
    Ok((map, LyapunovFn::scaled_dist_squared(target, 0.5)))
}

/// `J_i(x) = ½ c (x − a)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadraticObjective {
    pub c: f64,
    pub a: f64,
}

impl QuadraticObjective {
    pub fn gradient(&self, x: f64) -> f64 {
        self.c * (x - self.a)
    }
}

/// `x⁺ = A x − α s(x)` with `s(x) = (∇J_1(x_1), …, ∇J_N(x_N))`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsensusSystem {
    a_mat: DMatrix<f64>,
    objectives: Vec<QuadraticObjective>,
}

const MATRIX_TOL: f64 = 1e-12;

impl ConsensusSystem {
    pub fn new(a_mat: DMatrix<f64>, objectives: Vec<QuadraticObjective>) -> Result<Self> {
        let n = a_mat.nrows();
        if n == 0 || a_mat.ncols() != n {
            return Err(SpasError::Matrix(format!("must be square and nonempty, got {}x{}", n, a_mat.ncols())));
        }
        check_dim(n, objectives.len())?;
        if a_mat.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(SpasError::Matrix("entries must be finite and nonnegative".into()));
        }
        if (&a_mat - a_mat.transpose()).amax() > MATRIX_TOL {
            return Err(SpasError::Matrix("not symmetric".into()));
        }
        if let Some(i) = (0..n).find(|&i| (a_mat.row(i).sum() - 1.0).abs() > MATRIX_TOL) {
            return Err(SpasError::Matrix(format!("row {i} sums to {}, not 1", a_mat.row(i).sum())));
        }
        if let Some(o) = objectives.iter().find(|o| !(o.c > 0.0) || !o.a.is_finite()) {
            return Err(SpasError::Precondition(format!("objective curvature must be positive, got {o:?}")));
        }
        Ok(ConsensusSystem { a_mat, objectives })
    }

    /// Two agents averaging with weight ½, `c = 1`, `a = (0, 2)`.
    pub fn two_agent() -> Self {
        Self::new(
            DMatrix::from_element(2, 2, 0.5),
            vec![QuadraticObjective { c: 1.0, a: 0.0 }, QuadraticObjective { c: 1.0, a: 2.0 }],
        )
        .expect("reference instance is valid")
    }

    pub fn n(&self) -> usize {
        self.a_mat.nrows()
    }

    pub fn mixing(&self) -> &DMatrix<f64> {
        &self.a_mat
    }

    pub fn objectives(&self) -> &[QuadraticObjective] {
        &self.objectives
    }

    pub fn s(&self, x: &Point) -> Point {
        Point::from_iterator(x.len(), x.iter().zip(&self.objectives).map(|(xi, o)| o.gradient(*xi)))
    }

    /// Minimizer of `Σ J_i`: the `c`-weighted mean of the `a_i`.
    pub fn minimizer(&self) -> f64 {
        let num: f64 = self.objectives.iter().map(|o| o.c * o.a).sum();
        let den: f64 = self.objectives.iter().map(|o| o.c).sum();
        num / den
    }

    /// The consensus optimum `x*·1` as a target set.
    pub fn target(&self) -> TargetSet {
        TargetSet::singleton(&vec![self.minimizer(); self.n()])
    }
}

/// `μ = max λ²` over the eigenvalues of `A` on `span{1}^⊥`, so that
/// `‖A z‖² ≤ μ ‖z‖²` for `z ⊥ 1`.
pub fn consensus_mu(a_mat: &DMatrix<f64>) -> Result<f64> {
    let n = a_mat.nrows();
    if n == 0 || a_mat.ncols() != n {
        return Err(SpasError::Matrix(format!("must be square and nonempty, got {}x{}", n, a_mat.ncols())));
    }
    let deflated = a_mat - DMatrix::from_element(n, n, 1.0 / n as f64);
    let sym = (&deflated + deflated.transpose()) * 0.5;
    let mu = SymmetricEigen::new(sym).eigenvalues.iter().map(|l| l * l).fold(0.0, f64::max);
    if mu >= 1.0 - MATRIX_TOL {
        return Err(SpasError::NoContraction { mu });
    }
    Ok(mu)
}

/// The consensus iteration, `V(x) = N (y − x*)² + ‖z‖²` and `x*`.
pub fn consensus_build(sys: &ConsensusSystem, constraint: ConstraintSet) -> Result<(ParamSystem, LyapunovFn, f64)> {
    consensus_mu(sys.mixing())?;
    let n = sys.n();
    let x_star = sys.minimizer();
    let inner = sys.clone();
    let map = ParamSystem::new(n, 1, constraint, move |x, g| inner.mixing() * x - inner.s(x) * g.alpha())?;
    let v = LyapunovFn::new(move |x| {
        let (y, z) = consensus_decompose(x);
        n as f64 * (y - x_star).powi(2) + z.norm_squared()
    })
    .with_gradient(move |x| x.map(|xi| 2.0 * (xi - x_star)));
    Ok((map, v, x_star))
}

/// `y = mean(x)` and `z = M x` with `M = I − (1/N) 1 1ᵀ`.
pub fn consensus_decompose(x: &Point) -> (f64, Point) {
    let y = x.mean();
    (y, x.map(|xi| xi - y))
}

pub fn consensus_recompose(y: f64, z: &Point) -> Point {
    z.map(|zi| zi + y)
}

/// One step in the `(y, z)` coordinates:
/// `y⁺ = y − (α/N) 1ᵀ s(z + 1y)` and `z⁺ = A z − α M s(z + 1y)`.
pub fn consensus_yz_step(y: f64, z: &Point, alpha: f64, sys: &ConsensusSystem) -> (f64, Point) {
    let s = sys.s(&consensus_recompose(y, z));
    let s_mean = s.mean();
    let y_next = y - alpha * s_mean;
    let z_next = sys.mixing() * z - s.map(|si| si - s_mean) * alpha;
    (y_next, z_next)
}

/// Distance from `(y, z)` to `({x*}, {0})` in the product norm.
pub fn consensus_yz_dist(y: f64, z: &Point, x_star: f64) -> f64 {
    ((y - x_star).powi(2) + z.norm_squared()).sqrt()
}
