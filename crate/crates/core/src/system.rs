//! Gain-parametrized dynamics `ξ⁺ = P_Ξ[f(ξ; π)]` and rollouts.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpasError};
use crate::geometry::{check_dim, ConstraintSet, Point};

/// Algorithm gains `π` (step sizes and the like).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GainVector(pub Vec<f64>);

impl GainVector {
    pub fn scalar(alpha: f64) -> Self {
        GainVector(vec![alpha])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// First component; the scalar gain for single-gain systems.
    pub fn alpha(&self) -> f64 {
        self.0[0]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

/// Product of half-open intervals `(0, upper_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainBox {
    pub upper: Vec<f64>,
}

impl GainBox {
    pub fn new(upper: Vec<f64>) -> Result<Self> {
        if upper.is_empty() || upper.iter().any(|u| !(*u > 0.0) || !u.is_finite()) {
            return Err(SpasError::Precondition(format!("gain box bounds must be positive, got {upper:?}")));
        }
        Ok(GainBox { upper })
    }

    pub fn contains(&self, gain: &GainVector) -> bool {
        gain.len() == self.upper.len() && gain.0.iter().zip(&self.upper).all(|(g, u)| *g > 0.0 && g <= u)
    }
}

pub type StateMap = dyn Fn(&Point, &GainVector) -> Point + Send + Sync;

/// The map `f` together with its constraint set `Ξ`.
#[derive(Clone)]
pub struct ParamSystem {
    state_dim: usize,
    gain_dim: usize,
    map: Arc<StateMap>,
    constraint: ConstraintSet,
}

impl fmt::Debug for ParamSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ParamSystem")
            .field("state_dim", &self.state_dim)
            .field("gain_dim", &self.gain_dim)
            .field("constraint", &self.constraint)
            .finish_non_exhaustive()
    }
}

impl ParamSystem {
    pub fn new<F>(state_dim: usize, gain_dim: usize, constraint: ConstraintSet, map: F) -> Result<Self>
    where
        F: Fn(&Point, &GainVector) -> Point + Send + Sync + 'static,
    {
        constraint.validate()?;
        check_dim(state_dim, constraint.dim())?;
        Ok(ParamSystem { state_dim, gain_dim, map: Arc::new(map), constraint })
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn gain_dim(&self) -> usize {
        self.gain_dim
    }

    pub fn constraint(&self) -> &ConstraintSet {
        &self.constraint
    }

    /// Unprojected map `f(ξ; π)`.
    pub fn eval_map(&self, x: &Point, gain: &GainVector) -> Point {
        (self.map)(x, gain)
    }

    /// One step `P_Ξ[f(ξ; π)]`.
    pub fn step(&self, x: &Point, gain: &GainVector) -> Result<Point> {
        check_dim(self.state_dim, x.len())?;
        check_dim(self.gain_dim, gain.len())?;
        if !gain.is_finite() {
            return Err(SpasError::Precondition(format!("gain {:?} is not finite", gain.0)));
        }
        let y = (self.map)(x, gain);
        check_dim(self.state_dim, y.len())?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(SpasError::NonfiniteState { t: 0, state: x.as_slice().to_vec() });
        }
        self.constraint.project(&y)
    }

    /// `T` steps from `P_Ξ(ξ0)`; the trajectory holds `T + 1` states.
    pub fn rollout(&self, x0: &Point, gain: &GainVector, horizon: usize) -> Result<Trajectory> {
        if horizon == 0 {
            return Err(SpasError::Precondition("rollout horizon must be at least 1".into()));
        }
        check_dim(self.state_dim, x0.len())?;
        let start = self.constraint.project(x0)?;
        let correction = (&start - x0).norm();
        if correction > 0.0 {
            log::debug!("initial state projected onto the constraint set (moved {correction:e})");
        }
        let mut states = Vec::with_capacity(horizon + 1);
        states.push(start);
        for t in 0..horizon {
            let next = self.step(&states[t], gain).map_err(|e| match e {
                SpasError::NonfiniteState { state, .. } => SpasError::NonfiniteState { t, state },
                other => other,
            })?;
            states.push(next);
        }
        Ok(Trajectory { states, gain: gain.clone(), initial_correction: correction })
    }
}

/// States `ξ(0), …, ξ(T)` generated under a fixed gain.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<Point>,
    pub gain: GainVector,
    /// How far `ξ0` was moved to make it feasible.
    pub initial_correction: f64,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }
}
