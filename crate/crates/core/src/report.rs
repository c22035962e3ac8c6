//! Serializable outcome records shared by the audits and condition checks.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geometry::Point;

/// Outcome of one sampled condition.
///
/// `worst_margin` is the smallest slack seen over the samples (negative
/// means violated); `witness` attains it. Both are absent when no samples
/// were evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionReport {
    pub condition: String,
    pub pass: bool,
    pub worst_margin: Option<f64>,
    pub witness: Option<Vec<f64>>,
    pub samples_used: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl ConditionReport {
    /// Report for a "slack ≥ 0 everywhere" condition. An empty sample set
    /// fails, since nothing was checked.
    pub fn from_worst(condition: &str, worst: Option<Worst>, samples_used: usize) -> Self {
        match worst {
            Some(w) => ConditionReport {
                condition: condition.to_string(),
                pass: w.slack >= 0.0,
                worst_margin: Some(w.slack),
                witness: Some(w.at.as_slice().to_vec()),
                samples_used,
                note: None,
            },
            None => ConditionReport {
                condition: condition.to_string(),
                pass: false,
                worst_margin: None,
                witness: None,
                samples_used,
                note: Some("no samples in the region".into()),
            },
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

/// Smallest slack found and where.
#[derive(Debug, Clone, PartialEq)]
pub struct Worst {
    pub slack: f64,
    pub at: Point,
    pub index: usize,
}

/// Evaluates `slack` on every sample in parallel and returns the minimum,
/// breaking ties by the lowest index. NaN slack counts as `-inf`.
pub fn worst_slack<F>(samples: &[Point], slack: F) -> Result<Option<Worst>>
where
    F: Fn(&Point) -> Result<f64> + Sync,
{
    let values: Vec<f64> = samples.par_iter().map(&slack).collect::<Result<_>>()?;
    Ok(argmin(&values).map(|(index, s)| Worst { slack: s, at: samples[index].clone(), index }))
}

pub(crate) fn argmin(values: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        let v = if v.is_nan() { f64::NEG_INFINITY } else { *v };
        if best.is_none_or(|(_, b)| v < b) {
            best = Some((i, v));
        }
    }
    best
}

pub(crate) fn argmax(values: &[f64]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.iter().enumerate() {
        let v = if v.is_nan() { f64::INFINITY } else { *v };
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
    }
    best
}
