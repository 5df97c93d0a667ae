//! Normalized one-dimensional coincidence scans and fringe analysis.

use serde::Serialize;

use crate::closed_form::ExperimentSpec;
use crate::error::{Error, Result};

/// Coincidence rate sampled along a detector coordinate, normalized to peak 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pattern {
    positions: Vec<f64>,
    values: Vec<f64>,
    #[serde(skip)]
    metadata: Option<ExperimentSpec>,
}

impl Pattern {
    /// Normalizes `raw` to a maximum of 1. Negative samples are clipped to 0.
    pub fn normalized(positions: Vec<f64>, raw: &[f64]) -> Result<Self> {
        if positions.len() != raw.len() {
            return Err(Error::GridMismatch(format!(
                "{} positions for {} values",
                positions.len(),
                raw.len()
            )));
        }
        let peak = raw
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(0.0f64, f64::max);
        if !(peak > 0.0) {
            return Err(Error::DegeneratePattern);
        }
        let values = raw
            .iter()
            .map(|&v| if v.is_finite() && v > 0.0 { v / peak } else { 0.0 })
            .collect();
        Ok(Self {
            positions,
            values,
            metadata: None,
        })
    }

    /// Builds a pattern from natural-log samples, normalizing in the log domain
    /// so that rates far below the smallest positive double keep their shape.
    pub fn from_log_values(positions: Vec<f64>, logs: &[f64]) -> Result<Self> {
        if positions.len() != logs.len() {
            return Err(Error::GridMismatch(format!(
                "{} positions for {} values",
                positions.len(),
                logs.len()
            )));
        }
        let peak = logs
            .iter()
            .copied()
            .filter(|v| v.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        if !peak.is_finite() {
            return Err(Error::DegeneratePattern);
        }
        let values = logs
            .iter()
            .map(|&v| if v.is_finite() { (v - peak).exp() } else { 0.0 })
            .collect();
        Ok(Self {
            positions,
            values,
            metadata: None,
        })
    }

    pub fn with_metadata(mut self, spec: ExperimentSpec) -> Self {
        self.metadata = Some(spec);
        self
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn metadata(&self) -> Option<&ExperimentSpec> {
        self.metadata.as_ref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index of the global maximum (first occurrence).
    pub fn argmax(&self) -> Option<usize> {
        argmax(&self.values)
    }
}

fn argmax(v: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in v.iter().enumerate() {
        if best.is_none_or(|b| x > v[b]) {
            best = Some(i);
        }
    }
    best
}

/// Interior indices that are local minima. Plateaus count, so a run of equal
/// samples yields each of its interior members.
pub fn local_minima(v: &[f64]) -> Vec<usize> {
    (1..v.len().saturating_sub(1))
        .filter(|&i| v[i] <= v[i - 1] && v[i] <= v[i + 1])
        .collect()
}

/// Interior indices that are strict local maxima on the left and non-strict on
/// the right, so a flat-topped peak is reported once.
pub fn local_maxima(v: &[f64]) -> Vec<usize> {
    (1..v.len().saturating_sub(1))
        .filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1])
        .collect()
}

/// Fringe visibility (R_max − R_min)/(R_max + R_min), with R_max the global
/// maximum and R_min the smaller of the nearest local minima on either side.
pub fn visibility(p: &Pattern) -> Result<f64> {
    visibility_of(p.values())
}

pub fn visibility_of(v: &[f64]) -> Result<f64> {
    if v.len() < 3 {
        return Err(Error::InsufficientFringes(format!(
            "need at least 3 samples, got {}",
            v.len()
        )));
    }
    let peak = argmax(v).expect("nonempty");
    let r_max = v[peak];
    let is_min = |i: usize| v[i] <= v[i - 1] && v[i] <= v[i + 1] && v[i] < r_max;
    let left = (1..peak).rev().find(|&i| is_min(i));
    let right = (peak + 1..v.len() - 1).find(|&i| is_min(i));
    let r_min = match (left, right) {
        (Some(a), Some(b)) => v[a].min(v[b]),
        (Some(a), None) => v[a],
        (None, Some(b)) => v[b],
        (None, None) => {
            return Err(Error::InsufficientFringes(
                "no local minimum next to the global maximum".into(),
            ))
        }
    };
    Ok((r_max - r_min) / (r_max + r_min))
}
