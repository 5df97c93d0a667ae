//! Analytic coincidence rate, detector scans and coherence sweeps.

mod coefficients;
mod dd;

pub use coefficients::CoefficientSet;
pub(crate) use coefficients::Cascade;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, require_positive, Error, Result};
use crate::model::{degree_of_coherence, ApertureSpec, LayoutSpec, PolarizationAngles, PumpSpec};
use crate::pattern::{visibility, Pattern};

/// Which aperture width sets the sinc envelope of the fringe factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ApertureMapping {
    /// sinc carries the wire width, cos carries the slit width.
    #[default]
    WireEnvelope,
    /// sinc carries the slit width, cos carries the wire width.
    SlitEnvelope,
}

/// Detector scan: arm 1 fixed at `u1`, arm 2 swept over a uniform grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanSpec {
    pub u1_m: f64,
    pub u2_min_m: f64,
    pub u2_max_m: f64,
    pub count: usize,
}

impl Default for ScanSpec {
    fn default() -> Self {
        Self {
            u1_m: 0.0,
            u2_min_m: -2.5e-3,
            u2_max_m: 2.5e-3,
            count: 1001,
        }
    }
}

impl ScanSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count < 2 {
            return Err(invalid("scan.count", format!("must be ≥ 2, got {}", self.count)));
        }
        if !self.u1_m.is_finite() || !self.u2_min_m.is_finite() || !self.u2_max_m.is_finite() {
            return Err(invalid("scan", "positions must be finite"));
        }
        if self.u2_min_m >= self.u2_max_m {
            return Err(invalid("scan", "u2_min_m must be < u2_max_m"));
        }
        Ok(())
    }

    pub fn step(&self) -> f64 {
        (self.u2_max_m - self.u2_min_m) / (self.count - 1) as f64
    }

    pub fn positions(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.count)
            .map(|i| {
                if i + 1 == self.count {
                    self.u2_max_m
                } else {
                    self.u2_min_m + i as f64 * h
                }
            })
            .collect()
    }
}

/// One complete nonlocal double-slit configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub pump: PumpSpec,
    pub layout: LayoutSpec,
    /// Slit in arm 1.
    pub slit_width_m: f64,
    /// Wire in arm 2.
    pub wire_width_m: f64,
    pub angles: PolarizationAngles,
    pub scan: ScanSpec,
    pub mapping: ApertureMapping,
}

impl ExperimentSpec {
    pub fn new(
        pump: PumpSpec,
        layout: LayoutSpec,
        slit_width_m: f64,
        wire_width_m: f64,
        angles: PolarizationAngles,
        scan: ScanSpec,
        mapping: ApertureMapping,
    ) -> Result<Self> {
        require_positive("slit_width_m", slit_width_m)?;
        require_positive("wire_width_m", wire_width_m)?;
        scan.validate()?;
        Ok(Self {
            pump,
            layout,
            slit_width_m,
            wire_width_m,
            angles,
            scan,
            mapping,
        })
    }

    pub fn slit(&self) -> ApertureSpec {
        ApertureSpec::Slit {
            width_m: self.slit_width_m,
        }
    }

    pub fn wire(&self) -> ApertureSpec {
        ApertureSpec::Wire {
            width_m: self.wire_width_m,
        }
    }

    pub fn degree_of_coherence(&self) -> f64 {
        degree_of_coherence(&self.pump)
    }

    /// (envelope width, fringe width) entering sinc and cos respectively.
    pub fn fringe_widths(&self) -> (f64, f64) {
        match self.mapping {
            ApertureMapping::WireEnvelope => (self.wire_width_m, self.slit_width_m),
            ApertureMapping::SlitEnvelope => (self.slit_width_m, self.wire_width_m),
        }
    }
}

/// Evaluates the coefficient cascade at one detector pair.
pub fn coefficients(spec: &ExperimentSpec, u1: f64, u2: f64) -> Result<CoefficientSet> {
    Ok(Cascade::new(&spec.pump, &spec.layout, u1, u2)?.rounded())
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        x.sin() / x
    }
}

/// [sinc(kΔu·a/z1)·cos(kΔu·b/z1)]² with Δu = u1 − u2.
pub fn fringe_factor(spec: &ExperimentSpec, u1: f64, u2: f64) -> f64 {
    let (a, b) = spec.fringe_widths();
    let q = spec.layout.wavenumber() * (u1 - u2) / spec.layout.z1_m();
    let amp = sinc(q * a) * (q * b).cos();
    amp * amp
}

/// Scan positions u2 at which the fringe factor vanishes: sinc zeros at
/// Δu = nλz1/(2a) and cos zeros at Δu = (m + ½)λz1/(2b), with Δu = u1 − u2.
pub fn fringe_zeros(spec: &ExperimentSpec) -> Vec<f64> {
    let (a, b) = spec.fringe_widths();
    let lz = spec.layout.wavelength_m() * spec.layout.z1_m();
    let (lo, hi) = (spec.scan.u2_min_m, spec.scan.u2_max_m);
    let u1 = spec.scan.u1_m;
    let reach = (u1 - lo).abs().max((hi - u1).abs());
    let mut zeros = Vec::new();
    let mut push = |du: f64| {
        for u2 in [u1 - du, u1 + du] {
            if (lo..=hi).contains(&u2) {
                zeros.push(u2);
            }
        }
    };
    let sinc_step = lz / (2.0 * a);
    for n in 1..=(reach / sinc_step) as usize {
        push(n as f64 * sinc_step);
    }
    let cos_step = lz / (2.0 * b);
    for m in 0..=(reach / cos_step) as usize {
        push((m as f64 + 0.5) * cos_step);
    }
    zeros.sort_by(f64::total_cmp);
    zeros.dedup_by(|x, y| (*x - *y).abs() <= 1e-15);
    zeros
}

/// Sum of the five exponents multiplying D0 in the analytic rate.
pub fn envelope_exponent(spec: &ExperimentSpec, u1: f64, u2: f64) -> Result<Complex64> {
    Ok(Cascade::new(&spec.pump, &spec.layout, u1, u2)?.exponent())
}

/// Natural logarithm of the coincidence rate; −∞ where the rate vanishes.
pub fn log_coincidence_rate(spec: &ExperimentSpec, u1: f64, u2: f64) -> Result<f64> {
    let cascade = Cascade::new(&spec.pump, &spec.layout, u1, u2)?;
    let prefactor = cascade.d0().norm().ln() + cascade.exponent().re;
    Ok(prefactor + spec.angles.factor().ln() + fringe_factor(spec, u1, u2).ln())
}

/// Coincidence rate |D0·e^X|·sin2θs·sin2θi·[sinc·cos]². Underflows to 0 where
/// the envelope is extremely small; use [`scan_pattern`] for normalized shapes.
pub fn coincidence_rate(spec: &ExperimentSpec, u1: f64, u2: f64) -> Result<f64> {
    Ok(log_coincidence_rate(spec, u1, u2)?.exp())
}

/// Normalized rate over the scan grid of `spec`.
pub fn scan_pattern(spec: &ExperimentSpec) -> Result<Pattern> {
    spec.scan.validate()?;
    let positions = spec.scan.positions();
    let u1 = spec.scan.u1_m;
    let logs = positions
        .par_iter()
        .map(|&u2| log_coincidence_rate(spec, u1, u2))
        .collect::<Result<Vec<f64>>>()?;
    Ok(Pattern::from_log_values(positions, &logs)?.with_metadata(spec.clone()))
}

/// One row of a coherence/aperture sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub degree_of_coherence: f64,
    pub lc_m: f64,
    pub slit_width_m: f64,
    pub wire_width_m: f64,
    pub pattern: Pattern,
    pub visibility: f64,
}

/// Scans and visibility for every spec, preserving input order.
pub fn sweep(specs: &[ExperimentSpec]) -> Result<Vec<SweepRow>> {
    if specs.is_empty() {
        return Err(invalid("sweep", "needs at least one configuration"));
    }
    specs
        .par_iter()
        .enumerate()
        .map(|(index, spec)| {
            sweep_row(spec).map_err(|e| Error::SweepRow {
                index,
                source: Box::new(e),
            })
        })
        .collect()
}

fn sweep_row(spec: &ExperimentSpec) -> Result<SweepRow> {
    let pattern = scan_pattern(spec)?;
    let v = visibility(&pattern)?;
    Ok(SweepRow {
        degree_of_coherence: spec.degree_of_coherence(),
        lc_m: spec.pump.lc_m(),
        slit_width_m: spec.slit_width_m,
        wire_width_m: spec.wire_width_m,
        pattern,
        visibility: v,
    })
}
