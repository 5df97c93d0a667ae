//! Photon-counting camera model: joint detection law, frame synthesis,
//! coincidence estimation and the binary frame container.

mod container;
mod estimate;
mod synth;

pub use container::{read_bpnf, write_bpnf, BPNF_MAGIC, BPNF_VERSION};
pub use estimate::{coincidence_map, pattern_from_frames, CoincidenceMap};
pub use synth::synthesize_frames;

use rayon::prelude::*;
use serde::Serialize;

use crate::closed_form::{log_coincidence_rate, ExperimentSpec};
use crate::error::{invalid, require_positive, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DetectorModel {
    pub quantum_efficiency: f64,
    /// Probability that a pixel fires without a photon, per frame.
    pub dark_count_prob: f64,
    pub pixel_pitch_m: f64,
    pub width: u16,
    pub height: u16,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            quantum_efficiency: 0.6,
            dark_count_prob: 0.0,
            pixel_pitch_m: 16e-6,
            width: 128,
            height: 64,
        }
    }
}

impl DetectorModel {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.quantum_efficiency) {
            return Err(invalid("detector.quantum_efficiency", "must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.dark_count_prob) {
            return Err(invalid("detector.dark_count_prob", "must lie in [0, 1)"));
        }
        require_positive("detector.pixel_pitch_m", self.pixel_pitch_m)?;
        if self.width == 0 || self.height == 0 {
            return Err(invalid("detector", "width and height must be ≥ 1"));
        }
        Ok(())
    }

    pub fn pixel_count(&self) -> u32 {
        self.width as u32 * self.height as u32
    }
}

/// Horizontal strip of `len` pixels starting at column `x0` of row `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Region {
    pub x0: u16,
    pub y: u16,
    pub len: u16,
}

impl Region {
    pub fn check(&self, width: u16, height: u16) -> Result<()> {
        if self.len == 0 || self.y >= height || self.x0 as u32 + self.len as u32 > width as u32 {
            return Err(Error::RegionOutOfBounds(format!(
                "strip x0 = {}, y = {}, len = {} on a {width}×{height} sensor",
                self.x0, self.y, self.len
            )));
        }
        Ok(())
    }

    /// Linear index (row-major) of the strip's `i`-th pixel.
    pub fn pixel(&self, i: usize, width: u16) -> u32 {
        self.y as u32 * width as u32 + self.x0 as u32 + i as u32
    }

    /// Transverse coordinate of the `i`-th pixel centre, zero at the strip centre.
    pub fn coordinate(&self, i: usize, pitch: f64) -> f64 {
        (i as f64 - 0.5 * (self.len as f64 - 1.0)) * pitch
    }

    pub fn coordinates(&self, pitch: f64) -> Vec<f64> {
        (0..self.len as usize).map(|i| self.coordinate(i, pitch)).collect()
    }
}

/// Joint detection probability over (pixel of region 1) × (pixel of region 2).
#[derive(Debug, Clone, PartialEq)]
pub struct JointPdf {
    pub region1: Region,
    pub region2: Region,
    /// Row-major: index i·len2 + j.
    probabilities: Vec<f64>,
}

impl JointPdf {
    /// Normalizes nonnegative weights; negatives are clipped to 0.
    pub fn from_weights(region1: Region, region2: Region, weights: Vec<f64>) -> Result<Self> {
        let n = region1.len as usize * region2.len as usize;
        if weights.len() != n {
            return Err(invalid("joint pdf", format!("expected {n} weights, got {}", weights.len())));
        }
        let clipped: Vec<f64> = weights
            .into_iter()
            .map(|w| if w.is_finite() && w > 0.0 { w } else { 0.0 })
            .collect();
        let total: f64 = clipped.iter().sum();
        if !(total > 0.0) {
            return Err(Error::DegeneratePattern);
        }
        Ok(Self {
            region1,
            region2,
            probabilities: clipped.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.probabilities[i * self.region2.len as usize + j]
    }

    /// Σ_j P_ij for each pixel of region 1.
    pub fn marginal1(&self) -> Vec<f64> {
        self.probabilities
            .chunks(self.region2.len as usize)
            .map(|row| row.iter().sum())
            .collect()
    }

    /// Σ_i P_ij for each pixel of region 2.
    pub fn marginal2(&self) -> Vec<f64> {
        let n2 = self.region2.len as usize;
        let mut m = vec![0.0; n2];
        for row in self.probabilities.chunks(n2) {
            for (acc, p) in m.iter_mut().zip(row) {
                *acc += p;
            }
        }
        m
    }

    /// P(i, j*) for every i in region 1.
    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.region1.len as usize).map(|i| self.get(i, j)).collect()
    }
}

/// Samples the analytic rate at pixel centres of the two regions and normalizes.
pub fn discretize_joint(spec: &ExperimentSpec, det: &DetectorModel, region1: Region, region2: Region) -> Result<JointPdf> {
    det.validate()?;
    region1.check(det.width, det.height)?;
    region2.check(det.width, det.height)?;
    let u1 = region1.coordinates(det.pixel_pitch_m);
    let u2 = region2.coordinates(det.pixel_pitch_m);
    let logs = u1
        .par_iter()
        .map(|&a| u2.iter().map(|&b| log_coincidence_rate(spec, a, b)).collect::<Result<Vec<f64>>>())
        .collect::<Result<Vec<Vec<f64>>>>()?
        .concat();
    let peak = logs.iter().copied().filter(|v| v.is_finite()).fold(f64::NEG_INFINITY, f64::max);
    if !peak.is_finite() {
        return Err(Error::DegeneratePattern);
    }
    let weights = logs.iter().map(|&l| if l.is_finite() { (l - peak).exp() } else { 0.0 }).collect();
    JointPdf::from_weights(region1, region2, weights)
}

/// Sparse record of binary frames. Each frame lists its fired pixels as
/// sorted, distinct row-major indices.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    pub width: u16,
    pub height: u16,
    pub seed: u64,
    pub frames: Vec<Vec<u32>>,
    /// Absent when the stack was read from a container.
    pub detector: Option<DetectorModel>,
}

impl FrameStack {
    pub fn n_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn total_hits(&self) -> usize {
        self.frames.iter().map(Vec::len).sum()
    }
}
