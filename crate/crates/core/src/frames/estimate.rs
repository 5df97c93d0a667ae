use rayon::prelude::*;

use super::{FrameStack, Region};
use crate::error::{invalid, Error, Result};
use crate::pattern::Pattern;

/// Sample covariance C_ij = ⟨n_i n_j⟩ − ⟨n_i⟩⟨n_j⟩ between the binary outputs
/// of pixel i in region 1 and pixel j in region 2.
#[derive(Debug, Clone, PartialEq)]
pub struct CoincidenceMap {
    pub region1: Region,
    pub region2: Region,
    pub n_frames: usize,
    values: Vec<f64>,
}

impl CoincidenceMap {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.region2.len as usize + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.region1.len as usize).map(|i| self.get(i, j)).collect()
    }
}

struct Tally {
    single1: Vec<u64>,
    single2: Vec<u64>,
    joint: Vec<u64>,
}

impl Tally {
    fn new(n1: usize, n2: usize) -> Self {
        Self {
            single1: vec![0; n1],
            single2: vec![0; n2],
            joint: vec![0; n1 * n2],
        }
    }

    fn merge(mut self, other: Self) -> Self {
        for (a, b) in self.single1.iter_mut().zip(other.single1) {
            *a += b;
        }
        for (a, b) in self.single2.iter_mut().zip(other.single2) {
            *a += b;
        }
        for (a, b) in self.joint.iter_mut().zip(other.joint) {
            *a += b;
        }
        self
    }
}

fn strip_hits<'a>(frame: &'a [u32], region: &Region, width: u16) -> impl Iterator<Item = usize> + 'a {
    let lo = region.pixel(0, width);
    let hi = lo + region.len as u32;
    let start = frame.partition_point(|&p| p < lo);
    let end = frame.partition_point(|&p| p < hi);
    frame[start..end].iter().map(move |&p| (p - lo) as usize)
}

pub fn coincidence_map(frames: &FrameStack, region1: Region, region2: Region) -> Result<CoincidenceMap> {
    region1.check(frames.width, frames.height)?;
    region2.check(frames.width, frames.height)?;
    let n = frames.n_frames();
    if n < 2 {
        return Err(invalid("frames", format!("need at least 2 frames, got {n}")));
    }
    let (n1, n2) = (region1.len as usize, region2.len as usize);
    let tally = frames
        .frames
        .par_iter()
        .fold(
            || Tally::new(n1, n2),
            |mut t, frame| {
                let a: Vec<usize> = strip_hits(frame, &region1, frames.width).collect();
                let b: Vec<usize> = strip_hits(frame, &region2, frames.width).collect();
                for &i in &a {
                    t.single1[i] += 1;
                    for &j in &b {
                        t.joint[i * n2 + j] += 1;
                    }
                }
                for &j in &b {
                    t.single2[j] += 1;
                }
                t
            },
        )
        .reduce(|| Tally::new(n1, n2), Tally::merge);

    let nf = n as f64;
    let mut values = Vec::with_capacity(n1 * n2);
    for i in 0..n1 {
        let m1 = tally.single1[i] as f64 / nf;
        for j in 0..n2 {
            let m2 = tally.single2[j] as f64 / nf;
            values.push(tally.joint[i * n2 + j] as f64 / nf - m1 * m2);
        }
    }
    Ok(CoincidenceMap {
        region1,
        region2,
        n_frames: n,
        values,
    })
}

/// Normalized conditional pattern across region 1 with the region-2 pixel
/// held at `j_star`. Positions are pixel-centre coordinates at `pitch_m`.
pub fn pattern_from_frames(
    frames: &FrameStack,
    region1: Region,
    region2: Region,
    j_star: usize,
    pitch_m: f64,
) -> Result<Pattern> {
    if j_star >= region2.len as usize {
        return Err(Error::RegionOutOfBounds(format!(
            "pixel {j_star} outside a {}-pixel region",
            region2.len
        )));
    }
    let map = coincidence_map(frames, region1, region2)?;
    let column = map.column(j_star);
    if !column.iter().any(|&c| c > 0.0) {
        return Err(Error::NoCoincidenceSignal(j_star));
    }
    Pattern::normalized(region1.coordinates(pitch_m), &column)
}
