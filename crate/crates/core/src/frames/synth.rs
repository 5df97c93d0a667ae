use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Geometric, Poisson, WeightedAliasIndex};
use rayon::prelude::*;

use super::{DetectorModel, FrameStack, JointPdf};
use crate::error::{invalid, require_positive, Result};

/// Draws `n_frames` binary frames. Frame `f` uses its own ChaCha8 stream, so
/// the output is independent of thread count and scheduling.
pub fn synthesize_frames(
    pdf: &JointPdf,
    pairs_per_frame: f64,
    det: &DetectorModel,
    n_frames: usize,
    seed: u64,
) -> Result<FrameStack> {
    det.validate()?;
    require_positive("pairs_per_frame", pairs_per_frame)?;
    pdf.region1.check(det.width, det.height)?;
    pdf.region2.check(det.width, det.height)?;
    if n_frames == 0 {
        return Err(invalid("n_frames", "must be ≥ 1"));
    }
    let alias = WeightedAliasIndex::new(pdf.probabilities().to_vec())
        .map_err(|e| invalid("joint pdf", e.to_string()))?;
    let poisson = Poisson::new(pairs_per_frame).map_err(|e| invalid("pairs_per_frame", e.to_string()))?;
    let dark = if det.dark_count_prob > 0.0 {
        Some(Geometric::new(det.dark_count_prob).map_err(|e| invalid("detector.dark_count_prob", e.to_string()))?)
    } else {
        None
    };
    let n2 = pdf.region2.len as usize;
    let pixels = det.pixel_count() as u64;

    let frames = (0..n_frames)
        .into_par_iter()
        .map(|f| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(f as u64);
            let mut hits = Vec::new();
            let pairs = poisson.sample(&mut rng) as u64;
            for _ in 0..pairs {
                let cell = alias.sample(&mut rng);
                let (i, j) = (cell / n2, cell % n2);
                if rng.gen::<f64>() < det.quantum_efficiency {
                    hits.push(pdf.region1.pixel(i, det.width));
                }
                if rng.gen::<f64>() < det.quantum_efficiency {
                    hits.push(pdf.region2.pixel(j, det.width));
                }
            }
            if let Some(geo) = &dark {
                let mut pos = geo.sample(&mut rng);
                while pos < pixels {
                    hits.push(pos as u32);
                    pos = pos.saturating_add(1).saturating_add(geo.sample(&mut rng));
                }
            }
            hits.sort_unstable();
            hits.dedup();
            hits
        })
        .collect();

    Ok(FrameStack {
        width: det.width,
        height: det.height,
        seed,
        frames,
        detector: Some(*det),
    })
}
