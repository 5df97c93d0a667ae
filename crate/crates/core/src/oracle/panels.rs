use std::f64::consts::PI;
use std::num::NonZeroUsize;

use gauss_quad::GaussLegendre;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub(crate) const PANEL_ORDER: usize = 16;

/// Steps between exact re-evaluations of the recurrence phasors.
const RESYNC: usize = 32;

/// Quadrature nodes and weights on the transmitting support.
#[derive(Debug, Clone)]
pub(crate) struct Nodes {
    pub(crate) v: Vec<f64>,
    pub(crate) w: Vec<f64>,
}

/// Composite Gauss–Legendre nodes over `segments`, sized so that every panel
/// sees at most 2π·PANEL_ORDER/guard of phase given the per-segment maximum
/// phase slope `slope(a, b)`.
pub(crate) fn layout_nodes(
    segments: &[(f64, f64)],
    budget: usize,
    guard: f64,
    slope: impl Fn(f64, f64) -> f64,
) -> Result<Nodes> {
    let phases: Vec<f64> = segments.iter().map(|&(a, b)| slope(a, b) * (b - a)).collect();
    let total: f64 = phases.iter().sum();
    let need = guard * total / (2.0 * PI);
    if (budget as f64) < need {
        return Err(Error::RefusedUnderresolved {
            what: "aperture nodes",
            have: budget as f64,
            need: need.ceil(),
            guard,
        });
    }
    let rule = GaussLegendre::new(NonZeroUsize::new(PANEL_ORDER).expect("nonzero"));
    let mut v = Vec::with_capacity(budget + PANEL_ORDER * segments.len());
    let mut w = Vec::with_capacity(v.capacity());
    for (&(a, b), &phi) in segments.iter().zip(&phases) {
        let share = if total > 0.0 { phi / total } else { 1.0 / segments.len() as f64 };
        let panels = ((budget as f64 / PANEL_ORDER as f64) * share).ceil().max(1.0) as usize;
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let lo = a + p as f64 * h;
            let mid = lo + 0.5 * h;
            for &(x, wt) in rule.as_node_weight_pairs() {
                v.push(mid + 0.5 * h * x);
                w.push(0.5 * h * wt);
            }
        }
    }
    Ok(Nodes { v, w })
}

/// Σ_n c_n·exp(i·q·ρ_j·v_n) for ρ_j = ρ0 + jΔ, j < count.
pub(crate) fn phased_sums(c: &[Complex64], v: &[f64], q: f64, rho0: f64, step: f64, count: usize) -> Vec<Complex64> {
    let ratio: Vec<Complex64> = v.iter().map(|&vn| Complex64::from_polar(1.0, q * step * vn)).collect();
    let mut phasor = vec![Complex64::new(0.0, 0.0); v.len()];
    let mut out = Vec::with_capacity(count);
    for j in 0..count {
        if j % RESYNC == 0 {
            let rho = rho0 + j as f64 * step;
            for (ph, &vn) in phasor.iter_mut().zip(v) {
                *ph = Complex64::from_polar(1.0, q * rho * vn);
            }
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for ((ph, r), cn) in phasor.iter_mut().zip(&ratio).zip(c) {
            acc += *cn * *ph;
            *ph *= *r;
        }
        out.push(acc);
    }
    out
}
