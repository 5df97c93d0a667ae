//! Direct numerical evaluation of the fourfold coincidence integral.
//!
//! The impulse responses are integrated with composite Gauss–Legendre panels
//! over each aperture, sampled on a uniform transverse grid, and contracted
//! against the two-photon cross-spectral density. The density couples the four
//! transverse variables only through the sums x = ρs + ρi and x' = ρ's + ρ'i
//! besides a separable quadratic phase, so the fourfold sum reduces to a
//! discrete convolution followed by a quadratic form in x.

mod panels;

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::closed_form::{fringe_zeros, scan_pattern, ExperimentSpec};
use crate::error::{invalid, Error, Result};
use crate::model::{
    aperture_transmission, effective_spectral_width, ApertureSpec, LayoutSpec, PolarizationAngles, PumpSpec,
};
use crate::pattern::{local_minima, Pattern};

use panels::{layout_nodes, phased_sums, PANEL_ORDER};

/// Largest accepted |imag|/|real| of the contracted rate.
pub const IMAG_RESIDUAL_LIMIT: f64 = 1e-6;

/// Gaussian tail, in e-folds, below which the x window is truncated.
const X_WINDOW_EFOLDS: f64 = 46.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureConfig {
    /// Total Gauss–Legendre nodes per impulse response.
    pub aperture_points: usize,
    /// Samples of each transverse integration variable.
    pub rho_points: usize,
    /// Half-width of the transverse grid; derived from the pump and layout when `None`.
    pub rho_extent_m: Option<f64>,
    /// Half-width kept of unbounded apertures (wire, open); derived when `None`.
    pub truncation_m: Option<f64>,
    /// Minimum samples per 2π of phase.
    pub oscillation_guard: f64,
    /// Power of the cross-spectral density in the integrand (1 or 2).
    pub kernel_power: u32,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            aperture_points: 2048,
            rho_points: 4501,
            rho_extent_m: None,
            truncation_m: None,
            oscillation_guard: 8.0,
            kernel_power: 1,
        }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.aperture_points < PANEL_ORDER {
            return Err(invalid("quadrature.aperture_points", format!("must be ≥ {PANEL_ORDER}")));
        }
        if self.rho_points < 16 {
            return Err(invalid("quadrature.rho_points", "must be ≥ 16"));
        }
        if !(self.oscillation_guard >= 8.0) {
            return Err(invalid("quadrature.oscillation_guard", "must be ≥ 8"));
        }
        for (name, v) in [("quadrature.rho_extent_m", self.rho_extent_m), ("quadrature.truncation_m", self.truncation_m)] {
            if let Some(x) = v {
                if !(x.is_finite() && x > 0.0) {
                    return Err(invalid(name, format!("must be finite and > 0, got {x}")));
                }
            }
        }
        if !(1..=2).contains(&self.kernel_power) {
            return Err(invalid("quadrature.kernel_power", "must be 1 or 2"));
        }
        Ok(())
    }

    /// Every spacing halved: twice the aperture nodes, 2N − 1 grid samples.
    pub fn refined(&self) -> Self {
        Self {
            aperture_points: 2 * self.aperture_points,
            rho_points: 2 * self.rho_points - 1,
            ..*self
        }
    }
}

/// Uniform grid on [−extent, extent].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RhoGrid {
    pub extent_m: f64,
    pub points: usize,
}

impl RhoGrid {
    pub fn step(&self) -> f64 {
        2.0 * self.extent_m / (self.points - 1) as f64
    }

    pub fn position(&self, i: usize) -> f64 {
        -self.extent_m + i as f64 * self.step()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.position(i)).collect()
    }
}

/// Complex samples on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField1D {
    pub positions: Vec<f64>,
    pub values: Vec<Complex64>,
}

/// Transverse grid extent: four times the larger of the pump image scale
/// and the widest aperture feature plus three Fresnel zones.
pub fn default_extent(spec: &ExperimentSpec) -> f64 {
    let kp = spec.pump.wavenumber();
    let image = 2.0 * spec.layout.z_m() / (kp * spec.pump.w0_m());
    4.0 * image.max(default_truncation(spec))
}

/// Half-width kept of the wire: widest aperture feature plus three Fresnel zones.
pub fn default_truncation(spec: &ExperimentSpec) -> f64 {
    0.5 * spec.slit_width_m.max(spec.wire_width_m) + 3.0 * spec.layout.fresnel_zone_m()
}

fn truncation_for(ap: &ApertureSpec, layout: &LayoutSpec, cfg: &QuadratureConfig) -> f64 {
    cfg.truncation_m
        .unwrap_or_else(|| ap.feature_half_width().unwrap_or(0.0) + 3.0 * layout.fresnel_zone_m())
}

/// h(u, ρ) = (1/λ²z0z1)·∫ exp[−ik(ρ−v)²/2z0]·exp[−ik(v−u)²/2z1]·A(v) dv on `grid`.
pub fn impulse_response(
    u: f64,
    grid: &RhoGrid,
    layout: &LayoutSpec,
    ap: &ApertureSpec,
    cfg: &QuadratureConfig,
) -> Result<ComplexField1D> {
    cfg.validate()?;
    let values = impulse_samples(u, grid, layout, ap, cfg)?;
    Ok(ComplexField1D {
        positions: grid.positions(),
        values,
    })
}

fn impulse_samples(
    u: f64,
    grid: &RhoGrid,
    layout: &LayoutSpec,
    ap: &ApertureSpec,
    cfg: &QuadratureConfig,
) -> Result<Vec<Complex64>> {
    let k = layout.wavenumber();
    let (z0, z1) = (layout.z0_m(), layout.z1_m());
    let e = grid.extent_m;
    let segments = ap.transmitting_segments(truncation_for(ap, layout, cfg));
    let slope = |a: f64, b: f64| {
        let vmax = a.abs().max(b.abs());
        k * (e + vmax) / z0 + k * (vmax + u.abs()) / z1
    };
    let nodes = layout_nodes(&segments, cfg.aperture_points, cfg.oscillation_guard, slope)?;
    let scale = 1.0 / (layout.wavelength_m().powi(2) * z0 * z1);
    let c: Vec<Complex64> = nodes
        .v
        .iter()
        .zip(&nodes.w)
        .map(|(&v, &w)| {
            let phase = -k * (v - u).powi(2) / (2.0 * z1) - k * v * v / (2.0 * z0);
            Complex64::from_polar(w * aperture_transmission(ap, v) * scale, phase)
        })
        .collect();
    let sums = phased_sums(&c, &nodes.v, k / z0, -e, grid.step(), grid.points);
    Ok(sums
        .into_iter()
        .enumerate()
        .map(|(i, s)| {
            let rho = grid.position(i);
            s * Complex64::from_polar(1.0, -k * rho * rho / (2.0 * z0))
        })
        .collect())
}

/// Gaussian coefficients of the density: exp(−α(x² + x'²) − β·x·x').
fn gaussian_coefficients(pump: &PumpSpec, z: f64) -> (f64, f64) {
    let w0 = pump.w0_m();
    let inv_lc2 = pump.lc_m().powi(-2);
    let d = effective_spectral_width(pump);
    let common = d * d * pump.wavenumber().powi(2) / (z * z);
    let alpha = (2.0 * w0 * w0 * inv_lc2 + 1.0) * common / 16.0;
    let beta = w0 * w0 * inv_lc2 * common / 4.0;
    (alpha, beta)
}

/// Two-photon cross-spectral density with unit normalization constant.
pub fn cross_spectral_density(
    rs: f64,
    ri: f64,
    rps: f64,
    rpi: f64,
    pump: &PumpSpec,
    layout: &LayoutSpec,
    angles: &PolarizationAngles,
) -> Complex64 {
    let z = layout.z_m();
    let kappa = pump.wavenumber() / (4.0 * z);
    let (alpha, beta) = gaussian_coefficients(pump, z);
    let x = rs + ri;
    let xp = rps + rpi;
    let phase = kappa * (rs * rs + ri * ri - rps * rps - rpi * rpi);
    let magnitude = (-alpha * (x * x + xp * xp) - beta * x * xp).exp() * angles.factor();
    Complex64::from_polar(magnitude, phase)
}

/// Transverse sampling actually used for one configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResolvedQuadrature {
    pub grid: RhoGrid,
    pub truncation_m: f64,
    /// Samples of x kept on each side of 0.
    pub x_half_window: usize,
}

/// Checks the transverse grid against the oscillation guard and picks the x window.
pub fn resolve(spec: &ExperimentSpec, cfg: &QuadratureConfig) -> Result<ResolvedQuadrature> {
    cfg.validate()?;
    let grid = RhoGrid {
        extent_m: cfg.rho_extent_m.unwrap_or_else(|| default_extent(spec)),
        points: cfg.rho_points,
    };
    let truncation = cfg.truncation_m.unwrap_or_else(|| default_truncation(spec));
    let step = grid.step();
    let p = cfg.kernel_power as f64;
    let k = spec.layout.wavenumber();
    let z0 = spec.layout.z0_m();
    let kappa = spec.pump.wavenumber() / (4.0 * spec.layout.z_m());
    let vmax = truncation.max(0.5 * spec.slit_width_m);
    let slope = (2.0 * p * kappa - k / z0).abs() * grid.extent_m + k * vmax / z0;
    let (alpha, beta) = gaussian_coefficients(&spec.pump, spec.layout.z_m());
    let limit = 2.0 * PI / cfg.oscillation_guard;
    if step * slope > limit {
        return Err(Error::RefusedUnderresolved {
            what: "transverse grid phase",
            have: cfg.rho_points as f64,
            need: (2.0 * grid.extent_m * slope / limit).ceil() + 1.0,
            guard: cfg.oscillation_guard,
        });
    }
    let gauss = (p * alpha).sqrt();
    if step * gauss > limit {
        return Err(Error::RefusedUnderresolved {
            what: "transverse grid Gaussian",
            have: cfg.rho_points as f64,
            need: (2.0 * grid.extent_m * gauss / limit).ceil() + 1.0,
            guard: cfg.oscillation_guard,
        });
    }
    let x_max = (X_WINDOW_EFOLDS / (p * (alpha - 0.5 * beta))).sqrt();
    let x_half_window = ((x_max / step).ceil() as usize).min(grid.points - 1);
    Ok(ResolvedQuadrature {
        grid,
        truncation_m: truncation,
        x_half_window,
    })
}

/// exp(i·p·κ·ρ²)·h(u, ρ) on the grid.
fn weighted_response(
    u: f64,
    spec: &ExperimentSpec,
    ap: &ApertureSpec,
    cfg: &QuadratureConfig,
    res: &ResolvedQuadrature,
) -> Result<Vec<Complex64>> {
    let cfg = QuadratureConfig {
        truncation_m: Some(res.truncation_m),
        ..*cfg
    };
    let h = impulse_samples(u, &res.grid, &spec.layout, ap, &cfg)?;
    let pk = cfg.kernel_power as f64 * spec.pump.wavenumber() / (4.0 * spec.layout.z_m());
    Ok(h
        .into_iter()
        .enumerate()
        .map(|(i, hv)| {
            let rho = res.grid.position(i);
            hv * Complex64::from_polar(1.0, pk * rho * rho)
        })
        .collect())
}

/// Pairwise sum for order-independent rounding behaviour.
fn pairwise(v: &[Complex64]) -> Complex64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise(a) + pairwise(b)
}

/// Convolution over ρ followed by the Gaussian quadratic form in x.
fn contract(g1: &[Complex64], g2: &[Complex64], spec: &ExperimentSpec, cfg: &QuadratureConfig, res: &ResolvedQuadrature) -> Complex64 {
    let n = res.grid.points;
    let step = res.grid.step();
    let p = cfg.kernel_power as f64;
    let (alpha, beta) = gaussian_coefficients(&spec.pump, spec.layout.z_m());
    let centre = n - 1;
    let m = res.x_half_window;
    let mut terms = Vec::with_capacity(n);
    let gx: Vec<(f64, Complex64)> = (centre - m..=centre + m)
        .map(|c| {
            let lo = c.saturating_sub(n - 1);
            let hi = c.min(n - 1);
            terms.clear();
            terms.extend((lo..=hi).map(|i| g1[i] * g2[c - i]));
            let x = c as f64 * step - 2.0 * res.grid.extent_m;
            (x, pairwise(&terms) * step)
        })
        .collect();
    let mut rows = Vec::with_capacity(gx.len());
    for &(x, fv) in &gx {
        let inner: Vec<Complex64> = gx
            .iter()
            .map(|&(xp, fp)| fp.conj() * (-p * (alpha * (x * x + xp * xp) + beta * x * xp)).exp())
            .collect();
        rows.push(fv * pairwise(&inner));
    }
    pairwise(&rows) * step * step * spec.angles.factor().powi(cfg.kernel_power as i32)
}

fn checked(value: Complex64, u1: f64, u2: f64) -> Result<NumericRate> {
    let ratio = if value.re == 0.0 {
        if value.im == 0.0 { 0.0 } else { f64::INFINITY }
    } else {
        (value.im / value.re).abs()
    };
    if ratio > IMAG_RESIDUAL_LIMIT {
        return Err(Error::NonHermitianResidual { u1, u2, ratio });
    }
    Ok(NumericRate {
        rate: value.re,
        imag_residual: ratio,
    })
}

/// Contracted rate and its relative imaginary residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NumericRate {
    pub rate: f64,
    pub imag_residual: f64,
}

/// Fourfold integral at one detector pair (slit in arm 1, wire in arm 2).
pub fn coincidence_rate_numeric(u1: f64, u2: f64, spec: &ExperimentSpec, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(numeric_rate(u1, u2, spec, cfg)?.rate)
}

pub fn numeric_rate(u1: f64, u2: f64, spec: &ExperimentSpec, cfg: &QuadratureConfig) -> Result<NumericRate> {
    let res = resolve(spec, cfg)?;
    let g1 = weighted_response(u1, spec, &spec.slit(), cfg, &res)?;
    let g2 = weighted_response(u2, spec, &spec.wire(), cfg, &res)?;
    checked(contract(&g1, &g2, spec, cfg, &res), u1, u2)
}

/// Numeric rates along `u2` with arm 1 fixed at `u1`, reusing arm 1's response.
pub fn scan_numeric(u1: f64, u2: &[f64], spec: &ExperimentSpec, cfg: &QuadratureConfig) -> Result<Vec<NumericRate>> {
    let res = resolve(spec, cfg)?;
    let g1 = weighted_response(u1, spec, &spec.slit(), cfg, &res)?;
    u2.par_iter()
        .map(|&u| {
            let g2 = weighted_response(u, spec, &spec.wire(), cfg, &res)?;
            checked(contract(&g1, &g2, spec, cfg, &res), u1, u)
        })
        .collect()
}

/// Brute-force fourfold Riemann sum on the resolved grid. Cost grows as N⁴;
/// intended for cross-checking the contraction on small grids.
pub fn coincidence_rate_bruteforce(u1: f64, u2: f64, spec: &ExperimentSpec, cfg: &QuadratureConfig) -> Result<Complex64> {
    let res = resolve(spec, cfg)?;
    let cfg1 = QuadratureConfig {
        truncation_m: Some(res.truncation_m),
        ..*cfg
    };
    let h1 = impulse_samples(u1, &res.grid, &spec.layout, &spec.slit(), &cfg1)?;
    let h2 = impulse_samples(u2, &res.grid, &spec.layout, &spec.wire(), &cfg1)?;
    let rho = res.grid.positions();
    let n = rho.len();
    let step = res.grid.step();
    let p = cfg.kernel_power as i32;
    let total: Complex64 = (0..n)
        .into_par_iter()
        .map(|s| {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..n {
                let front = h1[s] * h2[i];
                for sp in 0..n {
                    for ip in 0..n {
                        let w = cross_spectral_density(rho[s], rho[i], rho[sp], rho[ip], &spec.pump, &spec.layout, &spec.angles);
                        acc += w.powi(p) * front * (h1[sp] * h2[ip]).conj();
                    }
                }
            }
            acc
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(total * step.powi(4))
}

/// Distances between two patterns on a common grid and the offsets of the
/// nearest minima of `b` from each expected zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternComparison {
    pub linf: f64,
    pub l2: f64,
    pub zero_offsets: Vec<ZeroOffset>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroOffset {
    pub expected_m: f64,
    /// Position of the nearest local minimum, if any.
    pub measured_m: Option<f64>,
    pub offset_m: Option<f64>,
}

pub fn compare_patterns(a: &Pattern, b: &Pattern, expected_zeros: &[f64]) -> Result<PatternComparison> {
    if a.positions() != b.positions() {
        return Err(Error::GridMismatch(format!(
            "{} vs {} samples or differing coordinates",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a.values().iter().zip(b.values()).map(|(x, y)| (x - y).abs()).collect();
    let linf = diffs.iter().copied().fold(0.0, f64::max);
    let l2 = diffs.iter().map(|d| d * d).sum::<f64>().sqrt();
    let minima: Vec<f64> = local_minima(b.values()).into_iter().map(|i| b.positions()[i]).collect();
    let zero_offsets = expected_zeros
        .iter()
        .map(|&z| {
            let nearest = minima
                .iter()
                .copied()
                .min_by(|x, y| (x - z).abs().total_cmp(&(y - z).abs()));
            ZeroOffset {
                expected_m: z,
                measured_m: nearest,
                offset_m: nearest.map(|m| m - z),
            }
        })
        .collect();
    Ok(PatternComparison {
        linf,
        l2,
        zero_offsets,
    })
}

/// Closed-form and numeric patterns on a shared scan, with their comparison.
#[derive(Debug, Clone)]
pub struct OracleRun {
    pub closed: Pattern,
    pub numeric: Pattern,
    pub rates: Vec<NumericRate>,
    pub comparison: PatternComparison,
    pub grid_step_m: f64,
    pub resolved: ResolvedQuadrature,
    pub seconds: f64,
}

impl OracleRun {
    /// Whether every expected zero has a numeric minimum within one scan step.
    pub fn zeros_coincide(&self) -> bool {
        self.misplaced_zeros() == 0
    }

    /// Expected zeros with no numeric minimum within one scan step.
    pub fn misplaced_zeros(&self) -> usize {
        self.comparison
            .zero_offsets
            .iter()
            .filter(|z| !z.offset_m.is_some_and(|o| o.abs() <= self.grid_step_m * (1.0 + 1e-9)))
            .count()
    }
}

/// Runs both routes over `spec.scan` and compares the normalized patterns.
pub fn run_oracle(spec: &ExperimentSpec, cfg: &QuadratureConfig) -> Result<OracleRun> {
    let start = Instant::now();
    let resolved = resolve(spec, cfg)?;
    let closed = scan_pattern(spec)?;
    let positions = closed.positions().to_vec();
    let rates = scan_numeric(spec.scan.u1_m, &positions, spec, cfg)?;
    let raw: Vec<f64> = rates.iter().map(|r| r.rate).collect();
    let numeric = Pattern::normalized(positions, &raw)?;
    let comparison = compare_patterns(&closed, &numeric, &fringe_zeros(spec))?;
    Ok(OracleRun {
        closed,
        numeric,
        rates,
        comparison,
        grid_step_m: spec.scan.step(),
        resolved,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// Numeric rates at a few probes under a base and a refined configuration.
#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceReport {
    pub base: QuadratureConfig,
    pub refined: QuadratureConfig,
    pub base_grid: ResolvedQuadrature,
    pub refined_grid: ResolvedQuadrature,
    pub probes: Vec<ConvergenceProbe>,
    pub max_relative_change: f64,
    pub max_imag_residual: f64,
    pub base_seconds: f64,
    pub refined_seconds: f64,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvergenceProbe {
    pub u1_m: f64,
    pub u2_m: f64,
    pub base: NumericRate,
    pub refined: NumericRate,
    pub relative_change: f64,
}

pub fn convergence_report(spec: &ExperimentSpec, cfg: &QuadratureConfig, u2_probes: &[f64]) -> Result<ConvergenceReport> {
    let refined = cfg.refined();
    let u1 = spec.scan.u1_m;
    let t0 = Instant::now();
    let base_rates = scan_numeric(u1, u2_probes, spec, cfg)?;
    let base_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let fine_rates = scan_numeric(u1, u2_probes, spec, &refined)?;
    let refined_seconds = t1.elapsed().as_secs_f64();
    let probes: Vec<ConvergenceProbe> = u2_probes
        .iter()
        .zip(base_rates.iter().zip(&fine_rates))
        .map(|(&u2, (&b, &f))| ConvergenceProbe {
            u1_m: u1,
            u2_m: u2,
            base: b,
            refined: f,
            relative_change: ((b.rate - f.rate) / f.rate).abs(),
        })
        .collect();
    let max_relative_change = probes.iter().map(|p| p.relative_change).fold(0.0, f64::max);
    let max_imag_residual = probes
        .iter()
        .flat_map(|p| [p.base.imag_residual, p.refined.imag_residual])
        .fold(0.0, f64::max);
    Ok(ConvergenceReport {
        base: *cfg,
        refined,
        base_grid: resolve(spec, cfg)?,
        refined_grid: resolve(spec, &refined)?,
        probes,
        max_relative_change,
        max_imag_residual,
        base_seconds,
        refined_seconds,
    })
}
