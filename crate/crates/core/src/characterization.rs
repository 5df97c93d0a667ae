//! Classical pump characterization: double-slit visibility of a diffused
//! source, spot-size fitting and the resulting coherence curve.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{invalid, require_positive, Error, Result};
use crate::model::{degree_of_coherence, PumpSpec};

/// First positive zero of J1.
pub const J1_FIRST_ZERO: f64 = 3.831_705_970_207_512;

/// Constant of the coherence-length relation l_c = C·f/(k_p·a_s).
pub const COHERENCE_CONSTANT: f64 = 3.832;

const SERIES_LIMIT: f64 = 8.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;

/// Bessel function of the first kind, order one.
pub fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < SERIES_LIMIT {
        j1_series(ax)
    } else if ax < ASYMPTOTIC_LIMIT {
        j1_miller(ax)
    } else {
        j1_asymptotic(ax)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

fn j1_series(x: f64) -> f64 {
    let h = 0.5 * x;
    let h2 = h * h;
    let mut term = h;
    let mut sum = term;
    for m in 1..60 {
        term *= -h2 / (m as f64 * (m + 1) as f64);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// Backward recurrence normalized by J0 + 2·ΣJ_2k = 1.
fn j1_miller(x: f64) -> f64 {
    let start = 2 * ((x as usize + 40) / 2);
    let (mut next, mut cur) = (0.0f64, 1e-300f64);
    let mut j1 = 0.0;
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        let prev = 2.0 * k as f64 / x * cur - next;
        next = cur;
        cur = prev;
        if k - 1 == 1 {
            j1 = cur;
        }
        if (k - 1) % 2 == 0 && k - 1 > 0 {
            norm += 2.0 * cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            j1 *= 1e-250;
            norm *= 1e-250;
        }
    }
    j1 / (norm + cur)
}

/// Hankel expansion √(2/πx)·(P cos χ − Q sin χ), χ = x − 3π/4.
fn j1_asymptotic(x: f64) -> f64 {
    let mu = 4.0;
    let y = 8.0 * x;
    let (mut p, mut q) = (1.0, 0.0);
    let mut term = 1.0f64;
    let mut last = f64::INFINITY;
    for k in 1..40 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) / (k as f64 * y);
        if term.abs() >= last || term.abs() < 1e-17 {
            break;
        }
        last = term.abs();
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
    }
    let chi = x - 0.75 * PI;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// |2·J1(ν)/ν|, equal to 1 at ν = 0.
pub fn bessel_visibility(nu: f64) -> f64 {
    if nu == 0.0 {
        return 1.0;
    }
    (2.0 * bessel_j1(nu) / nu).abs()
}

/// ν = k_p·d12·a_s/f.
pub fn nu_parameter(kp: f64, d12: f64, a_s: f64, f: f64) -> f64 {
    kp * d12 * a_s / f
}

/// l_c = 3.832·f/(k_p·a_s).
pub fn transverse_coherence_length(f: f64, kp: f64, a_s: f64) -> f64 {
    COHERENCE_CONSTANT * f / (kp * a_s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacterizationSetup {
    pub focal_length_m: f64,
    pub slit_separations_m: Vec<f64>,
    /// Recorded for reference; the visibility model does not use it.
    pub slit_width_m: f64,
    pub wavelength_pump_m: f64,
}

impl CharacterizationSetup {
    pub fn new(focal_length_m: f64, slit_separations_m: Vec<f64>, slit_width_m: f64, wavelength_pump_m: f64) -> Result<Self> {
        require_positive("characterization.focal_length_m", focal_length_m)?;
        require_positive("characterization.slit_width_m", slit_width_m)?;
        require_positive("characterization.wavelength_pump_m", wavelength_pump_m)?;
        for &d in &slit_separations_m {
            require_positive("characterization.slit_separations_m", d)?;
        }
        if !distinct(&slit_separations_m) {
            return Err(invalid("characterization.slit_separations_m", "separations must be distinct"));
        }
        Ok(Self {
            focal_length_m,
            slit_separations_m,
            slit_width_m,
            wavelength_pump_m,
        })
    }

    pub fn pump_wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength_pump_m
    }
}

fn distinct(v: &[f64]) -> bool {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s.windows(2).all(|w| w[0] != w[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VisibilityMeasurement {
    pub d12_m: f64,
    pub visibility: f64,
    pub uncertainty: Option<f64>,
}

impl VisibilityMeasurement {
    pub fn new(d12_m: f64, visibility: f64) -> Result<Self> {
        require_positive("measurement.d12_m", d12_m)?;
        if !(0.0..=1.0).contains(&visibility) {
            return Err(invalid("measurement.visibility", format!("must lie in [0, 1], got {visibility}")));
        }
        Ok(Self {
            d12_m,
            visibility,
            uncertainty: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpotFit {
    pub a_s_m: f64,
    /// Sum of squared visibility residuals at the optimum.
    pub residual: f64,
    /// (a_s, objective) pairs of the bracketing scan.
    pub trace: Vec<(f64, f64)>,
}

const SCAN_POINTS: usize = 400;
const NU_SCAN_MIN: f64 = 0.01 * J1_FIRST_ZERO;
const NU_SCAN_MAX: f64 = 5.0 * J1_FIRST_ZERO;

/// Least-squares spot size: log-spaced bracketing scan, then golden section.
pub fn fit_spot_size(measurements: &[VisibilityMeasurement], setup: &CharacterizationSetup) -> Result<SpotFit> {
    if measurements.len() < 2 {
        return Err(Error::FitFailed {
            reason: format!("need at least 2 measurements, got {}", measurements.len()),
            trace: Vec::new(),
        });
    }
    let d: Vec<f64> = measurements.iter().map(|m| m.d12_m).collect();
    if !distinct(&d) {
        return Err(Error::FitFailed {
            reason: "measurements must be at distinct slit separations".into(),
            trace: Vec::new(),
        });
    }
    let kp = setup.pump_wavenumber();
    let f = setup.focal_length_m;
    let d_max = d.iter().copied().fold(0.0, f64::max);
    let objective = |a_s: f64| -> f64 {
        measurements
            .iter()
            .map(|m| {
                let r = bessel_visibility(nu_parameter(kp, m.d12_m, a_s, f)) - m.visibility;
                r * r
            })
            .sum()
    };
    let a_min = NU_SCAN_MIN * f / (kp * d_max);
    let a_max = NU_SCAN_MAX * f / (kp * d_max);
    let ratio = (a_max / a_min).powf(1.0 / (SCAN_POINTS - 1) as f64);
    let trace: Vec<(f64, f64)> = (0..SCAN_POINTS)
        .map(|i| {
            let a = a_min * ratio.powi(i as i32);
            (a, objective(a))
        })
        .collect();
    let best = trace
        .iter()
        .enumerate()
        .min_by(|x, y| x.1 .1.total_cmp(&y.1 .1))
        .map(|(i, _)| i)
        .expect("nonempty scan");
    if best == 0 || best == SCAN_POINTS - 1 {
        return Err(Error::FitFailed {
            reason: format!("objective minimum at the scan boundary (a_s = {:e} m)", trace[best].0),
            trace,
        });
    }
    let (mut lo, mut hi) = (trace[best - 1].0, trace[best + 1].0);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = hi - g * (hi - lo);
    let mut dd = lo + g * (hi - lo);
    let (mut fc, mut fd) = (objective(c), objective(dd));
    while hi - lo > 1e-13 * (hi + lo) {
        if fc < fd {
            hi = dd;
            dd = c;
            fd = fc;
            c = hi - g * (hi - lo);
            fc = objective(c);
        } else {
            lo = c;
            c = dd;
            fc = fd;
            dd = lo + g * (hi - lo);
            fd = objective(dd);
        }
    }
    let a_s = 0.5 * (lo + hi);
    Ok(SpotFit {
        a_s_m: a_s,
        residual: objective(a_s),
        trace,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    /// Position of this spot size in the caller's input.
    pub index: usize,
    pub a_s_m: f64,
    pub lc_m: f64,
    pub degree_of_coherence: f64,
}

/// (a_s, l_c, A) for each spot size, sorted by increasing a_s.
pub fn coherence_curve(spot_sizes: &[f64], w0_m: f64, setup: &CharacterizationSetup) -> Result<Vec<CurveRow>> {
    if spot_sizes.is_empty() {
        return Err(invalid("spot_sizes", "needs at least one spot size"));
    }
    let kp = setup.pump_wavenumber();
    let mut rows = spot_sizes
        .iter()
        .enumerate()
        .map(|(index, &a_s)| {
            require_positive("spot_sizes", a_s)?;
            let lc = transverse_coherence_length(setup.focal_length_m, kp, a_s);
            let pump = PumpSpec::new(setup.wavelength_pump_m, w0_m, lc)?;
            Ok(CurveRow {
                index,
                a_s_m: a_s,
                lc_m: lc,
                degree_of_coherence: degree_of_coherence(&pump),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.a_s_m.total_cmp(&b.a_s_m).then(a.index.cmp(&b.index)));
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regimes_agree_at_their_boundaries() {
        for x in [SERIES_LIMIT, ASYMPTOTIC_LIMIT] {
            let below = if x == SERIES_LIMIT { j1_series(x) } else { j1_miller(x) };
            let above = if x == SERIES_LIMIT { j1_miller(x) } else { j1_asymptotic(x) };
            assert!((below - above).abs() < 1e-13, "x = {x}: {below} vs {above}");
        }
    }

    #[test]
    fn known_values() {
        // tabulated J1(1), J1(10), J1(30)
        assert!((bessel_j1(1.0) - 0.440_050_585_744_933_5).abs() < 1e-15);
        assert!((bessel_j1(10.0) - 0.043_472_746_168_861_44).abs() < 1e-14);
        assert!((bessel_j1(30.0) - (-0.118_751_062_616_623_1)).abs() < 1e-14);
        assert_eq!(bessel_j1(-1.0), -bessel_j1(1.0));
    }

    #[test]
    fn visibility_examples() {
        assert_eq!(bessel_visibility(0.0), 1.0);
        assert!(bessel_visibility(3.8317) <= 1e-4);
        assert!((bessel_visibility(3.8785) - 0.0097).abs() < 1e-4);
    }

    #[test]
    fn nu_and_coherence_length() {
        let kp = 2.0 * PI / 405e-9;
        let nu = nu_parameter(kp, 0.5e-3, 0.1e-3, 0.2);
        assert!((nu - 3.8785).abs() < 1e-4);
        assert_eq!(nu_parameter(kp, 0.0, 0.1e-3, 0.2), 0.0);
        assert!((nu_parameter(kp, 1e-3, 0.1e-3, 0.2) - 2.0 * nu).abs() < 1e-12);
        let lc = transverse_coherence_length(0.2, kp, 0.1e-3);
        assert!((lc - 0.494e-3).abs() < 0.001e-3);
        assert!((transverse_coherence_length(0.2, kp, 0.2e-3) - lc / 2.0).abs() < 1e-18);
        assert!((lc * kp * 0.1e-3 / 0.2 - COHERENCE_CONSTANT).abs() < 1e-12);
    }

    #[test]
    fn setup_rejects_duplicates() {
        assert!(CharacterizationSetup::new(0.2, vec![1e-3, 1e-3], 0.15e-3, 405e-9).is_err());
        assert!(CharacterizationSetup::new(0.0, vec![1e-3], 0.15e-3, 405e-9).is_err());
        assert!(VisibilityMeasurement::new(1e-3, 1.2).is_err());
    }

    #[test]
    fn fit_needs_two_distinct_points() {
        let setup = CharacterizationSetup::new(0.2, vec![0.5e-3], 0.15e-3, 405e-9).unwrap();
        let one = [VisibilityMeasurement::new(0.5e-3, 0.3).unwrap()];
        assert!(matches!(fit_spot_size(&one, &setup), Err(Error::FitFailed { .. })));
        let same = [one[0], one[0]];
        assert!(matches!(fit_spot_size(&same, &setup), Err(Error::FitFailed { .. })));
    }

    #[test]
    fn curve_is_sorted_and_annotated() {
        let setup = CharacterizationSetup::new(0.2, vec![0.25e-3, 0.5e-3], 0.15e-3, 405e-9).unwrap();
        let rows = coherence_curve(&[0.3e-3, 0.1e-3, 0.2e-3], 2.3e-3, &setup).unwrap();
        assert_eq!(rows.iter().map(|r| r.index).collect::<Vec<_>>(), vec![1, 2, 0]);
        assert!(rows.windows(2).all(|w| w[0].lc_m > w[1].lc_m));
        assert!(rows.windows(2).all(|w| w[0].degree_of_coherence > w[1].degree_of_coherence));
        assert!(coherence_curve(&[], 2.3e-3, &setup).is_err());
    }
}
