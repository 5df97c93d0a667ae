//! Physical parameters of the source, the optical layout and the apertures,
//! plus the scalar relations between pump coherence, effective spectral
//! width and biphoton momentum correlation width.
//!
//! Every length is in meters and every wavenumber in rad/m.

use std::f64::consts::{FRAC_PI_4, PI};

use serde::{Serialize, Serializer};

use crate::error::{invalid, require_positive, Error, Result};

/// Gaussian Schell-model pump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PumpSpec {
    wavelength_m: f64,
    /// 1/e² intensity radius.
    w0_m: f64,
    /// Transverse coherence length; `f64::INFINITY` means fully coherent.
    #[serde(serialize_with = "serialize_length_or_inf")]
    lc_m: f64,
}

impl PumpSpec {
    pub fn new(wavelength_m: f64, w0_m: f64, lc_m: f64) -> Result<Self> {
        require_positive("pump.wavelength_m", wavelength_m)?;
        require_positive("pump.w0_m", w0_m)?;
        if !(lc_m > 0.0) {
            return Err(invalid("pump.lc_m", format!("must be > 0 or infinite, got {lc_m}")));
        }
        Ok(Self {
            wavelength_m,
            w0_m,
            lc_m,
        })
    }

    /// Pump with the coherence length chosen so that the degree of coherence is `a`.
    /// `a = 1` yields the fully coherent pump.
    pub fn with_degree_of_coherence(wavelength_m: f64, w0_m: f64, a: f64) -> Result<Self> {
        let lc = if a == 1.0 {
            f64::INFINITY
        } else {
            coherence_length_for_a(w0_m, a)?
        };
        Self::new(wavelength_m, w0_m, lc)
    }

    pub fn wavelength_m(&self) -> f64 {
        self.wavelength_m
    }

    pub fn w0_m(&self) -> f64 {
        self.w0_m
    }

    pub fn lc_m(&self) -> f64 {
        self.lc_m
    }

    pub fn is_fully_coherent(&self) -> bool {
        self.lc_m.is_infinite()
    }

    /// Pump wavenumber k_p = 2π/λ_p.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength_m
    }
}

/// Distances of the two-arm layout and the degenerate signal/idler wavelength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LayoutSpec {
    wavelength_m: f64,
    /// Crystal to aperture.
    z0_m: f64,
    /// Aperture to detector.
    z1_m: f64,
    /// Propagation distance inside the two-photon cross-spectral density.
    z_m: f64,
}

impl LayoutSpec {
    /// Layout with `z = z0`.
    pub fn new(wavelength_m: f64, z0_m: f64, z1_m: f64) -> Result<Self> {
        Self::with_z(wavelength_m, z0_m, z1_m, z0_m)
    }

    pub fn with_z(wavelength_m: f64, z0_m: f64, z1_m: f64, z_m: f64) -> Result<Self> {
        Ok(Self {
            wavelength_m: require_positive("layout.wavelength_m", wavelength_m)?,
            z0_m: require_positive("layout.z0_m", z0_m)?,
            z1_m: require_positive("layout.z1_m", z1_m)?,
            z_m: require_positive("layout.z_m", z_m)?,
        })
    }

    pub fn wavelength_m(&self) -> f64 {
        self.wavelength_m
    }

    pub fn z0_m(&self) -> f64 {
        self.z0_m
    }

    pub fn z1_m(&self) -> f64 {
        self.z1_m
    }

    pub fn z_m(&self) -> f64 {
        self.z_m
    }

    /// Signal/idler wavenumber k = 2π/λ.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength_m
    }

    /// Size of one Fresnel zone at the aperture plane, √(λ z0).
    pub fn fresnel_zone_m(&self) -> f64 {
        (self.wavelength_m * self.z0_m).sqrt()
    }
}

/// Transmission function of one arm's aperture.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ApertureSpec {
    /// Transmits |v| ≤ width/2.
    Slit { width_m: f64 },
    /// Blocks |v| < width/2.
    Wire { width_m: f64 },
    Open,
    /// Piecewise-linear transmission between samples, zero outside the sampled range.
    Custom {
        positions_m: Vec<f64>,
        transmissions: Vec<f64>,
    },
}

impl ApertureSpec {
    pub fn slit(width_m: f64) -> Result<Self> {
        Ok(Self::Slit {
            width_m: require_positive("aperture.width_m", width_m)?,
        })
    }

    pub fn wire(width_m: f64) -> Result<Self> {
        Ok(Self::Wire {
            width_m: require_positive("aperture.width_m", width_m)?,
        })
    }

    pub fn custom(positions_m: Vec<f64>, transmissions: Vec<f64>) -> Result<Self> {
        if positions_m.len() < 2 || positions_m.len() != transmissions.len() {
            return Err(invalid(
                "aperture.custom",
                "needs at least two samples and equal-length position/transmission lists",
            ));
        }
        if positions_m.iter().any(|p| !p.is_finite())
            || positions_m.windows(2).any(|w| w[1] <= w[0])
        {
            return Err(invalid("aperture.custom", "positions must be finite and strictly increasing"));
        }
        if transmissions.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(invalid("aperture.custom", "transmissions must lie in [0, 1]"));
        }
        Ok(Self::Custom {
            positions_m,
            transmissions,
        })
    }

    /// Half-width of the aperture's own structure (slit or wire), if it has one.
    pub fn feature_half_width(&self) -> Option<f64> {
        match self {
            Self::Slit { width_m } | Self::Wire { width_m } => Some(0.5 * width_m),
            Self::Open => None,
            Self::Custom { positions_m, .. } => {
                let lo = positions_m[0].abs();
                let hi = positions_m[positions_m.len() - 1].abs();
                Some(lo.max(hi))
            }
        }
    }

    /// Intervals on which the transmission can be nonzero. Unbounded apertures
    /// (wire, open) are truncated to `|v| ≤ truncation`.
    pub fn transmitting_segments(&self, truncation: f64) -> Vec<(f64, f64)> {
        match self {
            Self::Slit { width_m } => vec![(-0.5 * width_m, 0.5 * width_m)],
            Self::Wire { width_m } => {
                let half = 0.5 * width_m;
                if truncation <= half {
                    Vec::new()
                } else {
                    vec![(-truncation, -half), (half, truncation)]
                }
            }
            Self::Open => vec![(-truncation, truncation)],
            Self::Custom { positions_m, .. } => {
                vec![(positions_m[0], positions_m[positions_m.len() - 1])]
            }
        }
    }
}

/// Polarization analyzer angles of the signal and idler arms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolarizationAngles {
    theta_s_rad: f64,
    theta_i_rad: f64,
}

impl Default for PolarizationAngles {
    fn default() -> Self {
        Self {
            theta_s_rad: FRAC_PI_4,
            theta_i_rad: FRAC_PI_4,
        }
    }
}

impl PolarizationAngles {
    pub fn new(theta_s_rad: f64, theta_i_rad: f64) -> Result<Self> {
        let range = 0.0..=std::f64::consts::FRAC_PI_2;
        if !range.contains(&theta_s_rad) {
            return Err(invalid("angles.theta_s_rad", format!("must lie in [0, π/2], got {theta_s_rad}")));
        }
        if !range.contains(&theta_i_rad) {
            return Err(invalid("angles.theta_i_rad", format!("must lie in [0, π/2], got {theta_i_rad}")));
        }
        Ok(Self {
            theta_s_rad,
            theta_i_rad,
        })
    }

    pub fn theta_s_rad(&self) -> f64 {
        self.theta_s_rad
    }

    pub fn theta_i_rad(&self) -> f64 {
        self.theta_i_rad
    }

    /// sin(2θ_s)·sin(2θ_i).
    pub fn factor(&self) -> f64 {
        (2.0 * self.theta_s_rad).sin() * (2.0 * self.theta_i_rad).sin()
    }
}

/// Effective spectral width δ = (1/l_c² + 1/(4w₀²))^(-1/2).
pub fn effective_spectral_width(pump: &PumpSpec) -> f64 {
    let w0 = pump.w0_m;
    (1.0 / (pump.lc_m.powi(-2) + 1.0 / (4.0 * w0 * w0))).sqrt()
}

/// Degree of spatial coherence A = δ/(2w₀), exactly 1 for the coherent pump.
pub fn degree_of_coherence(pump: &PumpSpec) -> f64 {
    if pump.is_fully_coherent() {
        return 1.0;
    }
    effective_spectral_width(pump) / (2.0 * pump.w0_m)
}

/// Inverse of [`degree_of_coherence`] at fixed beam size: l_c = 2w₀A/√(1−A²).
pub fn coherence_length_for_a(w0_m: f64, a: f64) -> Result<f64> {
    require_positive("w0_m", w0_m)?;
    if a >= 1.0 {
        return Err(Error::FullyCoherent(a));
    }
    if !(a > 0.0) {
        return Err(invalid("A", format!("degree of coherence must lie in (0, 1), got {a}")));
    }
    Ok(2.0 * w0_m * a / ((1.0 - a) * (1.0 + a)).sqrt())
}

/// Biphoton momentum correlation width w_k = √(1/l_c² + 1/w₀²), in 1/m.
pub fn momentum_correlation_width(pump: &PumpSpec) -> f64 {
    (pump.lc_m.powi(-2) + pump.w0_m.powi(-2)).sqrt()
}

/// Transmission of `ap` at transverse position `v`. The rect edge takes the value 1.
pub fn aperture_transmission(ap: &ApertureSpec, v: f64) -> f64 {
    match ap {
        ApertureSpec::Slit { width_m } => {
            if v.abs() <= 0.5 * width_m {
                1.0
            } else {
                0.0
            }
        }
        ApertureSpec::Wire { width_m } => {
            if v.abs() <= 0.5 * width_m {
                0.0
            } else {
                1.0
            }
        }
        ApertureSpec::Open => 1.0,
        ApertureSpec::Custom {
            positions_m,
            transmissions,
        } => {
            let n = positions_m.len();
            if v < positions_m[0] || v > positions_m[n - 1] {
                return 0.0;
            }
            let hi = positions_m.partition_point(|&p| p < v).clamp(1, n - 1);
            let (x0, x1) = (positions_m[hi - 1], positions_m[hi]);
            let (t0, t1) = (transmissions[hi - 1], transmissions[hi]);
            t0 + (t1 - t0) * (v - x0) / (x1 - x0)
        }
    }
}

fn serialize_length_or_inf<S: Serializer>(value: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if value.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*value)
    }
}
