//! Coefficient cascade of the analytic coincidence rate.
//!
//! The cascade subtracts nearly equal quantities of magnitude ~1e30 several
//! times, so it is carried out in double-double complex arithmetic and only
//! rounded to `f64` at the end.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::dd::{Cdd, Dd};

use crate::error::{Error, Result};
use crate::model::{LayoutSpec, PumpSpec};

/// Smallest magnitude accepted for a coefficient that appears as a divisor.
const DEGENERATE_MAGNITUDE: f64 = 1e-300;

/// All coefficients of the cascade, rounded to double precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoefficientSet {
    pub e: Complex64,
    pub b0: Complex64,
    pub a0: Complex64,
    pub a2: Complex64,
    pub c0: Complex64,
    pub b1: Complex64,
    pub b2: Complex64,
    pub d0: Complex64,
    pub f: Complex64,
    pub g: Complex64,
    pub l: Complex64,
    pub m: Complex64,
    pub n: Complex64,
    pub p: Complex64,
    pub s: Complex64,
    pub t: Complex64,
}

/// Cascade state at full working precision.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Cascade {
    e: Cdd,
    b0: Cdd,
    a0: Cdd,
    a2: Cdd,
    c0: Cdd,
    b1: Cdd,
    b2: Cdd,
    d0: Complex64,
    f: Cdd,
    g: Cdd,
    l: Cdd,
    m: Cdd,
    n: Cdd,
    p: Cdd,
    s: Cdd,
    t: Cdd,
    k: Dd,
    z1: Dd,
    u1: Dd,
    u2: Dd,
}

fn re(x: f64) -> Cdd {
    Cdd::from(x)
}

fn im(x: Dd) -> Cdd {
    Cdd::imag(x)
}

fn dd(x: Dd) -> Cdd {
    Cdd::real(x)
}

fn round(z: Cdd) -> Complex64 {
    z.to_c64()
}

fn check(symbol: &'static str, z: Cdd) -> Result<()> {
    let r = round(z);
    if !r.re.is_finite() || !r.im.is_finite() || r.norm() < DEGENERATE_MAGNITUDE {
        return Err(Error::DegenerateCoefficients {
            symbol,
            value: format!("{r}"),
        });
    }
    Ok(())
}

impl Cascade {
    pub(crate) fn new(pump: &PumpSpec, layout: &LayoutSpec, u1: f64, u2: f64) -> Result<Self> {
        let two_pi = Dd::from(2.0) * Dd::PI;
        let lam = Dd::from(layout.wavelength_m());
        let k = two_pi / lam;
        let kp = two_pi / Dd::from(pump.wavelength_m());
        let z0 = Dd::from(layout.z0_m());
        let z1 = Dd::from(layout.z1_m());
        let z = Dd::from(layout.z_m());
        let w0 = Dd::from(pump.w0_m());
        let lc = Dd::from(pump.lc_m());
        let one = re(1.0);
        let two = Dd::from(2.0);
        let four = Dd::from(4.0);
        let (u1, u2) = (Dd::from(u1), Dd::from(u2));

        let e = im(k / (two * z0)) + im(k / (two * z1));
        check("e", e)?;

        let w0sq = w0 * w0;
        let lcsq = lc * lc;
        let kpsq = kp * kp;
        let b0 = dd(kpsq * lcsq * (w0sq + two * lcsq) / (four * z * z * (w0sq + two * lcsq)));
        check("B0", b0)?;

        let ksq = dd(k * k);
        let a0 = im(-kp / z) + im(k / z) - b0 + ksq / (e * dd(four * z0 * z0));
        check("A0", a0)?;
        let a2 = im(-kp / z) + im(k / z) - b0 - ksq / (e * dd(four * z0 * z0));
        let c0 = dd(four * w0sq * lcsq * kpsq / (two * z * z * (w0sq + four * lcsq)));
        check("C0", c0)?;
        let b1 = ksq * dd(u1) / (dd(two * z0 * z1) * e);
        let b2 = ksq * dd(u2) / (dd(two * z0 * z1) * e);

        let twoc = re(2.0);
        let fourc = re(4.0);
        let f = b2 + b0 / a0;
        let g = c0 * (one + b0 * c0 / a0);
        let l = a0 - b0 * b0 / a0;
        check("l", l)?;
        let m = a2 - c0 * c0 / (fourc * a0) - b0 * b0 / l - g * g / (fourc * l) + g * b0 / l;
        check("m", m)?;
        let n = b1 + c0 * b1 / (twoc * a0) - b0 / l + g * f / (twoc * l);
        let p = -(g * g) / (twoc * l) + g * b0 / l - c0 / (twoc * a0);
        let s = a2 - c0 * c0 / (fourc * a0) - p * p / (fourc * m) - g * g / (fourc * l);
        check("s", s)?;
        let t = c0 * b1 / (twoc * a0) + b2 + g * f / (twoc * l) - n * p / (twoc * m);

        let lam4 = layout.wavelength_m().powi(4);
        let scale = PI * PI / (lam4 * layout.z0_m().powi(2) * layout.z1_m().powi(2));
        let d0 = scale / (round(a0 * s * m * e)).sqrt();
        if !d0.re.is_finite() || !d0.im.is_finite() {
            return Err(Error::DegenerateCoefficients {
                symbol: "D0",
                value: format!("{d0}"),
            });
        }

        Ok(Self {
            e,
            b0,
            a0,
            a2,
            c0,
            b1,
            b2,
            d0,
            f,
            g,
            l,
            m,
            n,
            p,
            s,
            t,
            k,
            z1,
            u1,
            u2,
        })
    }

    /// Sum of the five exponents multiplying D0.
    pub(crate) fn exponent(&self) -> Complex64 {
        let two = Dd::from(2.0);
        let four = re(4.0);
        let kk = self.k * self.k;
        let x = dd(kk * (self.u1 * self.u1 + self.u2 * self.u2)) / (dd(two * self.z1 * self.z1) * self.e)
            + self.f * self.f / (four * self.l)
            + self.b1 * self.b1 / (four * self.a0)
            + self.n * self.n / (four * self.m)
            + self.t * self.t / (four * self.s);
        round(x)
    }

    pub(crate) fn d0(&self) -> Complex64 {
        self.d0
    }

    pub(crate) fn rounded(&self) -> CoefficientSet {
        CoefficientSet {
            e: round(self.e),
            b0: round(self.b0),
            a0: round(self.a0),
            a2: round(self.a2),
            c0: round(self.c0),
            b1: round(self.b1),
            b2: round(self.b2),
            d0: self.d0,
            f: round(self.f),
            g: round(self.g),
            l: round(self.l),
            m: round(self.m),
            n: round(self.n),
            p: round(self.p),
            s: round(self.s),
            t: round(self.t),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(lc: f64) -> (PumpSpec, LayoutSpec) {
        (
            PumpSpec::new(405e-9, 2.3e-3, lc).unwrap(),
            LayoutSpec::new(810e-9, 0.1, 0.2).unwrap(),
        )
    }

    #[test]
    fn e_is_pure_imaginary() {
        let pump = PumpSpec::new(405e-9, 2.3e-3, 1e-3).unwrap();
        let layout = LayoutSpec::new(810e-9, 0.1, 0.1).unwrap();
        let c = Cascade::new(&pump, &layout, 0.0, 0.0).unwrap().rounded();
        let k = 2.0 * PI / 810e-9;
        assert_eq!(c.e.re, 0.0);
        assert!((c.e.im - k * 10.0).abs() / (k * 10.0) < 1e-15);
    }

    #[test]
    fn b0_independent_of_w0() {
        let layout = LayoutSpec::new(810e-9, 0.1, 0.2).unwrap();
        let lc = 1e-3;
        let p1 = PumpSpec::new(405e-9, 2.3e-3, lc).unwrap();
        let p2 = PumpSpec::new(405e-9, 0.7e-3, lc).unwrap();
        let b1 = Cascade::new(&p1, &layout, 0.0, 0.0).unwrap().rounded().b0;
        let b2 = Cascade::new(&p2, &layout, 0.0, 0.0).unwrap().rounded().b0;
        let kp = 2.0 * PI / 405e-9;
        let simplified = kp * kp * lc * lc / (4.0 * 0.1 * 0.1);
        assert!((b1.re - simplified).abs() / simplified < 1e-14);
        assert!((b2.re - simplified).abs() / simplified < 1e-14);
    }

    #[test]
    fn zero_detector_positions_give_zero_linear_terms() {
        let (pump, layout) = setup(2.6558e-3);
        let c = Cascade::new(&pump, &layout, 0.0, 0.0).unwrap().rounded();
        assert_eq!(c.b1, Complex64::new(0.0, 0.0));
        assert_eq!(c.b2, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn coherent_pump_is_degenerate() {
        let (pump, layout) = setup(f64::INFINITY);
        match Cascade::new(&pump, &layout, 0.0, 0.0) {
            Err(Error::DegenerateCoefficients { symbol, .. }) => assert_eq!(symbol, "B0"),
            other => panic!("expected degenerate B0, got {other:?}"),
        }
    }
}
