//! CSV writers. Floats use 17 significant digits in exponent form, so every
//! value round-trips exactly and output is locale independent.

use std::io::Write;

use crate::characterization::CurveRow;
use crate::closed_form::SweepRow;
use crate::error::{Error, Result};
use crate::frames::CoincidenceMap;
use crate::oracle::OracleRun;
use crate::pattern::Pattern;

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn writer<W: Write>(out: W, header: &[&str]) -> Result<csv::Writer<W>> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    Ok(w)
}

fn finish<W: Write>(w: csv::Writer<W>) -> Result<()> {
    w.into_inner().map_err(|e| Error::Io(e.into_error()))?.flush()?;
    Ok(())
}

/// Two columns: `position_column` and `rate_norm`.
pub fn write_pattern<W: Write>(pattern: &Pattern, position_column: &str, out: W) -> Result<()> {
    let mut w = writer(out, &[position_column, "rate_norm"])?;
    for (u, v) in pattern.positions().iter().zip(pattern.values()) {
        w.write_record([fmt_f64(*u), fmt_f64(*v)])?;
    }
    finish(w)
}

pub fn write_sweep_summary<W: Write>(rows: &[SweepRow], out: W) -> Result<()> {
    let mut w = writer(out, &["A", "lc_m", "slit_m", "wire_m", "visibility"])?;
    for r in rows {
        w.write_record([
            fmt_f64(r.degree_of_coherence),
            fmt_f64(r.lc_m),
            fmt_f64(r.slit_width_m),
            fmt_f64(r.wire_width_m),
            fmt_f64(r.visibility),
        ])?;
    }
    finish(w)
}

pub fn write_oracle<W: Write>(run: &OracleRun, out: W) -> Result<()> {
    let mut w = writer(out, &["u2_m", "rate_closed", "rate_numeric", "abs_diff"])?;
    let closed = run.closed.values();
    let numeric = run.numeric.values();
    for (i, u) in run.closed.positions().iter().enumerate() {
        w.write_record([
            fmt_f64(*u),
            fmt_f64(closed[i]),
            fmt_f64(numeric[i]),
            fmt_f64((closed[i] - numeric[i]).abs()),
        ])?;
    }
    finish(w)
}

pub fn write_curve<W: Write>(rows: &[CurveRow], out: W) -> Result<()> {
    let mut w = writer(out, &["a_s_m", "lc_m", "A"])?;
    for r in rows {
        w.write_record([fmt_f64(r.a_s_m), fmt_f64(r.lc_m), fmt_f64(r.degree_of_coherence)])?;
    }
    finish(w)
}

/// Long format: one `i,j,c` row per pixel pair.
pub fn write_coincidence_map<W: Write>(map: &CoincidenceMap, out: W) -> Result<()> {
    let mut w = writer(out, &["i", "j", "c"])?;
    let n2 = map.region2.len as usize;
    for (k, c) in map.values().iter().enumerate() {
        w.write_record([(k / n2).to_string(), (k % n2).to_string(), fmt_f64(*c)])?;
    }
    finish(w)
}

/// Reconstructed pattern beside its normalized ground truth.
pub fn write_reconstruction<W: Write>(pattern: &Pattern, truth: &[f64], out: W) -> Result<()> {
    if truth.len() != pattern.len() {
        return Err(Error::GridMismatch(format!(
            "{} pattern samples, {} truth samples",
            pattern.len(),
            truth.len()
        )));
    }
    let mut w = writer(out, &["u1_m", "rate_norm", "truth_norm"])?;
    for ((u, v), t) in pattern.positions().iter().zip(pattern.values()).zip(truth) {
        w.write_record([fmt_f64(*u), fmt_f64(*v), fmt_f64(*t)])?;
    }
    finish(w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-3, 6.02214076e23, 5e-324, 0.0] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
    }

    #[test]
    fn pattern_csv_layout() {
        let p = Pattern::normalized(vec![-1e-3, 0.0], &[1.0, 2.0]).unwrap();
        let mut buf = Vec::new();
        write_pattern(&p, "u2_m", &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "u2_m,rate_norm\n-1.0000000000000000e-3,5.0000000000000000e-1\n0.0000000000000000e0,1.0000000000000000e0\n"
        );
    }

    #[test]
    fn reconstruction_needs_matching_truth() {
        let p = Pattern::normalized(vec![0.0, 1.0], &[1.0, 2.0]).unwrap();
        assert!(write_reconstruction(&p, &[1.0], Vec::new()).is_err());
    }
}
