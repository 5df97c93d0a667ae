//! Acceptance run: every criterion at its stated tolerance, one verdict line
//! each, written straight to stdout so the lines survive output capture.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use bpnld::characterization::{bessel_j1, bessel_visibility, fit_spot_size, nu_parameter, CharacterizationSetup, VisibilityMeasurement};
use bpnld::closed_form::{scan_pattern, ApertureMapping, ExperimentSpec, ScanSpec};
use bpnld::frames::{coincidence_map, discretize_joint, pattern_from_frames, synthesize_frames, DetectorModel, JointPdf, Region};
use bpnld::model::{coherence_length_for_a, degree_of_coherence, momentum_correlation_width, LayoutSpec, PolarizationAngles, PumpSpec};
use bpnld::oracle::{convergence_report, QuadratureConfig};
use bpnld::pattern::{local_maxima, visibility};

const SWEEP_A: [f64; 4] = [0.99, 0.76, 0.5, 0.2];
const SWEEP_SLITS: [f64; 4] = [0.2e-3, 0.4e-3, 0.6e-3, 0.8e-3];
const WIRE: f64 = 80e-6;
const LAMBDA_SI: f64 = 810e-9;
const Z1: f64 = 0.2;

struct Verdict {
    id: u32,
    title: &'static str,
    pass: bool,
    detail: String,
}

fn report(v: &Verdict) {
    let line = format!(
        "acceptance {} [{}] {}: {}\n",
        v.id,
        if v.pass { "PASS" } else { "FAIL" },
        v.title,
        v.detail
    );
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
}

fn spec(a: f64, slit: f64) -> ExperimentSpec {
    ExperimentSpec::new(
        PumpSpec::with_degree_of_coherence(405e-9, 2.3e-3, a).unwrap(),
        LayoutSpec::new(LAMBDA_SI, 0.1, Z1).unwrap(),
        slit,
        WIRE,
        PolarizationAngles::default(),
        ScanSpec::default(),
        ApertureMapping::WireEnvelope,
    )
    .unwrap()
}

/// Runs the command line in-process; path arguments are taken relative to `dir`.
fn bpnld(args: &[&str], dir: &Path) -> u8 {
    let mut argv = vec!["bpnld".to_string()];
    let mut it = args.iter();
    while let Some(&a) = it.next() {
        argv.push(a.to_string());
        if a == "--out" || a == "--config" {
            let value = it.next().expect("flag value");
            argv.push(dir.join(value).to_string_lossy().into_owned());
        }
    }
    bpnld_cli::run_from_args(argv)
}

fn read_pattern_csv(path: &Path) -> (Vec<f64>, Vec<f64>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let mut u = Vec::new();
    let mut v = Vec::new();
    for rec in r.records() {
        let rec = rec.unwrap();
        u.push(rec[0].parse::<f64>().unwrap());
        v.push(rec[1].parse::<f64>().unwrap());
    }
    (u, v)
}

/// Peak positions refined by a parabola through each sampled maximum.
fn refined_peaks(u: &[f64], v: &[f64], half_window: f64) -> Vec<f64> {
    let h = u[1] - u[0];
    local_maxima(v)
        .into_iter()
        .filter(|&i| i > 0 && i + 1 < v.len() && v[i] > 0.0 && u[i].abs() < half_window)
        .map(|i| {
            let (a, b, c) = (v[i - 1], v[i], v[i + 1]);
            let d = a - 2.0 * b + c;
            if d != 0.0 {
                u[i] + 0.5 * h * (a - c) / d
            } else {
                u[i]
            }
        })
        .collect()
}

fn median(mut x: Vec<f64>) -> Option<f64> {
    if x.is_empty() {
        return None;
    }
    x.sort_by(f64::total_cmp);
    Some(x[x.len() / 2])
}

fn criterion_fringe_geometry(tmp: &Path) -> Verdict {
    let start = Instant::now();
    let lobe = LAMBDA_SI * Z1 / (2.0 * WIRE);
    let mut failures = Vec::new();
    let mut summary = Vec::new();
    for a in SWEEP_A {
        let mut counts = Vec::new();
        for b in SWEEP_SLITS {
            let dir = format!("c1_{a}_{b}");
            fs::write(
                tmp.join("c1.json"),
                format!(r#"{{"experiment":{{"slit_width_m":{b:e},"wire_width_m":{WIRE:e},"pump":{{"coherence_A":{a}}}}}}}"#),
            )
            .unwrap();
            let code = bpnld(&["pattern", "--config", "c1.json", "--out", &dir], tmp);
            if code != 0 {
                failures.push(format!("A={a} b={b:e}: pattern exited {code}"));
                counts.push(0);
                continue;
            }
            let (u, v) = read_pattern_csv(&tmp.join(&dir).join("pattern.csv"));
            let step = u[1] - u[0];
            let peaks = refined_peaks(&u, &v, lobe);
            counts.push(peaks.len());
            let expected = LAMBDA_SI * Z1 / (2.0 * b);
            match median(peaks.windows(2).map(|w| w[1] - w[0]).collect()) {
                Some(s) if (s - expected).abs() <= step => {}
                Some(s) => failures.push(format!(
                    "A={a} b={:.1}mm spacing {:.1}µm vs {:.1}µm",
                    b * 1e3,
                    s * 1e6,
                    expected * 1e6
                )),
                None => failures.push(format!("A={a} b={:.1}mm: {} peak(s), no spacing", b * 1e3, peaks.len())),
            }
        }
        for (k, &n) in counts.iter().enumerate().skip(1) {
            let want = (k + 1) * counts[0];
            if n.abs_diff(want) > 1 {
                failures.push(format!("A={a} b={:.1}mm: {n} fringes, want {want}±1", SWEEP_SLITS[k] * 1e3));
            }
        }
        summary.push(format!("A={a} counts {counts:?}"));
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 1.0 {
        failures.push(format!("runtime {secs:.2}s ≥ 1s"));
    }
    Verdict {
        id: 1,
        title: "fringe geometry",
        pass: failures.is_empty(),
        detail: format!("{}; {:.2}s; failures: [{}]", summary.join(", "), secs, failures.join("; ")),
    }
}

fn criterion_visibility_vs_coherence() -> Verdict {
    let start = Instant::now();
    let mut vis = Vec::new();
    let mut errors = Vec::new();
    for a in SWEEP_A {
        let s = spec(a, 0.55e-3);
        match scan_pattern(&s).and_then(|p| visibility(&p)) {
            Ok(v) => vis.push(v),
            Err(e) => errors.push(format!("A={a}: {e}")),
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let lo = vis.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = vis.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let pass = errors.is_empty() && lo >= 0.9 && hi - lo <= 0.05 && secs < 5.0;
    Verdict {
        id: 2,
        title: "visibility vs coherence",
        pass,
        detail: format!("V = {vis:.6?}, min {lo:.6}, spread {:.2e}, {secs:.2}s {errors:?}", hi - lo),
    }
}

fn criterion_oracle_equivalence(tmp: &Path) -> Verdict {
    let start = Instant::now();
    let code = bpnld(&["oracle", "--out", "c3"], tmp);
    let secs = start.elapsed().as_secs_f64();
    if code != 0 {
        return Verdict {
            id: 3,
            title: "oracle equivalence",
            pass: false,
            detail: format!("oracle exited {code}"),
        };
    }
    let dir = tmp.join("c3");
    let cmp: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("comparison.json")).unwrap()).unwrap();
    let linf = cmp["linf"].as_f64().unwrap();
    let zeros = cmp["zeros_coincide"].as_bool().unwrap();
    let offsets = cmp["zero_offsets"].as_array().unwrap();
    let step = cmp["grid_step_m"].as_f64().unwrap();
    let misplaced = offsets
        .iter()
        .filter(|z| z["offset_m"].as_f64().is_none_or(|o| o.abs() > step * (1.0 + 1e-9)))
        .count();
    let report = dir.join("deviation_report.json").exists();
    let linf_ok = linf <= 0.1;
    let pass = zeros && (linf_ok || report) && secs <= 600.0;
    Verdict {
        id: 3,
        title: "oracle equivalence",
        pass,
        detail: format!(
            "L∞ = {linf:.4} (limit 0.1), zeros coincide: {zeros} ({misplaced}/{} misplaced beyond {:.0}µm), deviation report: {report}, {secs:.1}s",
            offsets.len(),
            step * 1e6
        ),
    }
}

fn criterion_convergence() -> Verdict {
    let probes = [-0.95e-3, -0.5e-3, 0.0, 0.6e-3, 1.2e-3];
    match convergence_report(&spec(0.99, 0.55e-3), &QuadratureConfig::default(), &probes) {
        Ok(r) => Verdict {
            id: 4,
            title: "quadrature convergence",
            pass: r.max_relative_change < 0.01 && r.max_imag_residual < 1e-6,
            detail: format!(
                "max relative change {:.3e} (limit 1e-2), max imaginary residual {:.3e} (limit 1e-6)",
                r.max_relative_change, r.max_imag_residual
            ),
        },
        Err(e) => Verdict {
            id: 4,
            title: "quadrature convergence",
            pass: false,
            detail: e.to_string(),
        },
    }
}

fn criterion_coherence_algebra() -> Verdict {
    let w0 = 2.3e-3;
    let n = 400;
    let mut worst_round_trip = 0.0f64;
    let mut monotone = true;
    let mut prev_wk = f64::INFINITY;
    for i in 0..n {
        let ratio = 0.1 * 1000f64.powf(i as f64 / (n - 1) as f64);
        let lc = ratio * w0;
        let pump = PumpSpec::new(405e-9, w0, lc).unwrap();
        let back = coherence_length_for_a(w0, degree_of_coherence(&pump)).unwrap();
        worst_round_trip = worst_round_trip.max((back - lc).abs() / lc);
        let wk = momentum_correlation_width(&pump);
        monotone &= wk < prev_wk;
        prev_wk = wk;
    }
    let limit = momentum_correlation_width(&PumpSpec::new(405e-9, w0, 1e3 * w0).unwrap());
    let limit_err = (limit * w0 - 1.0).abs();
    Verdict {
        id: 5,
        title: "coherence algebra",
        pass: worst_round_trip <= 1e-12 && monotone && limit_err <= 1e-6,
        detail: format!(
            "round trip {worst_round_trip:.2e} (limit 1e-12), w_k monotone: {monotone}, lc = 10³w0 limit error {limit_err:.2e} (limit 1e-6)"
        ),
    }
}

fn j1_series30(x: f64) -> f64 {
    let h = x / 2.0;
    let mut term = h;
    let mut sum = term;
    for m in 1..30 {
        term *= -h * h / (m as f64 * (m + 1) as f64);
        sum += term;
    }
    sum
}

fn criterion_bessel_model() -> Verdict {
    let at_zero = bessel_visibility(0.0);
    let at_root = bessel_visibility(3.8317);
    let series_err = (0..=12_000)
        .map(|k| k as f64 * 1e-3)
        .map(|x| (bessel_j1(x) - j1_series30(x)).abs())
        .fold(0.0, f64::max);
    let setup = CharacterizationSetup::new(0.2, vec![0.25e-3, 0.5e-3, 0.75e-3, 1e-3], 0.15e-3, 405e-9).unwrap();
    let truth = 1e-4;
    let data: Vec<_> = setup
        .slit_separations_m
        .iter()
        .map(|&d| {
            let nu = nu_parameter(setup.pump_wavenumber(), d, truth, setup.focal_length_m);
            VisibilityMeasurement::new(d, bessel_visibility(nu)).unwrap()
        })
        .collect();
    let fit_err = fit_spot_size(&data, &setup).map(|f| (f.a_s_m / truth - 1.0).abs());
    let fit_ok = matches!(fit_err, Ok(e) if e <= 1e-3);
    Verdict {
        id: 6,
        title: "Bessel model",
        pass: at_zero == 1.0 && at_root <= 1e-4 && series_err <= 1e-10 && fit_ok,
        detail: format!(
            "V(0) = {at_zero}, V(3.8317) = {at_root:.2e}, J1 vs series {series_err:.2e}, fit error {:?}",
            fit_err.map(|e| format!("{e:.2e}")).map_err(|e| e.to_string())
        ),
    }
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn criterion_frame_pipeline() -> Verdict {
    let start = Instant::now();
    let det = DetectorModel::default();
    let r1 = Region { x0: 32, y: 16, len: 64 };
    let r2 = Region { x0: 32, y: 48, len: 64 };
    let n = 40_000;
    let pdf = discretize_joint(&spec(0.5, 0.4e-3), &det, r1, r2).unwrap();
    let m2 = pdf.marginal2();
    let j_star = (0..m2.len()).fold(0, |best, j| if m2[j] > m2[best] { j } else { best });

    let first = synthesize_frames(&pdf, 0.5, &det, n, 42).unwrap();
    let again = synthesize_frames(&pdf, 0.5, &det, n, 42).unwrap();
    let p1 = pattern_from_frames(&first, r1, r2, j_star, det.pixel_pitch_m).unwrap();
    let p2 = pattern_from_frames(&again, r1, r2, j_star, det.pixel_pitch_m).unwrap();
    let deterministic = first == again
        && p1 == p2
        && coincidence_map(&first, r1, r2).unwrap() == coincidence_map(&again, r1, r2).unwrap();
    let r = pearson(p1.values(), &pdf.column(j_star));

    let p_a: Vec<f64> = (0..64).map(|i| 1.0 + (i % 9) as f64).collect();
    let p_b: Vec<f64> = (0..64).map(|j| 1.0 + (j % 4) as f64).collect();
    let product = p_a.iter().flat_map(|a| p_b.iter().map(move |b| a * b)).collect();
    let independent = JointPdf::from_weights(r1, r2, product).unwrap();
    let null = synthesize_frames(&independent, 200.0, &det, n, 43).unwrap();
    let worst = coincidence_map(&null, r1, r2)
        .unwrap()
        .values()
        .iter()
        .fold(0.0f64, |m, c| m.max(c.abs()));
    let bound = 4.0 / (n as f64).sqrt();
    let secs = start.elapsed().as_secs_f64();
    Verdict {
        id: 7,
        title: "frame pipeline end-to-end",
        pass: r >= 0.95 && deterministic && worst <= bound && secs < 60.0,
        detail: format!(
            "Pearson r = {r:.4} (limit 0.95) at j* = {j_star}, deterministic: {deterministic}, null max|C| = {worst:.2e} (bound {bound:.2e}), {secs:.1}s"
        ),
    }
}

fn tree_bytes(root: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.push((path.strip_prefix(root).unwrap().to_path_buf(), fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn criterion_sweep_consistency(tmp: &Path) -> Verdict {
    let codes = (bpnld(&["sweep", "--out", "c8a"], tmp), bpnld(&["sweep", "--out", "c8b"], tmp));
    if codes != (0, 0) {
        return Verdict {
            id: 8,
            title: "sweep consistency",
            pass: false,
            detail: format!("exit codes {codes:?}"),
        };
    }
    let ta = tree_bytes(&tmp.join("c8a"));
    let tb = tree_bytes(&tmp.join("c8b"));
    let rows = fs::read_to_string(tmp.join("c8a/summary.csv")).unwrap().lines().count() - 1;
    let patterns = ta.iter().filter(|(p, _)| p.starts_with("patterns")).count();
    let identical = ta == tb;
    Verdict {
        id: 8,
        title: "sweep consistency",
        pass: identical && rows == 16 && patterns == 16,
        detail: format!("{rows} summary rows, {patterns} pattern files, {} files byte-identical: {identical}", ta.len()),
    }
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let verdicts = [
        criterion_fringe_geometry(tmp.path()),
        criterion_visibility_vs_coherence(),
        criterion_oracle_equivalence(tmp.path()),
        criterion_convergence(),
        criterion_coherence_algebra(),
        criterion_bessel_model(),
        criterion_frame_pipeline(),
        criterion_sweep_consistency(tmp.path()),
    ];
    for v in &verdicts {
        report(v);
    }
    let failed: Vec<String> = verdicts.iter().filter(|v| !v.pass).map(|v| format!("{} ({})", v.id, v.title)).collect();
    assert!(failed.is_empty(), "acceptance criteria failed: {}", failed.join(", "));
}
