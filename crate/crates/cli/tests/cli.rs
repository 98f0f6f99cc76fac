use std::path::{Path, PathBuf};
use std::process::Command;

use cavity_readout_cli::csvio::parse_table;
use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_cavity-readout");

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run(args: &[&str]) -> Run {
    let out = Command::new(BIN).args(args).output().expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// `(omega_L_MHz, S_value)` columns of a CSV.
fn columns(text: &str) -> (Vec<f64>, Vec<f64>) {
    let t = parse_table(text).unwrap();
    let col = |name: &str| -> Vec<f64> {
        let i = t.column(name).unwrap();
        t.rows.iter().map(|r| r[i].parse().unwrap()).collect()
    };
    (col("omega_L_MHz"), col("S_value"))
}

/// Indices of strict interior local maxima above 2% of the top value.
fn maxima(v: &[f64]) -> Vec<usize> {
    let top = v.iter().copied().fold(0.0, f64::max);
    (1..v.len() - 1)
        .filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] > 0.02 * top)
        .collect()
}

#[test]
fn validate_reports_ratio() {
    let r = run(&["validate", "--params-preset", "n1-2010"]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert!(r.stdout.contains("g1/Delta1 = 0.055"), "{}", r.stdout);
}

#[test]
fn validate_resonant_qubit_fails() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        r#"{"device": {"cavity_freq_MHz": 6000, "kappa_MHz": 1,
             "qubits": [{"gamma_shift_MHz": 3}, {"omega_MHz": 6000, "g_MHz": 50}]}}"#,
    );
    let r = run(&["validate", "-c", s(&cfg)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("qubit 2"), "{}", r.stderr);
}

#[test]
fn validate_empty_register_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        r#"{"device": {"cavity_freq_MHz": 6000, "kappa_MHz": 1}}"#,
    );
    assert_eq!(run(&["validate", "-c", s(&cfg)]).code, 0);
}

#[test]
fn validate_strong_coupling_fails() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        r#"{"device": {"cavity_freq_MHz": 6000, "kappa_MHz": 1,
             "qubits": [{"omega_MHz": 5500, "g_MHz": 200}]}}"#,
    );
    let r = run(&["validate", "-c", s(&cfg)]);
    assert_eq!(r.code, 2);
    assert!(r.stdout.contains("FAIL"));
}

#[test]
fn malformed_config_is_exit_two_with_location() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        "{\n \"preset\": \"n1-2010\",\n \"grid\": {\"pionts\": 3}\n}",
    );
    let r = run(&["spectrum", "-c", s(&cfg)]);
    assert_eq!(r.code, 2);
    assert!(
        r.stderr.contains("pionts") && r.stderr.contains("line 3"),
        "{}",
        r.stderr
    );
}

#[test]
fn exact_spectrum_straddles_cavity() {
    let r = run(&[
        "spectrum",
        "--params-preset",
        "n1-2010",
        "--probs",
        "0.5,0.5",
        "-m",
        "exact",
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (w, v) = columns(&r.stdout);
    let m = maxima(&v);
    assert_eq!(m.len(), 2);
    assert!((w[m[0]] - 6444.2 + 7.37).abs() < 0.05);
    assert!((w[m[1]] - 6444.2 - 7.37).abs() < 0.05);
    assert!(r
        .stdout
        .starts_with("# cavity-readout 0.1.0 method=exact params="));
    assert!(r.stdout.lines().nth(1) == Some("omega_L_MHz,S_value"));
    assert!(!r.stdout.contains('\r'));
}

#[test]
fn meanfield_spectrum_single_max_at_cavity() {
    let r = run(&[
        "spectrum",
        "--params-preset",
        "n1-2010",
        "--probs",
        "0.5,0.5",
        "-m",
        "meanfield",
    ]);
    assert_eq!(r.code, 0);
    let (w, v) = columns(&r.stdout);
    let m = maxima(&v);
    assert_eq!(m.len(), 1);
    assert!((w[m[0]] - 6444.2).abs() < 1e-6);
}

#[test]
fn method_qubit_mismatch_is_exit_two() {
    let r = run(&[
        "spectrum",
        "--params-preset",
        "n1-2010",
        "--probs",
        "0.5,0.5",
        "-m",
        "closed2",
    ]);
    assert_eq!(r.code, 2);
    let r = run(&[
        "spectrum",
        "--params-preset",
        "n1-2010",
        "--probs",
        "0.5,0.5",
        "-m",
        "bogus",
    ]);
    assert_eq!(r.code, 2);
}

#[test]
fn row_format() {
    let r = run(&[
        "spectrum",
        "--params-preset",
        "n2-2010",
        "--ket",
        "11",
        "--points",
        "5",
    ]);
    for line in r.stdout.lines().skip(2) {
        let (w, v) = line.split_once(',').unwrap();
        assert_eq!(w.split_once('.').unwrap().1.len(), 6, "{line}");
        let (mantissa, exp) = v.split_once('e').unwrap();
        assert_eq!(mantissa.trim_start_matches('-').len(), 13, "{line}");
        assert!(exp.starts_with('+') || exp.starts_with('-'));
    }
}

#[test]
fn oracle_matches_exact_on_coarse_grid() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        r#"{"preset": "n1-2010", "state": {"n_qubits": 1, "probs": [0.3, 0.7]},
            "grid": {"half_span_MHz": 20, "points": 11}}"#,
    );
    let oracle = run(&["oracle", "-c", s(&cfg)]);
    assert_eq!(oracle.code, 0, "{}", oracle.stderr);
    let exact = run(&["spectrum", "-c", s(&cfg)]);
    let (_, a) = columns(&oracle.stdout);
    let (_, b) = columns(&exact.stdout);
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() <= 1e-3 * y);
    }
    let t = parse_table(&oracle.stdout).unwrap();
    assert_eq!(
        t.header,
        [
            "omega_L_MHz",
            "S_value",
            "converged",
            "tail_occupation",
            "steps"
        ]
    );
    for row in &t.rows {
        assert_eq!(row[2], "1");
        assert!(row[3].parse::<f64>().unwrap() < 1e-6);
    }
}

#[test]
fn oracle_without_drive_is_zero() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        r#"{"preset": "n1-2010", "state": {"n_qubits": 1, "basis": 1},
            "grid": {"half_span_MHz": 20, "points": 5}, "oracle": {"drive_MHz": 0}}"#,
    );
    let r = run(&["oracle", "-c", s(&cfg)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let (_, v) = columns(&r.stdout);
    assert!(v.iter().all(|x| *x == 0.0));
}

#[test]
fn oracle_non_convergence_is_exit_three_with_data() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o.csv");
    let cfg = write(
        &dir,
        "c.json",
        r#"{"preset": "n1-2010", "state": {"n_qubits": 1, "basis": 0},
            "grid": {"half_span_MHz": 20, "points": 3}, "oracle": {"max_time_us": 0.01}}"#,
    );
    let r = run(&["oracle", "-c", s(&cfg), "-o", s(&out)]);
    assert_eq!(r.code, 3);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(parse_table(&text).unwrap().rows.len(), 3);
}

#[test]
fn decay_populations_and_spectrum() {
    let dir = TempDir::new().unwrap();
    let pops = dir.path().join("p.csv");
    let spec = dir.path().join("s.csv");
    let cfg = write(
        &dir,
        "c.json",
        r#"{"preset": "n2-2010", "state": {"n_qubits": 2, "ket": "11"},
            "decay": {"times_us": [0, 1], "spectrum_time_us": 0.5}}"#,
    );
    let r = run(&[
        "decay",
        "-c",
        s(&cfg),
        "--populations",
        s(&pops),
        "--spectrum",
        s(&spec),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let t = parse_table(&std::fs::read_to_string(&pops).unwrap()).unwrap();
    assert_eq!(t.header, ["tau_us", "p_00", "p_10", "p_01", "p_11"]);
    let row =
        |i: usize| -> Vec<f64> { t.rows[i][1..].iter().map(|x| x.parse().unwrap()).collect() };
    assert_eq!(row(0), [0.0, 0.0, 0.0, 1.0]);
    for (a, b) in row(1).iter().zip([0.3996, 0.2325, 0.2325, 0.1353]) {
        assert!((a - b).abs() < 1e-4);
    }
    let (_, v) = columns(&std::fs::read_to_string(&spec).unwrap());
    assert_eq!(maxima(&v).len(), 4);
}

#[test]
fn decay_requires_spectrum_path() {
    let r = run(&["decay", "--params-preset", "n2-2010", "--ket", "11"]);
    assert_eq!(r.code, 2);
}

#[test]
fn averaged_peak_counts() {
    let expected = [("00", 1), ("01", 2), ("10", 2), ("11", 4)];
    for (ket, count) in expected {
        let r = run(&["average", "--params-preset", "n2-2010", "--ket", ket]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        let (_, v) = columns(&r.stdout);
        assert_eq!(maxima(&v).len(), count, "ket {ket}");
    }
    let avg = run(&["average", "--params-preset", "n2-2010", "--ket", "00"]);
    let now = run(&["spectrum", "--params-preset", "n2-2010", "--ket", "00"]);
    assert_eq!(columns(&avg.stdout), columns(&now.stdout));
}

fn infer_json(cfg: &[&str], csv: &Path) -> Value {
    let mut args = vec!["infer"];
    args.extend_from_slice(cfg);
    args.extend(["-i", s(csv)]);
    let r = run(&args);
    assert_eq!(r.code, 0, "{}", r.stderr);
    serde_json::from_str(&r.stdout).unwrap()
}

#[test]
fn infer_round_trip() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("s.csv");
    let r = run(&[
        "spectrum",
        "--params-preset",
        "n2-2010",
        "--probs",
        "0.2,0.2,0.26,0.34",
        "-o",
        s(&csv),
    ]);
    assert_eq!(r.code, 0);
    let report = infer_json(&["--params-preset", "n2-2010"], &csv);
    let probs: Vec<f64> = serde_json::from_value(report["basis_probs"].clone()).unwrap();
    for (a, b) in probs.iter().zip([0.2, 0.2, 0.26, 0.34]) {
        assert!((a - b).abs() < 1e-3);
    }
    assert_eq!(report["peaks"].as_array().unwrap().len(), 4);
    assert_eq!(report["unresolvable"], Value::Bool(false));
}

#[test]
fn infer_empty_cavity() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        r#"{"device": {"cavity_freq_MHz": 6000, "kappa_MHz": 1},
            "state": {"n_qubits": 0, "probs": [1]}, "grid": {"half_span_MHz": 10, "points": 401}}"#,
    );
    let csv = dir.path().join("s.csv");
    assert_eq!(run(&["spectrum", "-c", s(&cfg), "-o", s(&csv)]).code, 0);
    let report = infer_json(&["-c", s(&cfg)], &csv);
    assert_eq!(report["weights"], serde_json::json!([1.0]));
}

#[test]
fn infer_noisy_round_trip() {
    let dir = TempDir::new().unwrap();
    let cfg = write(
        &dir,
        "c.json",
        r#"{"preset": "n2-2010", "state": {"n_qubits": 2, "probs": [0.34, 0.66, 0, 0]},
            "spectrum": {"noise_fraction": 0.01}, "seed": 11}"#,
    );
    let csv = dir.path().join("s.csv");
    assert_eq!(run(&["spectrum", "-c", s(&cfg), "-o", s(&csv)]).code, 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.lines().next().unwrap().contains("seed=11"));
    let report = infer_json(&["-c", s(&cfg)], &csv);
    let probs: Vec<f64> = serde_json::from_value(report["basis_probs"].clone()).unwrap();
    for (a, b) in probs.iter().zip([0.34, 0.66, 0.0, 0.0]) {
        assert!((a - b).abs() < 0.05);
    }
}

#[test]
fn infer_rejects_narrow_grid() {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("s.csv");
    run(&[
        "spectrum",
        "--params-preset",
        "n1-2010",
        "--probs",
        "0.5,0.5",
        "-o",
        s(&csv),
    ]);
    let r = run(&["infer", "--params-preset", "n2-2010", "-i", s(&csv)]);
    assert_eq!(r.code, 2);
}

#[test]
fn plot_rejects_bad_input() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("p.svg");
    let empty = write(&dir, "e.csv", "");
    assert_eq!(run(&["plot", "-i", s(&empty), "-o", s(&out)]).code, 2);
    let header_only = write(&dir, "h.csv", "# meta\nomega_L_MHz,S_value\n");
    assert_eq!(run(&["plot", "-i", s(&header_only), "-o", s(&out)]).code, 2);
    let ragged = write(&dir, "r.csv", "omega_L_MHz,S_value\n1,2\n3\n");
    let r = run(&["plot", "-i", s(&ragged), "-o", s(&out)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("row 2"), "{}", r.stderr);
    let one = write(&dir, "o.csv", "omega_L_MHz\n1\n2\n");
    assert_eq!(run(&["plot", "-i", s(&one), "-o", s(&out)]).code, 2);
    assert!(!out.exists());
}

#[test]
fn plot_matches_golden_file() {
    let dir = TempDir::new().unwrap();
    let fixtures = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures");
    let out = dir.path().join("p.svg");
    let r = run(&[
        "plot",
        "-i",
        s(&fixtures.join("plot_input.csv")),
        "-o",
        s(&out),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let got = std::fs::read_to_string(&out).unwrap();
    let want = std::fs::read_to_string(fixtures.join("plot_golden.svg")).unwrap();
    assert_eq!(got, want);
}

#[test]
fn missing_input_is_io_error() {
    let r = run(&["plot", "-i", "/nonexistent/x.csv", "-o", "/tmp/never.svg"]);
    assert_eq!(r.code, 1);
}
