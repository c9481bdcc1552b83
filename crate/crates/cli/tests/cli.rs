use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_speechpinn"))
}

fn config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/vowel_a.toml")
}

fn run<S: AsRef<std::ffi::OsStr>>(args: &[S]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report_value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
        .parse()
        .unwrap()
}

fn assert_one_line_error(out: &Output, kind: &str) {
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    let lines: Vec<&str> = err.lines().collect();
    assert_eq!(lines.len(), 1, "{err}");
    assert!(lines[0].starts_with(&format!("error: {kind}: ")), "{err}");
}

const TINY: [&str; 16] = [
    "--set", "run.minibatches=2",
    "--set", "run.epochs=2",
    "--set", "run.n_f=24",
    "--set", "run.n_t=8",
    "--set", "run.n_r=8",
    "--set", "run.fold_width=4",
    "--set", "run.tract_width=4",
    "--set", "run.fourier_features=3",
];

#[test]
fn reference_without_pressure_reports_no_oscillation() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["reference", "--config", s(&config()), "--out", s(dir.path()), "--set", "physics.p_s=0"]);
    assert_one_line_error(&out, "no_oscillation");
    let report = std::fs::read_to_string(dir.path().join("reference_report.txt")).unwrap();
    assert!(report.starts_with("no oscillation detected"));
}

#[test]
fn reference_then_inverse_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for d in [&a, &b] {
        let out = run(&["reference", "--config", s(&config()), "--out", s(d)]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["reference_cycle.csv", "reference_series.csv", "lip_pressure.txt"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    let report = String::from_utf8(run(&["reference", "--config", s(&config()), "--out", s(&a)]).stdout).unwrap();
    let period = report_value(&report, "period_s");
    assert!((4.0e-3..7.0e-3).contains(&period));

    let inv = dir.path().join("inv");
    let wave = a.join("lip_pressure.txt");
    let cfg = config();
    let mut args = vec!["pinn-inverse", "--config", s(&cfg), "--out", s(&inv)];
    args.extend(["--waveform", s(&wave), "--progress", "0"]);
    args.extend(TINY);
    let out = run(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(inv.join("inverse_report.txt")).unwrap();
    let est = report_value(&text, "p_s_estimate_pa");
    let rel = report_value(&text, "p_s_relative_error");
    assert_eq!(report_value(&text, "p_s_config_pa"), 785.0);
    assert!(((est - 785.0) / 785.0 - rel).abs() < 1e-12);
    assert!((report_value(&text, "period_s") - period).abs() < 1e-15);
    for f in ["history.csv", "model.ckpt", "pinn_cycle.csv"] {
        assert!(inv.join(f).exists(), "{f}");
    }
}

#[test]
fn forward_training_writes_artifacts_reproducibly() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    let cfg = config();
    for name in ["a", "b"] {
        let d = dir.path().join(name);
        let mut args = vec!["pinn-forward", "--config", s(&cfg), "--no-reference", "--progress", "0"];
        args.extend(["--out", s(&d)]);
        args.extend(TINY);
        let out = run(&args);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push(d);
    }
    for f in ["history.csv", "model.ckpt", "pinn_cycle.csv"] {
        let a = std::fs::read(outputs[0].join(f)).unwrap();
        assert_eq!(a, std::fs::read(outputs[1].join(f)).unwrap(), "{f}");
    }
    let history = std::fs::read_to_string(outputs[0].join("history.csv")).unwrap();
    assert!(history.starts_with("epoch,loss_total,"));
    assert_eq!(history.lines().count(), 3);
}

#[test]
fn analyze_finds_a_440_hz_tone() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("tone.csv");
    let mut text = String::from("t_s,signal\n");
    for i in 0..8000 {
        let t = i as f64 / 8000.0;
        text += &format!("{t},{}\n", (2.0 * std::f64::consts::PI * 440.0 * t).sin());
    }
    std::fs::write(&csv, text).unwrap();
    let out = run(&["analyze", "--input", s(&csv), "--out", s(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = String::from_utf8(out.stdout).unwrap();
    assert!((report_value(&report, "peak_hz") - 440.0).abs() <= report_value(&report, "bin_width_hz"));
    assert!((report_value(&report, "f1_hz") - 440.0).abs() < 5.0);
    assert!(dir.path().join("spectrum.csv").exists());
}

#[test]
fn gradcheck_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["gradcheck", "--config", s(&config()), "--out", s(dir.path())]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = String::from_utf8(out.stdout).unwrap();
    assert!(report.contains("pass=true"));
    assert!(report_value(&report, "max_rel_error") < 1e-4);
}

#[test]
fn errors_are_single_machine_readable_lines() {
    let dir = tempfile::tempdir().unwrap();
    let d = s(dir.path());
    assert_one_line_error(&run(&["pinn-inverse", "--config", s(&config()), "--out", d]), "missing_input");
    assert_one_line_error(
        &run(&["reference", "--config", s(&config()), "--out", d, "--set", "physics.m_1=-1"]),
        "invalid_param",
    );
    assert_one_line_error(&run(&["reference", "--config", "/nonexistent.toml", "--out", d]), "io");
    assert_one_line_error(&run(&["gradcheck", "--out", d]), "invalid_param");
    let bad = dir.path().join("bad.txt");
    std::fs::write(&bad, "period_s=0.006\n1\n2\n").unwrap();
    assert_one_line_error(
        &run(&["pinn-inverse", "--config", s(&config()), "--out", d, "--waveform", s(&bad)]),
        "format",
    );
}

#[test]
fn thread_count_variable_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["gradcheck", "--config", s(&config()), "--out", s(dir.path())])
        .env("SPEECHPINN_THREADS", "zero")
        .output()
        .unwrap();
    assert_one_line_error(&out, "invalid_param");
    let out = bin()
        .args(["gradcheck", "--config", s(&config()), "--out", s(dir.path())])
        .env("SPEECHPINN_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
}
