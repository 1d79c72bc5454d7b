use std::path::Path;
use std::process::{Command, Output};

use levcs_core::Config;

fn levcs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_levcs")).args(args).output().unwrap()
}

fn write_config(dir: &Path, edit: impl FnOnce(&mut Config)) -> String {
    let mut c = Config::paper_defaults();
    edit(&mut c);
    let path = dir.join("run.cfg");
    std::fs::write(&path, c.serialize()).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn freqs_lists_ordered_spectrum() {
    let out = levcs(&["freqs"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let f: Vec<f64> = text
        .lines()
        .skip(1)
        .take(6)
        .map(|l| l.split('\t').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(f[5] < f[2] && f[2] < f[0] && f[0] < f[1] && f[1] < f[3] && f[3] < f[4], "{text}");
    assert!(text.contains("gamma trap depth"));
}

#[test]
fn zero_duration_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |c| c.simulation.duration = 0.0);
    let out = levcs(&["--config", &cfg, "--out", dir.path().to_str().unwrap(), "simulate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(trace.lines().filter(|l| !l.starts_with('#')).count(), 1);
}

#[test]
fn invalid_config_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), |c| c.particle.eps_r = -2.0);
    let out = levcs(&["--config", &cfg, "freqs"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.starts_with("error category=config code=2 message="), "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn missing_config_exits_with_io_code() {
    let out = levcs(&["--config", "/nonexistent/run.cfg", "freqs"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn unwritable_output_exits_with_io_code() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "").unwrap();
    let cfg = write_config(dir.path(), |c| c.simulation.duration = 1e-5);
    let out = levcs(&["--config", &cfg, "--out", blocker.join("sub").to_str().unwrap(), "simulate"]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn psd_and_spectrogram_of_short_trace() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let cfg = write_config(dir.path(), |c| c.simulation.duration = 2e-3);
    assert!(levcs(&["--config", &cfg, "--out", d, "simulate"]).status.success());
    let trace = dir.path().join("trace.csv");
    let t = trace.to_str().unwrap();

    let out = levcs(&["--out", d, "psd", "--input", t, "--column", "x_m", "--segment", "1024"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let psd = std::fs::read_to_string(dir.path().join("psd_x_m.csv")).unwrap();
    assert!(psd.lines().filter(|l| !l.starts_with('#')).count() > 500);

    let out = levcs(&[
        "--config", &cfg, "--out", d, "spectrogram", "--input", t, "--column", "b", "--segment", "1024",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let out = levcs(&["--out", d, "psd", "--input", t, "--column", "nope"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("no column `nope`"));
}

#[test]
fn fit_writes_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = levcs(&["--out", dir.path().to_str().unwrap(), "fit"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = std::fs::read_to_string(dir.path().join("fit.csv")).unwrap();
    assert!(table.contains("r1") && table.contains("r3"));
}
