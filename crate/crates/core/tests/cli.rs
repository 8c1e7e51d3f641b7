use std::path::PathBuf;
use std::process::{Command, Output};

use spinorlab::stirap::fstirap_populations_closed;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_spinorlab"));
    c.env_remove("SPINORLAB_THREADS");
    c
}

fn config(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run_config(path: &std::path::Path, extra: &[&str]) -> Output {
    bin().arg("run").arg(path).args(extra).output().expect("spawn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Parses CSV text into (header, rows).
fn parse(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect();
    (header, rows)
}

fn write_config(dir: &tempfile::TempDir, text: &str) -> PathBuf {
    let p = dir.path().join("scenario.conf");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn list_scenarios_is_stable_and_sorted() {
    let a = bin().arg("list-scenarios").output().unwrap();
    let b = bin().arg("list-scenarios").output().unwrap();
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.contains("ramsey"));
    assert!(text.contains("fit-rabi"));
    let names: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with(' '))
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    let mut sorted = names.clone();
    sorted.sort();
    assert_eq!(names, sorted);
    assert_eq!(names.len(), 11);
}

#[test]
fn rabi_full_transfer_at_theta_pi() {
    let o = run_config(&config("rotation-grid.conf"), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = parse(&stdout(&o));
    assert_eq!(header, ["theta", "p_p2", "p_p1", "p_0", "p_m1", "p_m2"]);
    assert_eq!(rows.len(), 401);
    let row = rows
        .iter()
        .find(|r| (r[0] - std::f64::consts::PI).abs() < 1e-7)
        .expect("theta = pi sampled");
    let expected = [0.0, 0.0, 0.0, 0.0, 1.0];
    for (p, e) in row[1..].iter().zip(expected) {
        assert!((p - e).abs() < 1e-6, "{row:?}");
    }
}

#[test]
fn fstirap_scan_matches_closed_forms() {
    let o = run_config(&config("fstirap-scan.conf"), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = parse(&stdout(&o));
    assert_eq!(header[0], "eta");
    assert_eq!(header.last().unwrap(), "survival");
    assert_eq!(rows.len(), 25);
    assert!((rows[24][0] - 3.0).abs() < 1e-12);
    for r in &rows {
        let closed = fstirap_populations_closed(r[0]).unwrap();
        for k in 0..3 {
            assert!((r[1 + k] - closed[k]).abs() < 0.02, "eta {} channel {k}", r[0]);
        }
    }
}

#[test]
fn echo_scan_half_contrast_near_300_us() {
    let o = run_config(&config("echo-scan.conf"), &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = parse(&stdout(&o));
    assert_eq!(header[0], "tau_tilde_us");
    let env = header.iter().position(|h| h == "envelope").unwrap();
    let i = rows.iter().position(|r| r[env] < 0.5).expect("envelope drops below 0.5");
    // linear interpolation of the crossing, reported as tau1 + tau2
    let (a, b) = (&rows[i - 1], &rows[i]);
    let tt = a[0] + (a[env] - 0.5) / (a[env] - b[env]) * (b[0] - a[0]);
    assert!((2.0 * tt - 300.0).abs() < 10.0, "crossing at {} us", 2.0 * tt);
}

#[test]
fn monte_carlo_output_independent_of_thread_count() {
    let path = config("ramsey-mc.conf");
    let outs: Vec<Vec<u8>> = ["1", "3", "8"]
        .iter()
        .map(|n| {
            let o = bin()
                .env("SPINORLAB_THREADS", n)
                .args(["run", path.to_str().unwrap(), "--samples", "20000"])
                .output()
                .unwrap();
            assert!(o.status.success(), "{}", stderr(&o));
            o.stdout
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0], outs[2]);
}

#[test]
fn seed_override_changes_monte_carlo_only() {
    let path = config("ramsey-mc.conf");
    let a = run_config(&path, &["--samples", "5000", "--seed", "1"]);
    let b = run_config(&path, &["--samples", "5000", "--seed", "2"]);
    assert!(a.status.success() && b.status.success());
    assert_ne!(a.stdout, b.stdout);
    let c = run_config(&config("ramsey.conf"), &["--seed", "7"]);
    let d = run_config(&config("ramsey.conf"), &["--seed", "8"]);
    assert_eq!(c.stdout, d.stdout);
}

#[test]
fn small_sample_count_warns() {
    let o = run_config(&config("ramsey-mc.conf"), &["--samples", "50"]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("high variance"), "{}", stderr(&o));
}

#[test]
fn tsv_format_and_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rabi.tsv");
    let o = run_config(&config("rabi-rwa.conf"), &["--format", "tsv", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(o.stdout.is_empty());
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("theta\tp_p2\tp_p1\tp_0\tp_m1\tp_m2\n"));
}

#[test]
fn fit_rabi_reports_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fit.csv");
    let o = run_config(&config("fit-rabi.conf"), &["--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let report = stdout(&o);
    let omega: f64 = report
        .lines()
        .find_map(|l| l.strip_prefix("omega_khz = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((omega - 95.0).abs() < 0.095, "{report}");
    let (header, rows) = parse(&std::fs::read_to_string(out).unwrap());
    assert_eq!(header[0], "t_us");
    assert_eq!(rows.len(), 81);
}

#[test]
fn unknown_key_exits_1_and_names_key() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        &dir,
        "scenario = rabi\nomega0 = 800 kHz\nomega_rabi = 95 kHz\ntheta_max = 3\nn_points = 5\nwobble = 2\n",
    );
    let o = run_config(&p, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("wobble"), "{}", stderr(&o));
}

#[test]
fn missing_unit_exits_1_and_names_key() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(&dir, "scenario = rabi\nomega0 = 800\nomega_rabi = 95 kHz\ntheta_max = 3\nn_points = 5\n");
    let o = run_config(&p, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("omega0"), "{}", stderr(&o));
}

#[test]
fn missing_required_key_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(&dir, "scenario = ramsey\nb1 = 4.5 mG/mm\nsigma_z0 = 0.73 mm\nn_points = 5\ntau1_max = 10 us\n");
    let o = run_config(&p, &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("t_axial"), "{}", stderr(&o));
}

#[test]
fn unreadable_config_and_bad_threads_exit_1() {
    let o = bin().args(["run", "/nonexistent/x.conf"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let o = bin()
        .env("SPINORLAB_THREADS", "zero")
        .args(["run", config("ramsey.conf").to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("SPINORLAB_THREADS"));
}

#[test]
fn unattainable_tolerance_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_config(
        &dir,
        "scenario = rabi-lab\nomega0 = 800 kHz\nomega_rabi = 95 kHz\nt_max = 10 us\nn_points = 3\ntolerance = 1e-300\n",
    );
    let o = run_config(&p, &[]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn every_shipped_config_parses_against_its_scenario() {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "conf") {
            let text = std::fs::read_to_string(&path).unwrap();
            let cfg = spinorlab::cli::Config::parse(&text).unwrap();
            let name = cfg.string("scenario").unwrap();
            let def = spinorlab::cli::scenarios::find(name).unwrap_or_else(|| panic!("{}", path.display()));
            for key in cfg.keys().filter(|k| *k != "scenario") {
                assert!(def.required.contains(&key) || def.optional.contains(&key), "{}: {key}", path.display());
            }
        }
    }
}
