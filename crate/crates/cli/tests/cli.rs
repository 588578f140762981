use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BASE: &str = "\
system.omega0 = 1.0
bath.gamma = 0.1
bath.cutoff = 10
bath.beta = 1
grid.t_max = 2
grid.n_steps = 200
grid.snapshots = 10
";

fn qpo(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpo")).args(args).current_dir(dir).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_moments(path: &Path) -> Vec<Vec<f64>> {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header: Vec<String> = rdr.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(header, ["t", "meanQ", "meanP", "sqq", "sqp", "spp", "uncertaintyProduct", "flags"]);
    rdr.records().map(|r| r.unwrap().iter().take(7).map(|x| x.parse().unwrap()).collect()).collect()
}

#[test]
fn uncoupled_oscillator_keeps_thermal_variance() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "a.conf", &BASE.replace("bath.gamma = 0.1", "bath.gamma = 0"));
    let o = qpo(&["simulate", "a.conf"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let want = 0.5 / (0.5f64).tanh();
    let rows = read_moments(&dir.path().join("run_moments.csv"));
    assert_eq!(rows.len(), 11);
    for r in rows {
        assert!((r[3] - want).abs() < 1e-9 && (r[5] - want).abs() < 1e-9 && r[4].abs() < 1e-9, "{r:?}");
    }
}

#[test]
fn missing_key_is_a_config_error_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "a.conf", &BASE.replace("bath.gamma = 0.1\n", ""));
    let o = qpo(&["simulate", "a.conf"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`bath.gamma`"), "{}", stderr(&o));
}

#[test]
fn malformed_line_reports_its_number() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "a.conf", &format!("{BASE}grid.n_steps = many\n"));
    let o = qpo(&["equilibrium", "a.conf"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 8"), "{}", stderr(&o));
}

#[test]
fn same_config_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{BASE}drive.laser.kind = harmonic\ndrive.laser.amplitude = 0.3\ndrive.laser.frequency = 1.1\n");
    write_config(dir.path(), "a.conf", &text);
    let a = qpo(&["simulate", "a.conf", "--out", "one"], dir.path());
    let b = Command::new(env!("CARGO_BIN_EXE_qpo"))
        .args(["simulate", "a.conf", "--out", "two"])
        .current_dir(dir.path())
        .env("QPO_THREADS", "1")
        .output()
        .unwrap();
    assert!(a.status.success() && b.status.success());
    for f in ["run_moments.csv", "run_summary.json"] {
        let x = std::fs::read(dir.path().join("one").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("two").join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
}

#[test]
fn summary_echoes_every_key_used() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "a.conf", BASE);
    assert!(qpo(&["simulate", "a.conf"], dir.path()).status.success());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("run_summary.json")).unwrap()).unwrap();
    let cfg = v["config"].as_object().unwrap();
    for key in ["system.omega0", "bath.gamma", "bath.cutoff", "bath.beta", "grid.t_max", "grid.n_steps", "grid.snapshots"] {
        assert!(cfg[key]["line"].is_u64(), "{key}");
    }
    for key in ["system.mass", "units.hbar", "units.kb", "radiation.enabled", "drive.laser.kind", "initial.kind", "numerics.matsubara_tol"] {
        assert!(cfg[key]["line"].is_null(), "{key}");
        assert!(cfg[key]["value"].is_string(), "{key}");
    }
    assert!(v["derived"]["lambda"].as_f64().unwrap() > 0.0);
}

#[test]
fn causality_violation_exits_3_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{BASE}radiation.enabled = true\nradiation.tau = 0.1\nradiation.cutoff = 20\nradiation.beta = 1\n");
    write_config(dir.path(), "a.conf", &text);
    let o = qpo(&["simulate", "a.conf"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("causality"), "{}", stderr(&o));
    assert!(!dir.path().join("run_moments.csv").exists());
}

#[test]
fn unconverged_fundamentals_exit_4_without_output() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "a.conf", &BASE.replace("grid.t_max = 2", "grid.t_max = 10").replace("grid.n_steps = 200", "grid.n_steps = 50"));
    let o = qpo(&["simulate", "a.conf"], dir.path());
    assert_eq!(o.status.code(), Some(4), "{}", stderr(&o));
    assert!(!dir.path().join("run_moments.csv").exists());
    assert!(!dir.path().join("run_summary.json").exists());
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "a.conf", BASE);
    let o = Command::new(env!("CARGO_BIN_EXE_qpo")).args(["equilibrium", "a.conf"]).current_dir(dir.path()).env("QPO_THREADS", "0").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn equilibrium_agrees_with_fdt_quadrature() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "a.conf", BASE);
    let o = qpo(&["equilibrium", "a.conf"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let (qq, fq) = (v["sqq"].as_f64().unwrap(), v["fdt_quadrature"]["sqq"].as_f64().unwrap());
    let (pp, fp) = (v["spp"].as_f64().unwrap(), v["fdt_quadrature"]["spp"].as_f64().unwrap());
    assert!((qq - fq).abs() < 1e-5 * fq && (pp - fp).abs() < 1e-5 * fp, "{v}");
}

#[test]
fn kernels_dump_has_the_expected_files() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{BASE}radiation.enabled = true\nradiation.tau = 0.001\nradiation.cutoff = 10\nradiation.beta = 1\n");
    write_config(dir.path(), "a.conf", &text);
    let o = qpo(&["kernels", "a.conf", "--out", "k"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    for name in ["gamma", "zeta", "g", "f", "k_tb", "k_bb_thermal", "k_bb_vacuum"] {
        let mut rdr = csv::Reader::from_path(dir.path().join(format!("k/run_{name}.csv"))).unwrap();
        assert_eq!(rdr.headers().unwrap().iter().collect::<Vec<_>>(), ["s", "value", "n"]);
        let rows: Vec<csv::StringRecord> = rdr.records().map(Result::unwrap).collect();
        assert!(rows.len() >= 201, "{name}");
        assert!(rows.iter().all(|r| r[1].parse::<f64>().unwrap().is_finite()), "{name}");
    }
}

#[test]
fn density_and_fundamental_dumps() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "a.conf", &format!("{BASE}output.density = last\noutput.density_points = 5\n"));
    let o = qpo(&["simulate", "a.conf", "--dump-fundamentals"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let rdr = csv::Reader::from_path(dir.path().join("run_density_000200.csv")).unwrap();
    assert_eq!(rdr.into_records().count(), 25);
    let rdr = csv::Reader::from_path(dir.path().join("run_fundamentals.csv")).unwrap();
    assert_eq!(rdr.into_records().count(), 201);
    assert!(dir.path().join("run_phix_000100.csv").exists());
}

#[test]
fn fast_validation_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = qpo(&["validate", "--json", "report.json"], dir.path());
    let out = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{out}");
    assert!(out.lines().count() >= 5 && out.lines().all(|l| l.starts_with("PASS")), "{out}");
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert!(v.as_array().unwrap().iter().all(|r| r["passed"] == true));
}

#[test]
fn coarse_full_validation_names_the_convergence_failure() {
    let dir = tempfile::tempdir().unwrap();
    let o = qpo(&["validate", "--full", "--steps", "50"], dir.path());
    let out = String::from_utf8_lossy(&o.stdout);
    assert_eq!(o.status.code(), Some(1));
    assert!(out.lines().any(|l| l.starts_with("FAIL 4 fundamental solutions")), "{out}");
    assert_eq!(out.lines().count(), 10);
}
