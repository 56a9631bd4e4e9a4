use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_scalar-collapse"));
    c.env_remove("SCALAR_COLLAPSE_THREADS");
    c
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().args(args).arg("--out").arg(out).output().expect("binary runs")
}

fn config(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn figure1_collapse_time() {
    let dir = TempDir::new().unwrap();
    let o = run(&["simulate", "--preset", "figure1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let t_s = json(&dir.path().join("report.json"))["t_s"].as_f64().unwrap();
    assert!((2.0..=2.2).contains(&t_s), "t_s = {t_s}");
}

#[test]
fn figure2_collapse_time() {
    let dir = TempDir::new().unwrap();
    let o = run(&["simulate", "--preset", "figure2"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let t_s = json(&dir.path().join("report.json"))["t_s"].as_f64().unwrap();
    assert!((14.8..=15.8).contains(&t_s), "t_s = {t_s}");
}

#[test]
fn figure3_report_names_its_reading() {
    let dir = TempDir::new().unwrap();
    let o = run(&["simulate", "--preset", "figure3"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&dir.path().join("report.json"));
    assert!(r["reading"].as_str().unwrap().contains("constant term -1"));
    let t_s = r["t_s"].as_f64().unwrap();
    assert!((1.6..=2.0).contains(&t_s), "t_s = {t_s}");
}

#[test]
fn trajectory_csv_schema_and_rows() {
    let dir = TempDir::new().unwrap();
    let o = run(&["simulate", "--preset", "figure1", "--plot"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,phi,dphi,a,log_a,eps,rho,chi,constraint_residual"));
    let mut rows = 0;
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f.len(), 9);
        let eps: f64 = f[5].parse().unwrap();
        let res: f64 = f[8].parse().unwrap();
        assert!(res.abs() <= 1e-8 * (1.0 + eps), "{line}");
        assert_eq!(f[7], "-1");
        // 17 significant digits: one before the point, sixteen after.
        let mantissa = f[1].trim_start_matches('-').split('e').next().unwrap();
        assert_eq!(mantissa.len(), 18, "{}", f[1]);
        rows += 1;
    }
    assert!(rows > 100);
    assert!(dir.path().join("events.json").exists());
    assert!(fs::read_to_string(dir.path().join("plot.svg"))
        .unwrap()
        .starts_with("<svg"));
}

#[test]
fn identical_runs_are_byte_identical() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    assert!(run(&["simulate", "--preset", "figure1"], a.path()).status.success());
    assert!(run(&["simulate", "--preset", "figure1"], b.path()).status.success());
    let read = |d: &TempDir| fs::read(d.path().join("trajectory.csv")).unwrap();
    assert_eq!(read(&a), read(&b));

    let sweep = |d: &TempDir, threads: &str| {
        let o = run(
            &["sweep", "--preset", "quartic", "--seed", "9", "--threads", threads],
            d.path(),
        );
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(d.path().join("samples.csv")).unwrap()
    };
    assert_eq!(sweep(&a, "1"), sweep(&b, "4"));
}

#[test]
fn malformed_config_exits_2_with_line() {
    let dir = TempDir::new().unwrap();
    let path = config(&dir, "bad.toml", "preset = \"figure1\"\n[initial]\nphi = = 0.2\n");
    let o = run(&["simulate", "--config", &path], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.toml:3: "), "{}", stderr(&o));
}

#[test]
fn validation_errors_are_anchored() {
    let dir = TempDir::new().unwrap();
    let path = config(
        &dir,
        "c.toml",
        "preset = \"quartic\"\n\n[initial]\nphi = 0.5\nv = 0.0\nchi = 2\n",
    );
    let o = run(&["simulate", "--config", &path], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("c.toml:6: [initial] chi"), "{}", stderr(&o));

    let path = config(&dir, "m.toml", "mode = \"sweep\"\npreset = \"figure1\"\n");
    let o = run(&["simulate", "--config", &path], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("m.toml:1: mode"), "{}", stderr(&o));

    let path = config(&dir, "k.toml", "preset = \"figure1\"\n[integrator]\nrel_tol = -1.0\n");
    let o = run(&["simulate", "--config", &path], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("k.toml:3: [integrator] rel_tol"), "{}", stderr(&o));
}

#[test]
fn unknown_preset_exits_2() {
    let dir = TempDir::new().unwrap();
    let o = run(&["simulate", "--preset", "figure9"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn empty_distribution_exits_2() {
    let dir = TempDir::new().unwrap();
    let path = config(
        &dir,
        "e.toml",
        "preset = \"quartic\"\n[sweep]\nsamples = 100\nphi = [1.0, -1.0]\n",
    );
    let o = run(&["sweep", "--config", &path], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("e.toml:4: [sweep] phi"), "{}", stderr(&o));

    let path = config(&dir, "z.toml", "preset = \"quartic\"\n[sweep]\nsamples = 0\n");
    let o = run(&["sweep", "--config", &path], dir.path());
    assert_eq!(o.status.code(), Some(2));

    // Every draw has eps0 above eps_max.
    let path = config(
        &dir,
        "n.toml",
        "preset = \"figure1\"\n[sweep]\nsamples = 10\neps_max = 0.1\n",
    );
    let o = run(&["sweep", "--config", &path], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_3() {
    let dir = TempDir::new().unwrap();
    let path = config(
        &dir,
        "v.toml",
        "[verify_ode]\nproblem = \"linear\"\nmax_iter = 1\ntol = 1e-300\n",
    );
    let o = run(&["verify-ode", "--config", &path], dir.path());
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn quartic_sweep_is_black_hole() {
    let dir = TempDir::new().unwrap();
    let o = run(&["sweep", "--preset", "quartic", "--seed", "2024"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s = json(&dir.path().join("summary.json"));
    assert_eq!(s["samples"], 1000);
    assert!(s["fraction_black_hole"].as_f64().unwrap() >= 0.99, "{s}");
    assert!(s["fraction_generic"].as_f64().unwrap() >= 0.99, "{s}");
    let rows = fs::read_to_string(dir.path().join("samples.csv"))
        .unwrap()
        .lines()
        .count();
    assert_eq!(rows, 1001);
}

#[test]
fn minimum_basin_sweep_converges() {
    // Between the maximum at 0 and the wall, with eps0 below 2V(0) = 2.
    let dir = TempDir::new().unwrap();
    let path = config(
        &dir,
        "basin.toml",
        "preset = \"figure1\"\nseed = 5\n\n[sweep]\nsamples = 200\nphi = [0.3, 1.1]\nv = [-0.5, 0.5]\nchi = 1\neps_max = 1.9\n",
    );
    let o = run(&["sweep", "--config", &path], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let s = json(&dir.path().join("summary.json"));
    assert_eq!(s["fraction_converges_to_minimum"].as_f64(), Some(1.0), "{s}");
}

#[test]
fn match_writes_junction_data() {
    let dir = TempDir::new().unwrap();
    let o = run(&["match", "--preset", "figure1"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(dir.path().join("matching.csv")).unwrap();
    assert_eq!(text.lines().next(), Some("t,Y,U,M,dM_dY"));
    let r = json(&dir.path().join("report.json"));
    assert_eq!(r["endstate"]["verdict"], "black_hole");
    let events = fs::read_to_string(dir.path().join("events.json")).unwrap();
    assert!(events.contains("horizon_crossing"));
}

#[test]
fn zero_energy_and_verify_ode_and_check_potential() {
    let dir = TempDir::new().unwrap();
    let o = run(&["zero-energy", "--preset", "figure3"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&dir.path().join("report.json"));
    let diffs: Vec<f64> = r["level_differences"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_f64().unwrap())
        .collect();
    assert!(diffs.windows(2).all(|w| w[1] < w[0]), "{diffs:?}");

    let o = run(&["verify-ode"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&dir.path().join("report.json"));
    assert!(r["sup_error"].as_f64().unwrap() < 1e-10);
    assert_eq!(r["uniqueness"]["passes"], true);

    let o = run(&["check-potential", "--preset", "quartic"], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&dir.path().join("report.json"));
    assert_eq!(r["class"]["in_c"], true);
    assert_eq!(r["class"]["critical_points"].as_array().unwrap().len(), 3);
}

#[test]
fn expanding_initial_data_from_config() {
    let dir = TempDir::new().unwrap();
    let path = config(
        &dir,
        "x.toml",
        "mode = \"expand\"\npreset = \"figure1\"\n\n[initial]\nphi = 0.5\nv = 0.1\nchi = 1\n\n[run]\nt_max = 400.0\n",
    );
    let o = run(&["classify", "--config", &path], dir.path());
    assert!(o.status.success(), "{}", stderr(&o));
    let r = json(&dir.path().join("report.json"));
    assert_eq!(r["expansion"]["kind"]["kind"], "converges_to_minimum", "{r}");
}
