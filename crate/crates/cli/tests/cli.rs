use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_tikflow"));
    c.env_remove("TIKFLOW_TOL_SCALE");
    c
}

fn repo_config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn write_config(dir: &TempDir, body: &str) -> PathBuf {
    let path = dir.path().join("run.cfg");
    fs::write(&path, body).unwrap();
    path
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn read_table(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rdr = csv::Reader::from_path(path).unwrap();
    let header = rdr.headers().unwrap().iter().map(String::from).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap();
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

const EQUILIBRIUM: &str = "\
problem.name = f2
dynamics.kind = sd_tikhonov
dynamics.x0 = 0.5, 0.5
integrator.t_end = 10
";

#[test]
fn simulate_writes_header_and_round_trip_numbers() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, EQUILIBRIUM);
    let out = dir.path().join("traj.csv");
    let o = run(bin().args(["simulate", "--config"]).arg(&cfg).arg("-o").arg(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let (header, rows) = read_table(&out);
    assert_eq!(header, ["t", "x_1", "x_2", "f_gap", "grad_norm", "dist_min_norm", "eps", "E"]);
    assert!(rows.len() > 100);
    let first = &rows[0][0];
    let mantissa = first.split('e').next().unwrap();
    assert_eq!(mantissa.chars().filter(|c| c.is_ascii_digit()).count(), 17, "{first}");
    for f in column(&header, &rows, "f_gap") {
        assert!(f.abs() <= 1e-10);
    }
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "problem.name = f2\nschedule.family = delta_over_t\nschedule.delta = 2\n\
         dynamics.kind = inertial_implicit_hessian\ndynamics.alpha = 3.5\n\
         dynamics.x0 = random\nintegrator.t_end = 50\nseed = 11\n",
    );
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = run(bin().args(["simulate", "--config"]).arg(&cfg).arg("-o").arg(out));
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let c = dir.path().join("c.csv");
    let o = run(bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--seed", "12", "-o"])
        .arg(&c));
    assert!(o.status.success());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn overrides_take_precedence_over_the_file() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, EQUILIBRIUM);
    let out = dir.path().join("traj.csv");
    let o = run(bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--integrator.t_end=20", "-o"])
        .arg(&out));
    assert!(o.status.success());
    let (header, rows) = read_table(&out);
    let t = column(&header, &rows, "t");
    assert_eq!(*t.last().unwrap(), 20.0);
}

#[test]
fn validation_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, EQUILIBRIUM);
    let o = run(bin().args(["simulate", "--config"]).arg(&cfg).args(["--dynamics.bogus", "3"]));
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("dynamics.bogus"));

    let o = run(bin().args(["simulate", "--config"]).arg(&cfg).args(["--dynamics.x0", "1,2,3"]));
    assert_eq!(o.status.code(), Some(1));

    let o = run(bin().args(["simulate", "--config"]).arg(dir.path().join("missing.cfg")));
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn numerical_failures_exit_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, EQUILIBRIUM);
    let out = dir.path().join("traj.csv");
    let o = run(bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .args(["--integrator.max_steps", "3", "-o"])
        .arg(&out));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("step budget"));
}

#[test]
fn sweep_rows_follow_grid_order() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        "problem.name = f2\nschedule.delta = 2\ndynamics.kind = inertial_implicit_hessian\n\
         dynamics.x0 = 1, 0\nintegrator.t_end = 100\n",
    );
    let out = dir.path().join("sweep.csv");
    let o = run(bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .args(["--vary", "alpha=4,3.5,3", "--vary", "delta=2,3", "-o"])
        .arg(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_table(&out);
    assert_eq!(&header[..3], ["alpha", "delta", "f_gap_slope"]);
    let alpha = column(&header, &rows, "alpha");
    let delta = column(&header, &rows, "delta");
    let grid: Vec<(f64, f64)> = alpha.into_iter().zip(delta).collect();
    let expected: Vec<(f64, f64)> =
        [4.0, 3.5, 3.0].iter().flat_map(|a| [2.0, 3.0].map(|d| (*a, d))).collect();
    assert_eq!(grid, expected);
    let slope = column(&header, &rows, "f_gap_slope");
    assert!(slope.iter().all(|s| *s < -1.0), "{slope:?}");
}

#[test]
fn empty_sweep_writes_only_the_header() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, EQUILIBRIUM);
    let out = dir.path().join("sweep.csv");
    let o = run(bin().args(["sweep", "--config"]).arg(&cfg).args(["--vary", "alpha=", "-o"]).arg(&out));
    assert!(o.status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("alpha,f_gap_slope"));
}

#[test]
fn viscosity_table_is_sorted_and_accurate() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, EQUILIBRIUM);
    let out = dir.path().join("visc.csv");
    let o = run(bin()
        .args(["viscosity", "--config"])
        .arg(&cfg)
        .args(["--eps", "1e-6,2,0.5", "-o"])
        .arg(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_table(&out);
    let eps = column(&header, &rows, "eps");
    assert_eq!(eps, [2.0, 0.5, 1e-6]);
    let x1 = column(&header, &rows, "x_1");
    let x2 = column(&header, &rows, "x_2");
    assert!((x1[0] - 0.25).abs() < 1e-12 && (x2[0] - 0.25).abs() < 1e-12);
    assert!((x1[2] - 0.5).abs() < 1e-5 && (x2[2] - 0.5).abs() < 1e-5);

    let o = run(bin().args(["viscosity", "--config"]).arg(&cfg).args(["--eps-min", "1e-2", "--eps-max", "1"]));
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    let eps: Vec<f64> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(eps.len(), 9);
    assert!(eps.windows(2).all(|w| w[0] > w[1]));
}

#[test]
fn verify_with_zero_tolerance_exits_three() {
    let o = run(bin().args(["verify", "--quick"]).env("TIKFLOW_TOL_SCALE", "0"));
    assert_eq!(o.status.code(), Some(3));
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("[FAIL] criterion 11"), "{text}");
    assert!(!text.contains("criterion 10"));
}

#[test]
fn example1_approaches_the_minimum_norm_solution() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("ex1.csv");
    let o = run(bin()
        .args(["simulate", "--config"])
        .arg(repo_config("example1_f1.cfg"))
        .arg("-o")
        .arg(&out));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_table(&out);
    let t = column(&header, &rows, "t");
    let d = column(&header, &rows, "dist_min_norm");
    let t_end = *t.last().unwrap();
    let tail: Vec<f64> = t.iter().zip(&d).filter(|(t, _)| **t >= t_end / 10.0).map(|(_, d)| *d).collect();
    assert!(tail.len() > 100);
    assert!(tail.windows(2).all(|w| w[1] <= w[0]), "distance not decreasing");
    assert!(*tail.last().unwrap() < 0.05);
}
