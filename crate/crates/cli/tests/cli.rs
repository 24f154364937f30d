use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const INCLINED_IC: &str = "q = 1, 0, 0\nqdot = 0, 0.9800665778412416, 0.19866933079506122\n";

fn routh(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_routh")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl Csv {
    fn read(path: &Path) -> Self {
        let text = fs::read_to_string(path).unwrap();
        assert!(!text.contains('\r'), "CR in {}", path.display());
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let header = reader.headers().unwrap().iter().map(String::from).collect();
        let rows = reader
            .records()
            .map(|r| r.unwrap().iter().map(|v| v.parse::<f64>().unwrap()).collect())
            .collect();
        Self { header, rows }
    }

    fn column(&self, name: &str) -> Vec<f64> {
        let i = self.header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| r[i]).collect()
    }
}

fn summary(path: &Path) -> Vec<(String, String)> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let (k, v) = l.split_once(" = ").unwrap();
            (k.to_string(), v.to_string())
        })
        .collect()
}

fn summary_value(path: &Path, key: &str) -> String {
    summary(path).into_iter().find(|(k, _)| k == key).unwrap_or_else(|| panic!("no {key}")).1
}

fn radius_band(csv: &Csv) -> f64 {
    let rho: Vec<f64> = csv.column("r").iter().zip(csv.column("z")).map(|(r, z)| r.hypot(z)).collect();
    rho.iter().map(|v| (v - rho[0]).abs()).fold(0.0, f64::max)
}

#[test]
fn zero_steps_is_a_config_error() {
    let out = routh(&["simulate", "--steps", "0"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("steps"));
}

#[test]
fn bad_config_files_exit_with_code_two() {
    let dir = TempDir::new().unwrap();
    for (i, text) in [
        "colour = blue\n",
        "method = del\norder = 4\n",
        "method = sprk\nemit = reconstruction\n",
        "mu = 2.0\n",
        "system = dsp\nq = 1.5, 0, 0.5, 0\nqdot = 0, 0, 0, 0\n",
        "system = dsp\nx = 0.5, 0.5, 0\nxdot = 0, 0, 0\n",
    ]
    .iter()
    .enumerate()
    {
        let cfg = write(dir.path(), &format!("bad{i}.conf"), text);
        let out = routh(&["simulate", path_str(&cfg), "--out", path_str(dir.path())]);
        assert_eq!(out.status.code(), Some(2), "{text}");
    }
    assert_eq!(routh(&["simulate", "/nonexistent/run.conf"]).status.code(), Some(2));
}

#[test]
fn spherical_orbit_keeps_its_radius_and_oblate_orbit_does_not() {
    let dir = TempDir::new().unwrap();
    let h: f64 = 0.3;
    let mut bands = Vec::new();
    for j2 in ["0", "0.05"] {
        let out_dir = dir.path().join(format!("j2_{j2}"));
        let cfg = write(dir.path(), &format!("sat{j2}.conf"), &format!("j2 = {j2}\nh = 0.3\nsteps = 2000\n{INCLINED_IC}"));
        let out = routh(&["simulate", path_str(&cfg), "--method", "rsprk", "--order", "4", "--out", path_str(&out_dir)]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let csv = Csv::read(&out_dir.join("trajectory.csv"));
        assert_eq!(csv.header, ["step", "t", "r", "z", "s_r", "s_z"]);
        assert_eq!(csv.rows.len(), 2001);
        bands.push(radius_band(&csv));
    }
    let bound = 10.0 * h.powi(4);
    assert!(bands[0] <= bound, "spherical band {}", bands[0]);
    assert!(bands[1] > bound, "oblate band {}", bands[1]);
}

#[test]
fn trajectory_headers_follow_the_system_and_picture() {
    let dir = TempDir::new().unwrap();
    let cases: [(&str, &str, &[&str]); 4] = [
        ("satellite", "sprk", &["step", "t", "r", "theta", "z", "p_r", "p_theta", "p_z"]),
        ("satellite", "dr", &["step", "t", "r", "z", "s_r", "s_z", "theta"]),
        ("dsp", "del", &["step", "t", "r1", "theta1", "r2", "theta2", "p_r1", "p_theta1", "p_r2", "p_theta2"]),
        ("dsp", "rsprk", &["step", "t", "r1", "r2", "phi", "s_r1", "s_r2", "s_phi", "theta1"]),
    ];
    for (system, method, expected) in cases {
        let out_dir = dir.path().join(format!("{system}_{method}"));
        let emit = if method == "dr" || method == "rsprk" { "trajectory,reconstruction" } else { "trajectory" };
        let out = routh(&[
            "simulate", "--system", system, "--method", method, "--steps", "20", "--emit", emit, "--out",
            path_str(&out_dir),
        ]);
        assert_eq!(out.status.code(), Some(0), "{system} {method}: {}", String::from_utf8_lossy(&out.stderr));
        let csv = Csv::read(&out_dir.join("trajectory.csv"));
        assert_eq!(csv.header, expected);
        assert_eq!(csv.rows.len(), 21);
        let h = if system == "dsp" { 0.01 } else { 0.3 };
        for (k, row) in csv.rows.iter().enumerate() {
            assert_eq!(row[0], k as f64);
            assert_eq!(row[1], k as f64 * h);
        }
    }
}

#[test]
fn numbers_round_trip_exactly() {
    let dir = TempDir::new().unwrap();
    let out = routh(&["simulate", "--steps", "3", "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let text = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    for field in text.lines().skip(1).flat_map(|l| l.split(',').skip(1)) {
        let v: f64 = field.parse().unwrap();
        assert_eq!(format!("{v:.16e}"), field);
    }
}

#[test]
fn identical_configs_give_identical_output() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "run.conf", "system = dsp\nmethod = rsprk\nsteps = 300\nemit = trajectory, energy\n");
    let mut files = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        assert_eq!(routh(&["simulate", path_str(&cfg), "--out", path_str(&out_dir)]).status.code(), Some(0));
        files.push((fs::read(out_dir.join("trajectory.csv")).unwrap(), fs::read(out_dir.join("energy.csv")).unwrap()));
    }
    assert_eq!(files[0], files[1]);

    let cmp_dir = dir.path().join("cmp");
    let out = routh(&["compare", path_str(&cfg), path_str(&cfg), "--out", path_str(&cmp_dir)]);
    assert_eq!(out.status.code(), Some(0));
    let csv = Csv::read(&cmp_dir.join("compare.csv"));
    assert_eq!(csv.column("energy_drift_a"), csv.column("energy_drift_b"));
    assert!(csv.column("shape_distance").iter().all(|&d| d == 0.0));
}

#[test]
fn satellite_del_and_dr_trace_the_same_shape() {
    let dir = TempDir::new().unwrap();
    let base = format!("j2 = 0.05\nh = 0.1\nsteps = 1000\n{INCLINED_IC}");
    let a = write(dir.path(), "del.conf", &format!("method = del\n{base}"));
    let b = write(dir.path(), "dr.conf", &format!("method = dr\n{base}"));
    let out = routh(&["compare", path_str(&a), path_str(&b), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let worst: f64 = summary_value(&dir.path().join("compare.txt"), "max_shape_distance").parse().unwrap();
    assert!(worst <= 1e-9, "shape distance {worst}");
    let csv = Csv::read(&dir.path().join("compare.csv"));
    assert_eq!(csv.rows.len(), 1001);
}

#[test]
fn reconstructed_angle_matches_the_unreduced_run() {
    let dir = TempDir::new().unwrap();
    let base = format!("j2 = 0.05\nh = 0.1\nsteps = 500\n{INCLINED_IC}");
    let full = write(dir.path(), "del.conf", &format!("method = del\nemit = trajectory, momentum\n{base}"));
    let reduced = write(dir.path(), "dr.conf", &format!("method = dr\nemit = reconstruction, momentum\n{base}"));
    let (full_dir, reduced_dir) = (dir.path().join("full"), dir.path().join("reduced"));
    assert_eq!(routh(&["simulate", path_str(&full), "--out", path_str(&full_dir)]).status.code(), Some(0));
    assert_eq!(routh(&["simulate", path_str(&reduced), "--out", path_str(&reduced_dir)]).status.code(), Some(0));
    let a = Csv::read(&full_dir.join("trajectory.csv")).column("theta");
    let b = Csv::read(&reduced_dir.join("trajectory.csv")).column("theta");
    let gap = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(gap <= 1e-9, "theta gap {gap}");
    for d in [full_dir, reduced_dir] {
        let deviation = Csv::read(&d.join("momentum.csv")).column("deviation");
        assert_eq!(deviation.len(), 500);
        assert!(deviation.iter().all(|&v| v <= 1e-10));
    }
}

#[test]
fn reduced_pendulum_energy_trend_is_far_below_rk4() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.conf", "system = dsp\nmethod = rsprk\nh = 0.01\nsteps = 10000\n");
    let b = write(dir.path(), "b.conf", "system = dsp\nmethod = rk4\nh = 0.0025\nsteps = 40000\n");
    let out = routh(&["compare", path_str(&a), path_str(&b), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = dir.path().join("compare.txt");
    let ta: f64 = summary_value(&summary, "energy_trend_a").parse().unwrap();
    let tb: f64 = summary_value(&summary, "energy_trend_b").parse().unwrap();
    assert!(tb.abs() >= 10.0 * ta.abs(), "rsprk {ta}, rk4 {tb}");
    let csv = Csv::read(&dir.path().join("compare.csv"));
    assert_eq!(csv.rows.len(), 10001);
    assert_eq!(csv.header, ["step", "t", "energy_drift_a", "energy_drift_b", "shape_distance"]);
}

#[test]
fn compare_rejects_mismatched_runs() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.conf", "system = dsp\nh = 0.01\nsteps = 100\n");
    let b = write(dir.path(), "b.conf", "system = dsp\nh = 0.01\nsteps = 200\n");
    let c = write(dir.path(), "c.conf", "system = satellite\nh = 0.01\nsteps = 100\n");
    let d = write(dir.path(), "d.conf", "system = dsp\nh = 0.0033333333333333335\nsteps = 300\nmethod = rk4\n");
    for other in [&b, &c] {
        let out = routh(&["compare", path_str(&a), path_str(other), "--out", path_str(dir.path())]);
        assert_eq!(out.status.code(), Some(2));
    }
    let out = routh(&["compare", path_str(&a), path_str(&d), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn numerical_failure_truncates_with_code_three() {
    let dir = TempDir::new().unwrap();
    let out = routh(&[
        "simulate", "--system", "dsp", "--method", "del", "--h", "0.5", "--steps", "200", "--emit", "trajectory,energy",
        "--out", path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let summary = dir.path().join("summary.txt");
    assert_eq!(summary_value(&summary, "status"), "numerical_failure");
    let last: usize = summary_value(&summary, "last_valid_step").parse().unwrap();
    assert!(last < 200);
    assert!(String::from_utf8_lossy(&out.stderr).contains(&format!("after step {last}")));
    for name in ["trajectory.csv", "energy.csv"] {
        let csv = Csv::read(&dir.path().join(name));
        assert_eq!(csv.rows.len(), last + 1);
        assert!(csv.rows.iter().flatten().all(|v| v.is_finite()));
    }
}

#[test]
fn initial_condition_file_and_flags_override_the_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "run.conf", "system = dsp\nmethod = sprk\nh = 0.02\nsteps = 50\n");
    let ic = write(dir.path(), "ic.conf", "# start\nx = 0.5, 0.6, 0.3\nxdot = 0.1, -0.1, 0.2\nmu = 1.5\n");
    let out = routh(&[
        "simulate", path_str(&cfg), "--ic", path_str(&ic), "--steps", "10", "--emit", "trajectory,momentum", "--out",
        path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = Csv::read(&dir.path().join("trajectory.csv"));
    assert_eq!(csv.rows.len(), 11);
    assert_eq!(csv.rows[0][2..5], [0.5, 0.0, 0.6]);
    let momentum = Csv::read(&dir.path().join("momentum.csv")).column("momentum");
    assert!(momentum.iter().all(|m| (m - 1.5).abs() < 1e-12));

    let bad_ic = write(dir.path(), "bad_ic.conf", "h = 0.1\n");
    let out = routh(&["simulate", path_str(&cfg), "--ic", path_str(&bad_ic), "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn order_command_measures_the_method_order() {
    let dir = TempDir::new().unwrap();
    let out = routh(&[
        "order", "--method", "rsprk", "--j2", "0.05", "--h", "0.1", "--steps", "64", "--hs", "0.1,0.05,0.025,0.0125",
        "--out", path_str(dir.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let slope: f64 = summary_value(&dir.path().join("order.txt"), "slope").parse().unwrap();
    assert!((slope - 4.0).abs() <= 0.2, "slope {slope}");
    let csv = Csv::read(&dir.path().join("order.csv"));
    assert_eq!(csv.column("steps"), [64.0, 128.0, 256.0, 512.0]);

    let out = routh(&["order", "--h", "0.1", "--steps", "64", "--hs", "0.1,0.03", "--out", path_str(dir.path())]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_passes_on_both_systems() {
    for system in ["satellite", "dsp"] {
        let out = routh(&["check", "--system", system, "--steps", "300"]);
        let stdout = String::from_utf8_lossy(&out.stdout);
        assert_eq!(out.status.code(), Some(0), "{stdout}");
        assert_eq!(stdout.lines().filter(|l| l.starts_with("PASS")).count(), 6);
    }
}

#[test]
fn shipped_configs_parse() {
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = TempDir::new().unwrap();
    for entry in fs::read_dir(&configs).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_str().unwrap().to_string();
        let args: Vec<String> = if name == "dsp_ic.conf" {
            vec!["simulate".into(), "--system".into(), "dsp".into(), "--ic".into(), path.display().to_string()]
        } else {
            vec!["simulate".into(), path.display().to_string()]
        };
        let mut args: Vec<&str> = args.iter().map(String::as_str).collect();
        let out_dir = dir.path().join(&name);
        args.extend(["--steps", "5", "--out", path_str(&out_dir)]);
        let out = routh(&args);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}
