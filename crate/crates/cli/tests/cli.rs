use std::path::Path;
use std::process::{Command, Output};

const BASE: &str = r#"
[grid]
n_per_axis = 8
[filter]
alpha = 0.5
theta = 0.75
[deconv]
order_n = 2
[physics]
nu = 0.02
mu = 0.02
case = "double_viscous"
[integrator]
dt = 0.01
t_end = 0.05
[initial_condition]
kind = "random_solenoidal"
seed = 4
magnetic_amplitude = 0.5
"#;

fn admhd(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_admhd"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--quiet")
        .env_remove("ADMHD_OUTPUT_DIR")
        .current_dir(dir)
        .output()
        .unwrap()
}

fn with_out<'a>(args: &[&'a str], out: &'a str) -> Vec<&'a str> {
    let mut v = args.to_vec();
    v.extend(["--output-dir", out]);
    v
}

#[test]
fn simulate_writes_diagnostics_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = BASE.to_string() + "[output]\nsnapshot_interval = 2\n";
    let o = admhd(dir.path(), &cfg, &with_out(&["simulate"], "out"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let out = dir.path().join("out");
    let lines = std::fs::read_to_string(out.join("diagnostics.ndjson")).unwrap();
    assert_eq!(lines.lines().count(), 6);
    assert!(lines.lines().all(|l| l.starts_with("{\"t\":") && l.contains("\"balance_residual\":")));
    for f in ["final.bin", "snapshot_000002.bin", "snapshot_000004.bin", "config.toml"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert_eq!(&std::fs::read(out.join("final.bin")).unwrap()[..6], b"ADMHD1");
}

#[test]
fn zero_length_simulation_has_one_record() {
    let dir = tempfile::tempdir().unwrap();
    let o = admhd(dir.path(), &BASE.replace("t_end = 0.05", "t_end = 0.0"), &with_out(&["simulate"], "o"));
    assert_eq!(o.status.code(), Some(0));
    let lines = std::fs::read_to_string(dir.path().join("o/diagnostics.ndjson")).unwrap();
    assert_eq!(lines.lines().count(), 1);
}

#[test]
fn simulate_is_reproducible_and_seed_override_changes_it() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        assert_eq!(admhd(dir.path(), BASE, &with_out(&["simulate"], out)).status.code(), Some(0));
    }
    let c = admhd(dir.path(), BASE, &with_out(&["simulate", "--seed", "5"], "c"));
    assert_eq!(c.status.code(), Some(0));
    let read = |d: &str| std::fs::read(dir.path().join(d).join("diagnostics.ndjson")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = admhd(dir.path(), &BASE.replace("theta = 0.75", "theta = 1.5"), &["simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("theta ∈ [0,1]"));
    let o = admhd(dir.path(), &BASE.replace("nu = 0.02", "nu = 0.0"), &["simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("double_viscous"));
    let o = admhd(dir.path(), &BASE.replace("order_n = 2", "order_n = 2\nwidth = 3"), &["simulate"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("width"));
}

#[test]
fn blow_up_exits_three_and_keeps_partial_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = BASE
        .replace("nu = 0.02\nmu = 0.02\ncase = \"double_viscous\"", "nu = 0.0\nmu = 0.0\ncase = \"deconv_euler\"")
        .replace("dt = 0.01\nt_end = 0.05", "dt = 0.5\nt_end = 20.0")
        .replace("seed = 4", "seed = 4\namplitude = 1e4");
    let o = admhd(dir.path(), &cfg, &with_out(&["simulate"], "o"));
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("o/last_valid.bin").exists());
    let lines = std::fs::read_to_string(dir.path().join("o/diagnostics.ndjson")).unwrap();
    assert!(lines.lines().count() >= 1);
}

#[test]
fn output_dir_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, BASE).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_admhd"))
        .args(["simulate", "--quiet", "--config"])
        .arg(&cfg)
        .env("ADMHD_OUTPUT_DIR", dir.path().join("env_out"))
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("env_out/diagnostics.ndjson").exists());
}

#[test]
fn operator_check_passes_on_default_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = admhd(dir.path(), BASE, &with_out(&["operator_check"], "o"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let report: String = std::fs::read_to_string(dir.path().join("o/operator_check.json")).unwrap();
    assert!(report.contains("\"energy_neutrality\""));
    assert!(!report.contains("\"passed\": false"));
}

#[test]
fn sweep_n_writes_monotone_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = admhd(dir.path(), BASE, &with_out(&["sweep_n", "--n-list", "0,1,2,4", "--workers", "2"], "o"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("o/convergence.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("N,err_w,err_B"));
    let rows: Vec<Vec<f64>> =
        lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.iter().map(|r| r[0]).collect::<Vec<_>>(), [0.0, 1.0, 2.0, 4.0]);
    assert!(rows.windows(2).all(|p| p[1][1] < p[0][1] && p[1][2] < p[0][2]));
}

#[test]
fn pressure_from_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(admhd(dir.path(), BASE, &with_out(&["simulate"], "sim")).status.code(), Some(0));
    let o = admhd(dir.path(), BASE, &with_out(&["pressure", "--snapshot", "sim/final.bin"], "p"));
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let bytes = std::fs::read(dir.path().join("p/pressure.bin")).unwrap();
    assert_eq!(&bytes[..6], b"ADMHD1");
    assert_eq!(&bytes[14..18], &1u32.to_le_bytes());
    let o = admhd(dir.path(), &BASE.replace("n_per_axis = 8", "n_per_axis = 6"), &["pressure", "--snapshot", "sim/final.bin"]);
    assert_eq!(o.status.code(), Some(2));
}
