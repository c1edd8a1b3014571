use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn fracspde(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracspde"))
        .args(args)
        .env_remove("FRACSPDE_OUT_DIR")
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Data rows of a CSV with one comment line and a header.
fn rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

fn estimates(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(2)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

const HEAT: [&str; 8] = ["--builtin", "heat_1d", "-p", "K=2", "-p", "theta=1", "-p", "H=0.3"];

#[test]
fn simulate_writes_modes_and_driver() {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["simulate"];
    args.extend(HEAT);
    args.extend(["--steps", "16", "--seed", "3"]);
    let out = fracspde(&args, dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let text = fs::read_to_string(dir.path().join("modes.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 19);
    assert_eq!(lines[0], "# fracspde 0.1.0 seed=3 H=0.3");
    assert_eq!(lines[1], "t,u_1,u_2");
    let modes = rows(&dir.path().join("modes.csv"));
    assert_eq!(modes[0], vec![0.0, 1.0, 1.0]);
    assert_eq!(modes[16][0], 1.0);
    assert!(modes.iter().all(|r| r[1] > 0.0 && r[2] > 0.0));

    let driver = rows(&dir.path().join("driver.csv"));
    assert_eq!(driver.len(), 17);
    assert_eq!(driver[0], vec![0.0, 0.0]);
}

#[test]
fn simulate_is_deterministic() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let mut args = vec!["simulate"];
    args.extend(HEAT);
    args.extend(["--steps", "64", "--seed", "11", "--T", "2"]);
    assert_eq!(code(&fracspde(&args, a.path())), 0);
    assert_eq!(code(&fracspde(&args, b.path())), 0);
    for f in ["modes.csv", "driver.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
    let seed_at = args.len() - 3;
    args[seed_at] = "12";
    let c = TempDir::new().unwrap();
    assert_eq!(code(&fracspde(&args, c.path())), 0);
    assert_ne!(
        fs::read(a.path().join("driver.csv")).unwrap(),
        fs::read(c.path().join("driver.csv")).unwrap()
    );
}

#[test]
fn out_dir_from_environment() {
    let dir = TempDir::new().unwrap();
    let target = dir.path().join("nested");
    let mut args = vec!["simulate"];
    args.extend(HEAT);
    args.extend(["--steps", "8"]);
    let out = Command::new(env!("CARGO_BIN_EXE_fracspde"))
        .args(&args)
        .env("FRACSPDE_OUT_DIR", &target)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(target.join("modes.csv").exists());
    assert!(!dir.path().join("modes.csv").exists());
}

#[test]
fn zero_volatility_matches_closed_form() {
    let dir = TempDir::new().unwrap();
    let model = dir.path().join("model.toml");
    fs::write(
        &model,
        "schema = 1\nnum_modes = 2\nlambda = [1.0, 2.0]\nrho = [0.5, 0.0]\nnu = [-1.0, -4.0]\n\
         mu = [0.0, 0.0]\ntheta = 0.7\nhurst = 0.4\nu0 = [2.0, -1.0]\norder_m = 1.0\n",
    )
    .unwrap();
    let out = fracspde(
        &[
            "simulate",
            "--model",
            model.to_str().unwrap(),
            "--steps",
            "32",
            "--T",
            "1.5",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for r in rows(&dir.path().join("modes.csv")) {
        let t = r[0];
        let want = [2.0 * ((0.5 - 0.7) * t).exp(), -(-4.0 * 0.7 * t).exp()];
        for (got, want) in r[1..].iter().zip(want) {
            assert!((got - want).abs() <= 1e-12 * want.abs(), "t={t}: {got} vs {want}");
        }
    }
}

#[test]
fn exact_estimators_round_trip() {
    let dir = TempDir::new().unwrap();
    let model = [
        "--builtin",
        "laplacian_power",
        "-p",
        "K=3",
        "-p",
        "theta=1.5",
        "-p",
        "H=0.3",
        "-p",
        "r=-1",
    ];
    let mut sim = vec!["simulate"];
    sim.extend(model);
    sim.extend(["--T", "2", "--steps", "64", "--seed", "5"]);
    assert_eq!(code(&fracspde(&sim, dir.path())), 0);

    let mut est = vec!["estimate", "--input", "modes.csv"];
    est.extend(model);
    est.extend([
        "-e",
        "exact_theta@1,2",
        "-e",
        "exact_hurst@2,3",
        "-e",
        "exact_joint@1,2;2,3",
    ]);
    let out = fracspde(&est, dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(dir.path().join("estimates.csv")).unwrap();
    assert!(text.starts_with("# fracspde 0.1.0 seed=5 H=0.3\n"));
    let rows = estimates(&dir.path().join("estimates.csv"));
    let value = |i: usize, c: usize| rows[i][c].parse::<f64>().unwrap();
    assert!((value(0, 1) - 1.5).abs() < 1e-9);
    assert!((value(1, 1) - 0.3).abs() < 1e-9);
    assert!((value(2, 1) - 1.5).abs() < 1e-9);
    assert!((value(2, 2) - 0.3).abs() < 1e-9);
    assert!(rows.iter().all(|r| r[7] == "ok"));
}

#[test]
fn brownian_mle_matches_hand_formula() {
    // For H = 1/2 the mode MLE reduces to (ln(u_k(T)/u_k(0)) + μ_k² T/2)/(ν_k T) − ρ_k/ν_k.
    let dir = TempDir::new().unwrap();
    let heat = ["--builtin", "heat_1d", "-p", "K=2", "-p", "theta=1", "-p", "H=0.5"];
    let mut sim = vec!["simulate"];
    sim.extend(heat);
    sim.extend(["--T", "1", "--steps", "128", "--seed", "9"]);
    assert_eq!(code(&fracspde(&sim, dir.path())), 0);
    let mut est = vec!["estimate", "--input", "modes.csv"];
    est.extend(heat);
    est.extend(["-e", "mle_mode@1", "-e", "mle_mode@2"]);
    assert_eq!(code(&fracspde(&est, dir.path())), 0);

    let modes = rows(&dir.path().join("modes.csv"));
    let last = modes.last().unwrap();
    let got = estimates(&dir.path().join("estimates.csv"));
    for k in 1..=2 {
        let nu = -((k * k) as f64);
        let want = (last[k].ln() + 0.5) / nu;
        let value: f64 = got[k - 1][1].parse().unwrap();
        assert!((value - want).abs() < 1e-8, "mode {k}: {value} vs {want}");
    }
}

#[test]
fn estimate_at_earlier_time_and_failures() {
    let dir = TempDir::new().unwrap();
    let mut sim = vec!["simulate"];
    sim.extend(HEAT);
    sim.extend(["--T", "2", "--steps", "32"]);
    assert_eq!(code(&fracspde(&sim, dir.path())), 0);

    let mut est = vec!["estimate", "--input", "modes.csv", "--at", "1"];
    est.extend(HEAT);
    est.extend(["-e", "mle_mode@1", "-e", "mle_mode@5"]);
    let out = fracspde(&est, dir.path());
    assert_eq!(code(&out), 0);
    let rows = estimates(&dir.path().join("estimates.csv"));
    assert_eq!(rows[0][4], "1.0");
    assert_eq!(rows[0][7], "ok");
    assert_eq!(rows[1][7], "failed");

    let mut only_bad = vec!["estimate", "--input", "modes.csv"];
    only_bad.extend(HEAT);
    only_bad.extend(["-e", "mle_mode@5"]);
    assert_eq!(code(&fracspde(&only_bad, dir.path())), 2);

    let mut off_grid = vec!["estimate", "--input", "modes.csv", "--at", "0.3"];
    off_grid.extend(HEAT);
    off_grid.extend(["-e", "mle_mode@1"]);
    assert_eq!(code(&fracspde(&off_grid, dir.path())), 2);
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    let mut args = vec!["estimate", "--input", "modes.csv", "-e", "median@1"];
    args.extend(HEAT);
    assert_eq!(code(&fracspde(&args, dir.path())), 1);
    assert_eq!(code(&fracspde(&["simulate"], dir.path())), 1);
    assert_eq!(code(&fracspde(&["frobnicate"], dir.path())), 1);
    assert_eq!(code(&fracspde(&["--help"], dir.path())), 0);
}

#[test]
fn invalid_model_exits_two() {
    let dir = TempDir::new().unwrap();
    let args = [
        "simulate",
        "--builtin",
        "heat_1d",
        "-p",
        "K=2",
        "-p",
        "theta=1",
        "-p",
        "H=1.2",
    ];
    assert_eq!(code(&fracspde(&args, dir.path())), 2);
    let missing = ["simulate", "--model", "nope.toml"];
    assert_eq!(code(&fracspde(&missing, dir.path())), 2);
}

const SMALL_PLAN: &str = r#"
name = "small"
replications = 20
seed = 4
hurst = [0.3, 0.7]

[model]
builtin = "heat_1d"

[model.params]
K = 2
theta = 1.0
H = 0.5

[grid]
horizon = 1.0
steps = 32

[[roster]]
kind = "mle_mode"
modes = [1, 2]
"#;

#[test]
fn experiment_from_plan_file() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("small.toml"), SMALL_PLAN).unwrap();
    let out = fracspde(&["experiment", "small.toml", "--raw"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let summary = fs::read_to_string(dir.path().join("small.csv")).unwrap();
    let lines: Vec<&str> = summary.lines().collect();
    assert_eq!(lines[0], "# fracspde 0.1.0 seed=4 H=0.3;0.7");
    assert!(lines[1].starts_with("label,kind,quantity,hurst"));
    assert_eq!(lines.len(), 2 + 4);
    let raw = fs::read_to_string(dir.path().join("small_raw.csv")).unwrap();
    assert!(raw.lines().count() > 20);

    let again = TempDir::new().unwrap();
    fs::write(again.path().join("small.toml"), SMALL_PLAN).unwrap();
    assert_eq!(code(&fracspde(&["experiment", "small.toml"], again.path())), 0);
    assert_eq!(summary, fs::read_to_string(again.path().join("small.csv")).unwrap());
}

#[test]
fn experiment_rejects_bad_plans() {
    let dir = TempDir::new().unwrap();
    fs::write(
        dir.path().join("one.toml"),
        SMALL_PLAN.replace("replications = 20", "replications = 1"),
    )
    .unwrap();
    assert_eq!(code(&fracspde(&["experiment", "one.toml"], dir.path())), 2);
    assert_eq!(code(&fracspde(&["experiment", "no_such_plan"], dir.path())), 2);
}

#[test]
fn bundled_plan_with_override() {
    let dir = TempDir::new().unwrap();
    let out = fracspde(&["experiment", "exact_recovery", "--replications", "4"], dir.path());
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("exact_recovery.csv").exists());
}

#[test]
fn check_exit_status() {
    let dir = TempDir::new().unwrap();
    let ok = [
        "check",
        "--builtin",
        "heat_1d",
        "-p",
        "K=6",
        "-p",
        "theta=1",
        "-p",
        "H=0.3",
    ];
    let out = fracspde(&ok, dir.path());
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("parabolic: true"));

    let mut tight = ok.to_vec();
    tight.extend(["--bounds", "0.5,-10"]);
    assert_eq!(code(&fracspde(&tight, dir.path())), 2);

    let mut bad = ok.to_vec();
    bad.extend(["--theta-range", "1"]);
    assert_eq!(code(&fracspde(&bad, dir.path())), 1);
}
