use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netopp"))
        .args(args)
        .current_dir(dir)
        .env_remove("NETOPP_SEED")
        .env_remove("SOURCE_DATE_EPOCH")
        .output()
        .unwrap()
}

fn ok(args: &[&str], dir: &Path) -> String {
    let out = run(args, dir);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

#[test]
fn complete_graph_checks_as_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["construct", "--kind", "complete", "--n", "5", "--out", "k5.json"], dir.path());
    let v: serde_json::Value =
        serde_json::from_str(&ok(&["check-eq", "--graph", "k5.json", "--q", "0.5", "--p", "0.3", "--gamma", "0.01"], dir.path()))
            .unwrap();
    assert_eq!(v["is_equilibrium"], true);
    let v: serde_json::Value =
        serde_json::from_str(&ok(&["check-eq", "--graph", "k5.json", "--q", "0.5", "--p", "0.3", "--gamma", "0.2"], dir.path()))
            .unwrap();
    assert_eq!(v["is_equilibrium"], false);
    assert!(v["witness"].is_object());
}

#[test]
fn simulate_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["construct", "--kind", "cycle", "--n", "7", "--out", "c7.json"], dir.path());
    let args = ["simulate", "--graph", "c7.json", "--q", "0.4", "--p", "0.3", "--rounds", "5000", "--seed", "3"];
    let a = ok(&args, dir.path());
    assert_eq!(a, ok(&args, dir.path()));
    assert_eq!(a, ok(&[&args[..], &["--jobs", "1"]].concat(), dir.path()));
    assert_ne!(a, ok(&[&args[..9], &["--seed", "4"]].concat(), dir.path()));
}

#[test]
fn utility_matches_welfare_line() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["construct", "--kind", "star", "--n", "4", "--out", "s.json"], dir.path());
    let out = ok(&["utility", "--graph", "s.json", "--q", "0.5", "--p", "0.4", "--gamma", "0.0"], dir.path());
    let rows: Vec<f64> = out
        .lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.rsplit(',').next().unwrap().parse().unwrap())
        .collect();
    let welfare: f64 = out.lines().find_map(|l| l.strip_prefix("# welfare=")).unwrap().parse().unwrap();
    assert!((rows.iter().sum::<f64>() - welfare).abs() < 1e-12);
    // centre: three leaves, each passing with probability p
    assert!((rows[0] - (1.0 - 0.5 * 0.6f64.powi(3))).abs() < 1e-12);
}

#[test]
fn sweep_cell_equals_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let csv = ok(&["sweep", "poa", "--regime", "frictionless", "--grid", "q=0.5:0.5:0.1,p=0.5:0.5:0.1"], dir.path());
    let line = csv.lines().find(|l| l.starts_with("0.5,0.5")).unwrap();
    let v: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
    assert!((v - 0.75 / (1.0 - 0.5 * (-0.5f64).exp())).abs() < 1e-15);
    assert!(csv.contains("# timestamp=unset"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["check-eq", "--graph", "missing.json", "--q", "0.5", "--p", "0.3"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[io]"));
    ok(&["construct", "--kind", "path", "--n", "3", "--out", "p.json"], dir.path());
    let out = run(&["check-eq", "--graph", "p.json", "--q", "0.9", "--p", "0.3"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error[invalid-params]"));
    assert_eq!(run(&["no-such-command"], dir.path()).status.code(), Some(1));
    assert_eq!(run(&["--version"], dir.path()).status.code(), Some(0));
}

fn pixels(path: &Path) -> Vec<[u8; 3]> {
    image::open(path).unwrap().to_rgb8().pixels().map(|p| p.0).collect()
}

#[test]
fn constant_grid_heatmap_is_one_colour() {
    let dir = tempfile::tempdir().unwrap();
    // above qp every cell is exactly 1
    ok(
        &["sweep", "poa", "--regime", "costly", "--grid", "q=0.2:0.3:0.05,p=0.2:0.3:0.05", "--gamma", "0.5", "--png", "c.png", "--out", "c.csv"],
        dir.path(),
    );
    let px = pixels(&dir.path().join("c.png"));
    assert!(px.iter().all(|p| *p == px[0]));
    assert_ne!(px[0], [255, 255, 255]);
    let side: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("c.png.json")).unwrap()).unwrap();
    assert_eq!(side["value_min"], side["value_max"]);
}

#[test]
fn masked_cells_are_white() {
    let dir = tempfile::tempdir().unwrap();
    // q + p > 1 in the upper corner
    ok(
        &["sweep", "poa", "--regime", "frictionless", "--grid", "q=0.3:0.9:0.3,p=0.3:0.9:0.3", "--png", "m.png", "--scale", "1", "--out", "m.csv"],
        dir.path(),
    );
    let csv = std::fs::read_to_string(dir.path().join("m.csv")).unwrap();
    assert!(csv.contains("NaN"));
    let px = pixels(&dir.path().join("m.png"));
    assert_eq!(px.len(), 9);
    assert_eq!(px[8], [255, 255, 255]);
    assert_ne!(px[0], [255, 255, 255]);
}

#[test]
fn find_eq_output_is_an_equilibrium() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["--q", "0.5", "--p", "0.5", "--gamma", "0.04"];
    ok(&[&["find-eq", "--n", "10", "--seed", "5", "--out", "g.json", "--trace", "t.csv"][..], &common].concat(), dir.path());
    let v: serde_json::Value =
        serde_json::from_str(&ok(&[&["check-eq", "--graph", "g.json"][..], &common].concat(), dir.path())).unwrap();
    assert_eq!(v["is_equilibrium"], true);
    assert!(std::fs::read_to_string(dir.path().join("t.csv")).unwrap().lines().count() > 1);
}
