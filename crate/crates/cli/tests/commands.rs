use std::path::Path;
use std::process::{Command, Output};

use moyodft::lattice::{energy, LatticeSpec};
use nalgebra::DVector;

fn moyodft(dir: &Path, config: &str, args: &[&str]) -> Output {
    let path = dir.join("run.cfg");
    std::fs::write(&path, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_moyodft"))
        .args(args)
        .arg("--config")
        .arg(&path)
        .output()
        .unwrap()
}

fn text(bytes: &[u8]) -> Vec<String> {
    String::from_utf8(bytes.to_vec()).unwrap().lines().map(String::from).collect()
}

fn column(lines: &[String], index: usize) -> Vec<f64> {
    lines[1..].iter().map(|l| l.split(',').nth(index).unwrap().parse().unwrap()).collect()
}

const DIMER: &str = "model.v_ext = 1, -1\nsolver.eps = 0.1\n";
const CHAIN: &str = "model.sites = 3\nmodel.electrons = 2\nmodel.v_ext = 1, -1, 1\n";

#[test]
fn solve_noninteracting_dimer() {
    let dir = tempfile::tempdir().unwrap();
    let out = moyodft(dir.path(), "model.interaction_strength = 0\nmodel.v_ext = 1, -1\n", &["solve"]);
    assert_eq!(out.status.code(), Some(0));
    let lines = text(&out.stdout);
    assert_eq!(lines[0], "iter,e_i,t_i,residual,parabola_gap");
    let rows = lines.iter().skip(1).take_while(|l| !l.starts_with("E1")).count();
    assert!((1..=2).contains(&rows), "{lines:?}");
}

#[test]
fn solve_summary_matches_exact_diagonalization() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let out = moyodft(dir.path(), CHAIN, &["solve", "--out", trace.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let summary = text(&out.stdout);
    assert_eq!(summary[0], "E1,rho_eps_1,rho_eps_2,rho_eps_3");
    let values: Vec<f64> = summary[1].split(',').map(|x| x.parse().unwrap()).collect();
    let spec = LatticeSpec::new(3, 2, 0.5, 1.0).unwrap();
    let exact = energy(&spec, &DVector::from_vec(vec![1.0, -1.0, 1.0])).unwrap();
    assert!((values[0] - exact).abs() < 1e-6, "{} vs {exact}", values[0]);
    assert!((values[1..].iter().sum::<f64>() - 2.0).abs() < 1e-6);

    let trace = text(&std::fs::read(trace).unwrap());
    let energies = column(&trace, 1);
    assert!(energies.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn solve_without_convergence_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = moyodft(dir.path(), &format!("{CHAIN}solver.max_outer = 1\n"), &["solve"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn config_errors_name_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let out = moyodft(dir.path(), "solver.epsilon = 0.1\n", &["solve"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("solver.epsilon"));
}

#[test]
fn prox_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = moyodft(dir.path(), DIMER, &["prox", "--rho", "0.7,0.3"]);
    assert_eq!(out.status.code(), Some(0));
    let lines = text(&out.stdout);
    assert_eq!(lines[0], "rho_eps_1,rho_eps_2,v_eps_1,v_eps_2,envelope,residual");
    let row: Vec<f64> = lines[1].split(',').map(|x| x.parse().unwrap()).collect();
    // ρ_ε = ρ + εv_ε
    assert!((row[0] - (0.7 + 0.1 * row[2])).abs() < 1e-12);
    assert!((row[0] + row[1] - 1.0).abs() < 1e-8);
}

#[test]
fn eps_sweep_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let out = moyodft(dir.path(), DIMER, &["sweep", "--rho", "0.7,0.3", "--eps-list", "0.4,0.2,0.1,0.05"]);
    assert_eq!(out.status.code(), Some(0));
    let lines = text(&out.stdout);
    assert_eq!(lines[0], "eps,envelope,residual,monotone");
    assert_eq!(lines.len(), 5);
    let envelope = column(&lines, 1);
    assert!(envelope.windows(2).all(|w| w[1] >= w[0] - 1e-10));
    assert!(lines[1..].iter().all(|l| l.ends_with(",true")));
}

#[test]
fn lambda_sweep_is_concave() {
    let dir = tempfile::tempdir().unwrap();
    let out = moyodft(
        dir.path(),
        "model.sites = 3\nmodel.electrons = 2\n",
        &["sweep", "--lambda-list", "0,0.25,0.5,0.75,1"],
    );
    assert_eq!(out.status.code(), Some(0));
    let lines = text(&out.stdout);
    assert_eq!(lines[0], "lambda,energy,concave");
    let e = column(&lines, 1);
    assert!(e.windows(3).all(|w| w[1] >= 0.5 * (w[0] + w[2]) - 1e-10));
    assert!(lines[1..].iter().all(|l| l.ends_with(",true")));
}

#[test]
fn empty_sweep_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = moyodft(dir.path(), DIMER, &["sweep", "--rho", "0.7,0.3", "--eps-list", ""]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn verify_default_config_passes() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("reports.csv");
    let out = moyodft(dir.path(), "", &["verify", "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let rows = text(&std::fs::read(csv).unwrap());
    assert_eq!(rows[0], "quantity,reference,computed,abs_error,tolerance,pass");
    assert!(rows[1..].iter().all(|r| r.ends_with(",true")));
}

#[test]
fn verify_tampered_tolerance_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = moyodft(dir.path(), "verify.tolerance = 1e-15\n", &["verify"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn verify_noninteracting_subset_is_fast() {
    let dir = tempfile::tempdir().unwrap();
    let start = std::time::Instant::now();
    let out = moyodft(dir.path(), "model.interaction_strength = 0\n", &["verify"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(start.elapsed().as_secs_f64() < 10.0);
}

#[test]
fn basis_cap_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, CHAIN).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_moyodft"))
        .args(["solve", "--config"])
        .arg(&path)
        .env("MOYODFT_MAX_BASIS", "4")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("4"));
}
