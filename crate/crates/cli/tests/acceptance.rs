//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit on any
//! failure.

use std::process::Command;
use std::time::{Duration, Instant};

use moyodft::lattice::LatticeSpec;
use moyodft::lieb::regularized_energy;
use moyodft::oracles::battery::{self, damping_reports, seeded_rng};
use moyodft::oracles::OracleReport;
use moyodft::scf::{myksoda, ScfConfig, StepPolicy};
use nalgebra::DVector;

type Check = moyodft::Result<Vec<OracleReport>>;

fn descent_runs(time_limit: Duration) -> (Check, Check) {
    let mut descent = Vec::new();
    let mut slope = Vec::new();
    for (sites, electrons) in [(2, 1), (3, 2), (4, 2)] {
        let spec = LatticeSpec::new(sites, electrons, 0.5, 1.0).expect("valid chain");
        let v_ext = DVector::from_fn(sites, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 });
        for eps in [0.1, 0.5] {
            let cfg = ScfConfig {
                eps,
                step_policy: StepPolicy::ParabolaOptimal,
                ..Default::default()
            };
            let label = format!("L={sites} N={electrons} eps={eps}");
            let start = Instant::now();
            let run = myksoda(&spec, &v_ext, &cfg).and_then(|r| Ok((r, regularized_energy(&spec, eps, &v_ext)?)));
            let elapsed = start.elapsed();
            let (result, reference) = match run {
                Ok(pair) => pair,
                Err(e) => return (Err(e.clone()), Err(e)),
            };
            for report in damping_reports(&label, &result, eps, reference) {
                if report.quantity.ends_with("descent slope bound") {
                    slope.push(report);
                } else {
                    descent.push(report);
                }
            }
            descent.push(OracleReport::violation(
                format!("{label} seconds over limit"),
                elapsed.as_secs_f64() - time_limit.as_secs_f64(),
                0.0,
            ));
        }
    }
    (Ok(descent), Ok(slope))
}

fn deterministic_solve() -> Check {
    let dir = tempfile::tempdir().expect("temporary directory");
    let config = dir.path().join("chain.cfg");
    std::fs::write(
        &config,
        "model.sites = 3\nmodel.electrons = 2\nmodel.interaction_strength = 1\nmodel.v_ext = 1, -1, 1\nsolver.eps = 0.1\n",
    )
    .expect("write config");
    let run = |name: &str| {
        let trace = dir.path().join(name);
        let output = Command::new(env!("CARGO_BIN_EXE_moyodft"))
            .args(["solve", "--seed", "7", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&trace)
            .output()
            .expect("run moyodft");
        let trace = std::fs::read(&trace).unwrap_or_default();
        (output.status.code(), trace, output.stdout)
    };
    let (first, second) = (run("a.csv"), run("b.csv"));
    let differing = [first.1 != second.1, first.2 != second.2].iter().filter(|&&d| d).count();
    Ok(vec![
        OracleReport::violation("solve exit code", f64::from(first.0 != Some(0)), 0.0),
        OracleReport::violation("nonempty trace", f64::from(first.1.is_empty()), 0.0),
        OracleReport::violation("differing outputs", differing as f64, 0.0),
    ])
}

fn main() {
    let mut rng = seeded_rng(0);
    let (descent, slope) = descent_runs(Duration::from_secs(60));
    let criteria: Vec<(&str, Check)> = vec![
        ("dimer energy anchor", battery::dimer_energies()),
        ("dimer lieb functional", battery::dimer_lieb()),
        ("regularized energy identity", battery::regularized_energy_identity()),
        ("moreau property battery", battery::moreau_battery(&mut rng, 200)),
        ("losslessness", battery::lossless()),
        ("fenchel consistency", battery::fenchel(&mut rng)),
        ("surjectivity round trip", battery::surjectivity(&mut rng)),
        ("optimal damping descent and convergence", descent),
        ("descent slope bound", slope),
        ("concavity and monotonicity", battery::concavity(&mut rng)),
        ("noninteracting limit", battery::noninteracting_limit()),
        ("determinism", deterministic_solve()),
    ];
    let mut failures = 0;
    for (n, (name, check)) in criteria.into_iter().enumerate() {
        let failing: Vec<String> = match check {
            Ok(reports) => reports
                .iter()
                .filter(|r| !r.pass)
                .map(|r| format!("{} = {:e} (tol {:e})", r.quantity, r.abs_error, r.tolerance))
                .collect(),
            Err(e) => vec![e.to_string()],
        };
        let verdict = if failing.is_empty() { "PASS" } else { "FAIL" };
        println!("criterion {}: {verdict} {name}", n + 1);
        for line in &failing {
            println!("    {line}");
        }
        failures += usize::from(!failing.is_empty());
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}
