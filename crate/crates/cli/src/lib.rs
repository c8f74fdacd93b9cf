//! Command-line front end for the moyodft solvers.
//!
//! Configuration is a flat `key = value` file with namespaced keys; unknown
//! or repeated keys are errors. Output is CSV with a mandatory header row and
//! round-trip decimal numbers.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use moyodft::lattice::{energy, LatticeSpec};
use moyodft::lieb::{regularize, DualAscentConfig, StepRule};
use moyodft::oracles::battery::{run_battery, BatteryConfig, BatterySubset};
use moyodft::oracles::{csv_number, OracleReport};
use moyodft::scf::{myks_scf, myksoda, ScfConfig, ScfResult, StepPolicy};
use nalgebra::DVector;

pub const MAX_BASIS_ENV: &str = "MOYODFT_MAX_BASIS";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config key '{key}': {message}")]
    Config { key: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Solver(#[from] moyodft::Error),
}

fn key_error(key: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        key: key.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Parser)]
#[command(name = "moyodft", version, about = "Moreau-Yosida regularized lattice DFT")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Flat key=value configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Destination for the main CSV output instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Quasidensity as a comma-separated list.
    #[arg(long, global = true)]
    pub rho: Option<String>,
    /// Regularization parameters to sweep.
    #[arg(long, global = true)]
    pub eps_list: Option<String>,
    /// Coupling strengths to sweep.
    #[arg(long, global = true)]
    pub lambda_list: Option<String>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Run the self-consistent field iteration.
    Solve,
    /// Evaluate the proximal pair at a quasidensity.
    Prox,
    /// Sweep the regularization parameter or the coupling strength.
    Sweep,
    /// Run the oracle battery.
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    /// Optimally damped iteration.
    Myksoda,
    /// Plain fixed-point iteration.
    MyksScf,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub model: LatticeSpec,
    pub solver: ScfConfig,
    pub algorithm: Algorithm,
    pub v_ext: DVector<f64>,
    pub output_path: Option<PathBuf>,
    pub seed: u64,
    pub verify_tolerance: Option<f64>,
    pub verify_subset: Option<BatterySubset>,
    pub verify_probes: usize,
}

const KEYS: &[&str] = &[
    "model.sites",
    "model.electrons",
    "model.hopping",
    "model.interaction_strength",
    "model.lambda",
    "model.v_ext",
    "solver.algorithm",
    "solver.eps",
    "solver.step_policy",
    "solver.residual_tol",
    "solver.max_outer",
    "dual.tolerance",
    "dual.max_iterations",
    "dual.step_rule",
    "dual.restart_count",
    "output.path",
    "seed",
    "verify.tolerance",
    "verify.subset",
    "verify.probes",
];

/// Splits config text into key/value pairs. Blank lines and lines starting
/// with `#` are skipped.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut entries = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::Usage(format!("config line {}: expected key = value", n + 1)));
        };
        let key = key.trim();
        if !KEYS.contains(&key) {
            return Err(key_error(key, "unknown key"));
        }
        if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
            return Err(key_error(key, "given more than once"));
        }
    }
    Ok(entries)
}

fn parse_value<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    value
        .parse()
        .map_err(|e: T::Err| key_error(key, format!("cannot parse '{value}': {e}")))
}

/// Parses a comma-separated list of reals; `name` labels errors.
pub fn parse_list(name: &str, text: &str) -> Result<Vec<f64>, CliError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',').map(|s| parse_value(name, s.trim())).collect()
}

fn parse_max_basis(value: Option<&str>) -> Result<Option<usize>, CliError> {
    value
        .map(|v| parse_value::<usize>(MAX_BASIS_ENV, v.trim()))
        .transpose()
}

impl RunConfig {
    /// Builds a configuration from config text; `max_basis` is the raw value
    /// of the basis-cap override, if set.
    pub fn from_text(text: &str, max_basis: Option<&str>) -> Result<Self, CliError> {
        let mut entries = parse_entries(text)?;
        let mut take = |key: &str| entries.remove(key).map(|v| (key.to_string(), v));

        fn get<T: std::str::FromStr>(entry: Option<(String, String)>, default: T) -> Result<T, CliError>
        where
            T::Err: std::fmt::Display,
        {
            match entry {
                Some((k, v)) => parse_value(&k, &v),
                None => Ok(default),
            }
        }

        let sites: usize = get(take("model.sites"), 2)?;
        let electrons: usize = get(take("model.electrons"), 1)?;
        let hopping: f64 = get(take("model.hopping"), 0.5)?;
        let interaction: f64 = get(take("model.interaction_strength"), 1.0)?;
        let lambda: f64 = get(take("model.lambda"), 1.0)?;
        let model_error = |e: moyodft::Error| key_error("model", e.to_string());
        let mut model = LatticeSpec::new(sites, electrons, hopping, interaction)
            .map_err(model_error)?
            .with_lambda(lambda)
            .map_err(|e| key_error("model.lambda", e.to_string()))?;
        if let Some(cap) = parse_max_basis(max_basis)? {
            model = model.with_max_basis(cap);
        }

        let v_ext = match take("model.v_ext") {
            Some((k, v)) => {
                let values = parse_list(&k, &v)?;
                if values.len() != sites {
                    return Err(key_error(&k, format!("expected {sites} values, found {}", values.len())));
                }
                DVector::from_vec(values)
            }
            None => DVector::zeros(sites),
        };

        let algorithm = match take("solver.algorithm") {
            None => Algorithm::Myksoda,
            Some((_, v)) if v == "myksoda" => Algorithm::Myksoda,
            Some((_, v)) if v == "myks_scf" => Algorithm::MyksScf,
            Some((k, v)) => return Err(key_error(&k, format!("expected myksoda or myks_scf, found '{v}'"))),
        };
        let defaults = ScfConfig::default();
        let dual_defaults = DualAscentConfig::default();
        let dual = DualAscentConfig {
            tolerance: get(take("dual.tolerance"), dual_defaults.tolerance)?,
            max_iterations: get(take("dual.max_iterations"), dual_defaults.max_iterations)?,
            step_rule: get::<StepRule>(take("dual.step_rule"), dual_defaults.step_rule)?,
            restart_count: get(take("dual.restart_count"), dual_defaults.restart_count)?,
        };
        dual.validate().map_err(|e| key_error("dual", e.to_string()))?;
        let solver = ScfConfig {
            eps: get(take("solver.eps"), defaults.eps)?,
            step_policy: get::<StepPolicy>(take("solver.step_policy"), defaults.step_policy)?,
            residual_tol: get(take("solver.residual_tol"), defaults.residual_tol)?,
            max_outer: get(take("solver.max_outer"), defaults.max_outer)?,
            dual,
        };
        solver.validate().map_err(|e| key_error("solver", e.to_string()))?;

        let verify_tolerance = take("verify.tolerance").map(|(k, v)| parse_value(&k, &v)).transpose()?;
        let verify_subset = take("verify.subset")
            .map(|(k, v)| parse_value::<BatterySubset>(&k, &v))
            .transpose()?;
        Ok(Self {
            model,
            solver,
            algorithm,
            v_ext,
            output_path: take("output.path").map(|(_, v)| PathBuf::from(v)),
            seed: get(take("seed"), 0)?,
            verify_tolerance,
            verify_subset,
            verify_probes: get(take("verify.probes"), BatteryConfig::default().probes)?,
        })
    }

    pub fn from_file(path: &Path, max_basis: Option<&str>) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_text(&text, max_basis)
    }

    /// The battery subset: as configured, else the interaction-free subset
    /// when the model has no interaction.
    pub fn battery(&self) -> BatteryConfig {
        let subset = self.verify_subset.unwrap_or(if self.model.interaction_strength == 0.0 {
            BatterySubset::NonInteracting
        } else {
            BatterySubset::All
        });
        BatteryConfig {
            seed: self.seed,
            probes: self.verify_probes,
            tolerance_override: self.verify_tolerance,
            subset,
        }
    }
}

/// Exit status of a completed command.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// The SCF stopped at `max_outer`, or a verification check failed.
    Incomplete,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::Incomplete => 2,
        }
    }
}

fn optional(x: Option<f64>) -> String {
    x.map(csv_number).unwrap_or_default()
}

fn indexed(prefix: &str, n: usize) -> String {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect::<Vec<_>>().join(",")
}

fn numbers(v: &DVector<f64>) -> String {
    v.iter().map(|&x| csv_number(x)).collect::<Vec<_>>().join(",")
}

pub const TRACE_HEADER: &str = "iter,e_i,t_i,residual,parabola_gap";

pub fn trace_csv(result: &ScfResult) -> String {
    let mut out = format!("{TRACE_HEADER}\n");
    for (i, step) in result.trace.steps.iter().enumerate() {
        let gap = step.parabola_minimum.map(|m| step.energy - m);
        out.push_str(&format!(
            "{i},{},{},{},{}\n",
            csv_number(step.energy),
            optional(step.step),
            csv_number(step.residual),
            optional(gap)
        ));
    }
    out
}

/// `E1,rho_eps_1..L` header and values: the unregularized ground energy and
/// the physical density.
pub fn summary_csv(result: &ScfResult) -> String {
    let sites = result.physical_density.len();
    format!(
        "E1,{}\n{},{}\n",
        indexed("rho_eps", sites),
        csv_number(result.ground_energy),
        numbers(&result.physical_density)
    )
}

/// Writes `text` to `path`, or to `stdout` when there is no path.
fn emit(path: Option<&Path>, text: &str, stdout: &mut dyn Write) -> Result<(), CliError> {
    let display = path.map(|p| p.display().to_string()).unwrap_or_else(|| "stdout".into());
    let io = |source| CliError::Io {
        path: display.clone(),
        source,
    };
    match path {
        Some(p) => std::fs::write(p, text).map_err(io),
        None => stdout.write_all(text.as_bytes()).map_err(io),
    }
}

pub fn cmd_solve(cfg: &RunConfig, out: Option<&Path>, stdout: &mut dyn Write) -> Result<Outcome, CliError> {
    let result = match cfg.algorithm {
        Algorithm::Myksoda => myksoda(&cfg.model, &cfg.v_ext, &cfg.solver)?,
        Algorithm::MyksScf => myks_scf(&cfg.model, &cfg.v_ext, &cfg.solver, None)?,
    };
    emit(out, &trace_csv(&result), stdout)?;
    emit(None, &summary_csv(&result), stdout)?;
    Ok(if result.converged {
        Outcome::Success
    } else {
        Outcome::Incomplete
    })
}

fn density_arg(cfg: &RunConfig, rho: Option<&str>) -> Result<DVector<f64>, CliError> {
    let text = rho.ok_or_else(|| CliError::Usage("--rho is required".into()))?;
    let values = parse_list("--rho", text)?;
    if values.len() != cfg.model.sites {
        return Err(CliError::Usage(format!(
            "--rho: expected {} values, found {}",
            cfg.model.sites,
            values.len()
        )));
    }
    Ok(DVector::from_vec(values))
}

pub fn cmd_prox(cfg: &RunConfig, rho: Option<&str>, out: Option<&Path>, stdout: &mut dyn Write) -> Result<Outcome, CliError> {
    let rho = density_arg(cfg, rho)?;
    let point = regularize(&cfg.model, cfg.solver.eps, &rho, &cfg.solver.dual)?;
    let sites = cfg.model.sites;
    let text = format!(
        "{},{},envelope,residual\n{},{},{},{}\n",
        indexed("rho_eps", sites),
        indexed("v_eps", sites),
        numbers(&point.proximal_density),
        numbers(&point.proximal_potential),
        csv_number(point.envelope_value),
        csv_number(point.residual)
    );
    emit(out, &text, stdout)?;
    Ok(Outcome::Success)
}

/// Evaluates `job` on every entry concurrently, keeping entry order.
fn parallel_map<T: Sync, R: Send>(
    items: &[T],
    job: impl Fn(&T) -> moyodft::Result<R> + Sync,
) -> moyodft::Result<Vec<R>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = items.iter().map(|item| scope.spawn(|| job(item))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep worker panicked"))
            .collect()
    })
}

const SWEEP_SLACK: f64 = 1e-10;

pub fn cmd_sweep(
    cfg: &RunConfig,
    rho: Option<&str>,
    eps_list: Option<&str>,
    lambda_list: Option<&str>,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<Outcome, CliError> {
    let text = match (eps_list, lambda_list) {
        (Some(eps), None) => {
            let eps = parse_list("--eps-list", eps)?;
            if eps.is_empty() {
                return Err(CliError::Usage("--eps-list is empty".into()));
            }
            let rho = density_arg(cfg, rho)?;
            let points = parallel_map(&eps, |&e| regularize(&cfg.model, e, &rho, &cfg.solver.dual))?;
            let mut text = String::from("eps,envelope,residual,monotone\n");
            for (k, (e, p)) in eps.iter().zip(&points).enumerate() {
                // smaller ε never lowers the envelope
                let monotone = k == 0 || {
                    let (e0, f0) = (eps[k - 1], points[k - 1].envelope_value);
                    let f = p.envelope_value;
                    (*e >= e0 || f >= f0 - SWEEP_SLACK) && (*e <= e0 || f <= f0 + SWEEP_SLACK)
                };
                text.push_str(&format!(
                    "{},{},{},{monotone}\n",
                    csv_number(*e),
                    csv_number(p.envelope_value),
                    csv_number(p.residual)
                ));
            }
            text
        }
        (None, Some(lambdas)) => {
            let lambdas = parse_list("--lambda-list", lambdas)?;
            if lambdas.is_empty() {
                return Err(CliError::Usage("--lambda-list is empty".into()));
            }
            let energies = parallel_map(&lambdas, |&l| energy(&cfg.model.with_lambda(l)?, &cfg.v_ext))?;
            let mut text = String::from("lambda,energy,concave\n");
            let n = lambdas.len();
            for k in 0..n {
                // interior rows: no lower than the chord through the neighbours
                let concave = k == 0 || k + 1 == n || {
                    let (l0, l, l1) = (lambdas[k - 1], lambdas[k], lambdas[k + 1]);
                    let w = (l - l0) / (l1 - l0);
                    !(0.0..=1.0).contains(&w) || energies[k] >= (1.0 - w) * energies[k - 1] + w * energies[k + 1] - SWEEP_SLACK
                };
                text.push_str(&format!("{},{},{concave}\n", csv_number(lambdas[k]), csv_number(energies[k])));
            }
            text
        }
        (Some(_), Some(_)) => return Err(CliError::Usage("give either --eps-list or --lambda-list, not both".into())),
        (None, None) => return Err(CliError::Usage("sweep needs --eps-list or --lambda-list".into())),
    };
    emit(out, &text, stdout)?;
    Ok(Outcome::Success)
}

pub fn verify_table(reports: &[OracleReport]) -> String {
    let width = reports.iter().map(|r| r.quantity.len()).max().unwrap_or(8).max(8);
    let mut text = format!(
        "{:<width$}  {:>24}  {:>24}  {:>10}  {:>10}  {}\n",
        "quantity", "reference", "computed", "abs_error", "tolerance", "result"
    );
    for r in reports {
        text.push_str(&format!(
            "{:<width$}  {:>24.16e}  {:>24.16e}  {:>10.2e}  {:>10.2e}  {}\n",
            r.quantity,
            r.reference,
            r.computed,
            r.abs_error,
            r.tolerance,
            if r.pass { "PASS" } else { "FAIL" }
        ));
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    text.push_str(&format!("{} checks, {failed} failed\n", reports.len()));
    text
}

pub fn cmd_verify(cfg: &RunConfig, out: Option<&Path>, stdout: &mut dyn Write) -> Result<Outcome, CliError> {
    let reports = run_battery(&cfg.battery());
    emit(None, &verify_table(&reports), stdout)?;
    if let Some(path) = out {
        let mut csv = format!("{}\n", OracleReport::CSV_HEADER);
        for r in &reports {
            csv.push_str(&r.csv_row());
            csv.push('\n');
        }
        emit(Some(path), &csv, stdout)?;
    }
    Ok(if reports.iter().all(|r| r.pass) {
        Outcome::Success
    } else {
        Outcome::Incomplete
    })
}

/// Runs a parsed command line; `max_basis` is the raw basis-cap override.
pub fn run(cli: &Cli, max_basis: Option<&str>, stdout: &mut dyn Write) -> Result<Outcome, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_file(path, max_basis)?,
        None => RunConfig::from_text("", max_basis)?,
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = cli.out.as_deref().or(cfg.output_path.as_deref());
    match cli.command {
        Command::Solve => cmd_solve(&cfg, out, stdout),
        Command::Prox => cmd_prox(&cfg, cli.rho.as_deref(), out, stdout),
        Command::Sweep => cmd_sweep(
            &cfg,
            cli.rho.as_deref(),
            cli.eps_list.as_deref(),
            cli.lambda_list.as_deref(),
            out,
            stdout,
        ),
        Command::Verify => cmd_verify(&cfg, out, stdout),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_named() {
        let err = RunConfig::from_text("model.sties = 3\n", None).unwrap_err();
        assert!(err.to_string().contains("model.sties"), "{err}");
    }

    #[test]
    fn repeated_key_is_rejected() {
        let err = RunConfig::from_text("seed = 1\nseed = 2\n", None).unwrap_err();
        assert!(err.to_string().contains("seed"));
    }

    #[test]
    fn bad_value_names_key() {
        let err = RunConfig::from_text("solver.eps = fast\n", None).unwrap_err();
        assert!(err.to_string().contains("solver.eps"), "{err}");
        let err = RunConfig::from_text("solver.step_policy = wild\n", None).unwrap_err();
        assert!(err.to_string().contains("solver.step_policy"), "{err}");
    }

    #[test]
    fn v_ext_length_is_checked() {
        let err = RunConfig::from_text("model.sites = 3\nmodel.electrons = 2\nmodel.v_ext = 1, 2\n", None).unwrap_err();
        assert!(err.to_string().contains("model.v_ext"));
    }

    #[test]
    fn comments_and_defaults() {
        let cfg = RunConfig::from_text("# dimer\n\nmodel.v_ext = 1, -1\nsolver.eps = 0.2\n", None).unwrap();
        assert_eq!(cfg.model.sites, 2);
        assert_eq!(cfg.solver.eps, 0.2);
        assert_eq!(cfg.v_ext, DVector::from_vec(vec![1.0, -1.0]));
        assert_eq!(cfg.algorithm, Algorithm::Myksoda);
    }

    #[test]
    fn basis_override() {
        let cfg = RunConfig::from_text("", Some("16")).unwrap();
        assert_eq!(cfg.model.max_basis, 16);
        let err = RunConfig::from_text("", Some("lots")).unwrap_err();
        assert!(err.to_string().contains(MAX_BASIS_ENV));
    }

    #[test]
    fn interaction_free_models_verify_the_cheap_subset() {
        let cfg = RunConfig::from_text("model.interaction_strength = 0\n", None).unwrap();
        assert_eq!(cfg.battery().subset, BatterySubset::NonInteracting);
        let cfg = RunConfig::from_text("model.interaction_strength = 0\nverify.subset = all\n", None).unwrap();
        assert_eq!(cfg.battery().subset, BatterySubset::All);
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list("x", "0.4, 0.2").unwrap(), vec![0.4, 0.2]);
        assert!(parse_list("x", "").unwrap().is_empty());
        assert!(parse_list("x", "0.4,,").is_err());
    }
}
