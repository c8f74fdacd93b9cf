//! The oracle battery: every production quantity with an independent
//! reference, judged at a fixed tolerance.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dimer_f_closed_form, fd_gradient, DimerLiebFunction, OracleReport};
use crate::convex::functions::{PointIndicator, SquaredDistance};
use crate::convex::{moreau_envelope, verify_lossless, ConvexFunction, SolverConfig};
use crate::lattice::{energy, ground_state, LatticeSpec};
use crate::lieb::{lieb_f, regularize, regularized_energy, DualAscentConfig};
use crate::scf::{myks_scf, myksoda, ScfConfig, ScfResult, StepPolicy};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BatterySubset {
    All,
    /// Checks that involve no interaction; fast.
    NonInteracting,
}

impl std::str::FromStr for BatterySubset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(BatterySubset::All),
            "noninteracting" => Ok(BatterySubset::NonInteracting),
            other => Err(Error::InvalidParameter(format!(
                "unknown battery subset '{other}' (expected all or noninteracting)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BatteryConfig {
    pub seed: u64,
    /// Random probes per sampled property.
    pub probes: usize,
    /// Replaces every check's own tolerance.
    pub tolerance_override: Option<f64>,
    pub subset: BatterySubset,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            probes: 200,
            tolerance_override: None,
            subset: BatterySubset::All,
        }
    }
}

/// Runs the battery. Solver failures become failing reports rather than
/// errors.
/// The generator behind every sampled check.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn run_battery(cfg: &BatteryConfig) -> Vec<OracleReport> {
    let mut rng = seeded_rng(cfg.seed);
    let mut reports = Vec::new();
    let mut run = |name: &str, check: &mut dyn FnMut(&mut ChaCha8Rng) -> Result<Vec<OracleReport>>| match check(&mut rng) {
        Ok(r) => reports.extend(r),
        Err(e) => reports.push(OracleReport::new(
            format!("{name} (failed: {})", e.to_string().replace(',', ";")),
            0.0,
            f64::NAN,
            0.0,
        )),
    };
    run("dimer energies", &mut |_| dimer_energies());
    run("dimer lieb functional", &mut |_| dimer_lieb());
    run("regularized energy", &mut |_| regularized_energy_identity());
    run("noninteracting limit", &mut |_| noninteracting_limit());
    if cfg.subset == BatterySubset::All {
        let probes = cfg.probes;
        run("moreau properties", &mut |rng| moreau_battery(rng, probes));
        run("lossless recovery", &mut |_| lossless());
        run("fenchel consistency", &mut |rng| fenchel(rng));
        run("prox surjectivity", &mut |rng| surjectivity(rng));
        run("concavity", &mut |rng| concavity(rng));
        run("optimal damping", &mut |_| optimal_damping());
    }
    match cfg.tolerance_override {
        Some(tol) => reports.into_iter().map(|r| r.with_tolerance(tol)).collect(),
        None => reports,
    }
}

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

fn dimer(interaction: f64) -> LatticeSpec {
    LatticeSpec::new(2, 1, 0.5, interaction).expect("valid dimer")
}

fn alternating(sites: usize) -> DVector<f64> {
    DVector::from_fn(sites, |i, _| if i % 2 == 0 { 1.0 } else { -1.0 })
}

fn uniform(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(lo..hi))
}

/// Dimer ground energies and density against the 2×2 closed form.
pub fn dimer_energies() -> Result<Vec<OracleReport>> {
    let spec = dimer(1.0);
    let symmetric = ground_state(&spec, &v(&[0.0, 0.0]))?;
    Ok(vec![
        OracleReport::new("dimer energy v=(1;-1)", -(5f64.sqrt()) / 2.0, energy(&spec, &v(&[1.0, -1.0]))?, 1e-10),
        OracleReport::new("dimer energy v=0", -0.5, symmetric.energy, 1e-10),
        OracleReport::new(
            "dimer density v=0",
            0.0,
            (&symmetric.ensemble_density - v(&[0.5, 0.5])).amax(),
            1e-10,
        ),
    ])
}

/// The dimer Lieb functional on nine interior occupations.
pub fn dimer_lieb() -> Result<Vec<OracleReport>> {
    let spec = dimer(1.0);
    let mut worst: f64 = 0.0;
    for k in 1..=9 {
        let rho1 = k as f64 / 10.0;
        let f = lieb_f(&spec, &v(&[rho1, 1.0 - rho1]), &Default::default())?
            .finite()
            .unwrap_or(f64::INFINITY);
        worst = worst.max((f - dimer_f_closed_form(0.5, rho1)?).abs());
    }
    Ok(vec![OracleReport::violation("dimer lieb functional max error", worst, 1e-6)])
}

/// `ᵋE = E − (ε/2)‖v‖²` on the dimer.
pub fn regularized_energy_identity() -> Result<Vec<OracleReport>> {
    Ok(vec![OracleReport::new(
        "regularized dimer energy",
        -(5f64.sqrt()) / 2.0 - 0.1,
        regularized_energy(&dimer(1.0), 0.1, &v(&[1.0, -1.0]))?,
        1e-12,
    )])
}

/// Both SCF schemes stop at once without interaction.
pub fn noninteracting_limit() -> Result<Vec<OracleReport>> {
    let spec = LatticeSpec::new(3, 2, 0.5, 0.0)?;
    let v_ext = alternating(3);
    let cfg = ScfConfig::default();
    let mut reports = Vec::new();
    for (name, result) in [
        ("plain", myks_scf(&spec, &v_ext, &cfg, None)?),
        ("damped", myksoda(&spec, &v_ext, &cfg)?),
    ] {
        let last = result.trace.steps.last().expect("nonempty trace");
        let hxc = (&last.effective_potential - &v_ext).norm();
        reports.push(OracleReport::violation(
            format!("noninteracting {name} extra iterations"),
            result.trace.steps.len() as f64 - 2.0,
            0.0,
        ));
        reports.push(OracleReport::violation(
            format!("noninteracting {name} hxc potential"),
            hxc,
            2.0 * cfg.dual.tolerance,
        ));
    }
    Ok(reports)
}

/// A convex oracle with a sampler for arbitrary points and for points of its
/// domain, and its infimum.
struct Subject {
    name: &'static str,
    function: Box<dyn ConvexFunction>,
    infimum: f64,
    anywhere: fn(&mut ChaCha8Rng) -> DVector<f64>,
    in_domain: fn(&mut ChaCha8Rng) -> DVector<f64>,
}

/// Moreau envelope properties on three oracles, `probes` samples each.
pub fn moreau_battery(rng: &mut ChaCha8Rng, probes: usize) -> Result<Vec<OracleReport>> {
    let subjects = [
        Subject {
            name: "dimer",
            function: Box::new(DimerLiebFunction::new(0.5)),
            infimum: -0.5,
            anywhere: |rng| uniform(rng, 2, -0.25, 1.25),
            in_domain: |rng| {
                let s = rng.random_range(0.02..0.98);
                v(&[s, 1.0 - s])
            },
        },
        Subject {
            name: "quadratic",
            function: Box::new(SquaredDistance::new(v(&[0.3, -0.4]), 1.5)),
            infimum: 0.0,
            anywhere: |rng| uniform(rng, 2, -2.0, 2.0),
            in_domain: |rng| uniform(rng, 2, -2.0, 2.0),
        },
        Subject {
            name: "point indicator",
            function: Box::new(PointIndicator::new(v(&[0.2, 0.7]))),
            infimum: 0.0,
            anywhere: |rng| uniform(rng, 2, -2.0, 2.0),
            in_domain: |_| v(&[0.2, 0.7]),
        },
    ];
    let cfg = SolverConfig::default();
    let ladder = [0.4, 0.2, 0.1, 0.05];
    let eps = 0.1;
    let mut reports = Vec::new();
    for subject in &subjects {
        let f = subject.function.as_ref();
        let envelope = |e: f64, x: &DVector<f64>| moreau_envelope(f, e, x, &cfg);
        let (mut firm, mut order, mut below, mut lipschitz, mut fd, mut rate) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for _ in 0..probes {
            let x = (subject.anywhere)(rng);
            let y = (subject.anywhere)(rng);
            let (rx, ry) = (envelope(eps, &x)?, envelope(eps, &y)?);
            let dp = &rx.prox_point - &ry.prox_point;
            let dr = (&x - &rx.prox_point) - (&y - &ry.prox_point);
            let slack = (&x - &y).norm_squared() - dp.norm_squared() - dr.norm_squared();
            firm = firm.max(-slack);
            lipschitz = lipschitz.max((&rx.yosida_gradient - &ry.yosida_gradient).norm() - (&x - &y).norm() / eps);

            let values: Vec<f64> = ladder.iter().map(|&e| envelope(e, &x).map(|r| r.envelope_value)).collect::<Result<_>>()?;
            order = order.max(values.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max));

            let field = |z: &DVector<f64>| envelope(eps, z).ok().map(|r| r.envelope_value);
            let numeric = fd_gradient(field, &x, 1e-4)?;
            fd = fd.max((&numeric - &rx.yosida_gradient).norm() / rx.yosida_gradient.norm().max(1e-2));

            let z = (subject.in_domain)(rng);
            let fz = f.evaluate(&z).finite().ok_or(Error::EmptyDomain)?;
            for &e in &ladder {
                let r = envelope(e, &z)?;
                below = below.max(r.envelope_value - fz);
                let ratio = (&z - &r.prox_point).norm_squared() / e;
                rate = rate.max(ratio - 2.0 * (fz - subject.infimum));
            }
        }
        let name = subject.name;
        reports.extend([
            OracleReport::violation(format!("{name} firm nonexpansiveness"), firm, 1e-8),
            OracleReport::violation(format!("{name} envelope monotone in eps"), order, 1e-10),
            OracleReport::violation(format!("{name} envelope below function"), below, 1e-10),
            OracleReport::violation(format!("{name} gradient lipschitz"), lipschitz, 1e-8),
            OracleReport::violation(format!("{name} gradient vs finite differences"), fd, 1e-5),
            OracleReport::violation(format!("{name} prox convergence rate"), rate, 1e-8),
        ]);
    }
    Ok(reports)
}

/// Recovery of the dimer functional from its envelope.
pub fn lossless() -> Result<Vec<OracleReport>> {
    let f = DimerLiebFunction::new(0.5);
    let probes: Vec<DVector<f64>> = [0.1, 0.3, 0.5, 0.7, 0.9].iter().map(|&s| v(&[s, 1.0 - s])).collect();
    let report = verify_lossless(&f, 0.1, &probes, &SolverConfig::default());
    Ok(vec![OracleReport::violation("dimer lossless max deviation", report.max_deviation, 1e-5)])
}

fn lattices() -> Result<[LatticeSpec; 2]> {
    Ok([LatticeSpec::new(2, 1, 0.5, 1.0)?, LatticeSpec::new(3, 2, 0.5, 1.0)?])
}

/// Fenchel equality at prox outputs on 20 seeded quasidensities.
pub fn fenchel(rng: &mut ChaCha8Rng) -> Result<Vec<OracleReport>> {
    let cfg = DualAscentConfig::default();
    let eps = 0.1;
    let mut worst: f64 = 0.0;
    for spec in &lattices()? {
        for _ in 0..10 {
            let rho = uniform(rng, spec.sites, -0.2, 1.2) * (spec.electrons as f64 / spec.sites as f64);
            let point = regularize(spec, eps, &rho, &cfg)?;
            let f = lieb_f(spec, &point.proximal_density, &cfg)?.finite().unwrap_or(f64::INFINITY);
            let e = energy(spec, &point.maximizer)?;
            worst = worst.max((e - f - point.maximizer.dot(&point.proximal_density)).abs());
        }
    }
    Ok(vec![OracleReport::violation("fenchel gap at prox outputs", worst, 1e-6)])
}

/// Prox round trips from ground densities and the simplex bound.
pub fn surjectivity(rng: &mut ChaCha8Rng) -> Result<Vec<OracleReport>> {
    let cfg = DualAscentConfig::default();
    let eps = 0.1;
    let (mut round_trip, mut simplex): (f64, f64) = (0.0, 0.0);
    for spec in &lattices()? {
        for _ in 0..10 {
            let pot = uniform(rng, spec.sites, -1.0, 1.0);
            let rho_gs = ground_state(spec, &pot)?.ensemble_density;
            // the prox optimality condition gives x = ρ_gs(v) − εv
            let point = regularize(spec, eps, &(&rho_gs - eps * &pot), &cfg)?;
            round_trip = round_trip.max((&point.proximal_density - &rho_gs).amax());
            let d = &point.proximal_density;
            let outside = d.iter().map(|&x| (-x).max(x - 2.0)).fold(0.0f64, f64::max);
            simplex = simplex.max(outside).max((d.sum() - spec.electrons as f64).abs());
        }
    }
    Ok(vec![
        OracleReport::violation("prox round trip", round_trip, 1e-6),
        OracleReport::violation("prox density in simplex", simplex, 1e-8),
    ])
}

/// Concavity of `E` in `v` and `λ` and monotonicity of the density map.
pub fn concavity(rng: &mut ChaCha8Rng) -> Result<Vec<OracleReport>> {
    let spec = LatticeSpec::new(3, 2, 0.5, 1.0)?;
    let (mut midpoint, mut monotone): (f64, f64) = (0.0, 0.0);
    for _ in 0..100 {
        let a = uniform(rng, 3, -2.0, 2.0);
        let b = uniform(rng, 3, -2.0, 2.0);
        let (ga, gb) = (ground_state(&spec, &a)?, ground_state(&spec, &b)?);
        let mid = energy(&spec, &(0.5 * (&a + &b)))?;
        midpoint = midpoint.max(0.5 * (ga.energy + gb.energy) - mid);
        monotone = monotone.max((&ga.ensemble_density - &gb.ensemble_density).dot(&(&a - &b)));
    }
    let pot = alternating(3);
    let along: Vec<f64> = (0..5)
        .map(|k| energy(&spec.with_lambda(k as f64 / 4.0)?, &pot))
        .collect::<Result<_>>()?;
    let mut lambda: f64 = 0.0;
    for (lo, hi) in [(0, 2), (1, 3), (2, 4), (0, 4)] {
        lambda = lambda.max(0.5 * (along[lo] + along[hi]) - along[(lo + hi) / 2]);
    }
    Ok(vec![
        OracleReport::violation("energy midpoint concavity in v", midpoint, 1e-10),
        OracleReport::violation("energy midpoint concavity in lambda", lambda, 1e-10),
        OracleReport::violation("superdifferential monotonicity", monotone, 1e-10),
    ])
}

/// Per-run checks of the optimally damped scheme.
pub fn damping_reports(label: &str, result: &ScfResult, eps: f64, reference: f64) -> Vec<OracleReport> {
    let steps = &result.trace.steps;
    let rising = steps.windows(2).filter(|w| w[1].energy >= w[0].energy).count();
    let mut gap: f64 = 0.0;
    let mut slope: f64 = 0.0;
    for pair in steps.windows(2) {
        let (now, next) = (&pair[0], &pair[1]);
        if let Some(m) = now.parabola_minimum {
            let moved = (&next.quasidensity - &now.quasidensity).norm_squared() / (2.0 * eps);
            gap = gap.max((now.energy - m - moved).abs());
        }
        if let Some(s) = now.slope {
            slope = slope.max(s + eps * now.residual * now.residual);
        }
    }
    vec![
        OracleReport::violation(format!("{label} non-descending steps"), rising as f64, 0.0),
        OracleReport::violation(format!("{label} parabola gap identity"), gap, 1e-8),
        OracleReport::violation(format!("{label} descent slope bound"), slope, 1e-8),
        OracleReport::violation(format!("{label} final residual"), result.final_residual, 1e-6),
        OracleReport::new(format!("{label} final energy"), reference, result.final_energy, 1e-6),
    ]
}

/// Optimally damped runs on three chains at two regularizations.
pub fn optimal_damping() -> Result<Vec<OracleReport>> {
    let mut reports = Vec::new();
    for (sites, electrons) in [(2, 1), (3, 2), (4, 2)] {
        let spec = LatticeSpec::new(sites, electrons, 0.5, 1.0)?;
        let v_ext = alternating(sites);
        for eps in [0.1, 0.5] {
            let cfg = ScfConfig {
                eps,
                step_policy: StepPolicy::ParabolaOptimal,
                ..Default::default()
            };
            let result = myksoda(&spec, &v_ext, &cfg)?;
            let reference = regularized_energy(&spec, eps, &v_ext)?;
            reports.extend(damping_reports(&format!("L={sites} N={electrons} eps={eps}"), &result, eps, reference));
        }
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noninteracting_subset_passes() {
        let reports = run_battery(&BatteryConfig {
            subset: BatterySubset::NonInteracting,
            ..Default::default()
        });
        assert!(reports.iter().all(|r| r.pass), "{reports:#?}");
    }

    #[test]
    fn tampered_tolerance_fails() {
        let reports = run_battery(&BatteryConfig {
            subset: BatterySubset::NonInteracting,
            tolerance_override: Some(0.0),
            ..Default::default()
        });
        assert!(reports.iter().any(|r| !r.pass));
    }
}
