//! Regularized Kohn–Sham iterations.
//!
//! Both schemes minimize `G(ρ) = ᵋF¹[ρ] + ⟨v_ext, ρ⟩` over quasidensities.
//! Each iteration builds the effective potential
//! `v_eff = v_ext + ∇ᵋF¹[ρ] − ∇ᵋF⁰[ρ]`, fills orbitals in `v_eff` to get
//! `ρ̃` and proposes `ρ′ = ρ̃ − εv_eff`. Cocoercivity of `∇ᵋF⁰` makes
//! `Δρ = ρ′ − ρ` a descent direction with
//! `⟨∇G(ρ), Δρ⟩ ≤ −ε‖∇G(ρ)‖²`.

use nalgebra::DVector;

use crate::convex::check_dim;
use crate::lattice::{noninteracting_solve, LatticeSpec};
use crate::lieb::{hxc_point, regularize_from, DualAscentConfig};
use crate::{Density, Error, Potential, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepPolicy {
    /// `t = 1`: the plain fixed-point iteration.
    Full,
    /// Largest `t ∈ {1, ½, ¼, …}` at which the slope of `G` along `Δρ` is
    /// still nonpositive.
    DampedFeasible,
    /// Vertex of the upper parabola through the proximal point; unclamped.
    ParabolaOptimal,
}

impl std::str::FromStr for StepPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(StepPolicy::Full),
            "damped_feasible" => Ok(StepPolicy::DampedFeasible),
            "parabola_optimal" => Ok(StepPolicy::ParabolaOptimal),
            other => Err(Error::InvalidParameter(format!(
                "unknown step policy '{other}' (expected full, damped_feasible or parabola_optimal)"
            ))),
        }
    }
}

impl std::fmt::Display for StepPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StepPolicy::Full => "full",
            StepPolicy::DampedFeasible => "damped_feasible",
            StepPolicy::ParabolaOptimal => "parabola_optimal",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScfConfig {
    pub eps: f64,
    pub step_policy: StepPolicy,
    /// Threshold on `‖∇G(ρ)‖ = ‖v_ext − v*¹‖`.
    pub residual_tol: f64,
    pub max_outer: usize,
    pub dual: DualAscentConfig,
}

impl Default for ScfConfig {
    fn default() -> Self {
        Self {
            eps: 0.1,
            step_policy: StepPolicy::ParabolaOptimal,
            residual_tol: 1e-6,
            max_outer: 500,
            dual: DualAscentConfig::default(),
        }
    }
}

impl ScfConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidParameter(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.residual_tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "residual_tol must be positive, got {}",
                self.residual_tol
            )));
        }
        self.dual.validate()
    }
}

/// One outer iteration. Step data are absent on the terminal row.
#[derive(Clone, Debug, PartialEq)]
pub struct ScfStep {
    pub quasidensity: Density,
    pub effective_potential: Potential,
    /// `e_i = ᵋF¹[ρ_i] + ⟨v_ext, ρ_i⟩`.
    pub energy: f64,
    /// `‖∇G(ρ_i)‖`.
    pub residual: f64,
    pub step: Option<f64>,
    pub direction: Option<DVector<f64>>,
    /// `⟨∇G(ρ_i), Δρ_i⟩`.
    pub slope: Option<f64>,
    /// Minimum `m_i` of the upper parabola along the search line
    /// (parabola-optimal steps only).
    pub parabola_minimum: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct ScfTrace {
    pub steps: Vec<ScfStep>,
}

impl ScfTrace {
    pub fn energies(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.energy).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScfResult {
    /// `ρ_final + εv_ext`, the proximal density at a stationary point.
    pub physical_density: Density,
    pub final_quasidensity: Density,
    /// Last energy estimate, approximating `ᵋE¹[v_ext]`.
    pub final_energy: f64,
    /// `final_energy + (ε/2)‖v_ext‖²`, approximating `E¹[v_ext]`.
    pub ground_energy: f64,
    pub final_residual: f64,
    pub converged: bool,
    pub trace: ScfTrace,
}

/// Plain iteration `ρ_{i+1} = ρ̃(v_eff,i+1) − εv_eff,i+1`, started at `rho0`
/// or at the damped scheme's initial guess. May oscillate; that is reported
/// through `converged`, not as an error.
pub fn myks_scf(
    spec: &LatticeSpec,
    v_ext: &Potential,
    cfg: &ScfConfig,
    rho0: Option<&Density>,
) -> Result<ScfResult> {
    let cfg = ScfConfig {
        step_policy: StepPolicy::Full,
        ..cfg.clone()
    };
    let start = match rho0 {
        Some(rho) => {
            check_dim(spec.sites, rho)?;
            rho.clone()
        }
        None => initial_quasidensity(spec, v_ext, cfg.eps)?,
    };
    iterate(spec, v_ext, &cfg, start)
}

/// Damped iteration from `ρ₀ = ρ̃(v_ext) − εv_ext` with the configured step
/// policy.
pub fn myksoda(spec: &LatticeSpec, v_ext: &Potential, cfg: &ScfConfig) -> Result<ScfResult> {
    let start = initial_quasidensity(spec, v_ext, cfg.eps)?;
    iterate(spec, v_ext, cfg, start)
}

fn initial_quasidensity(spec: &LatticeSpec, v_ext: &Potential, eps: f64) -> Result<Density> {
    check_dim(spec.sites, v_ext)?;
    let free = noninteracting_solve(&spec.with_lambda(0.0)?, v_ext)?;
    Ok(free.ensemble_density - eps * v_ext)
}

fn iterate(spec: &LatticeSpec, v_ext: &Potential, cfg: &ScfConfig, start: Density) -> Result<ScfResult> {
    cfg.validate()?;
    spec.validate()?;
    check_dim(spec.sites, v_ext)?;
    let eps = cfg.eps;
    let free_spec = spec.with_lambda(0.0)?;
    let interacting_spec = spec.with_lambda(1.0)?;
    let mut rho = start;
    let mut warm: Option<(Potential, Potential)> = None;
    let mut trace = ScfTrace::default();
    let mut converged = false;
    let mut last = None;

    for i in 0..=cfg.max_outer {
        let point = hxc_point(spec, eps, &rho, &cfg.dual, warm.as_ref().map(|(a, b)| (a, b)))?;
        let v_star = point.interacting.maximizer.clone();
        let gradient = v_ext - &v_star;
        let residual = gradient.norm();
        let energy = point.interacting.envelope_value + v_ext.dot(&rho);
        let v_eff = v_ext + point.gradient();
        warm = Some((v_star.clone(), point.reference.maximizer.clone()));
        let mut row = ScfStep {
            quasidensity: rho.clone(),
            effective_potential: v_eff.clone(),
            energy,
            residual,
            step: None,
            direction: None,
            slope: None,
            parabola_minimum: None,
        };
        last = Some((energy, residual));
        if residual <= cfg.residual_tol {
            converged = true;
            trace.steps.push(row);
            break;
        }
        if i == cfg.max_outer {
            trace.steps.push(row);
            break;
        }

        let free = noninteracting_solve(&free_spec, &v_eff)?;
        let delta = free.ensemble_density - eps * &v_eff - &rho;
        let slope = gradient.dot(&delta);
        let (t, minimum) = match cfg.step_policy {
            StepPolicy::Full => (1.0, None),
            StepPolicy::DampedFeasible => {
                let t = backtrack_feasible(|t| {
                    let trial = &rho + t * &delta;
                    let r = regularize_from(&interacting_spec, eps, &trial, &cfg.dual, Some(&v_star))?;
                    Ok((v_ext - r.maximizer).dot(&delta))
                })?;
                (t, None)
            }
            StepPolicy::ParabolaOptimal => {
                let prox = &point.interacting.proximal_density;
                let t = optimal_step(&rho, &delta, prox, eps, v_ext)?;
                let next = &rho + t * &delta;
                // F[p_i] from the envelope identity ᵋF[ρ] = F[p] + ‖ρ − p‖²/2ε
                let f_at_prox = point.interacting.envelope_value - (&rho - prox).norm_squared() / (2.0 * eps);
                let vertex = prox - eps * v_ext;
                let m = f_at_prox + v_ext.dot(prox) - 0.5 * eps * v_ext.norm_squared()
                    + (&next - vertex).norm_squared() / (2.0 * eps);
                (t, Some(m))
            }
        };
        row.step = Some(t);
        row.slope = Some(slope);
        row.parabola_minimum = minimum;
        row.direction = Some(delta.clone());
        trace.steps.push(row);
        rho += t * delta;
    }

    let (final_energy, final_residual) = last.expect("at least one iteration runs");
    Ok(ScfResult {
        physical_density: &rho + eps * v_ext,
        final_quasidensity: rho,
        final_energy,
        ground_energy: final_energy + 0.5 * eps * v_ext.norm_squared(),
        final_residual,
        converged,
        trace,
    })
}

/// Vertex of `t ↦ ‖ρ_i + tΔρ − p_*‖²` with `p_* = p_i − εv_ext`. The new
/// point satisfies `⟨ρ_{i+1} − p_*, ρ_{i+1} − ρ_i⟩ = 0`.
pub fn optimal_step(
    rho: &Density,
    delta: &DVector<f64>,
    prox: &Density,
    eps: f64,
    v_ext: &Potential,
) -> Result<f64> {
    let length = delta.norm_squared();
    if length == 0.0 {
        return Err(Error::ZeroDirection);
    }
    let vertex = prox - eps * v_ext;
    Ok(-(rho - vertex).dot(delta) / length)
}

/// Largest dyadic `t ≤ 1` with `⟨∇G(ρ_i + tΔρ), Δρ⟩ ≤ 0`.
pub fn feasible_step(
    rho: &Density,
    delta: &DVector<f64>,
    spec: &LatticeSpec,
    eps: f64,
    v_ext: &Potential,
    cfg: &DualAscentConfig,
) -> Result<f64> {
    let interacting = spec.with_lambda(1.0)?;
    check_dim(spec.sites, rho)?;
    check_dim(spec.sites, delta)?;
    check_dim(spec.sites, v_ext)?;
    let mut warm: Option<Potential> = None;
    backtrack_feasible(|t| {
        let r = regularize_from(&interacting, eps, &(rho + t * delta), cfg, warm.as_ref())?;
        let slope = (v_ext - &r.maximizer).dot(delta);
        warm = Some(r.maximizer);
        Ok(slope)
    })
}

/// First `t ∈ {1, ½, ¼, …}` with `slope(t) ≤ 0`, within 60 halvings.
pub fn backtrack_feasible(mut slope: impl FnMut(f64) -> Result<f64>) -> Result<f64> {
    const HALVINGS: usize = 60;
    let mut t = 1.0;
    for _ in 0..=HALVINGS {
        if slope(t)? <= 0.0 {
            return Ok(t);
        }
        t *= 0.5;
    }
    Err(Error::StalledLineSearch { halvings: HALVINGS })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn vertex_step_cases() {
        let rho = v(&[0.2, 0.8]);
        let delta = v(&[1.0, -1.0]);
        // ρ_i already at the vertex
        let t = optimal_step(&rho, &delta, &(&rho + 0.1 * v(&[1.0, 2.0])), 0.1, &v(&[1.0, 2.0])).unwrap();
        assert!(t.abs() < 1e-15);
        // direction pointing at the vertex
        let prox = v(&[0.5, 0.5]);
        let t = optimal_step(&rho, &(0.5 * &delta), &prox, 0.1, &v(&[0.0, 0.0])).unwrap();
        assert!((t - 0.6).abs() < 1e-14);
        assert_eq!(
            optimal_step(&rho, &v(&[0.0, 0.0]), &prox, 0.1, &v(&[0.0, 0.0])),
            Err(Error::ZeroDirection)
        );
    }

    #[test]
    fn backtracking_stops_at_first_nonpositive_slope() {
        let t = backtrack_feasible(|t| Ok(t - 0.3)).unwrap();
        assert_eq!(t, 0.25);
        assert_eq!(backtrack_feasible(|_| Ok(0.0)).unwrap(), 1.0);
        assert_eq!(
            backtrack_feasible(|_| Ok(1.0)),
            Err(Error::StalledLineSearch { halvings: 60 })
        );
    }

    #[test]
    fn noninteracting_run_is_immediate() {
        let spec = LatticeSpec::new(3, 2, 0.5, 0.0).unwrap();
        let v_ext = v(&[0.4, -0.3, 0.1]);
        let cfg = ScfConfig::default();
        let r = myksoda(&spec, &v_ext, &cfg).unwrap();
        assert!(r.converged);
        assert!(r.trace.steps.len() <= 2);
        let free = noninteracting_solve(&spec.with_lambda(0.0).unwrap(), &v_ext).unwrap();
        assert!((&r.physical_density - free.ensemble_density).amax() < 1e-6);
    }

    #[test]
    fn dimer_parabola_run_matches_regularized_energy() {
        let spec = LatticeSpec::new(2, 1, 0.5, 1.0).unwrap();
        let v_ext = v(&[1.0, -1.0]);
        let cfg = ScfConfig::default();
        let r = myksoda(&spec, &v_ext, &cfg).unwrap();
        assert!(r.converged, "{:?}", r.trace.energies());
        let exact = crate::lieb::regularized_energy(&spec, cfg.eps, &v_ext).unwrap();
        assert!((r.final_energy - exact).abs() < 1e-6, "{} vs {exact}", r.final_energy);
        let energies = r.trace.energies();
        assert!(energies.windows(2).all(|w| w[1] < w[0]), "{energies:?}");
    }

    #[test]
    fn damped_run_descends() {
        let spec = LatticeSpec::new(3, 2, 0.5, 1.0).unwrap();
        let cfg = ScfConfig {
            step_policy: StepPolicy::DampedFeasible,
            max_outer: 50,
            ..Default::default()
        };
        let r = myksoda(&spec, &v(&[1.0, -1.0, 1.0]), &cfg).unwrap();
        let energies = r.trace.energies();
        assert!(energies.windows(2).all(|w| w[1] < w[0]), "{energies:?}");
    }

    #[test]
    fn constant_potential_gives_symmetric_density() {
        let spec = LatticeSpec::new(3, 2, 0.5, 1.0).unwrap();
        let r = myks_scf(&spec, &v(&[0.3, 0.3, 0.3]), &ScfConfig::default(), None).unwrap();
        // every iterate inherits the site-reversal symmetry, converged or not
        let d = &r.physical_density;
        assert!((d[0] - d[2]).abs() < 1e-6, "{d}");
    }
}
