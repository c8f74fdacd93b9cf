//! The Lieb functional `F^λ[ρ] = sup_v { E^λ[v] − ⟨v, ρ⟩ }` and its Moreau
//! envelope `ᵋF^λ[ρ] = max_v { E^λ[v] − (ε/2)‖v‖² − ⟨v, ρ⟩ }`.
//!
//! Both are computed by ascent on the dual objective. For `ε > 0` the
//! objective is `ε`-strongly concave, so its maximizer `v*` is unique and
//! yields the proximal density `ρ_ε = ρ + εv*`, the proximal potential
//! `v_ε = v*` and the gradient `∇ᵋF[ρ] = −v*`.

mod dual;
mod spectraplex;

use nalgebra::DVector;

use crate::convex::{check_dim, check_eps, ExtReal};
use crate::lattice::{energy, LatticeSpec};
use crate::{Density, Error, Potential, Result};

use dual::{maximize, Ascent, Divergence, DualProblem};

/// Direction rule for the dual ascent.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepRule {
    /// Damped Newton steps using the exact density response, with
    /// first-order steps wherever the ground manifold splits the density.
    Newton,
    /// Minimal-norm supergradient steps of length `1/2ε`, halved whenever a
    /// step loses value.
    Polyak,
    /// Minimal-norm supergradient steps of length `2/(ε(k+1))`.
    Diminishing,
}

impl std::str::FromStr for StepRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "newton" => Ok(StepRule::Newton),
            "polyak" => Ok(StepRule::Polyak),
            "diminishing" => Ok(StepRule::Diminishing),
            other => Err(Error::InvalidParameter(format!(
                "unknown step rule '{other}' (expected newton, polyak or diminishing)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualAscentConfig {
    /// Target norm of the minimal-norm supergradient.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub step_rule: StepRule,
    /// Newton restarts from the best iterate, with heavier damping, before
    /// giving up.
    pub restart_count: usize,
}

impl Default for DualAscentConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 200_000,
            step_rule: StepRule::Newton,
            restart_count: 3,
        }
    }
}

impl DualAscentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "dual tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidParameter("dual max_iterations must be at least 1".into()));
        }
        Ok(())
    }
}

/// `ᵋF` at a quasidensity together with its proximal pair.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularizedPoint {
    pub quasidensity: Density,
    /// `ρ_ε = ρ + εv*`.
    pub proximal_density: Density,
    /// `v_ε = v* = −∇ᵋF[ρ]`.
    pub proximal_potential: Potential,
    pub envelope_value: f64,
    pub maximizer: Potential,
    /// Norm of the minimal-norm supergradient at `v*`; strong concavity gives
    /// `‖v* − v_exact‖ ≤ residual / ε`.
    pub residual: f64,
    pub iterations: usize,
}

const VALUE_CEILING: f64 = 1e10;
const POTENTIAL_RADIUS: f64 = 1e6;
/// Supergradient norm below which an unbounded potential is read as an
/// approach to the boundary of `dom F` rather than divergence.
const BOUNDARY_RESIDUAL: f64 = 1e-4;

/// `F^λ[ρ]`, `+∞` off the domain.
///
/// `E[v + c1] = E[v] + cN` makes the supremum infinite whenever `Σρ ≠ N`;
/// a charge mismatch within the dual tolerance is treated as zero and the
/// ascent runs over mean-zero potentials.
pub fn lieb_f(spec: &LatticeSpec, rho: &Density, cfg: &DualAscentConfig) -> Result<ExtReal> {
    spec.validate()?;
    cfg.validate()?;
    check_dim(spec.sites, rho)?;
    let mismatch = (spec.electrons as f64 - rho.sum()).abs() / (spec.sites as f64).sqrt();
    if mismatch > cfg.tolerance {
        return Ok(ExtReal::PosInfinity);
    }
    let problem = DualProblem {
        spec,
        eps: 0.0,
        rho,
        fix_gauge: true,
    };
    let divergence = Divergence {
        value_ceiling: VALUE_CEILING,
        radius: POTENTIAL_RADIUS,
        residual_floor: BOUNDARY_RESIDUAL,
    };
    match maximize(&problem, DVector::zeros(spec.sites), cfg, Some(divergence))? {
        Ascent::Converged { best, .. } | Ascent::Escaped { best, .. } => Ok(ExtReal::Finite(best.value)),
        Ascent::Diverged => Ok(ExtReal::PosInfinity),
    }
}

/// `ᵋF^λ[ρ]` with its maximizer, starting the ascent from `v = 0`.
pub fn regularize(spec: &LatticeSpec, eps: f64, rho: &Density, cfg: &DualAscentConfig) -> Result<RegularizedPoint> {
    regularize_from(spec, eps, rho, cfg, None)
}

/// [`regularize`] with the ascent started at `warm` when given.
pub fn regularize_from(
    spec: &LatticeSpec,
    eps: f64,
    rho: &Density,
    cfg: &DualAscentConfig,
    warm: Option<&Potential>,
) -> Result<RegularizedPoint> {
    spec.validate()?;
    cfg.validate()?;
    check_eps(eps)?;
    check_dim(spec.sites, rho)?;
    let start = match warm {
        Some(w) => {
            check_dim(spec.sites, w)?;
            w.clone()
        }
        None => DVector::zeros(spec.sites),
    };
    let problem = DualProblem {
        spec,
        eps,
        rho,
        fix_gauge: false,
    };
    let (best, iterations) = match maximize(&problem, start, cfg, None)? {
        Ascent::Converged { best, iterations } | Ascent::Escaped { best, iterations } => (best, iterations),
        Ascent::Diverged => unreachable!("no divergence bounds were given"),
    };
    Ok(RegularizedPoint {
        quasidensity: rho.clone(),
        proximal_density: rho + eps * &best.v,
        proximal_potential: best.v.clone(),
        envelope_value: best.value,
        maximizer: best.v,
        residual: best.residual,
        iterations,
    })
}

/// `ᵋE^λ[v] = E^λ[v] − (ε/2)‖v‖²`; `ε = 0` gives `E^λ[v]`.
pub fn regularized_energy(spec: &LatticeSpec, eps: f64, v: &Potential) -> Result<f64> {
    if !(eps >= 0.0 && eps.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "regularization parameter must be nonnegative, got {eps}"
        )));
    }
    Ok(energy(spec, v)? - 0.5 * eps * v.norm_squared())
}

/// Regularized functionals of the interacting (`λ = 1`) and reference
/// (`λ = 0`) systems at one quasidensity.
#[derive(Clone, Debug, PartialEq)]
pub struct HxcPoint {
    pub interacting: RegularizedPoint,
    pub reference: RegularizedPoint,
}

impl HxcPoint {
    /// `∇ᵋE_Hxc[ρ] = ∇ᵋF¹[ρ] − ∇ᵋF⁰[ρ] = v*⁰ − v*¹`.
    pub fn gradient(&self) -> DVector<f64> {
        &self.reference.maximizer - &self.interacting.maximizer
    }

    /// `ᵋE_Hxc[ρ] = ᵋF¹[ρ] − ᵋF⁰[ρ]`.
    pub fn energy(&self) -> f64 {
        self.interacting.envelope_value - self.reference.envelope_value
    }
}

/// Solves both regularizations concurrently, warm-starting from
/// `(interacting, reference)` potentials when given.
pub fn hxc_point(
    spec: &LatticeSpec,
    eps: f64,
    rho: &Density,
    cfg: &DualAscentConfig,
    warm: Option<(&Potential, &Potential)>,
) -> Result<HxcPoint> {
    let interacting_spec = spec.with_lambda(1.0)?;
    let reference_spec = spec.with_lambda(0.0)?;
    let (interacting, reference) = std::thread::scope(|scope| {
        let handle = scope.spawn(|| regularize_from(&reference_spec, eps, rho, cfg, warm.map(|w| w.1)));
        let interacting = regularize_from(&interacting_spec, eps, rho, cfg, warm.map(|w| w.0));
        (interacting, handle.join().expect("reference solve panicked"))
    });
    Ok(HxcPoint {
        interacting: interacting?,
        reference: reference?,
    })
}

/// `∇ᵋE_Hxc[ρ]`.
pub fn hxc_gradient(spec: &LatticeSpec, eps: f64, rho: &Density, cfg: &DualAscentConfig) -> Result<DVector<f64>> {
    hxc_point(spec, eps, rho, cfg, None).map(|p| p.gradient())
}

/// `ᵋE_Hxc[ρ]`.
pub fn hxc_energy(spec: &LatticeSpec, eps: f64, rho: &Density, cfg: &DualAscentConfig) -> Result<f64> {
    hxc_point(spec, eps, rho, cfg, None).map(|p| p.energy())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn dimer() -> LatticeSpec {
        LatticeSpec::new(2, 1, 0.5, 1.0).unwrap()
    }

    fn closed_form(rho: &DVector<f64>) -> f64 {
        -2.0 * 0.5 * (rho[0] * rho[1]).sqrt()
    }

    #[test]
    fn lieb_functional_of_dimer() {
        let cfg = DualAscentConfig::default();
        for rho in [v(&[0.5, 0.5]), v(&[0.9, 0.1]), v(&[0.25, 0.75])] {
            let f = lieb_f(&dimer(), &rho, &cfg).unwrap().finite().unwrap();
            assert!((f - closed_form(&rho)).abs() < 1e-8, "{rho}: {f}");
        }
    }

    #[test]
    fn lieb_functional_is_infinite_off_the_simplex() {
        let cfg = DualAscentConfig::default();
        assert_eq!(lieb_f(&dimer(), &v(&[1.2, -0.2]), &cfg).unwrap(), ExtReal::PosInfinity);
        assert_eq!(lieb_f(&dimer(), &v(&[0.7, 0.7]), &cfg).unwrap(), ExtReal::PosInfinity);
    }

    #[test]
    fn lieb_functional_tolerates_rounding_in_the_charge() {
        let rho = v(&[0.7 + 3e-10, 0.3]);
        let f = lieb_f(&dimer(), &rho, &Default::default()).unwrap().finite().unwrap();
        assert!((f - closed_form(&v(&[0.7, 0.3]))).abs() < 1e-8);
    }

    #[test]
    fn symmetric_point_is_stationary() {
        let r = regularize(&dimer(), 0.1, &v(&[0.5, 0.5]), &Default::default()).unwrap();
        assert!((r.envelope_value + 0.5).abs() < 1e-12);
        assert!(r.maximizer.amax() < 1e-9);
        assert_eq!(r.proximal_density, &r.quasidensity + 0.1 * &r.maximizer);
    }

    #[test]
    fn constant_mode_absorbs_charge_mismatch() {
        // E[v + c1] = E[v] + cN, so the constant part of v* is (N − Σρ)/(εL)
        let eps = 0.2;
        let rho = v(&[0.8, 0.6]);
        let r = regularize(&dimer(), eps, &rho, &Default::default()).unwrap();
        let constant = r.maximizer.mean();
        assert!((constant - (1.0 - 1.4) / (eps * 2.0)).abs() < 1e-9, "{constant}");
        assert!((r.proximal_density.sum() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn polyak_and_newton_agree() {
        let rho = v(&[0.7, 0.3]);
        let newton = regularize(&dimer(), 0.5, &rho, &Default::default()).unwrap();
        let cfg = DualAscentConfig {
            step_rule: StepRule::Polyak,
            tolerance: 1e-7,
            ..Default::default()
        };
        let polyak = regularize(&dimer(), 0.5, &rho, &cfg).unwrap();
        assert!((newton.envelope_value - polyak.envelope_value).abs() < 1e-9);
        assert!((&newton.maximizer - &polyak.maximizer).amax() < 1e-6);
    }

    #[test]
    fn regularized_energy_identity() {
        let e = regularized_energy(&dimer(), 0.1, &v(&[1.0, -1.0])).unwrap();
        assert!((e - (-(5f64.sqrt()) / 2.0 - 0.1)).abs() < 1e-12);
        let plain = regularized_energy(&dimer(), 0.0, &v(&[1.0, -1.0])).unwrap();
        assert_eq!(plain, energy(&dimer(), &v(&[1.0, -1.0])).unwrap());
        assert!(regularized_energy(&dimer(), -0.1, &v(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn regularize_rejects_zero_eps() {
        assert!(matches!(
            regularize(&dimer(), 0.0, &v(&[0.5, 0.5]), &Default::default()),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn hxc_vanishes_without_interaction() {
        let spec = LatticeSpec::new(3, 2, 0.5, 0.0).unwrap();
        let cfg = DualAscentConfig::default();
        let g = hxc_gradient(&spec, 0.1, &v(&[0.5, 0.9, 0.6]), &cfg).unwrap();
        assert!(g.amax() <= 2.0 * cfg.tolerance, "{g}");
    }

    #[test]
    fn hxc_gradient_matches_central_differences() {
        let spec = dimer();
        let cfg = DualAscentConfig::default();
        let eps = 0.1;
        let rho = v(&[0.5, 0.5]);
        let g = hxc_gradient(&spec, eps, &rho, &cfg).unwrap();
        let h = 1e-4;
        for i in 0..2 {
            let mut plus = rho.clone();
            plus[i] += h;
            let mut minus = rho.clone();
            minus[i] -= h;
            let fd = (hxc_energy(&spec, eps, &plus, &cfg).unwrap() - hxc_energy(&spec, eps, &minus, &cfg).unwrap())
                / (2.0 * h);
            let scale = g.norm().max(1e-2);
            assert!((fd - g[i]).abs() / scale <= 1e-4, "component {i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn hxc_gradient_respects_site_reversal() {
        let spec = LatticeSpec::new(3, 2, 0.5, 1.0).unwrap();
        let g = hxc_gradient(&spec, 0.1, &v(&[0.6, 0.8, 0.6]), &Default::default()).unwrap();
        assert!((g[0] - g[2]).abs() < 1e-8, "{g}");
    }
}
