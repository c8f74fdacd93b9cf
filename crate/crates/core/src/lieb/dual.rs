//! Maximization of `ψ(v) = E[v] − (ε/2)‖v‖² − ⟨v, ρ⟩`.

use nalgebra::{DMatrix, DVector};

use super::spectraplex::nearest_ensemble_density;
use super::{DualAscentConfig, StepRule};
use crate::lattice::{density_response, DensityResponse, LatticeSpec};
use crate::{Error, Potential, Result};

/// `ψ` and its superdifferential at one potential.
#[derive(Clone, Debug)]
pub(crate) struct Probe {
    pub v: Potential,
    pub value: f64,
    /// Minimal-norm supergradient `ρ_gs − εv − ρ` over ground ensembles.
    pub ascent: DVector<f64>,
    pub residual: f64,
    pub response: DensityResponse,
    /// Whether the ground manifold splits the density at first order, in
    /// which case `ψ` has a kink at `v`.
    pub split: bool,
}

pub(crate) struct DualProblem<'a> {
    pub spec: &'a LatticeSpec,
    pub eps: f64,
    pub rho: &'a DVector<f64>,
    /// Restrict the ascent to mean-zero potentials. Valid when `ε = 0` and
    /// `Σρ = N`, where `ψ(v + c1) = ψ(v)`.
    pub fix_gauge: bool,
}

impl DualProblem<'_> {
    pub fn probe(&self, v: Potential) -> Result<Probe> {
        let response = density_response(self.spec, &v)?;
        let value = response.ground.energy - 0.5 * self.eps * v.norm_squared() - v.dot(self.rho);
        let target = self.eps * &v + self.rho;
        let g = response.ground.degeneracy;
        let split = g > 1
            && response.manifold.iter().any(|m| {
                let mean = m.trace() / g as f64;
                (m - DMatrix::identity(g, g) * mean).amax() > 1e-9
            });
        let nearest = if split {
            nearest_ensemble_density(&response.manifold, &target)
        } else {
            response.ground.ensemble_density.clone()
        };
        let mut ascent = nearest - target;
        if self.fix_gauge {
            ascent.add_scalar_mut(-ascent.mean());
        }
        Ok(Probe {
            residual: ascent.norm(),
            v,
            value,
            ascent,
            response,
            split,
        })
    }
}

/// Bounds beyond which the supremum is declared infinite.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Divergence {
    pub value_ceiling: f64,
    pub radius: f64,
    /// Residual above which a run past `radius` counts as divergent.
    pub residual_floor: f64,
}

#[derive(Debug)]
pub(crate) enum Ascent {
    Converged { best: Probe, iterations: usize },
    Diverged,
    /// `‖v‖` passed the radius while the supergradient was small: the
    /// supremum is approached at infinity and is finite.
    Escaped { best: Probe, iterations: usize },
}

pub(crate) fn maximize(
    problem: &DualProblem<'_>,
    start: Potential,
    cfg: &DualAscentConfig,
    divergence: Option<Divergence>,
) -> Result<Ascent> {
    let eps = problem.eps;
    let mut current = problem.probe(start)?;
    let mut best = current.clone();
    let mut restarts = 0;
    let mut damping = if eps > 0.0 { 0.0 } else { 1e-10 };
    // scale on the first-order step, halved whenever a step loses value
    let mut scale = 1.0;
    let mut k_first_order = 0usize;
    for iteration in 0..cfg.max_iterations {
        if best.residual <= cfg.tolerance {
            return Ok(Ascent::Converged { best, iterations: iteration });
        }
        if let Some(d) = divergence {
            if current.value > d.value_ceiling {
                return Ok(Ascent::Diverged);
            }
            if current.v.norm() > d.radius {
                if current.residual > d.residual_floor {
                    return Ok(Ascent::Diverged);
                }
                return Ok(Ascent::Escaped { best, iterations: iteration });
            }
        }

        let newton = cfg.step_rule == StepRule::Newton && !current.split;
        let next = if newton {
            match newton_step(problem, &current, damping)? {
                Some(next) => next,
                None => {
                    restarts += 1;
                    if restarts > cfg.restart_count {
                        return Err(Error::NonConvergence {
                            iterations: iteration,
                            residual: best.residual,
                        });
                    }
                    damping = (damping * 10.0).max(eps.max(1e-8));
                    best.clone()
                }
            }
        } else {
            k_first_order += 1;
            let base = match (cfg.step_rule, eps > 0.0) {
                (StepRule::Diminishing, true) => 2.0 / (eps * (k_first_order as f64 + 1.0)),
                // the strong-concavity bound ψ* ≤ ψ + r²/2ε makes the Polyak
                // step 1/2ε
                (_, true) => scale / (2.0 * eps),
                (_, false) => 1.0 / (k_first_order as f64 + 1.0),
            };
            let trial = problem.probe(&current.v + base * &current.ascent)?;
            if trial.value < current.value && cfg.step_rule != StepRule::Diminishing {
                scale *= 0.5;
            }
            trial
        };
        if next.value > best.value || (next.value == best.value && next.residual < best.residual) {
            best = next.clone();
        }
        current = next;
    }
    if best.residual <= cfg.tolerance {
        return Ok(Ascent::Converged {
            best,
            iterations: cfg.max_iterations,
        });
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iterations,
        residual: best.residual,
    })
}

/// Damped Newton step on the smooth branch of `ψ` with Armijo backtracking.
/// `None` when no step length gives ascent.
fn newton_step(problem: &DualProblem<'_>, at: &Probe, damping: f64) -> Result<Option<Probe>> {
    let n = at.v.len();
    let curvature = DMatrix::identity(n, n) * (problem.eps + damping) - &at.response.chi;
    let direction = match curvature.cholesky() {
        Some(c) => c.solve(&at.ascent),
        None => at.ascent.clone(),
    };
    let slope = at.ascent.dot(&direction);
    let mut s = 1.0;
    for _ in 0..60 {
        let trial = problem.probe(&at.v + s * &direction)?;
        let sufficient = trial.value >= at.value + 1e-4 * s * slope;
        let roundoff =
            (trial.value - at.value).abs() <= 8.0 * f64::EPSILON * (1.0 + at.value.abs()) && trial.residual < at.residual;
        if sufficient || roundoff {
            return Ok(Some(trial));
        }
        s *= 0.5;
    }
    Ok(None)
}
