use nalgebra::DVector;

use super::line::{bisect_slope, golden_section};
use super::prox::{moreau_envelope, EnvelopeFunction};
use super::smooth::{minimize, SmoothOptions, SmoothOutcome};
use super::{check_dim, check_eps, ConvexFunction, Domain, ExtReal, SolverConfig};
use crate::{Error, Result};

/// Result of minimizing `x ↦ f(x) + ⟨y, x⟩`.
#[derive(Clone, Debug)]
pub(crate) struct TiltedMinimum {
    pub value: ExtReal,
    pub argmin: Option<DVector<f64>>,
}

/// Skew concave conjugate `f^∧[y] = inf_x { f(x) + ⟨y, x⟩ }`.
///
/// Returns `NegInfinity` when the tilted objective drops below
/// `cfg.value_floor · (1 + ‖y‖²)`.
pub fn skew_concave_conjugate<F: ConvexFunction + ?Sized>(
    f: &F,
    y: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<ExtReal> {
    tilted_minimum(f, y, cfg).map(|t| t.value)
}

pub(crate) fn tilted_minimum<F: ConvexFunction + ?Sized>(
    f: &F,
    y: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<TiltedMinimum> {
    check_dim(f.dim(), y)?;
    let finite = |x: DVector<f64>| -> Result<TiltedMinimum> {
        let value = f.evaluate(&x).finite().ok_or(Error::EmptyDomain)? + y.dot(&x);
        Ok(TiltedMinimum {
            value: ExtReal::Finite(value),
            argmin: Some(x),
        })
    };
    match f.domain() {
        Domain::Point(a) => finite(a),
        Domain::Segment { start, end } => {
            let direction = &end - &start;
            let at = |s: f64| &start + s * &direction;
            let line = bisect_slope(|s| {
                let z = at(s);
                f.evaluate(&z).finite()?;
                Some((f.subgradient(&z)? + y).dot(&direction))
            })
            .or_else(|| {
                golden_section(
                    |s| {
                        let z = at(s);
                        f.evaluate(&z).finite().map(|v| v + y.dot(&z))
                    },
                    cfg.max_iterations,
                )
            })
            .ok_or(Error::EmptyDomain)?;
            finite(at(line.s))
        }
        Domain::Whole => {
            if f.closed_form_prox(1.0, y).is_some() {
                proximal_point(f, y, cfg)
            } else {
                descent(f, y, cfg)
            }
        }
    }
}

/// `f^∧[y]` is at most `f(x₀) + ⟨y, x₀⟩` and finite values of order `‖y‖²`
/// are legitimate, so the unboundedness threshold scales with the tilt.
fn tilted_floor(cfg: &SolverConfig, y: &DVector<f64>) -> f64 {
    cfg.value_floor * (1.0 + y.norm_squared())
}

/// Proximal-point iterations `x ← Prox_{μf}(x − μy)` with growing `μ`.
fn proximal_point<F: ConvexFunction + ?Sized>(
    f: &F,
    y: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<TiltedMinimum> {
    let prox_of = |mu: f64, x: &DVector<f64>| {
        f.closed_form_prox(mu, x)
            .ok_or_else(|| Error::Unsupported("closed-form prox is not available for every step".into()))
    };
    let mut mu = 1.0;
    let mut x = prox_of(mu, &DVector::zeros(y.len()))?;
    let mut residual = f64::INFINITY;
    for _ in 0..cfg.max_iterations {
        let next = prox_of(mu, &(&x - mu * y))?;
        let value = f.evaluate(&next).finite().ok_or(Error::EmptyDomain)? + y.dot(&next);
        residual = (&x - &next).norm() / mu;
        x = next;
        if value < tilted_floor(cfg, y) {
            return Ok(TiltedMinimum {
                value: ExtReal::NegInfinity,
                argmin: None,
            });
        }
        if residual <= cfg.tolerance * (1.0 + y.norm()) {
            return Ok(TiltedMinimum {
                value: ExtReal::Finite(value),
                argmin: Some(x),
            });
        }
        mu = (2.0 * mu).min(1e12);
    }
    Err(Error::NonConvergence {
        iterations: cfg.max_iterations,
        residual,
    })
}

fn descent<F: ConvexFunction + ?Sized>(
    f: &F,
    y: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<TiltedMinimum> {
    let origin = DVector::zeros(y.len());
    if f.subgradient(&origin).is_none() && f.evaluate(&origin).is_finite() {
        return Err(Error::Unsupported(
            "conjugate on an unstructured domain needs subgradients or a closed-form prox".into(),
        ));
    }
    // the tilt sets the gradient scale
    let opts = SmoothOptions {
        tolerance: cfg.tolerance * (1.0 + y.norm()),
        max_iterations: cfg.max_iterations,
        floor: tilted_floor(cfg, y),
        initial_step: 1.0,
    };
    let outcome = minimize(
        |x| {
            let Some(v) = f.evaluate(x).finite() else {
                return Ok(None);
            };
            Ok(f.subgradient(x).map(|g| (v + y.dot(x), g + y)))
        },
        origin,
        &opts,
    )?;
    match outcome {
        SmoothOutcome::Converged { x, value, .. } => Ok(TiltedMinimum {
            value: ExtReal::Finite(value),
            argmin: Some(x),
        }),
        SmoothOutcome::Unbounded => Ok(TiltedMinimum {
            value: ExtReal::NegInfinity,
            argmin: None,
        }),
        SmoothOutcome::Stalled {
            grad_norm,
            iterations,
            ..
        } => Err(Error::NonConvergence {
            iterations,
            residual: grad_norm,
        }),
    }
}

/// Outcome of recovering `f` at one probe point.
#[derive(Clone, Debug)]
pub struct LosslessProbe {
    pub point: DVector<f64>,
    pub original: ExtReal,
    pub recovered: Option<ExtReal>,
    /// `|f − recovered|`; `0` when both are `+∞`, `+∞` on any mismatch or
    /// solver failure.
    pub deviation: f64,
    pub failure: Option<String>,
}

#[derive(Clone, Debug)]
pub struct LosslessReport {
    pub probes: Vec<LosslessProbe>,
    pub max_deviation: f64,
}

impl LosslessReport {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_deviation <= tolerance
    }
}

/// Checks `f = ((ᵋf)^∧ + (ε/2)‖·‖²)^∨` at every probe, computing each piece
/// numerically: envelopes by [`moreau_envelope`], the concave conjugate of the
/// envelope by descent, and the outer supremum by ascent.
pub fn verify_lossless<F: ConvexFunction + ?Sized>(
    f: &F,
    eps: f64,
    probes: &[DVector<f64>],
    cfg: &SolverConfig,
) -> LosslessReport {
    let probes: Vec<LosslessProbe> = probes
        .iter()
        .map(|x| {
            let original = f.evaluate(x);
            match recover(f, eps, x, cfg) {
                Ok(recovered) => {
                    let deviation = match (original, recovered) {
                        (ExtReal::Finite(a), ExtReal::Finite(b)) => (a - b).abs(),
                        (a, b) if a == b => 0.0,
                        _ => f64::INFINITY,
                    };
                    LosslessProbe {
                        point: x.clone(),
                        original,
                        recovered: Some(recovered),
                        deviation,
                        failure: None,
                    }
                }
                Err(e) => LosslessProbe {
                    point: x.clone(),
                    original,
                    recovered: None,
                    deviation: f64::INFINITY,
                    failure: Some(e.to_string()),
                },
            }
        })
        .collect();
    let max_deviation = probes.iter().map(|p| p.deviation).fold(0.0, f64::max);
    LosslessReport {
        probes,
        max_deviation,
    }
}

fn recover<F: ConvexFunction + ?Sized>(
    f: &F,
    eps: f64,
    x: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<ExtReal> {
    check_eps(eps)?;
    check_dim(f.dim(), x)?;
    // fail early with the envelope's own error if it cannot be evaluated
    moreau_envelope(f, eps, x, cfg)?;

    let inner_cfg = SolverConfig {
        tolerance: cfg.tolerance * 1e-2,
        ..cfg.clone()
    };
    let envelope = EnvelopeFunction::new(f, eps, inner_cfg.clone());
    // maximize h(y) = (ᵋf)^∧[y] + (ε/2)‖y‖² − ⟨y, x⟩ by minimizing −h; the
    // supergradient of (ᵋf)^∧ at y is the minimizer of the tilted envelope
    let opts = SmoothOptions {
        tolerance: cfg.tolerance * 10.0,
        max_iterations: cfg.max_iterations,
        floor: -cfg.value_ceiling,
        initial_step: 1.0,
    };
    let outcome = minimize(
        |y| {
            let tilted = tilted_minimum(&envelope, y, &inner_cfg)?;
            let (ExtReal::Finite(a), Some(z)) = (tilted.value, tilted.argmin) else {
                return Ok(None);
            };
            let h = a + 0.5 * eps * y.norm_squared() - y.dot(x);
            let grad = z + eps * y - x;
            Ok(Some((-h, -grad)))
        },
        DVector::zeros(x.len()),
        &opts,
    )?;
    match outcome {
        SmoothOutcome::Converged { value, .. } => Ok(ExtReal::Finite(-value)),
        SmoothOutcome::Unbounded => Ok(ExtReal::PosInfinity),
        SmoothOutcome::Stalled {
            grad_norm,
            iterations,
            ..
        } => Err(Error::NonConvergence {
            iterations,
            residual: grad_norm,
        }),
    }
}
