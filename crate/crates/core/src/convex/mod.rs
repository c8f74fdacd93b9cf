//! Moreau–Yosida machinery for proper convex lower-semicontinuous functions on
//! a finite-dimensional Euclidean space.
//!
//! Functions are seen only through the [`ConvexFunction`] trait: a value
//! (possibly `+∞`), an optional subgradient, an optional closed-form proximal
//! map and a coarse description of the effective domain. The solvers pick the
//! cheapest applicable route:
//!
//! 1. a closed-form proximal map, when the function provides one;
//! 2. the trivial answer for a single-point domain;
//! 3. one-dimensional bracketing when the domain is a segment;
//! 4. gradient / subgradient descent on the whole space.

mod conjugate;
pub mod functions;
mod line;
mod minnorm;
mod prox;
mod smooth;

use nalgebra::DVector;

pub use conjugate::{skew_concave_conjugate, verify_lossless, LosslessProbe, LosslessReport};
pub use prox::{moreau_envelope, prox, yosida_gradient, EnvelopeFunction};

pub(crate) use minnorm::project_simplex;

/// An extended real number. `+∞` and `−∞` are explicit variants, never
/// floating-point sentinels.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExtReal {
    NegInfinity,
    Finite(f64),
    PosInfinity,
}

impl ExtReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_finite(self) -> bool {
        matches!(self, ExtReal::Finite(_))
    }

    pub fn is_pos_infinite(self) -> bool {
        matches!(self, ExtReal::PosInfinity)
    }

    pub fn is_neg_infinite(self) -> bool {
        matches!(self, ExtReal::NegInfinity)
    }
}

impl std::fmt::Display for ExtReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ExtReal::NegInfinity => write!(f, "-inf"),
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::PosInfinity => write!(f, "+inf"),
        }
    }
}

/// Coarse shape of the effective domain, used to pick an inner solver.
#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    /// No structural information; the domain may be all of the space.
    Whole,
    /// The domain is a single point.
    Point(DVector<f64>),
    /// The domain is contained in the segment `start + s (end − start)`,
    /// `s ∈ [0, 1]`.
    Segment {
        start: DVector<f64>,
        end: DVector<f64>,
    },
}

impl Domain {
    pub fn segment(start: DVector<f64>, end: DVector<f64>) -> Self {
        Domain::Segment { start, end }
    }
}

/// Black-box view of a convex function `f : ℝⁿ → ℝ ∪ {+∞}`.
///
/// Convexity is trusted, never enforced.
pub trait ConvexFunction {
    fn dim(&self) -> usize;

    /// `f(x)`, or `PosInfinity` off the effective domain.
    fn evaluate(&self, x: &DVector<f64>) -> ExtReal;

    /// Some element of `∂f(x)`, when the function can supply one.
    fn subgradient(&self, _x: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }

    /// Upper bound on `‖x‖` over the effective domain (`+∞` if unknown).
    fn domain_radius(&self) -> f64 {
        f64::INFINITY
    }

    fn domain(&self) -> Domain {
        Domain::Whole
    }

    /// `Prox_{εf}(x)` when known analytically.
    fn closed_form_prox(&self, _eps: f64, _x: &DVector<f64>) -> Option<DVector<f64>> {
        None
    }
}

impl<T: ConvexFunction + ?Sized> ConvexFunction for &T {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn evaluate(&self, x: &DVector<f64>) -> ExtReal {
        (**self).evaluate(x)
    }
    fn subgradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        (**self).subgradient(x)
    }
    fn domain_radius(&self) -> f64 {
        (**self).domain_radius()
    }
    fn domain(&self) -> Domain {
        (**self).domain()
    }
    fn closed_form_prox(&self, eps: f64, x: &DVector<f64>) -> Option<DVector<f64>> {
        (**self).closed_form_prox(eps, x)
    }
}

/// Tolerances and budgets for the inner solvers of this module.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Optimality residual at which an inner solve is declared converged.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Values below this are reported as `−∞` by the conjugate.
    pub value_floor: f64,
    /// Values above this are reported as `+∞` where a supremum is taken.
    pub value_ceiling: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 20_000,
            value_floor: -1e12,
            value_ceiling: 1e10,
        }
    }
}

/// Output of a Moreau envelope evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct ProxResult {
    /// `Prox_{εf}(x)`.
    pub prox_point: DVector<f64>,
    /// `ᵋf[x] = f(p) + ‖x − p‖² / 2ε`.
    pub envelope_value: f64,
    /// `∇ᵋf[x] = (x − p) / ε`.
    pub yosida_gradient: DVector<f64>,
    /// Inner-solver optimality measure; `‖p − p*‖ ≤ ε · residual`.
    pub residual: f64,
    pub iterations: usize,
}

pub(crate) fn check_dim(expected: usize, x: &DVector<f64>) -> crate::Result<()> {
    if x.len() != expected {
        return Err(crate::Error::DimensionMismatch {
            expected,
            found: x.len(),
        });
    }
    Ok(())
}

pub(crate) fn check_eps(eps: f64) -> crate::Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(crate::Error::InvalidParameter(format!(
            "regularization parameter must be positive, got {eps}"
        )));
    }
    Ok(())
}
