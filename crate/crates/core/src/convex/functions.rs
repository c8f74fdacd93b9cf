//! Convex functions with closed-form proximal maps, used as test oracles and
//! building blocks.

use nalgebra::DVector;

use super::{ConvexFunction, Domain, ExtReal};

/// `f ≡ 0` on `ℝⁿ`.
#[derive(Clone, Debug)]
pub struct ZeroFunction {
    dim: usize,
}

impl ZeroFunction {
    pub fn new(dim: usize) -> Self {
        Self { dim }
    }
}

impl ConvexFunction for ZeroFunction {
    fn dim(&self) -> usize {
        self.dim
    }
    fn evaluate(&self, _x: &DVector<f64>) -> ExtReal {
        ExtReal::Finite(0.0)
    }
    fn subgradient(&self, _x: &DVector<f64>) -> Option<DVector<f64>> {
        Some(DVector::zeros(self.dim))
    }
    fn closed_form_prox(&self, _eps: f64, x: &DVector<f64>) -> Option<DVector<f64>> {
        Some(x.clone())
    }
}

/// `f(z) = (c/2) ‖z − a‖²` with curvature `c ≥ 0`.
#[derive(Clone, Debug)]
pub struct SquaredDistance {
    pub center: DVector<f64>,
    pub curvature: f64,
}

impl SquaredDistance {
    pub fn new(center: DVector<f64>, curvature: f64) -> Self {
        assert!(curvature >= 0.0, "curvature must be nonnegative");
        Self { center, curvature }
    }
}

impl ConvexFunction for SquaredDistance {
    fn dim(&self) -> usize {
        self.center.len()
    }
    fn evaluate(&self, x: &DVector<f64>) -> ExtReal {
        ExtReal::Finite(0.5 * self.curvature * (x - &self.center).norm_squared())
    }
    fn subgradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        Some(self.curvature * (x - &self.center))
    }
    fn closed_form_prox(&self, eps: f64, x: &DVector<f64>) -> Option<DVector<f64>> {
        let c = eps * self.curvature;
        Some((x + c * &self.center) / (1.0 + c))
    }
}

/// Indicator of the single point `{a}`: `0` at `a`, `+∞` elsewhere.
#[derive(Clone, Debug)]
pub struct PointIndicator {
    pub point: DVector<f64>,
}

impl PointIndicator {
    pub fn new(point: DVector<f64>) -> Self {
        Self { point }
    }
}

impl ConvexFunction for PointIndicator {
    fn dim(&self) -> usize {
        self.point.len()
    }
    fn evaluate(&self, x: &DVector<f64>) -> ExtReal {
        if x == &self.point {
            ExtReal::Finite(0.0)
        } else {
            ExtReal::PosInfinity
        }
    }
    fn domain_radius(&self) -> f64 {
        self.point.norm()
    }
    fn domain(&self) -> Domain {
        Domain::Point(self.point.clone())
    }
    fn closed_form_prox(&self, _eps: f64, _x: &DVector<f64>) -> Option<DVector<f64>> {
        Some(self.point.clone())
    }
}
