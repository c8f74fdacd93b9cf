//! Independent references: closed forms, brute-force searches and finite
//! differences, plus a battery that checks the solvers against them.

pub mod battery;

use nalgebra::DVector;

use crate::convex::{check_dim, ConvexFunction, Domain, ExtReal};
use crate::{Error, Result};

/// `F(ρ₁, 1 − ρ₁) = −2t √(ρ₁(1 − ρ₁))` for one electron on two sites.
pub fn dimer_f_closed_form(hopping: f64, rho1: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&rho1) {
        return Err(Error::DomainError(format!("dimer occupation {rho1} outside [0, 1]")));
    }
    Ok(-2.0 * hopping * (rho1 * (1.0 - rho1)).sqrt())
}

/// The one-electron dimer Lieb functional as a black-box convex function on
/// `ℝ²`, finite on the segment from `(0, 1)` to `(1, 0)`.
#[derive(Clone, Debug)]
pub struct DimerLiebFunction {
    pub hopping: f64,
}

impl DimerLiebFunction {
    pub fn new(hopping: f64) -> Self {
        Self { hopping }
    }

    /// Position along the segment, if `x` lies on it.
    fn coordinate(x: &DVector<f64>) -> Option<f64> {
        const SLACK: f64 = 1e-12;
        let on_line = (x[0] + x[1] - 1.0).abs() <= SLACK;
        let inside = x[0] >= -SLACK && x[0] <= 1.0 + SLACK;
        (on_line && inside).then(|| x[0].clamp(0.0, 1.0))
    }
}

impl ConvexFunction for DimerLiebFunction {
    fn dim(&self) -> usize {
        2
    }

    fn evaluate(&self, x: &DVector<f64>) -> ExtReal {
        match Self::coordinate(x) {
            Some(s) => ExtReal::Finite(-2.0 * self.hopping * (s * (1.0 - s)).sqrt()),
            None => ExtReal::PosInfinity,
        }
    }

    /// `(F′/2, −F′/2)` with `F′` the derivative along the segment; none at
    /// the endpoints, where `F′` is infinite.
    fn subgradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        let s = Self::coordinate(x)?;
        if s <= 0.0 || s >= 1.0 {
            return None;
        }
        let slope = -self.hopping * (1.0 - 2.0 * s) / (s * (1.0 - s)).sqrt();
        Some(DVector::from_vec(vec![0.5 * slope, -0.5 * slope]))
    }

    fn domain_radius(&self) -> f64 {
        1.0
    }

    fn domain(&self) -> Domain {
        Domain::segment(DVector::from_vec(vec![0.0, 1.0]), DVector::from_vec(vec![1.0, 0.0]))
    }
}

/// Brute-force `Prox_{εf}(x)` over a uniform grid of `grid_points` cells
/// along a segment domain, refined once at ten times the resolution around
/// the best node. Single-point domains return the point.
pub fn grid_prox<F: ConvexFunction + ?Sized>(
    f: &F,
    eps: f64,
    x: &DVector<f64>,
    grid_points: usize,
) -> Result<DVector<f64>> {
    check_dim(f.dim(), x)?;
    let (start, end) = match f.domain() {
        Domain::Point(a) => return Ok(a),
        Domain::Segment { start, end } => (start, end),
        Domain::Whole => {
            return Err(Error::Unsupported("grid search needs a segment domain".into()));
        }
    };
    let cells = grid_points.max(1);
    let at = |s: f64| &start + s * (&end - &start);
    let objective = |s: f64| {
        let z = at(s);
        f.evaluate(&z).finite().map(|v| v + (x - &z).norm_squared() / (2.0 * eps))
    };
    let scan = |lo: f64, hi: f64, n: usize| {
        (0..=n)
            .map(|k| lo + (hi - lo) * k as f64 / n as f64)
            .filter_map(|s| objective(s).map(|v| (s, v)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    };
    let (coarse, _) = scan(0.0, 1.0, cells).ok_or(Error::EmptyDomain)?;
    let h = 1.0 / cells as f64;
    let (lo, hi) = ((coarse - h).max(0.0), (coarse + h).min(1.0));
    let fine_cells = (((hi - lo) / h) * 10.0).round().max(1.0) as usize;
    let (fine, _) = scan(lo, hi, fine_cells).ok_or(Error::EmptyDomain)?;
    Ok(at(fine))
}

/// Central differences `(φ(x + h eᵢ) − φ(x − h eᵢ)) / 2h`; `field` returns
/// `None` outside its domain.
pub fn fd_gradient(mut field: impl FnMut(&DVector<f64>) -> Option<f64>, x: &DVector<f64>, step: f64) -> Result<DVector<f64>> {
    if !(step > 0.0) {
        return Err(Error::InvalidParameter(format!("finite-difference step must be positive, got {step}")));
    }
    let mut out = DVector::zeros(x.len());
    for i in 0..x.len() {
        let mut probe = x.clone();
        probe[i] += step;
        let plus = field(&probe);
        probe[i] = x[i] - step;
        let minus = field(&probe);
        let (Some(plus), Some(minus)) = (plus, minus) else {
            return Err(Error::DomainError(format!("finite-difference probe along coordinate {i} left the domain")));
        };
        out[i] = (plus - minus) / (2.0 * step);
    }
    Ok(out)
}

/// One oracle-versus-production comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct OracleReport {
    pub quantity: String,
    pub reference: f64,
    pub computed: f64,
    pub abs_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(quantity: impl Into<String>, reference: f64, computed: f64, tolerance: f64) -> Self {
        let abs_error = (computed - reference).abs();
        Self {
            quantity: quantity.into(),
            reference,
            computed,
            abs_error,
            tolerance,
            // NaN errors fail
            pass: abs_error <= tolerance,
        }
    }

    /// A property check whose worst violation is `violation` (`0` when the
    /// property holds exactly).
    pub fn violation(quantity: impl Into<String>, violation: f64, tolerance: f64) -> Self {
        Self::new(quantity, 0.0, violation.max(0.0), tolerance)
    }

    /// The same comparison judged at a different tolerance.
    pub fn with_tolerance(self, tolerance: f64) -> Self {
        Self::new(self.quantity, self.reference, self.computed, tolerance)
    }

    pub const CSV_HEADER: &'static str = "quantity,reference,computed,abs_error,tolerance,pass";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.quantity,
            csv_number(self.reference),
            csv_number(self.computed),
            csv_number(self.abs_error),
            csv_number(self.tolerance),
            self.pass
        )
    }
}

/// Round-trip decimal formatting with 17 significant digits.
pub fn csv_number(x: f64) -> String {
    format!("{x:.16e}")
}
