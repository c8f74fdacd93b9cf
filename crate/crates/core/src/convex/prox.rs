use nalgebra::DVector;

use super::line::{bisect_slope, golden_section};
use super::minnorm::min_norm_in_hull;
use super::smooth::{minimize, SmoothOptions, SmoothOutcome};
use super::{check_dim, check_eps, ConvexFunction, Domain, ExtReal, ProxResult, SolverConfig};
use crate::{Error, Result};

/// Evaluates the Moreau envelope `ᵋf[x] = min_z f(z) + ‖x − z‖²/2ε` together
/// with its minimizer and the Yosida gradient.
pub fn moreau_envelope<F: ConvexFunction + ?Sized>(
    f: &F,
    eps: f64,
    x: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<ProxResult> {
    check_eps(eps)?;
    check_dim(f.dim(), x)?;

    let (point, residual, iterations) = if let Some(p) = f.closed_form_prox(eps, x) {
        (p, 0.0, 0)
    } else {
        match f.domain() {
            Domain::Point(a) => (a, 0.0, 0),
            Domain::Segment { start, end } => segment_prox(f, eps, x, &start, &end, cfg)?,
            Domain::Whole => whole_space_prox(f, eps, x, cfg)?,
        }
    };
    let value = f.evaluate(&point).finite().ok_or(Error::EmptyDomain)?;
    if residual > cfg.tolerance {
        return Err(Error::NonConvergence {
            iterations,
            residual,
        });
    }
    let displacement = x - &point;
    Ok(ProxResult {
        envelope_value: value + displacement.norm_squared() / (2.0 * eps),
        yosida_gradient: displacement / eps,
        prox_point: point,
        residual,
        iterations,
    })
}

/// `Prox_{εf}(x)`.
pub fn prox<F: ConvexFunction + ?Sized>(
    f: &F,
    eps: f64,
    x: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<DVector<f64>> {
    moreau_envelope(f, eps, x, cfg).map(|r| r.prox_point)
}

/// `∇ᵋf[x] = ε⁻¹ (x − Prox_{εf} x)`.
pub fn yosida_gradient<F: ConvexFunction + ?Sized>(
    f: &F,
    eps: f64,
    x: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<DVector<f64>> {
    moreau_envelope(f, eps, x, cfg).map(|r| r.yosida_gradient)
}

fn segment_prox<F: ConvexFunction + ?Sized>(
    f: &F,
    eps: f64,
    x: &DVector<f64>,
    start: &DVector<f64>,
    end: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<(DVector<f64>, f64, usize)> {
    let direction = end - start;
    let length = direction.norm();
    if length == 0.0 {
        return Ok((start.clone(), 0.0, 0));
    }
    let at = |s: f64| start + s * &direction;

    let bisected = bisect_slope(|s| {
        let z = at(s);
        f.evaluate(&z).finite()?;
        let g = f.subgradient(&z)?;
        Some(g.dot(&direction) + (&z - x).dot(&direction) / eps)
    });
    let line = match bisected {
        Some(line) => line,
        None => golden_section(
            |s| {
                let z = at(s);
                f.evaluate(&z)
                    .finite()
                    .map(|v| v + (x - &z).norm_squared() / (2.0 * eps))
            },
            cfg.max_iterations,
        )
        .ok_or(Error::EmptyDomain)?,
    };
    // the bracket bounds the distance to the minimizer; express it in the
    // residual units used elsewhere (‖z − z*‖ ≤ ε · residual)
    Ok((at(line.s), line.width * length / eps, line.iterations))
}

/// Descent on the `1/ε`-strongly convex objective `z ↦ f(z) + ‖x − z‖²/2ε`.
///
/// Smooth functions are handled by gradient steps with a line search; when
/// that stalls the solver continues with subgradient steps of length
/// `2ε/(k+1)` and certifies optimality through the minimal-norm element of
/// the subgradients gathered near the best iterate.
fn whole_space_prox<F: ConvexFunction + ?Sized>(
    f: &F,
    eps: f64,
    x: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<(DVector<f64>, f64, usize)> {
    let start = if f.evaluate(x).is_finite() {
        x.clone()
    } else {
        let origin = DVector::zeros(x.len());
        if !f.evaluate(&origin).is_finite() {
            return Err(Error::EmptyDomain);
        }
        origin
    };
    if f.subgradient(&start).is_none() {
        return Err(Error::Unsupported(
            "no closed-form prox and no subgradient on an unstructured domain".into(),
        ));
    }
    let objective_at = |z: &DVector<f64>| -> Option<(f64, DVector<f64>)> {
        let v = f.evaluate(z).finite()?;
        let g = f.subgradient(z)?;
        let shift = z - x;
        Some((v + shift.norm_squared() / (2.0 * eps), g + shift / eps))
    };

    // smooth steps crawl on kinks without stalling, so they get a fraction
    // of the budget
    let opts = SmoothOptions {
        tolerance: cfg.tolerance,
        max_iterations: (cfg.max_iterations / 10).max(100),
        floor: f64::NEG_INFINITY,
        initial_step: eps,
    };
    match minimize(|z| Ok(objective_at(z)), start, &opts)? {
        SmoothOutcome::Converged {
            x: z,
            grad_norm,
            iterations,
            ..
        } => Ok((z, grad_norm, iterations)),
        SmoothOutcome::Unbounded => unreachable!("strongly convex objective"),
        SmoothOutcome::Stalled {
            x: z, iterations, ..
        } => subgradient_phase(objective_at, z, eps, cfg, iterations),
    }
}

fn subgradient_phase(
    objective_at: impl Fn(&DVector<f64>) -> Option<(f64, DVector<f64>)>,
    start: DVector<f64>,
    eps: f64,
    cfg: &SolverConfig,
    used: usize,
) -> Result<(DVector<f64>, f64, usize)> {
    const MEMORY: usize = 32;
    const CHECK_EVERY: usize = 200;
    let (mut best_value, mut g) = objective_at(&start).ok_or(Error::EmptyDomain)?;
    let mut best = start.clone();
    let mut z = start.clone();
    let mut recent: Vec<(DVector<f64>, DVector<f64>)> = vec![(start, g.clone())];
    let mut residual = g.norm();
    let budget = cfg.max_iterations.saturating_sub(used).max(1);
    for k in 0..budget {
        let step = 2.0 * eps / (k as f64 + 1.0);
        let trial = &z - step * &g;
        let Some((value, grad)) = objective_at(&trial) else {
            // left the domain; pull back towards the best point
            z = 0.5 * (&z + &best);
            continue;
        };
        if recent.len() == MEMORY {
            recent.remove(0);
        }
        recent.push((trial.clone(), grad.clone()));
        if value < best_value {
            best_value = value;
            best = trial.clone();
        }
        z = trial;
        g = grad;
        if (k + 1) % CHECK_EVERY == 0 || k + 1 == budget {
            residual = bundle_certificate(&best, &recent, eps);
            if residual <= cfg.tolerance {
                return Ok((best, residual, used + k + 1));
            }
        }
    }
    Err(Error::NonConvergence {
        iterations: used + budget,
        residual,
    })
}

/// Optimality certificate from subgradients `s_k` collected at points `p_k`
/// with `‖p_k − center‖ ≤ δ` and `‖s_k‖ ≤ S`. With `r = ‖Σ w_k s_k‖` for the
/// minimal-norm convex combination, strong monotonicity (modulus `1/ε`) gives
/// `(u − δ)² ≤ ε (r u + δ S)` for `u = ‖center − z*‖`. The returned value is
/// the resulting bound on `u` divided by `ε`, minimized over nested
/// neighbourhoods of `center`.
fn bundle_certificate(
    center: &DVector<f64>,
    bundle: &[(DVector<f64>, DVector<f64>)],
    eps: f64,
) -> f64 {
    let mut by_distance: Vec<(f64, &DVector<f64>)> = bundle
        .iter()
        .map(|(p, s)| ((p - center).norm(), s))
        .collect();
    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = f64::INFINITY;
    let mut size = 1;
    while size <= by_distance.len() {
        let included = &by_distance[..size];
        let delta = included[size - 1].0;
        let largest = included.iter().map(|(_, s)| s.norm()).fold(0.0, f64::max);
        let subgradients: Vec<DVector<f64>> = included.iter().map(|(_, s)| (*s).clone()).collect();
        let r = min_norm_in_hull(&subgradients).1.norm();
        let b = 2.0 * delta + eps * r;
        let c = delta * delta - eps * delta * largest;
        let u = 0.5 * (b + (b * b - 4.0 * c).max(0.0).sqrt());
        best = best.min(u.max(delta) / eps);
        size *= 2;
    }
    best
}

/// The Moreau envelope `ᵋf` viewed as a convex function in its own right:
/// finite everywhere, differentiable, gradient `∇ᵋf`.
pub struct EnvelopeFunction<'a, F: ConvexFunction + ?Sized> {
    pub inner: &'a F,
    pub eps: f64,
    pub cfg: SolverConfig,
}

impl<'a, F: ConvexFunction + ?Sized> EnvelopeFunction<'a, F> {
    pub fn new(inner: &'a F, eps: f64, cfg: SolverConfig) -> Self {
        Self { inner, eps, cfg }
    }
}

impl<F: ConvexFunction + ?Sized> ConvexFunction for EnvelopeFunction<'_, F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn evaluate(&self, x: &DVector<f64>) -> ExtReal {
        match moreau_envelope(self.inner, self.eps, x, &self.cfg) {
            Ok(r) => ExtReal::Finite(r.envelope_value),
            Err(_) => ExtReal::PosInfinity,
        }
    }

    fn subgradient(&self, x: &DVector<f64>) -> Option<DVector<f64>> {
        moreau_envelope(self.inner, self.eps, x, &self.cfg)
            .ok()
            .map(|r| r.yosida_gradient)
    }
}
