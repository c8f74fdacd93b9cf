//! Gradient descent with Barzilai–Borwein steps and an Armijo safeguard.

use nalgebra::DVector;

use crate::{Error, Result};

#[derive(Clone, Debug)]
pub(crate) struct SmoothOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Stop and report unboundedness once the value falls below this.
    pub floor: f64,
    pub initial_step: f64,
}

#[derive(Clone, Debug)]
pub(crate) enum SmoothOutcome {
    Converged {
        x: DVector<f64>,
        value: f64,
        grad_norm: f64,
        iterations: usize,
    },
    Unbounded,
    /// The line search failed (typically at a kink) or the budget ran out.
    Stalled {
        x: DVector<f64>,
        grad_norm: f64,
        iterations: usize,
    },
}

/// Evaluation of the objective: `Ok(None)` means the point is outside the
/// domain.
pub(crate) type Evaluation = Result<Option<(f64, DVector<f64>)>>;

/// Minimizes a differentiable convex function.
pub(crate) fn minimize(
    mut objective: impl FnMut(&DVector<f64>) -> Evaluation,
    x0: DVector<f64>,
    opts: &SmoothOptions,
) -> Result<SmoothOutcome> {
    let (mut value, mut grad) = objective(&x0)?.ok_or(Error::EmptyDomain)?;
    let mut x = x0;
    let mut step = opts.initial_step;
    for iteration in 0..opts.max_iterations {
        let grad_norm = grad.norm();
        if grad_norm <= opts.tolerance {
            return Ok(SmoothOutcome::Converged {
                x,
                value,
                grad_norm,
                iterations: iteration,
            });
        }
        if value < opts.floor {
            return Ok(SmoothOutcome::Unbounded);
        }
        let g2 = grad_norm * grad_norm;
        let mut alpha = step;
        let mut accepted = None;
        for _ in 0..80 {
            let trial = &x - alpha * &grad;
            if let Some((v_new, g_new)) = objective(&trial)? {
                let sufficient = v_new <= value - 1e-4 * alpha * g2;
                let roundoff = (v_new - value).abs() <= 8.0 * f64::EPSILON * (1.0 + value.abs())
                    && g_new.norm() < grad_norm;
                if sufficient || roundoff {
                    accepted = Some((trial, v_new, g_new));
                    break;
                }
            }
            alpha *= 0.5;
        }
        let Some((x_new, v_new, g_new)) = accepted else {
            return Ok(SmoothOutcome::Stalled {
                x,
                grad_norm,
                iterations: iteration,
            });
        };
        let s = &x_new - &x;
        let y = &g_new - &grad;
        let sy = s.dot(&y);
        step = if sy > 0.0 {
            (s.norm_squared() / sy).clamp(1e-14, 1e14)
        } else {
            (2.0 * alpha).min(1e14)
        };
        x = x_new;
        value = v_new;
        grad = g_new;
    }
    Ok(SmoothOutcome::Stalled {
        grad_norm: grad.norm(),
        x,
        iterations: opts.max_iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn opts() -> SmoothOptions {
        SmoothOptions {
            tolerance: 1e-10,
            max_iterations: 1000,
            floor: -1e12,
            initial_step: 1.0,
        }
    }

    #[test]
    fn ill_conditioned_quadratic() {
        let scales = [1.0, 50.0];
        let out = minimize(
            |x| {
                let v = 0.5 * (scales[0] * (x[0] - 1.0).powi(2) + scales[1] * (x[1] + 2.0).powi(2));
                let g = DVector::from_vec(vec![scales[0] * (x[0] - 1.0), scales[1] * (x[1] + 2.0)]);
                Ok(Some((v, g)))
            },
            DVector::zeros(2),
            &opts(),
        )
        .unwrap();
        match out {
            SmoothOutcome::Converged { x, .. } => {
                assert!((x[0] - 1.0).abs() < 1e-9 && (x[1] + 2.0).abs() < 1e-9)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn linear_function_is_unbounded() {
        let out = minimize(
            |x| Ok(Some((x[0], DVector::from_vec(vec![1.0])))),
            DVector::zeros(1),
            &opts(),
        )
        .unwrap();
        assert!(matches!(out, SmoothOutcome::Unbounded));
    }
}
