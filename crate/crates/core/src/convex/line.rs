//! One-dimensional convex minimization over `s ∈ [0, 1]`.

#[derive(Clone, Copy, Debug)]
pub(crate) struct LineMinimum {
    pub s: f64,
    /// Width of the final bracket; the true minimizer lies within it.
    pub width: f64,
    pub iterations: usize,
}

/// Bisection on the sign of the derivative `φ'(s)`.
///
/// Returns `None` if the derivative is unavailable at an interior probe.
pub(crate) fn bisect_slope(mut slope: impl FnMut(f64) -> Option<f64>) -> Option<LineMinimum> {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let mut iterations = 0;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let d = slope(mid)?;
        if d > 0.0 {
            hi = mid;
        } else if d < 0.0 {
            lo = mid;
        } else {
            lo = mid;
            hi = mid;
            break;
        }
    }
    Some(LineMinimum {
        s: 0.5 * (lo + hi),
        width: hi - lo,
        iterations,
    })
}

const GOLDEN: f64 = 0.618_033_988_749_894_8;

/// Golden-section search after a coarse scan that locates the finite part of
/// the domain. `phi` returns `None` for `+∞`.
///
/// Returns `None` when `phi` is infinite at every scanned point.
pub(crate) fn golden_section(
    mut phi: impl FnMut(f64) -> Option<f64>,
    max_iterations: usize,
) -> Option<LineMinimum> {
    const SCAN: usize = 32;
    let mut best: Option<(usize, f64)> = None;
    for k in 0..=SCAN {
        if let Some(value) = phi(k as f64 / SCAN as f64) {
            if best.is_none_or(|(_, b)| value < b) {
                best = Some((k, value));
            }
        }
    }
    let (k, _) = best?;
    let mut a = (k.saturating_sub(1)) as f64 / SCAN as f64;
    let mut b = ((k + 1).min(SCAN)) as f64 / SCAN as f64;
    let value = |v: Option<f64>| v.unwrap_or(f64::INFINITY);

    let mut c = b - GOLDEN * (b - a);
    let mut d = a + GOLDEN * (b - a);
    let mut fc = value(phi(c));
    let mut fd = value(phi(d));
    let mut iterations = SCAN + 3;
    while iterations < max_iterations && b - a > 1e-15 {
        iterations += 1;
        if fc == fd {
            // values no longer discriminate; the bracket is as good as it gets
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - GOLDEN * (b - a);
            fc = value(phi(c));
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + GOLDEN * (b - a);
            fd = value(phi(d));
        }
    }
    Some(LineMinimum {
        s: 0.5 * (a + b),
        width: b - a,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisection_finds_interior_minimum() {
        let m = bisect_slope(|s| Some(2.0 * (s - 0.3))).unwrap();
        assert!((m.s - 0.3).abs() < 1e-15);
        assert!(m.width < 1e-15);
    }

    #[test]
    fn bisection_clamps_to_endpoint() {
        let m = bisect_slope(|s| Some(s + 1.0)).unwrap();
        assert!(m.s < 1e-15);
    }

    #[test]
    fn golden_handles_partial_domain() {
        // finite only on [0.5, 1], minimum at the left edge of the domain
        let m = golden_section(|s| if s < 0.5 { None } else { Some(s) }, 500).unwrap();
        assert!((m.s - 0.5).abs() < 1e-6, "{m:?}");
        assert!(golden_section(|_| None, 100).is_none());
    }

    #[test]
    fn golden_quadratic() {
        let m = golden_section(|s| Some((s - 0.71).powi(2)), 500).unwrap();
        assert!((m.s - 0.71).abs() < 1e-7);
    }
}
