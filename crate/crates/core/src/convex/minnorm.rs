use nalgebra::DVector;

/// Euclidean projection onto the probability simplex (sort-based).
pub(crate) fn project_simplex(w: &mut [f64]) {
    let mut sorted: Vec<f64> = w.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (k, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let candidate = (cumulative - 1.0) / (k as f64 + 1.0);
        if u - candidate > 0.0 {
            theta = candidate;
        }
    }
    for wi in w.iter_mut() {
        *wi = (*wi - theta).max(0.0);
    }
}

/// Minimal-norm element of `conv{points}`, found by accelerated projected
/// gradient over the convex weights. Returns `(weights, element)`.
pub(crate) fn min_norm_in_hull(points: &[DVector<f64>]) -> (Vec<f64>, DVector<f64>) {
    assert!(!points.is_empty(), "convex hull of an empty set");
    let m = points.len();
    let dim = points[0].len();
    if m == 1 {
        return (vec![1.0], points[0].clone());
    }
    let combine = |w: &[f64]| {
        let mut out = DVector::zeros(dim);
        for (wk, p) in w.iter().zip(points) {
            out.axpy(*wk, p, 1.0);
        }
        out
    };
    let lipschitz: f64 = points.iter().map(|p| p.norm_squared()).sum::<f64>().max(1e-300);
    let step = 1.0 / lipschitz;

    let mut w = vec![1.0 / m as f64; m];
    let mut y = w.clone();
    let mut momentum = 1.0_f64;
    let mut best = combine(&w);
    for _ in 0..2000 {
        let ay = combine(&y);
        let mut next: Vec<f64> = (0..m).map(|k| y[k] - step * points[k].dot(&ay)).collect();
        project_simplex(&mut next);
        let momentum_next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
        let beta = (momentum - 1.0) / momentum_next;
        let change: f64 = next.iter().zip(&w).map(|(a, b)| (a - b).abs()).sum();
        y = next.iter().zip(&w).map(|(a, b)| a + beta * (a - b)).collect();
        w = next;
        momentum = momentum_next;
        let current = combine(&w);
        if current.norm() < best.norm() {
            best = current;
        }
        if change < 1e-15 {
            break;
        }
    }
    let current = combine(&w);
    if current.norm() <= best.norm() {
        (w, current)
    } else {
        (w, best)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection_sums_to_one() {
        let mut w = vec![0.9, 0.8, -0.3];
        project_simplex(&mut w);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(w.iter().all(|&x| x >= 0.0));
        assert!((w[0] - 0.55).abs() < 1e-15 && (w[1] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn hull_of_opposite_points_contains_origin() {
        let pts = vec![DVector::from_vec(vec![1.0, 1.0]), DVector::from_vec(vec![-1.0, -1.0])];
        let (w, v) = min_norm_in_hull(&pts);
        assert!(v.norm() < 1e-12);
        assert!((w[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn hull_min_norm_on_edge() {
        let pts = vec![DVector::from_vec(vec![1.0, 2.0]), DVector::from_vec(vec![1.0, -1.0])];
        let (_, v) = min_norm_in_hull(&pts);
        assert!((v[0] - 1.0).abs() < 1e-9 && v[1].abs() < 1e-9);
    }
}
