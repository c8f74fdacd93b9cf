//! Nearest ground-ensemble density to a target.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::convex::project_simplex;

/// Minimizes `‖m(Γ) − target‖` over density matrices `Γ ⪰ 0`, `tr Γ = 1`,
/// where `m(Γ)_i = tr(Γ M_i)`. Returns the minimizing `m(Γ)`.
///
/// Accelerated projected gradient; projection diagonalizes `Γ` and projects
/// its spectrum onto the probability simplex.
pub(crate) fn nearest_ensemble_density(manifold: &[DMatrix<f64>], target: &DVector<f64>) -> DVector<f64> {
    let g = manifold[0].nrows();
    let density = |gamma: &DMatrix<f64>| DVector::from_iterator(manifold.len(), manifold.iter().map(|m| gamma.dot(m)));
    if g == 1 {
        return DVector::from_iterator(manifold.len(), manifold.iter().map(|m| m[(0, 0)]));
    }
    let lipschitz = manifold.iter().map(|m| m.norm_squared()).sum::<f64>().max(1e-300);
    let step = 1.0 / lipschitz;
    let mut gamma = DMatrix::identity(g, g) / g as f64;
    let mut previous = gamma.clone();
    let mut momentum = gamma.clone();
    let mut t = 1.0f64;
    let mut best = density(&gamma);
    let mut best_gap = (&best - target).norm();
    for _ in 0..2000 {
        let shift = density(&momentum) - target;
        let mut gradient = DMatrix::zeros(g, g);
        for (m, s) in manifold.iter().zip(shift.iter()) {
            gradient += *s * m;
        }
        gamma = project_spectraplex(&momentum - step * gradient);
        let current = density(&gamma);
        let gap = (&current - target).norm();
        if gap < best_gap {
            best_gap = gap;
            best = current;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        momentum = &gamma + ((t - 1.0) / t_next) * (&gamma - &previous);
        if (&gamma - &previous).norm() <= 1e-15 {
            break;
        }
        previous = gamma.clone();
        t = t_next;
    }
    best
}

fn project_spectraplex(matrix: DMatrix<f64>) -> DMatrix<f64> {
    let symmetric = 0.5 * (&matrix + matrix.transpose());
    let eig = SymmetricEigen::new(symmetric);
    let mut weights: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    project_simplex(&mut weights);
    let q = &eig.eigenvectors;
    q * DMatrix::from_diagonal(&DVector::from_vec(weights)) * q.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commuting_manifold_reduces_to_hull() {
        // diagonal M_i: ensemble densities are the segment between (1,0) and (0,1)
        let manifold = vec![
            DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0])),
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0])),
        ];
        let near = nearest_ensemble_density(&manifold, &DVector::from_vec(vec![0.8, 0.6]));
        assert!((near - DVector::from_vec(vec![0.6, 0.4])).norm() < 1e-10);
    }

    #[test]
    fn coherences_reach_beyond_the_eigenbasis_hull() {
        // with an off-diagonal coupling the pure-state densities of the
        // eigenbasis are both (1/2, 1/2), yet a superposition reaches (1, 0)
        let half = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.5, 0.5]);
        let rest = DMatrix::identity(2, 2) - &half;
        let near = nearest_ensemble_density(&[half, rest], &DVector::from_vec(vec![1.0, 0.0]));
        assert!((near - DVector::from_vec(vec![1.0, 0.0])).norm() < 1e-8);
    }
}
