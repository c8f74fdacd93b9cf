use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{GroundStateResult, LatticeSpec};
use crate::convex::check_dim;
use crate::{Density, Error, Result};

/// Ground state of the `λ = 0` system by orbital filling.
///
/// When the Fermi shell is only partly filled, `ground_densities` lists every
/// filling of the shell and `ensemble_density` occupies each shell
/// spin-orbital equally.
pub fn noninteracting_solve(spec: &LatticeSpec, v: &DVector<f64>) -> Result<GroundStateResult> {
    spec.validate()?;
    check_dim(spec.sites, v)?;
    if spec.lambda != 0.0 {
        return Err(Error::InvalidParameter(format!(
            "orbital filling needs lambda = 0, got {}",
            spec.lambda
        )));
    }
    let l = spec.sites;
    let h = DMatrix::from_fn(l, l, |i, j| {
        if i == j {
            v[i]
        } else if i.abs_diff(j) == 1 {
            -spec.hopping
        } else {
            0.0
        }
    });
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 0)
        .ok_or_else(|| Error::EigensolverFailure("one-body eigensolver did not converge".into()))?;
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    // spin-orbitals: each spatial orbital twice
    let levels: Vec<usize> = order.iter().flat_map(|&k| [k, k]).collect();
    let n = spec.electrons;
    let scale = eig.eigenvalues.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tol = spec.degeneracy_tol * scale;
    let fermi = eig.eigenvalues[levels[n - 1]];
    let in_shell = |k: usize| (eig.eigenvalues[k] - fermi).abs() <= tol;
    let below: Vec<usize> = levels.iter().copied().filter(|&k| !in_shell(k) && eig.eigenvalues[k] < fermi).collect();
    let shell: Vec<usize> = levels.iter().copied().filter(|&k| in_shell(k)).collect();
    let n_occ = n - below.len();

    let orbital_density = |k: usize| eig.eigenvectors.column(k).map(|c| c * c);
    let core: Density = below.iter().fold(DVector::zeros(l), |acc, &k| acc + orbital_density(k));
    let energy = levels[..n].iter().map(|&k| eig.eigenvalues[k]).sum();

    let ground_densities: Vec<Density> = combinations(shell.len(), n_occ)
        .into_iter()
        .map(|chosen| chosen.iter().fold(core.clone(), |acc, &s| acc + orbital_density(shell[s])))
        .collect();
    let fraction = n_occ as f64 / shell.len() as f64;
    let ensemble_density = shell
        .iter()
        .fold(core.clone(), |acc, &k| acc + fraction * orbital_density(k));
    Ok(GroundStateResult {
        energy,
        degeneracy: ground_densities.len(),
        ground_densities,
        ensemble_density,
    })
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn extend(start: usize, n: usize, k: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            current.push(i);
            extend(i + 1, n, k, current, out);
            current.pop();
        }
    }
    extend(0, n, k, &mut current, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::super::ground_state;
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    fn free(sites: usize, electrons: usize) -> LatticeSpec {
        LatticeSpec::new(sites, electrons, 0.5, 1.0).unwrap().with_lambda(0.0).unwrap()
    }

    #[test]
    fn filled_bonding_orbital() {
        let g = noninteracting_solve(&free(2, 2), &v(&[0.0, 0.0])).unwrap();
        assert!((g.energy + 1.0).abs() < 1e-14);
        assert_eq!(g.degeneracy, 1);
        assert!((&g.ensemble_density - v(&[1.0, 1.0])).amax() < 1e-14);
    }

    #[test]
    fn half_filled_spin_shell() {
        let g = noninteracting_solve(&free(2, 1), &v(&[0.0, 0.0])).unwrap();
        assert!((g.energy + 0.5).abs() < 1e-14);
        assert_eq!(g.degeneracy, 2);
        for rho in &g.ground_densities {
            assert!((rho - v(&[0.5, 0.5])).amax() < 1e-14);
        }
    }

    #[test]
    fn agrees_with_many_body_at_zero_coupling() {
        let spec = free(3, 1);
        let pot = v(&[0.0, 0.0, 0.0]);
        let one = noninteracting_solve(&spec, &pot).unwrap();
        let many = ground_state(&spec, &pot).unwrap();
        assert!((one.energy - many.energy).abs() < 1e-12);
        assert!((&one.ensemble_density - v(&[0.25, 0.5, 0.25])).amax() < 1e-14);
        assert!((&one.ensemble_density - &many.ensemble_density).amax() < 1e-12);
    }

    #[test]
    fn rejects_interacting_spec() {
        let spec = LatticeSpec::new(2, 1, 0.5, 1.0).unwrap();
        assert!(matches!(
            noninteracting_solve(&spec, &v(&[0.0, 0.0])),
            Err(Error::InvalidParameter(_))
        ));
    }
}
