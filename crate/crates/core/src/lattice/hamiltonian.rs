use nalgebra::{DMatrix, DVector};

use super::{FockBasis, LatticeSpec};
use crate::convex::check_dim;
use crate::Result;

/// `H = T + λW + V` in the full `N`-electron basis.
pub fn build_hamiltonian(spec: &LatticeSpec, v: &DVector<f64>) -> Result<DMatrix<f64>> {
    spec.validate()?;
    let basis = FockBasis::new(spec)?;
    build_hamiltonian_in(spec, v, &basis)
}

/// `H` restricted to the span of `basis`, which must be closed under hopping
/// for the result to be a block of the full Hamiltonian.
pub fn build_hamiltonian_in(spec: &LatticeSpec, v: &DVector<f64>, basis: &FockBasis) -> Result<DMatrix<f64>> {
    spec.validate()?;
    check_dim(spec.sites, v)?;
    let modes = 2 * spec.sites;
    let dim = basis.dim();
    let mut h = DMatrix::zeros(dim, dim);
    for (col, &state) in basis.states().iter().enumerate() {
        let occupied: Vec<usize> = (0..modes).filter(|&p| state >> p & 1 == 1).collect();
        let mut diagonal = 0.0;
        for (a, &p) in occupied.iter().enumerate() {
            diagonal += v[p / 2];
            for &q in &occupied[a + 1..] {
                diagonal += spec.lambda * spec.kernel(p / 2, q / 2);
            }
        }
        h[(col, col)] = diagonal;

        for &p in &occupied {
            for q in [p.wrapping_sub(2), p + 2] {
                if q >= modes || state >> q & 1 == 1 {
                    continue;
                }
                let target = state ^ (1 << p) ^ (1 << q);
                let Some(row) = basis.index_of(target) else {
                    continue;
                };
                let (lo, hi) = (p.min(q), p.max(q));
                let between = (state >> (lo + 1)) & ((1u64 << (hi - lo - 1)) - 1);
                let sign = if between.count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
                h[(row, col)] -= spec.hopping * sign;
            }
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn spin_up_dimer_block() {
        let spec = LatticeSpec::new(2, 1, 0.5, 1.0).unwrap();
        let basis = FockBasis::sector(&spec, 1, 0).unwrap();
        let h = build_hamiltonian_in(&spec, &v(&[0.0, 0.0]), &basis).unwrap();
        assert_eq!(h, DMatrix::from_row_slice(2, 2, &[0.0, -0.5, -0.5, 0.0]));
    }

    #[test]
    fn single_electron_full_basis_is_two_spin_copies() {
        let spec = LatticeSpec::new(2, 1, 0.5, 1.0).unwrap();
        let h = build_hamiltonian(&spec, &v(&[0.3, -0.2])).unwrap();
        // basis order: up@0, down@0, up@1, down@1
        let expected = DMatrix::from_row_slice(
            4,
            4,
            &[
                0.3, 0.0, -0.5, 0.0, //
                0.0, 0.3, 0.0, -0.5, //
                -0.5, 0.0, -0.2, 0.0, //
                0.0, -0.5, 0.0, -0.2,
            ],
        );
        assert_eq!(h, expected);
    }

    #[test]
    fn two_electron_interaction_diagonal() {
        let spec = LatticeSpec::new(2, 2, 0.5, 1.0).unwrap();
        let basis = FockBasis::new(&spec).unwrap();
        let h = build_hamiltonian(&spec, &v(&[0.0, 0.0])).unwrap();
        for (i, &s) in basis.states().iter().enumerate() {
            let doubly = s == 0b0011 || s == 0b1100;
            assert_eq!(h[(i, i)], if doubly { 1.0 } else { 0.5 }, "state {s:04b}");
        }
        assert_eq!(h, h.transpose());
    }

    #[test]
    fn hop_across_occupied_mode_flips_sign() {
        // up@0 and down@0 occupied; moving up@0 to up@1 passes over down@0
        let spec = LatticeSpec::new(2, 2, 1.0, 0.0).unwrap();
        let basis = FockBasis::new(&spec).unwrap();
        let h = build_hamiltonian(&spec, &v(&[0.0, 0.0])).unwrap();
        let from = basis.index_of(0b0011).unwrap();
        let to = basis.index_of(0b0110).unwrap();
        assert_eq!(h[(to, from)], 1.0);
        let plain_to = basis.index_of(0b1001).unwrap();
        // down@0 to down@1 passes over up@1, which is empty
        assert_eq!(h[(plain_to, from)], -1.0);
    }
}
