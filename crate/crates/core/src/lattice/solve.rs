use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{build_hamiltonian_in, FockBasis, LatticeSpec};
use crate::{Density, Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct GroundStateResult {
    /// `E^λ[v]`.
    pub energy: f64,
    pub degeneracy: usize,
    /// One density per orthonormal ground eigenvector.
    pub ground_densities: Vec<Density>,
    /// Equal-weight average of `ground_densities`.
    pub ensemble_density: Density,
}

/// Ground-state data needed for second-order steps on `v ↦ E[v]`.
#[derive(Clone, Debug)]
pub struct DensityResponse {
    pub ground: GroundStateResult,
    /// Per site `i`, the `g × g` matrix `⟨a|n_i|b⟩` over an orthonormal basis
    /// of the ground manifold. Densities of ground ensembles are
    /// `ρ_i = tr(Γ M_i)` for `Γ ⪰ 0`, `tr Γ = 1`.
    pub manifold: Vec<DMatrix<f64>>,
    /// Static response of the ensemble density,
    /// `χ_ij = −(2/g) Σ_{a ∈ G, n ∉ G} ⟨a|n_i|n⟩⟨n|n_j|a⟩ / (E_n − E_0)`;
    /// symmetric negative semidefinite.
    pub chi: DMatrix<f64>,
}

struct Spectrum {
    values: DVector<f64>,
    vectors: DMatrix<f64>,
    /// Ascending order of eigenvalue indices.
    order: Vec<usize>,
    ground: usize,
    /// `occupations[(state, site)]`.
    occupations: DMatrix<f64>,
}

fn spectrum(spec: &LatticeSpec, v: &DVector<f64>) -> Result<Spectrum> {
    let basis = FockBasis::new(spec)?;
    let h = build_hamiltonian_in(spec, v, &basis)?;
    if h.iter().any(|x| !x.is_finite()) {
        return Err(Error::EigensolverFailure("Hamiltonian has non-finite entries".into()));
    }
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 0)
        .ok_or_else(|| Error::EigensolverFailure("symmetric eigensolver did not converge".into()))?;
    let values = eig.eigenvalues;
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let scale = values.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let e0 = values[order[0]];
    let ground = order
        .iter()
        .take_while(|&&k| values[k] - e0 <= spec.degeneracy_tol * scale)
        .count();
    let occupations = DMatrix::from_fn(basis.dim(), spec.sites, |s, i| {
        FockBasis::site_occupation(basis.states()[s], i) as f64
    });
    Ok(Spectrum {
        values,
        vectors: eig.eigenvectors,
        order,
        ground,
        occupations,
    })
}

impl Spectrum {
    fn ground_result(&self) -> GroundStateResult {
        let g = self.ground;
        let ground_densities: Vec<Density> = self.order[..g]
            .iter()
            .map(|&k| {
                let weights = self.vectors.column(k).map(|c| c * c);
                self.occupations.tr_mul(&weights)
            })
            .collect();
        let ensemble_density = ground_densities.iter().sum::<Density>() / g as f64;
        GroundStateResult {
            energy: self.values[self.order[0]],
            degeneracy: g,
            ground_densities,
            ensemble_density,
        }
    }
}

/// Lowest eigenvalue of `H`, its degenerate eigenvectors' densities and their
/// average.
pub fn ground_state(spec: &LatticeSpec, v: &DVector<f64>) -> Result<GroundStateResult> {
    spec.validate()?;
    Ok(spectrum(spec, v)?.ground_result())
}

/// `E^λ[v]`.
pub fn energy(spec: &LatticeSpec, v: &DVector<f64>) -> Result<f64> {
    ground_state(spec, v).map(|g| g.energy)
}

/// Ground densities and the ensemble density at `v`; each is a supergradient
/// of the concave map `v ↦ E[v]`.
pub fn superdiff_e(spec: &LatticeSpec, v: &DVector<f64>) -> Result<Vec<Density>> {
    let ground = ground_state(spec, v)?;
    let mut out: Vec<Density> = Vec::with_capacity(ground.degeneracy + 1);
    for rho in ground.ground_densities.into_iter().chain([ground.ensemble_density]) {
        if out.iter().all(|seen| (seen - &rho).amax() > 1e-12) {
            out.push(rho);
        }
    }
    Ok(out)
}

/// Ground-manifold density matrices and linear response at `v`.
pub fn density_response(spec: &LatticeSpec, v: &DVector<f64>) -> Result<DensityResponse> {
    spec.validate()?;
    let sp = spectrum(spec, v)?;
    let g = sp.ground;
    let dim = sp.values.len();
    let sorted = DMatrix::from_fn(dim, dim, |r, c| sp.vectors[(r, sp.order[c])]);
    let ground_vectors = sorted.columns(0, g);
    let e0 = sp.values[sp.order[0]];

    // couplings[i] = ⟨n|n_i|a⟩ for every eigenvector n and ground vector a
    let couplings: Vec<DMatrix<f64>> = (0..spec.sites)
        .map(|i| {
            let mut weighted = ground_vectors.clone_owned();
            for (s, mut row) in weighted.row_iter_mut().enumerate() {
                row *= sp.occupations[(s, i)];
            }
            sorted.tr_mul(&weighted)
        })
        .collect();
    let manifold = couplings.iter().map(|c| c.rows(0, g).clone_owned()).collect();
    let mut chi = DMatrix::zeros(spec.sites, spec.sites);
    for n in g..dim {
        let gap = sp.values[sp.order[n]] - e0;
        for i in 0..spec.sites {
            for j in i..spec.sites {
                let overlap: f64 = (0..g).map(|a| couplings[i][(n, a)] * couplings[j][(n, a)]).sum();
                chi[(i, j)] -= 2.0 * overlap / (g as f64 * gap);
            }
        }
    }
    chi.fill_lower_triangle_with_upper_triangle();
    Ok(DensityResponse {
        ground: sp.ground_result(),
        manifold,
        chi,
    })
}
