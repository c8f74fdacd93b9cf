//! Spin-½ fermions on an open chain, solved by exact diagonalization.
//!
//! Spin-orbitals are numbered site-major, `p = 2·site + spin` with spin `0`
//! for up and `1` for down; fermionic signs follow that Jordan–Wigner order.

mod basis;
mod hamiltonian;
mod noninteracting;
mod solve;

use nalgebra::DMatrix;

pub use basis::FockBasis;
pub use hamiltonian::{build_hamiltonian, build_hamiltonian_in};
pub use noninteracting::noninteracting_solve;
pub use solve::{density_response, energy, ground_state, superdiff_e, DensityResponse, GroundStateResult};

use crate::{Error, Result};

/// Default cap on the many-body basis dimension.
pub const DEFAULT_MAX_BASIS: usize = 4096;

/// Pair interaction between sites.
#[derive(Clone, Debug, PartialEq)]
pub enum InteractionKernel {
    /// `U / (|i − j| + 1)`.
    SoftCoulomb,
    /// Explicit symmetric `L × L` table; the interaction strength is not
    /// applied on top.
    Custom(DMatrix<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeSpec {
    pub sites: usize,
    pub electrons: usize,
    pub hopping: f64,
    pub interaction_strength: f64,
    pub kernel: InteractionKernel,
    /// Adiabatic coupling `λ ∈ [0, 1]` scaling the interaction.
    pub lambda: f64,
    /// Relative eigenvalue gap below which levels count as degenerate.
    pub degeneracy_tol: f64,
    pub max_basis: usize,
}

impl LatticeSpec {
    /// Soft-Coulomb chain at full coupling.
    pub fn new(sites: usize, electrons: usize, hopping: f64, interaction_strength: f64) -> Result<Self> {
        let spec = Self {
            sites,
            electrons,
            hopping,
            interaction_strength,
            kernel: InteractionKernel::SoftCoulomb,
            lambda: 1.0,
            degeneracy_tol: 1e-10,
            max_basis: DEFAULT_MAX_BASIS,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        let spec = Self {
            lambda,
            ..self.clone()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_kernel(self, table: DMatrix<f64>) -> Result<Self> {
        let spec = Self {
            kernel: InteractionKernel::Custom(table),
            ..self
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_max_basis(self, max_basis: usize) -> Self {
        Self { max_basis, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidSpec(msg));
        if self.sites == 0 {
            return invalid("the chain needs at least one site".into());
        }
        if 2 * self.sites > 64 {
            return invalid(format!("{} sites exceed the 32-site occupation encoding", self.sites));
        }
        if self.electrons == 0 || self.electrons > 2 * self.sites {
            return invalid(format!(
                "electron count {} outside 1..={}",
                self.electrons,
                2 * self.sites
            ));
        }
        if !(self.hopping > 0.0 && self.hopping.is_finite()) {
            return invalid(format!("hopping must be positive, got {}", self.hopping));
        }
        if !(self.interaction_strength >= 0.0 && self.interaction_strength.is_finite()) {
            return invalid(format!(
                "interaction strength must be nonnegative, got {}",
                self.interaction_strength
            ));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return invalid(format!("lambda must lie in [0, 1], got {}", self.lambda));
        }
        if !(self.degeneracy_tol > 0.0) {
            return invalid(format!(
                "degeneracy tolerance must be positive, got {}",
                self.degeneracy_tol
            ));
        }
        if let InteractionKernel::Custom(table) = &self.kernel {
            if table.nrows() != self.sites || table.ncols() != self.sites {
                return invalid(format!(
                    "kernel table is {}x{}, expected {}x{}",
                    table.nrows(),
                    table.ncols(),
                    self.sites,
                    self.sites
                ));
            }
            if table.iter().any(|k| !k.is_finite()) || table != &table.transpose() {
                return invalid("kernel table must be finite and symmetric".into());
            }
        }
        Ok(())
    }

    /// Interaction between one spin-orbital on site `i` and one on site `j`,
    /// before the coupling `λ`.
    pub fn kernel(&self, i: usize, j: usize) -> f64 {
        match &self.kernel {
            InteractionKernel::SoftCoulomb => self.interaction_strength / (i.abs_diff(j) as f64 + 1.0),
            InteractionKernel::Custom(table) => table[(i, j)],
        }
    }

    /// `C(2L, N)`.
    pub fn basis_dim(&self) -> u128 {
        binomial(2 * self.sites, self.electrons)
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}
