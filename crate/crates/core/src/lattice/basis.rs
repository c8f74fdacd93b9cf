use super::{binomial, LatticeSpec};
use crate::{Error, Result};

/// Occupation bitstrings over `2L` spin-orbitals, in ascending numeric order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FockBasis {
    sites: usize,
    states: Vec<u64>,
}

impl FockBasis {
    /// All states with exactly `spec.electrons` set bits.
    pub fn new(spec: &LatticeSpec) -> Result<Self> {
        let dim = spec.basis_dim();
        if dim > spec.max_basis as u128 {
            return Err(Error::BasisTooLarge {
                dim: usize::try_from(dim).unwrap_or(usize::MAX),
                cap: spec.max_basis,
            });
        }
        Ok(Self {
            sites: spec.sites,
            states: with_popcount(2 * spec.sites, spec.electrons).collect(),
        })
    }

    /// States with the given numbers of up and down electrons.
    pub fn sector(spec: &LatticeSpec, n_up: usize, n_down: usize) -> Result<Self> {
        if n_up + n_down != spec.electrons {
            return Err(Error::InvalidParameter(format!(
                "sector ({n_up}, {n_down}) does not hold {} electrons",
                spec.electrons
            )));
        }
        let full = Self::new(spec)?;
        let up_mask = (0..spec.sites).fold(0u64, |m, i| m | 1 << (2 * i));
        Ok(Self {
            sites: spec.sites,
            states: full
                .states
                .into_iter()
                .filter(|s| (s & up_mask).count_ones() as usize == n_up)
                .collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn index_of(&self, state: u64) -> Option<usize> {
        self.states.binary_search(&state).ok()
    }

    /// Number of electrons on `site` in `state` (0, 1 or 2).
    pub fn site_occupation(state: u64, site: usize) -> u32 {
        ((state >> (2 * site)) & 0b11).count_ones()
    }
}

/// Ascending enumeration of `modes`-bit words with `k` set bits (Gosper's
/// successor).
fn with_popcount(modes: usize, k: usize) -> impl Iterator<Item = u64> {
    let limit: u128 = 1u128 << modes;
    let first = if k == 0 { 0 } else { (1u128 << k) - 1 };
    let count = binomial(modes, k);
    std::iter::successors(Some(first), move |&x| {
        if x == 0 {
            return None;
        }
        let c = x & x.wrapping_neg();
        let r = x + c;
        let next = (((r ^ x) >> 2) / c) | r;
        (next < limit).then_some(next)
    })
    .take(count as usize)
    .map(|x| x as u64)
}
