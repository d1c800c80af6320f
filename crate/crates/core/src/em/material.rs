use crate::em::EmError;
use crate::geometry::{DensityGrid, GridSpec};
use crate::scalar::Real;

/// Cladding and core relative permittivities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Materials<T = f64> {
    pub eps_clad: T,
    pub eps_core: T,
}

impl<T: Real> Materials<T> {
    pub fn new(eps_clad: T, eps_core: T) -> Result<Self, EmError> {
        if !(eps_clad >= T::one()) || !(eps_core > eps_clad) || !eps_core.is_finite() {
            return Err(EmError::Config(format!(
                "need eps_core > eps_clad >= 1, got eps_clad = {eps_clad}, eps_core = {eps_core}"
            )));
        }
        Ok(Self { eps_clad, eps_core })
    }

    pub fn from_indices(n_clad: T, n_core: T) -> Result<Self, EmError> {
        Self::new(n_clad * n_clad, n_core * n_core)
    }

    /// `dε/dρ`, constant under linear interpolation.
    pub fn contrast(&self) -> T {
        self.eps_core - self.eps_clad
    }
}

/// Relative permittivity on the simulation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PermittivityGrid<T = f64> {
    pub grid: GridSpec<T>,
    pub eps: Vec<T>,
}

impl<T: Real> PermittivityGrid<T> {
    pub fn uniform(grid: GridSpec<T>, eps: T) -> Self {
        Self { grid, eps: vec![eps; grid.len()] }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.eps[self.grid.index(i, j)]
    }

    /// Column `i` restricted to `rows`.
    pub fn column_slice(&self, i: usize, rows: std::ops::Range<usize>) -> Vec<T> {
        rows.map(|j| self.get(i, j)).collect()
    }

    pub fn max(&self) -> T {
        self.eps.iter().copied().fold(T::one(), T::max)
    }
}

/// `ε = ε_clad + ρ (ε_core − ε_clad)`, cell by cell.
pub fn density_to_eps<T: Real>(rho: &DensityGrid<T>, materials: &Materials<T>) -> PermittivityGrid<T> {
    let c = materials.contrast();
    PermittivityGrid {
        grid: rho.grid,
        eps: rho.values.iter().map(|&r| materials.eps_clad + r * c).collect(),
    }
}
