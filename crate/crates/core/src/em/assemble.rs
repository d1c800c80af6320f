//! Stretched-coordinate Helmholtz operator on the 5-point stencil.
//!
//! The operator is scaled by `dx²` and by `s_x s_y` so that it is complex
//! symmetric:
//!
//! ```text
//! (A E)_ij = Σ_nb c_nb (E_nb − E_ij) + k0² dx² ε_ij s_x(i) s_y(j) E_ij
//! c_(i±½, j) = s_y(j) / s_x(i±½),   c_(i, j±½) = s_x(i) / s_y(j±½)
//! ```
//!
//! with homogeneous Dirichlet values beyond the outermost (absorbing) cells.

use num_traits::Zero;

use crate::em::{EmError, PermittivityGrid};
use crate::geometry::GridSpec;
use crate::scalar::{cplx, Cplx, Real};

/// Absorbing layer settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pml<T = f64> {
    /// Thickness in cells on every side.
    pub cells: usize,
    /// Target normal-incidence round-trip reflection of the continuous profile.
    pub reflection: T,
}

impl<T: Real> Pml<T> {
    pub fn new(cells: usize) -> Self {
        Self { cells, reflection: T::lit(1e-8) }
    }
}

#[derive(Debug, Clone)]
pub struct SystemMatrix<T = f64> {
    pub grid: GridSpec<T>,
    pub wavelength: T,
    pub k0: T,
    pub pml: Pml<T>,
    /// Stretch factors at cell centers.
    pub sx: Vec<Cplx<T>>,
    pub sy: Vec<Cplx<T>>,
    /// Diagonal, grid order.
    pub diag: Vec<Cplx<T>>,
    /// Coupling between `(i, j)` and `(i + 1, j)`, stored at `(i, j)`; zero in the last column.
    pub cx: Vec<Cplx<T>>,
    /// Coupling between `(i, j)` and `(i, j + 1)`, stored at `(i, j)`; zero in the last row.
    pub cy: Vec<Cplx<T>>,
}

/// Stretch factor at fractional cell coordinate `u` on an axis of `n` cells.
fn stretch<T: Real>(u: T, n: usize, pml: &Pml<T>, k0: T, dx: T) -> Cplx<T> {
    if pml.cells == 0 {
        return Cplx::new(T::one(), T::zero());
    }
    let l = T::from_usize_lossy(pml.cells);
    let depth = (l - u).max(u - (T::from_usize_lossy(n) - l)).max(T::zero()) / l;
    let sigma_max = T::lit(3.0) * (T::one() / pml.reflection).ln() / (T::lit(2.0) * l * dx);
    cplx(T::one(), sigma_max * depth * depth / k0)
}

/// Builds the system matrix after validating the wavelength and grid against the PML.
pub fn assemble<T: Real>(eps: &PermittivityGrid<T>, wavelength: T, pml: Pml<T>) -> Result<SystemMatrix<T>, EmError> {
    if !(wavelength > T::zero()) {
        return Err(EmError::Config(format!("wavelength must be positive, got {wavelength}")));
    }
    if pml.cells < 8 {
        return Err(EmError::Config(format!("absorbing layer needs at least 8 cells, got {}", pml.cells)));
    }
    if !(pml.reflection > T::zero() && pml.reflection < T::one()) {
        return Err(EmError::Config(format!("absorber reflection must be in (0, 1), got {}", pml.reflection)));
    }
    if 2 * pml.cells + 2 > eps.grid.nx.min(eps.grid.ny) {
        return Err(EmError::Config("absorbing layers leave no interior".into()));
    }
    let eps_max = eps.max();
    let limit = wavelength / (T::lit(15.0) * eps_max.sqrt());
    if eps.grid.dx > limit {
        return Err(EmError::Config(format!(
            "cell size {} µm exceeds λ/(15·n_max) = {} µm",
            eps.grid.dx, limit
        )));
    }
    if let Some(k) = eps.eps.iter().position(|e| !(*e >= T::one()) || !e.is_finite()) {
        return Err(EmError::Config(format!("permittivity {} at cell {k} below 1", eps.eps[k])));
    }
    Ok(assemble_raw(eps, wavelength, pml))
}

/// Assembly without configuration checks; `pml.cells == 0` yields a plain
/// Dirichlet box.
pub(crate) fn assemble_raw<T: Real>(eps: &PermittivityGrid<T>, wavelength: T, pml: Pml<T>) -> SystemMatrix<T> {
    let g = eps.grid;
    let (nx, ny, dx) = (g.nx, g.ny, g.dx);
    let k0 = T::lit(2.0) * T::PI() / wavelength;
    let half = T::lit(0.5);
    let center = |k: usize| T::from_usize_lossy(k) + half;
    let face = |k: usize| T::from_usize_lossy(k);
    let sx: Vec<_> = (0..nx).map(|i| stretch(center(i), nx, &pml, k0, dx)).collect();
    let sy: Vec<_> = (0..ny).map(|j| stretch(center(j), ny, &pml, k0, dx)).collect();
    // Faces 0..=n, face k sits between cells k-1 and k.
    let sx_face: Vec<_> = (0..=nx).map(|i| stretch(face(i), nx, &pml, k0, dx)).collect();
    let sy_face: Vec<_> = (0..=ny).map(|j| stretch(face(j), ny, &pml, k0, dx)).collect();

    let kk = k0 * k0 * dx * dx;
    let n = g.len();
    let mut diag = vec![Cplx::zero(); n];
    let mut cx = vec![Cplx::zero(); n];
    let mut cy = vec![Cplx::zero(); n];
    for j in 0..ny {
        for i in 0..nx {
            let idx = g.index(i, j);
            let left = sy[j] / sx_face[i];
            let right = sy[j] / sx_face[i + 1];
            let down = sx[i] / sy_face[j];
            let up = sx[i] / sy_face[j + 1];
            if i + 1 < nx {
                cx[idx] = right;
            }
            if j + 1 < ny {
                cy[idx] = up;
            }
            diag[idx] = sx[i] * sy[j] * kk * eps.eps[idx] - (left + right + down + up);
        }
    }
    SystemMatrix { grid: g, wavelength, k0, pml, sx, sy, diag, cx, cy }
}

impl<T: Real> SystemMatrix<T> {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    /// `∂A_cc/∂ε_c`.
    pub fn eps_derivative(&self, i: usize, j: usize) -> Cplx<T> {
        self.sx[i] * self.sy[j] * (self.k0 * self.k0 * self.grid.dx * self.grid.dx)
    }

    /// Whether cell `(i, j)` lies inside an absorbing layer.
    pub fn in_pml(&self, i: usize, j: usize) -> bool {
        let l = self.pml.cells;
        l > 0 && (i < l || j < l || i >= self.grid.nx - l || j >= self.grid.ny - l)
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[Cplx<T>]) -> Vec<Cplx<T>> {
        let g = self.grid;
        let mut y: Vec<Cplx<T>> = self.diag.iter().zip(x).map(|(d, v)| *d * *v).collect();
        for j in 0..g.ny {
            for i in 0..g.nx {
                let idx = g.index(i, j);
                if i + 1 < g.nx {
                    let c = self.cx[idx];
                    y[idx] += c * x[idx + 1];
                    y[idx + 1] += c * x[idx];
                }
                if j + 1 < g.ny {
                    let c = self.cy[idx];
                    let up = idx + g.nx;
                    y[idx] += c * x[up];
                    y[up] += c * x[idx];
                }
            }
        }
        y
    }

    /// Stored entries as `(row, col, value)`, both triangles.
    pub fn triplets(&self) -> Vec<(usize, usize, Cplx<T>)> {
        let g = self.grid;
        let mut out = Vec::with_capacity(5 * g.len());
        for j in 0..g.ny {
            for i in 0..g.nx {
                let idx = g.index(i, j);
                out.push((idx, idx, self.diag[idx]));
                if i + 1 < g.nx {
                    out.push((idx, idx + 1, self.cx[idx]));
                    out.push((idx + 1, idx, self.cx[idx]));
                }
                if j + 1 < g.ny {
                    out.push((idx, idx + g.nx, self.cy[idx]));
                    out.push((idx + g.nx, idx, self.cy[idx]));
                }
            }
        }
        out
    }
}
