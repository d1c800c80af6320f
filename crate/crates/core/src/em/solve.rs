use num_traits::Zero;

use crate::em::{BandLdlt, EmError, SystemMatrix};
use crate::geometry::GridSpec;
use crate::scalar::{Cplx, Real};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    Forward,
    Adjoint,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FieldSolution<T = f64> {
    pub grid: GridSpec<T>,
    pub values: Vec<Cplx<T>>,
    pub wavelength: T,
    pub kind: FieldKind,
}

impl<T: Real> FieldSolution<T> {
    pub fn peak(&self) -> T {
        self.values.iter().map(|v| v.norm()).fold(T::zero(), T::max)
    }
}

/// A system matrix together with its factorization, shared by forward and adjoint solves.
#[derive(Debug, Clone)]
pub struct Factorized<T = f64> {
    pub matrix: SystemMatrix<T>,
    pub ldlt: BandLdlt<T>,
}

pub fn factorize<T: Real>(matrix: SystemMatrix<T>) -> Result<Factorized<T>, EmError> {
    let ldlt = BandLdlt::factor(&matrix)?;
    log::debug!("factorized {}x{} system, pivot ratio {}", matrix.grid.nx, matrix.grid.ny, ldlt.pivot_ratio);
    Ok(Factorized { matrix, ldlt })
}

fn norm<T: Real>(v: &[Cplx<T>]) -> T {
    v.iter().map(|z| z.norm_sqr()).sum::<T>().sqrt()
}

/// Residual target for the scalar type: 1e-8 in double precision.
fn tolerance<T: Real>() -> T {
    T::lit(1e-8).max(T::epsilon() * T::lit(100.0))
}

impl<T: Real> Factorized<T> {
    /// Direct solve followed by up to three steps of iterative refinement.
    pub fn solve(&self, b: &[Cplx<T>]) -> Result<Vec<Cplx<T>>, EmError> {
        if b.len() != self.matrix.len() {
            return Err(EmError::GridMismatch);
        }
        let bn = norm(b);
        if bn.is_zero() {
            return Ok(vec![Cplx::zero(); b.len()]);
        }
        let mut x = self.ldlt.solve(b);
        let mut rel = T::infinity();
        for _ in 0..4 {
            let ax = self.matrix.apply(&x);
            let r: Vec<Cplx<T>> = b.iter().zip(&ax).map(|(b, a)| *b - *a).collect();
            rel = norm(&r) / bn;
            if !rel.is_finite() {
                break;
            }
            if rel < tolerance::<T>() * T::lit(1e-3) {
                break;
            }
            let dx = self.ldlt.solve(&r);
            x.iter_mut().zip(&dx).for_each(|(x, d)| *x += *d);
        }
        if !(rel < tolerance::<T>()) {
            return Err(EmError::Residual { relative: rel.to_f64_lossy(), pivot_ratio: self.ldlt.pivot_ratio.to_f64_lossy() });
        }
        Ok(x)
    }
}

/// `x = A⁻¹ source`.
pub fn solve_forward<T: Real>(a: &Factorized<T>, source: &[Cplx<T>]) -> Result<FieldSolution<T>, EmError> {
    if source.iter().all(|v| v.is_zero()) {
        return Err(EmError::InvalidInput("source is identically zero".into()));
    }
    let values = a.solve(source)?;
    Ok(FieldSolution { grid: a.matrix.grid, values, wavelength: a.matrix.wavelength, kind: FieldKind::Forward })
}

/// `λ = −A⁻ᵀ ∂F/∂x`; `A` is symmetric so the forward factorization is reused.
pub fn solve_adjoint<T: Real>(a: &Factorized<T>, df_dx: &[Cplx<T>]) -> Result<FieldSolution<T>, EmError> {
    let rhs: Vec<Cplx<T>> = df_dx.iter().map(|v| -*v).collect();
    let values = a.solve(&rhs)?;
    Ok(FieldSolution { grid: a.matrix.grid, values, wavelength: a.matrix.wavelength, kind: FieldKind::Adjoint })
}

/// Per-cell `∂F/∂ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityField<T = f64> {
    pub grid: GridSpec<T>,
    pub values: Vec<T>,
}

/// `S_c = Re(λ_c · ∂A_cc/∂ε_c · x_c)`, zero inside the absorbing layers.
pub fn sensitivity_field<T: Real>(
    a: &SystemMatrix<T>,
    forward: &FieldSolution<T>,
    adjoint: &FieldSolution<T>,
) -> Result<SensitivityField<T>, EmError> {
    let g = a.grid;
    if forward.grid != g || adjoint.grid != g || forward.wavelength != adjoint.wavelength || forward.wavelength != a.wavelength {
        return Err(EmError::GridMismatch);
    }
    let mut values = vec![T::zero(); g.len()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            if a.in_pml(i, j) {
                continue;
            }
            let idx = g.index(i, j);
            values[idx] = (adjoint.values[idx] * a.eps_derivative(i, j) * forward.values[idx]).re;
        }
    }
    Ok(SensitivityField { grid: g, values })
}
