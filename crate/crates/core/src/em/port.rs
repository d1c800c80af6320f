//! Mode sources and modal transmission probes on vertical port slices.
//!
//! A source occupies two adjacent columns and launches a unit-amplitude mode in
//! one direction only. A probe reads the forward-going modal amplitude from two
//! adjacent columns, so back-reflections do not leak into the measurement.

use std::ops::Range;

use num_traits::Zero;

use crate::em::{solve_modes, EmError, FieldSolution, ModeProfile, PermittivityGrid};
use crate::geometry::{Direction, GridSpec, Port};
use crate::scalar::{cis, cplx, Cplx, Real};

/// Figure of merit of one forward solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FomValue<T = f64> {
    pub transmission: T,
    pub insertion_loss_db: T,
}

impl<T: Real> FomValue<T> {
    pub fn from_transmission(t: T) -> Self {
        Self { transmission: t, insertion_loss_db: -T::lit(10.0) * t.log10() }
    }
}

/// A mode bound to a port slice of a specific grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PortMode<T = f64> {
    pub name: String,
    pub column: usize,
    pub rows: Range<usize>,
    pub direction: Direction,
    pub mode: ModeProfile<T>,
}

impl<T: Real> PortMode<T> {
    /// Solves for mode `order` on the slice of `port`, using the permittivity of the port column.
    pub fn new(eps: &PermittivityGrid<T>, port: &Port<T>, wavelength: T, order: usize) -> Result<Self, EmError> {
        let g = eps.grid;
        let outside = || EmError::PortOutsideGrid { name: port.name.clone() };
        let column = g.column_of(port.x).ok_or_else(outside)?;
        if column == 0 || column + 1 >= g.nx || port.y_min < g.y0 || port.y_max > g.y_max() {
            return Err(outside());
        }
        let rows = g.rows_between(port.y_min, port.y_max);
        if rows.len() < 3 {
            return Err(outside());
        }
        let slice = eps.column_slice(column, rows.clone());
        let mut modes = solve_modes(&slice, wavelength, g.dx)?;
        if order >= modes.len() {
            return Err(EmError::NoGuidedMode);
        }
        let mode = modes.swap_remove(order);
        Ok(Self { name: port.name.clone(), column, rows, direction: port.direction, mode })
    }

    fn kdx(&self) -> T {
        self.mode.kx * self.mode.dx
    }

    /// Columns `(first, second)` along the direction of travel.
    fn columns(&self) -> (usize, usize) {
        match self.direction {
            Direction::PosX => (self.column, self.column + 1),
            Direction::NegX => (self.column, self.column - 1),
        }
    }

    fn check(&self, grid: &GridSpec<T>) -> Result<(), EmError> {
        if self.column == 0 || self.column + 1 >= grid.nx || self.rows.end > grid.ny {
            return Err(EmError::PortOutsideGrid { name: self.name.clone() });
        }
        Ok(())
    }

    /// Source launching the mode with unit amplitude at `column`, travelling in
    /// `direction`. Returns the right-hand side and the launched power.
    pub fn source(&self, grid: &GridSpec<T>) -> Result<(Vec<Cplx<T>>, T), EmError> {
        self.check(grid)?;
        let mut b = vec![Cplx::zero(); grid.len()];
        let behind = match self.direction {
            Direction::PosX => self.column - 1,
            Direction::NegX => self.column + 1,
        };
        let phase = -cis(-self.kdx());
        for (k, j) in self.rows.clone().enumerate() {
            let phi = self.mode.profile[k];
            b[grid.index(behind, j)] = cplx(phi, T::zero());
            b[grid.index(self.column, j)] = phase * phi;
        }
        Ok((b, self.mode.power()))
    }

    /// Forward-going modal amplitude and its linear functional weights on the
    /// two probe columns: `a = Σ w0·x[first] + w1·x[second]` per row.
    fn amplitude(&self, x: &FieldSolution<T>) -> Result<(Cplx<T>, Cplx<T>, Cplx<T>), EmError> {
        self.check(&x.grid)?;
        let g = x.grid;
        let (c0, c1) = self.columns();
        let kdx = self.kdx();
        let denom = cplx(T::zero(), T::lit(2.0) * kdx.sin());
        let w1 = Cplx::new(T::one(), T::zero()) / denom;
        let w0 = -cis(-kdx) / denom;
        let mut a = Cplx::zero();
        for (k, j) in self.rows.clone().enumerate() {
            let phi = self.mode.profile[k] * self.mode.dx;
            a += (w0 * x.values[g.index(c0, j)] + w1 * x.values[g.index(c1, j)]) * phi;
        }
        Ok((a, w0, w1))
    }
}

/// Transmission into `port`'s mode for an injected power `p_in`, and `∂T/∂x`
/// defined so that `dT = Re(Σ dF_dx · dx)`.
pub fn mode_overlap_fom<T: Real>(
    x: &FieldSolution<T>,
    port: &PortMode<T>,
    p_in: T,
) -> Result<(FomValue<T>, Vec<Cplx<T>>), EmError> {
    if !(p_in > T::zero()) {
        return Err(EmError::InvalidInput(format!("injected power must be positive, got {p_in}")));
    }
    let (a, w0, w1) = port.amplitude(x)?;
    let weight = port.mode.power() / p_in;
    let t = a.norm_sqr() * weight;
    let g = x.grid;
    let (c0, c1) = port.columns();
    let scale = a.conj() * (T::lit(2.0) * weight);
    let mut grad = vec![Cplx::zero(); g.len()];
    for (k, j) in port.rows.clone().enumerate() {
        let phi = port.mode.profile[k] * port.mode.dx;
        grad[g.index(c0, j)] = scale * w0 * phi;
        grad[g.index(c1, j)] = scale * w1 * phi;
    }
    Ok((FomValue::from_transmission(t), grad))
}
