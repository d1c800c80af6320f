//! Guided modes of a 1D permittivity slice.
//!
//! The slice is discretized with the same 3-point stencil as the 2D operator,
//! `(φ_{j+1} − 2φ_j + φ_{j−1}) + k0²dx² ε_j φ_j = μ φ_j` with `μ = β²dx²` and
//! zero field beyond the slice ends, so a discrete mode is an exact
//! propagating solution of the discrete 2D problem in a uniform waveguide.

use crate::em::EmError;
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct ModeProfile<T = f64> {
    /// Real transverse profile normalized so that `Σ φ² dx = 1`.
    pub profile: Vec<T>,
    pub n_eff: T,
    /// Discrete propagation constant along x: `cos(kx dx) = 1 − μ/2`.
    pub kx: T,
    pub wavelength: T,
    pub dx: T,
    /// Order within the slice, 0 = fundamental.
    pub order: usize,
}

impl<T: Real> ModeProfile<T> {
    /// `Σ φ·v dx` over the slice.
    pub fn overlap(&self, v: &[T]) -> T {
        self.profile.iter().zip(v).map(|(&a, &b)| a * b).sum::<T>() * self.dx
    }

    /// Modal power carried by a unit-amplitude wave, up to a common constant.
    pub fn power(&self) -> T {
        (self.kx * self.dx).sin() / self.dx
    }
}

/// Number of eigenvalues of the tridiagonal matrix (unit off-diagonal) below `x`.
fn count_below<T: Real>(diag: &[T], x: T) -> usize {
    let tiny = T::min_positive_value().sqrt();
    let mut count = 0;
    let mut q = T::one();
    for (j, &d) in diag.iter().enumerate() {
        q = if j == 0 { d - x } else { d - x - T::one() / q };
        if q == T::zero() {
            q = -tiny;
        }
        if q < T::zero() {
            count += 1;
        }
    }
    count
}

/// Solves `(T − μ I) v = rhs` for the tridiagonal matrix with unit off-diagonals.
fn shifted_solve<T: Real>(diag: &[T], mu: T, rhs: &[T]) -> Vec<T> {
    let n = diag.len();
    let tiny = T::epsilon() * T::lit(1e-3);
    let mut c = vec![T::zero(); n];
    let mut d = vec![T::zero(); n];
    let mut piv = diag[0] - mu;
    if piv.abs() < tiny {
        piv = tiny;
    }
    c[0] = T::one() / piv;
    d[0] = rhs[0] / piv;
    for j in 1..n {
        let mut m = diag[j] - mu - c[j - 1];
        if m.abs() < tiny {
            m = tiny;
        }
        c[j] = T::one() / m;
        d[j] = (rhs[j] - d[j - 1]) / m;
    }
    let mut x = vec![T::zero(); n];
    x[n - 1] = d[n - 1];
    for j in (0..n - 1).rev() {
        x[j] = d[j] - c[j] * x[j + 1];
    }
    x
}

/// Guided modes sorted by descending `n_eff`.
pub fn solve_modes<T: Real>(eps_slice: &[T], wavelength: T, dx: T) -> Result<Vec<ModeProfile<T>>, EmError> {
    let n = eps_slice.len();
    if n < 3 || !(wavelength > T::zero()) || !(dx > T::zero()) {
        return Err(EmError::InvalidInput("mode slice needs ≥ 3 cells, positive λ and dx".into()));
    }
    let k0 = T::lit(2.0) * T::PI() / wavelength;
    let kk = k0 * k0 * dx * dx;
    let eps_edge = eps_slice[0].max(eps_slice[n - 1]);
    let eps_max = eps_slice.iter().copied().fold(T::neg_infinity(), T::max);
    if !(eps_max > eps_edge) {
        return Err(EmError::NoGuidedMode);
    }
    let diag: Vec<T> = eps_slice.iter().map(|&e| kk * e - T::lit(2.0)).collect();
    let lo = kk * eps_edge;
    let hi = kk * eps_max;
    let below_hi = count_below(&diag, hi);
    let below_lo = count_below(&diag, lo);
    let guided = below_hi - below_lo;
    if guided == 0 {
        return Err(EmError::NoGuidedMode);
    }

    let mut modes = Vec::with_capacity(guided);
    for order in 0..guided {
        // Eigenvalue index (ascending) of the order-th largest eigenvalue.
        let target = below_hi - 1 - order;
        let (mut a, mut b) = (lo, hi);
        for _ in 0..200 {
            let mid = (a + b) * T::lit(0.5);
            if mid <= a || mid >= b {
                break;
            }
            if count_below(&diag, mid) > target {
                b = mid;
            } else {
                a = mid;
            }
        }
        let mu = (a + b) * T::lit(0.5);
        let shift = mu + (b - a).max(mu.abs() * T::epsilon()) * T::lit(4.0);
        let mut v = vec![T::one(); n];
        for k in 0..n {
            // Break symmetry so odd modes are reachable from the start vector.
            v[k] += T::from_usize_lossy(k) / T::from_usize_lossy(n);
        }
        for _ in 0..4 {
            v = shifted_solve(&diag, shift, &v);
            let s = v.iter().map(|x| *x * *x).sum::<T>().sqrt();
            v.iter_mut().for_each(|x| *x /= s);
        }
        let norm = (v.iter().map(|x| *x * *x).sum::<T>() * dx).sqrt();
        let peak = v.iter().map(|x| x.abs()).fold(T::zero(), T::max);
        let first = v.iter().find(|x| x.abs() > peak * T::lit(0.5)).copied().unwrap_or(T::one());
        let sign = if first < T::zero() { -T::one() } else { T::one() };
        v.iter_mut().for_each(|x| *x = *x * sign / norm);

        let beta = mu.sqrt() / dx;
        let cos_k = (T::one() - mu * T::lit(0.5)).max(-T::one()).min(T::one());
        modes.push(ModeProfile {
            profile: v,
            n_eff: beta / k0,
            kx: cos_k.acos() / dx,
            wavelength,
            dx,
            order,
        });
    }
    Ok(modes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sturm_count_matches_known_spectrum() {
        // Eigenvalues of tridiag(1, d, 1) with constant d are d + 2cos(kπ/(n+1)).
        let n = 10;
        let diag = vec![0.0; n];
        assert_eq!(count_below(&diag, 0.0), 5);
        assert_eq!(count_below(&diag, 2.1), n);
        assert_eq!(count_below(&diag, -2.1), 0);
    }

    #[test]
    fn uniform_slice_has_no_guided_mode() {
        assert!(matches!(solve_modes(&vec![2.0; 50], 1.32, 0.02), Err(EmError::NoGuidedMode)));
    }
}
