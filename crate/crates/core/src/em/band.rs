//! Banded `L D Lᵀ` factorization of the complex-symmetric system matrix.
//!
//! Unknowns are renumbered with the shorter grid axis running fastest so the
//! half-bandwidth equals `min(nx, ny)`. No pivoting: the stretched Helmholtz
//! operator at an operating wavelength is far enough from singular, and a tiny
//! pivot is reported instead of silently producing garbage.

use num_traits::Zero;

use crate::em::{EmError, SystemMatrix};
use crate::scalar::{Cplx, Real};

#[derive(Debug, Clone)]
pub struct BandLdlt<T = f64> {
    n: usize,
    bw: usize,
    /// Column `k` holds `d_k` at offset 0 and `L[k+r, k]` at offset `r`.
    band: Vec<Cplx<T>>,
    /// Grid index → solver index.
    perm: Vec<usize>,
    /// `min |d_k| / max |d_k|`.
    pub pivot_ratio: T,
}

impl<T: Real> BandLdlt<T> {
    pub fn factor(a: &SystemMatrix<T>) -> Result<Self, EmError> {
        let g = a.grid;
        let (nx, ny) = (g.nx, g.ny);
        let y_fast = ny <= nx;
        let bw = nx.min(ny);
        let n = g.len();
        let w = bw + 1;
        let perm: Vec<usize> = (0..n)
            .map(|idx| {
                let (i, j) = (idx % nx, idx / nx);
                if y_fast { i * ny + j } else { idx }
            })
            .collect();

        let mut band = vec![Cplx::zero(); n * w];
        for idx in 0..n {
            let (i, j) = (idx % nx, idx / nx);
            let s = perm[idx];
            band[s * w] = a.diag[idx];
            // Neighbours with larger solver index sit at offset 1 (fast axis) and bw (slow axis).
            let (fast, slow) = if y_fast { (a.cy[idx], a.cx[idx]) } else { (a.cx[idx], a.cy[idx]) };
            let (has_fast, has_slow) = if y_fast { (j + 1 < ny, i + 1 < nx) } else { (i + 1 < nx, j + 1 < ny) };
            if has_fast {
                band[s * w + 1] = fast;
            }
            if has_slow {
                band[s * w + bw] = slow;
            }
        }

        let scale = a.diag.iter().map(|d| d.norm()).fold(T::zero(), T::max).max(T::one());
        let tiny = scale * T::epsilon() * T::lit(16.0);
        let (mut dmin, mut dmax) = (T::infinity(), T::zero());
        for k in 0..n {
            let d = band[k * w];
            let dn = d.norm();
            if !(dn > tiny) || !dn.is_finite() {
                return Err(EmError::Factorization { column: k, pivot: dn.to_f64_lossy(), scale: scale.to_f64_lossy() });
            }
            dmin = dmin.min(dn);
            dmax = dmax.max(dn);
            let kmax = bw.min(n - 1 - k);
            let colk = k * w;
            let inv_d = Cplx::new(T::one(), T::zero()) / d;
            for r in 1..=kmax {
                let a_rk = band[colk + r];
                if a_rk.is_zero() {
                    continue;
                }
                let l = a_rk * inv_d;
                let coli = (k + r) * w;
                let (head, tail) = band.split_at_mut(coli);
                let src = &head[colk + r..=colk + kmax];
                let dst = &mut tail[..=kmax - r];
                for (dv, sv) in dst.iter_mut().zip(src) {
                    *dv -= l * *sv;
                }
            }
            for v in &mut band[colk + 1..=colk + kmax] {
                *v = *v * inv_d;
            }
        }
        Ok(Self { n, bw, band, perm, pivot_ratio: dmin / dmax })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Solves `A x = b` (grid order in and out).
    pub fn solve(&self, b: &[Cplx<T>]) -> Vec<Cplx<T>> {
        let (n, bw, w) = (self.n, self.bw, self.bw + 1);
        let mut z = vec![Cplx::zero(); n];
        for (idx, v) in b.iter().enumerate() {
            z[self.perm[idx]] = *v;
        }
        for k in 0..n {
            let zk = z[k];
            if zk.is_zero() {
                continue;
            }
            let kmax = bw.min(n - 1 - k);
            let col = &self.band[k * w + 1..=k * w + kmax];
            for (zr, l) in z[k + 1..=k + kmax].iter_mut().zip(col) {
                *zr -= *l * zk;
            }
        }
        for k in 0..n {
            z[k] = z[k] / self.band[k * w];
        }
        for k in (0..n).rev() {
            let kmax = bw.min(n - 1 - k);
            let col = &self.band[k * w + 1..=k * w + kmax];
            let mut acc = Cplx::zero();
            for (zr, l) in z[k + 1..=k + kmax].iter().zip(col) {
                acc += *l * *zr;
            }
            z[k] -= acc;
        }
        self.perm.iter().map(|&s| z[s]).collect()
    }
}
