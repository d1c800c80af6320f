use crate::geometry::DensityGrid;
use crate::litho::{check_len, LithoError, LithoModel};
use crate::scalar::Real;

/// Blur-and-threshold process surrogate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianThresholdParams<T = f64> {
    pub sigma_nm: T,
    pub eta: T,
    pub beta: T,
    /// Uniform threshold shift emulating an etch bias; zero by default.
    pub eta_offset: T,
}

impl<T: Real> GaussianThresholdParams<T> {
    pub fn duv() -> Self {
        Self { sigma_nm: T::lit(80.0), eta: T::lit(0.5), beta: T::lit(10.0), eta_offset: T::zero() }
    }

    pub fn ebl() -> Self {
        Self { sigma_nm: T::lit(30.0), ..Self::duv() }
    }

    pub fn validate(&self) -> Result<(), LithoError> {
        let eta = self.eta + self.eta_offset;
        if !(self.sigma_nm >= T::zero()) || !self.sigma_nm.is_finite() {
            return Err(LithoError::Config(format!("sigma_nm must be ≥ 0, got {}", self.sigma_nm)));
        }
        if !(eta > T::zero() && eta < T::one()) {
            return Err(LithoError::Config(format!("threshold eta (+offset) must be in (0, 1), got {eta}")));
        }
        if !(self.beta > T::zero()) || !self.beta.is_finite() {
            return Err(LithoError::Config(format!("beta must be positive, got {}", self.beta)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct GaussianThreshold<T = f64> {
    pub params: GaussianThresholdParams<T>,
}

/// Truncated, renormalized Gaussian taps for `sigma` in cells.
fn kernel<T: Real>(sigma: T) -> Vec<T> {
    if sigma == T::zero() {
        return vec![T::one()];
    }
    let r = (T::lit(4.0) * sigma).ceil().to_usize().unwrap_or(0);
    let mut w: Vec<T> = (0..=2 * r)
        .map(|k| {
            let d = T::from_usize_lossy(k) - T::from_usize_lossy(r);
            (-(d * d) / (T::lit(2.0) * sigma * sigma)).exp()
        })
        .collect();
    let s: T = w.iter().copied().sum();
    w.iter_mut().for_each(|v| *v /= s);
    w
}

/// Separable blur with clamped (edge-replicated) indices; `transpose` scatters instead of gathers.
fn blur<T: Real>(v: &[T], nx: usize, ny: usize, w: &[T], transpose: bool) -> Vec<T> {
    let r = (w.len() - 1) / 2;
    let pass = |src: &[T], along_x: bool| {
        let mut out = vec![T::zero(); src.len()];
        let (n, lines) = if along_x { (nx, ny) } else { (ny, nx) };
        let at = |line: usize, k: usize| if along_x { line * nx + k } else { k * nx + line };
        for line in 0..lines {
            for k in 0..n {
                for (t, &wt) in w.iter().enumerate() {
                    let m = (k + t).saturating_sub(r).min(n - 1);
                    if transpose {
                        out[at(line, m)] += wt * src[at(line, k)];
                    } else {
                        out[at(line, k)] += wt * src[at(line, m)];
                    }
                }
            }
        }
        out
    };
    if transpose {
        pass(&pass(v, false), true)
    } else {
        pass(&pass(v, true), false)
    }
}

impl<T: Real> GaussianThreshold<T> {
    pub fn new(params: GaussianThresholdParams<T>) -> Result<Self, LithoError> {
        params.validate()?;
        Ok(Self { params })
    }

    fn sigma_cells(&self, mask: &DensityGrid<T>) -> Result<T, LithoError> {
        let g = mask.grid;
        let sigma_um = self.params.sigma_nm / T::lit(1000.0);
        let half = T::from_usize_lossy(g.nx.min(g.ny)) * g.dx / T::lit(2.0);
        if sigma_um > half {
            return Err(LithoError::Config(format!(
                "blur sigma {} nm exceeds half the grid extent ({} nm)",
                self.params.sigma_nm,
                half * T::lit(1000.0)
            )));
        }
        Ok(sigma_um / g.dx)
    }

    /// Blurred mask before projection.
    pub fn blurred(&self, mask: &DensityGrid<T>) -> Result<Vec<T>, LithoError> {
        let w = kernel(self.sigma_cells(mask)?);
        Ok(blur(&mask.values, mask.grid.nx, mask.grid.ny, &w, false))
    }

    fn eta(&self) -> T {
        self.params.eta + self.params.eta_offset
    }

    fn normalizer(&self) -> T {
        let (b, e) = (self.params.beta, self.eta());
        (b * e).tanh() + (b * (T::one() - e)).tanh()
    }

    pub fn project(&self, rho: T) -> T {
        let (b, e) = (self.params.beta, self.eta());
        (((b * e).tanh() + (b * (rho - e)).tanh()) / self.normalizer()).max(T::zero()).min(T::one())
    }

    pub fn project_derivative(&self, rho: T) -> T {
        let (b, e) = (self.params.beta, self.eta());
        let c = (b * (rho - e)).cosh();
        b / (c * c) / self.normalizer()
    }
}

impl<T: Real> LithoModel<T> for GaussianThreshold<T> {
    fn name(&self) -> String {
        format!("gaussian(sigma={}nm)", self.params.sigma_nm)
    }

    fn predict(&self, mask: &DensityGrid<T>) -> Result<DensityGrid<T>, LithoError> {
        let values = self.blurred(mask)?.into_iter().map(|r| self.project(r)).collect();
        Ok(DensityGrid { grid: mask.grid, values })
    }

    fn differentiable(&self) -> bool {
        true
    }

    fn vjp(&self, mask: &DensityGrid<T>, cot: &[T]) -> Result<Vec<T>, LithoError> {
        check_len(mask.values.len(), cot.len())?;
        let w = kernel(self.sigma_cells(mask)?);
        let g = mask.grid;
        let rho = blur(&mask.values, g.nx, g.ny, &w, false);
        let scaled: Vec<T> = cot.iter().zip(&rho).map(|(&c, &r)| c * self.project_derivative(r)).collect();
        Ok(blur(&scaled, g.nx, g.ny, &w, true))
    }
}
