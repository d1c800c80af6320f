//! Figure-of-merit evaluation through a lithography model, and its gradient with
//! respect to the design parameters along the routes of [`GradientMethod`].

mod par;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use crate::em::{
    assemble, density_to_eps, factorize, mode_overlap_fom, sensitivity_field, solve_adjoint, solve_forward, EmError, FieldSolution,
    FomValue, Materials, Pml, PortMode,
};
use crate::geometry::{rasterize, DensityGrid, DeviceSpec, GeometryError, GridSpec, Port};
use crate::litho::{Identity, LithoError, LithoModel};
use crate::scalar::{dot, Real};

pub use par::par_map;

#[derive(Debug, thiserror::Error)]
pub enum FaidError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Litho(#[from] LithoError),
    #[error(transparent)]
    Em(#[from] EmError),
    #[error("parameter {index}: {source}")]
    Parameter { index: usize, source: Box<FaidError> },
    #[error("pipeline configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradientMethod {
    /// Adjoint sensitivity pulled back through the model's vjp.
    ChainRule,
    /// Adjoint sensitivity paired with differences of model predictions.
    NumericPerturbation,
    /// Central differences of the whole pipeline.
    BruteForce,
}

impl GradientMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            GradientMethod::ChainRule => "chain",
            GradientMethod::NumericPerturbation => "numeric",
            GradientMethod::BruteForce => "brute",
        }
    }
}

/// Finite-difference stencil for the per-parameter density differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stencil {
    Forward,
    Central,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T = f64> {
    /// Mean transmission over wavelengths.
    pub fom: FomValue<T>,
    pub per_wavelength: Vec<FomValue<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientResult<T = f64> {
    pub fom: FomValue<T>,
    /// `∂T̄/∂p`.
    pub grad: Vec<T>,
    pub per_wavelength: Vec<FomValue<T>>,
    pub method: GradientMethod,
    /// EM solves spent by this call.
    pub em_solves: u64,
}

/// Everything needed to go from parameters to a figure of merit.
#[derive(Clone)]
pub struct Pipeline<T: Real> {
    pub device: DeviceSpec<T>,
    pub grid: GridSpec<T>,
    pub litho: Arc<dyn LithoModel<T>>,
    pub materials: Materials<T>,
    pub wavelengths: Vec<T>,
    pub pml: Pml<T>,
    pub input: Port<T>,
    pub outputs: Vec<Port<T>>,
    /// Boundary step for mask Jacobian columns, µm.
    pub mask_step: T,
    pub threads: usize,
    solves: Arc<AtomicU64>,
}

/// Per-wavelength result of one simulated geometry.
struct Simulated<T> {
    eval: Evaluation<T>,
    /// `∂T̄/∂ρ̂` per cell when the adjoint was requested.
    df_drho: Option<Vec<T>>,
}

impl<T: Real> Pipeline<T> {
    /// Grid covering the device window at cell size `dx`; `ports[0]` feeds, the rest are measured.
    pub fn new(
        device: DeviceSpec<T>,
        dx: T,
        litho: Arc<dyn LithoModel<T>>,
        materials: Materials<T>,
        wavelengths: Vec<T>,
        pml: Pml<T>,
    ) -> Result<Self, FaidError> {
        if wavelengths.is_empty() {
            return Err(FaidError::Config("at least one wavelength is required".into()));
        }
        if device.ports.len() < 2 {
            return Err(FaidError::Config("device needs an input and at least one output port".into()));
        }
        let d = device.domain;
        let grid = GridSpec::covering(d.x_min, d.x_max, d.y_min, d.y_max, dx)?;
        let input = device.ports[0].clone();
        let outputs = device.ports[1..].to_vec();
        Ok(Self {
            device,
            grid,
            litho,
            materials,
            wavelengths,
            pml,
            input,
            outputs,
            mask_step: T::lit(1e-3),
            threads: 1,
            solves: Arc::new(AtomicU64::new(0)),
        })
    }

    /// Same pipeline routed through another litho model; the solve counter is shared.
    pub fn with_litho(&self, litho: Arc<dyn LithoModel<T>>) -> Self {
        Self { litho, ..self.clone() }
    }

    pub fn ideal(&self) -> Self {
        self.with_litho(Arc::new(Identity))
    }

    /// Total EM solves (forward and adjoint) made through this pipeline and its clones.
    pub fn em_solves(&self) -> u64 {
        self.solves.load(Ordering::Relaxed)
    }

    pub fn mask(&self, p: &[T]) -> Result<DensityGrid<T>, FaidError> {
        Ok(rasterize(&self.device.polygons(p)?, &self.grid)?)
    }

    pub fn predicted(&self, p: &[T]) -> Result<(DensityGrid<T>, DensityGrid<T>), FaidError> {
        let mask = self.mask(p)?;
        let pred = self.litho.predict(&mask)?;
        if pred.values.len() != mask.values.len() {
            return Err(LithoError::Shape { expected: mask.values.len(), got: pred.values.len() }.into());
        }
        Ok((mask, pred))
    }

    fn simulate(&self, density: &DensityGrid<T>, adjoint: bool) -> Result<Simulated<T>, FaidError> {
        let eps = density_to_eps(density, &self.materials);
        let n_wl = T::from_usize_lossy(self.wavelengths.len());
        let contrast = self.materials.contrast();
        let mut per_wavelength = Vec::with_capacity(self.wavelengths.len());
        let mut total = T::zero();
        let mut df_drho = adjoint.then(|| vec![T::zero(); self.grid.len()]);
        for &wl in &self.wavelengths {
            let a = assemble(&eps, wl, self.pml)?;
            let f = factorize(a)?;
            let src = PortMode::new(&eps, &self.input, wl, 0)?;
            let (b, p_in) = src.source(&self.grid)?;
            let x = solve_forward(&f, &b)?;
            self.solves.fetch_add(1, Ordering::Relaxed);
            let mut t = T::zero();
            let mut dfdx = vec![num_complex::Complex::new(T::zero(), T::zero()); self.grid.len()];
            for port in &self.outputs {
                let pm = PortMode::new(&eps, port, wl, 0)?;
                let (fom, g) = mode_overlap_fom(&x, &pm, p_in)?;
                t += fom.transmission;
                dfdx.iter_mut().zip(&g).for_each(|(a, b)| *a += *b);
            }
            per_wavelength.push(FomValue::from_transmission(t));
            total += t;
            if let Some(acc) = df_drho.as_mut() {
                let lam = solve_adjoint(&f, &dfdx)?;
                self.solves.fetch_add(1, Ordering::Relaxed);
                let s = sensitivity_field(&f.matrix, &x, &lam)?;
                acc.iter_mut().zip(&s.values).for_each(|(a, s)| *a += *s * contrast / n_wl);
            }
        }
        Ok(Simulated { eval: Evaluation { fom: FomValue::from_transmission(total / n_wl), per_wavelength }, df_drho })
    }

    /// Mean transmission over wavelengths of the predicted geometry.
    pub fn evaluate(&self, p: &[T]) -> Result<Evaluation<T>, FaidError> {
        let (_, pred) = self.predicted(p)?;
        Ok(self.simulate(&pred, false)?.eval)
    }

    pub fn eval_fom(&self, p: &[T]) -> Result<FomValue<T>, FaidError> {
        Ok(self.evaluate(p)?.fom)
    }

    /// Evaluation of an already predicted density (skips geometry and litho).
    pub fn evaluate_density(&self, density: &DensityGrid<T>) -> Result<Evaluation<T>, FaidError> {
        Ok(self.simulate(density, false)?.eval)
    }

    /// Forward field at every wavelength for an already predicted density.
    pub fn forward_fields(&self, density: &DensityGrid<T>) -> Result<Vec<FieldSolution<T>>, FaidError> {
        let eps = density_to_eps(density, &self.materials);
        self.wavelengths
            .iter()
            .map(|&wl| {
                let f = factorize(assemble(&eps, wl, self.pml)?)?;
                let (b, _) = PortMode::new(&eps, &self.input, wl, 0)?.source(&self.grid)?;
                let x = solve_forward(&f, &b)?;
                self.solves.fetch_add(1, Ordering::Relaxed);
                Ok(x)
            })
            .collect()
    }

    /// `(mask(p + h e_i) − mask(p − h e_i)) / 2h`, one-sided when a side leaves the valid geometry.
    pub fn mask_column(&self, p: &[T], i: usize) -> Result<Vec<T>, FaidError> {
        self.difference_column(p, i, self.mask_step, Stencil::Central, None, &|q| self.mask(q))
    }

    fn difference_column(
        &self,
        p: &[T],
        i: usize,
        h: T,
        stencil: Stencil,
        base: Option<&DensityGrid<T>>,
        f: &(dyn Fn(&[T]) -> Result<DensityGrid<T>, FaidError> + Sync),
    ) -> Result<Vec<T>, FaidError> {
        let wrap = |e: FaidError| FaidError::Parameter { index: i, source: Box::new(e) };
        let at = |s: T| {
            let mut q = p.to_vec();
            q[i] += s;
            f(&q)
        };
        let diff = |a: &DensityGrid<T>, b: &DensityGrid<T>, scale: T| -> Vec<T> {
            a.values.iter().zip(&b.values).map(|(&x, &y)| (x - y) / scale).collect()
        };
        let centre = || match base {
            Some(b) => Ok(b.clone()),
            None => f(p),
        };
        let plus = at(h);
        match (stencil, plus) {
            (Stencil::Central, Ok(up)) => match at(-h) {
                Ok(down) => Ok(diff(&up, &down, h + h)),
                Err(FaidError::Geometry(_)) => Ok(diff(&up, &centre().map_err(wrap)?, h)),
                Err(e) => Err(wrap(e)),
            },
            (Stencil::Forward, Ok(up)) => Ok(diff(&up, &centre().map_err(wrap)?, h)),
            (_, Err(FaidError::Geometry(_))) => {
                let down = at(-h).map_err(wrap)?;
                Ok(diff(&centre().map_err(wrap)?, &down, h))
            }
            (_, Err(e)) => Err(wrap(e)),
        }
    }

    /// Adjoint gradient through the litho model's vjp.
    pub fn grad_chain_rule(&self, p: &[T]) -> Result<GradientResult<T>, FaidError> {
        if !self.litho.differentiable() {
            return Err(LithoError::NonDifferentiableModel(self.litho.name()).into());
        }
        let start = self.em_solves();
        let (mask, pred) = self.predicted(p)?;
        let sim = self.simulate(&pred, true)?;
        let c1 = sim.df_drho.expect("adjoint requested");
        let c2 = self.litho.vjp(&mask, &c1)?;
        let grad = self.collect(p.len(), |i| {
            let col = self.mask_column(p, i)?;
            Ok(dot(&c2, &col))
        })?;
        Ok(self.result(sim.eval, grad, GradientMethod::ChainRule, start))
    }

    /// Sensitivity field on the predicted geometry, paired with per-parameter
    /// differences of litho predictions. No EM solves beyond one forward and one
    /// adjoint per wavelength.
    pub fn grad_numeric_perturbation(&self, p: &[T], h: T, stencil: Stencil) -> Result<GradientResult<T>, FaidError> {
        if !(h > T::zero()) {
            return Err(FaidError::Config(format!("perturbation step must be positive, got {h}")));
        }
        let start = self.em_solves();
        let (_, pred) = self.predicted(p)?;
        let sim = self.simulate(&pred, true)?;
        let c1 = sim.df_drho.expect("adjoint requested");
        let predict = |q: &[T]| -> Result<DensityGrid<T>, FaidError> { Ok(self.predicted(q)?.1) };
        let grad = self.collect(p.len(), |i| {
            let d = self.difference_column(p, i, h, stencil, Some(&pred), &predict)?;
            Ok(dot(&c1, &d))
        })?;
        Ok(self.result(sim.eval, grad, GradientMethod::NumericPerturbation, start))
    }

    /// Central differences of the full pipeline.
    pub fn grad_brute_force(&self, p: &[T], h: T) -> Result<GradientResult<T>, FaidError> {
        if p.len() > 60 {
            log::warn!("brute-force gradient over {} parameters: {} full evaluations", p.len(), 2 * p.len());
        }
        let start = self.em_solves();
        let eval = self.evaluate(p)?;
        let grad = central_differences(p, h, self.threads, |q| self.eval_fom(q).map(|f| f.transmission))?;
        Ok(self.result(eval, grad, GradientMethod::BruteForce, start))
    }

    pub fn gradient(&self, method: GradientMethod, p: &[T], h: T) -> Result<GradientResult<T>, FaidError> {
        match method {
            GradientMethod::ChainRule => self.grad_chain_rule(p),
            GradientMethod::NumericPerturbation => self.grad_numeric_perturbation(p, h, Stencil::Central),
            GradientMethod::BruteForce => self.grad_brute_force(p, h),
        }
    }

    fn collect(&self, n: usize, f: impl Fn(usize) -> Result<T, FaidError> + Sync) -> Result<Vec<T>, FaidError> {
        par_map(n, self.threads, f).into_iter().collect()
    }

    fn result(&self, eval: Evaluation<T>, grad: Vec<T>, method: GradientMethod, start: u64) -> GradientResult<T> {
        GradientResult {
            fom: eval.fom,
            grad,
            per_wavelength: eval.per_wavelength,
            method,
            em_solves: self.em_solves() - start,
        }
    }
}

/// `[f(p + h e_i) − f(p − h e_i)] / 2h` for every `i`.
pub fn central_differences<T: Real, E: Send>(
    p: &[T],
    h: T,
    threads: usize,
    f: impl Fn(&[T]) -> Result<T, E> + Sync,
) -> Result<Vec<T>, E> {
    par_map(p.len(), threads, |i| {
        let mut q = p.to_vec();
        q[i] = p[i] + h;
        let up = f(&q)?;
        q[i] = p[i] - h;
        let down = f(&q)?;
        Ok((up - down) / (h + h))
    })
    .into_iter()
    .collect()
}
