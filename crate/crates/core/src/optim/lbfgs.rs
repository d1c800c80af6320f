//! Projected L-BFGS with Armijo backtracking on a box.

use std::collections::VecDeque;

use crate::scalar::{dot, norm2, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct OptConfig<T = f64> {
    pub max_iterations: usize,
    /// Number of stored `(s, y)` pairs.
    pub history: usize,
    /// Stop when the projected gradient's max-norm falls below this.
    pub grad_tol: T,
    /// Largest parameter move of the first (unscaled) step.
    pub initial_step: T,
    /// Sufficient-decrease constant.
    pub c1: T,
    pub max_line_search: usize,
}

impl<T: Real> Default for OptConfig<T> {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            history: 8,
            grad_tol: T::lit(1e-5),
            initial_step: T::lit(0.01),
            c1: T::lit(1e-4),
            max_line_search: 20,
        }
    }
}

impl<T: Real> OptConfig<T> {
    pub fn validate(&self) -> Result<(), String> {
        if self.history < 1 {
            return Err("history must be ≥ 1".into());
        }
        if !(self.c1 > T::zero() && self.c1 < T::one()) {
            return Err(format!("c1 must lie in (0, 1), got {}", self.c1));
        }
        if self.max_iterations < 1 {
            return Err("max_iterations must be ≥ 1".into());
        }
        if !(self.initial_step > T::zero()) || !(self.grad_tol >= T::zero()) || self.max_line_search < 1 {
            return Err("initial_step, grad_tol and max_line_search must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Termination {
    GradientTolerance,
    MaxIterations,
    LineSearchFailed,
    /// The objective returned an error; the trace up to that point is kept.
    ObjectiveFailed(String),
}

/// State after an accepted step (iteration 0 is the starting point).
#[derive(Debug, Clone, PartialEq)]
pub struct OptStep<T = f64> {
    pub iteration: usize,
    pub p: Vec<T>,
    pub objective: T,
    pub gradient: Vec<T>,
    /// Euclidean norm of the projected gradient.
    pub grad_norm: T,
    /// Euclidean length of the accepted move.
    pub step: T,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptResult<T = f64> {
    pub p: Vec<T>,
    pub objective: T,
    pub trace: Vec<OptStep<T>>,
    pub termination: Termination,
}

fn project<T: Real>(x: &[T], lo: &[T], hi: &[T]) -> Vec<T> {
    x.iter().zip(lo).zip(hi).map(|((&v, &l), &u)| v.max(l).min(u)).collect()
}

/// `x − P(x − g)`: zero exactly where the box blocks descent.
fn projected_gradient<T: Real>(x: &[T], g: &[T], lo: &[T], hi: &[T]) -> Vec<T> {
    let moved: Vec<T> = x.iter().zip(g).map(|(&x, &g)| x - g).collect();
    x.iter().zip(project(&moved, lo, hi)).map(|(&a, b)| a - b).collect()
}

/// Minimizes `f` over `[lower, upper]` from `p0`. `f` returns value and gradient;
/// `on_step` sees every accepted state, and may abort by returning an error.
pub fn minimize<T: Real, E: std::fmt::Display>(
    mut f: impl FnMut(&[T]) -> Result<(T, Vec<T>), E>,
    p0: &[T],
    lower: &[T],
    upper: &[T],
    cfg: &OptConfig<T>,
    mut on_step: impl FnMut(&OptStep<T>) -> Result<(), E>,
) -> OptResult<T> {
    let n = p0.len();
    assert!(lower.len() == n && upper.len() == n, "bounds must match the parameter count");
    let mut trace = Vec::new();
    let mut x = project(p0, lower, upper);
    let mut evaluations = 1;
    let (mut fx, mut g) = match f(&x) {
        Ok(v) => v,
        Err(e) => return OptResult { p: x, objective: T::nan(), trace, termination: Termination::ObjectiveFailed(e.to_string()) },
    };
    let mut hist: VecDeque<(Vec<T>, Vec<T>)> = VecDeque::new();
    let mut iteration = 0;
    let mut last_step = T::zero();

    let finish = |x: Vec<T>, fx: T, trace: Vec<OptStep<T>>, termination| OptResult { p: x, objective: fx, trace, termination };
    loop {
        let pg = projected_gradient(&x, &g, lower, upper);
        let state = OptStep {
            iteration,
            p: x.clone(),
            objective: fx,
            gradient: g.clone(),
            grad_norm: norm2(&pg),
            step: last_step,
            evaluations,
        };
        if let Err(e) = on_step(&state) {
            trace.push(state);
            return finish(x, fx, trace, Termination::ObjectiveFailed(e.to_string()));
        }
        trace.push(state);
        let pg_max = pg.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        if pg_max <= cfg.grad_tol {
            return finish(x, fx, trace, Termination::GradientTolerance);
        }
        if iteration >= cfg.max_iterations {
            return finish(x, fx, trace, Termination::MaxIterations);
        }

        // Free variables: those the box does not hold against the gradient.
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lower[i] && g[i] > T::zero()) || (x[i] >= upper[i] && g[i] < T::zero())))
            .collect();
        let mask = |v: &[T]| -> Vec<T> { v.iter().zip(&free).map(|(&a, &f)| if f { a } else { T::zero() }).collect() };
        let mut d = two_loop(&mask(&g), &hist, &mask);
        if !(dot(&d, &g) < T::zero()) {
            hist.clear();
            d = mask(&g).iter().map(|&v| -v).collect();
        }
        let mut alpha = if hist.is_empty() {
            let dmax = d.iter().fold(T::zero(), |m, v| m.max(v.abs()));
            cfg.initial_step / dmax
        } else {
            T::one()
        };

        let mut accepted = None;
        for _ in 0..cfg.max_line_search {
            let trial: Vec<T> = project(&x.iter().zip(&d).map(|(&a, &b)| a + alpha * b).collect::<Vec<_>>(), lower, upper);
            let s: Vec<T> = trial.iter().zip(&x).map(|(&a, &b)| a - b).collect();
            if s.iter().all(|v| *v == T::zero()) {
                break;
            }
            evaluations += 1;
            let (ft, gt) = match f(&trial) {
                Ok(v) => v,
                Err(e) => return finish(x, fx, trace, Termination::ObjectiveFailed(e.to_string())),
            };
            if ft.is_finite() && ft <= fx + cfg.c1 * dot(&g, &s) {
                accepted = Some((trial, s, ft, gt));
                break;
            }
            alpha = alpha * T::lit(0.5);
        }
        let Some((xn, s, fn_, gn)) = accepted else {
            return finish(x, fx, trace, Termination::LineSearchFailed);
        };
        let y: Vec<T> = gn.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > T::lit(1e-12) {
            if hist.len() == cfg.history {
                hist.pop_front();
            }
            hist.push_back((s.clone(), y));
        }
        last_step = norm2(&s);
        x = xn;
        fx = fn_;
        g = gn;
        iteration += 1;
    }
}

/// `−H g` from the stored pairs, restricted to the free subspace.
fn two_loop<T: Real>(g: &[T], hist: &VecDeque<(Vec<T>, Vec<T>)>, mask: &dyn Fn(&[T]) -> Vec<T>) -> Vec<T> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(hist.len());
    let pairs: Vec<(Vec<T>, Vec<T>)> = hist.iter().map(|(s, y)| (mask(s), mask(y))).collect();
    for (s, y) in pairs.iter().rev() {
        let sy = dot(s, y);
        if !(sy > T::zero()) {
            alphas.push(T::zero());
            continue;
        }
        let a = dot(s, &q) / sy;
        q.iter_mut().zip(y).for_each(|(q, &y)| *q -= a * y);
        alphas.push(a);
    }
    if let Some((s, y)) = pairs.iter().rev().find(|(s, y)| dot(s, y) > T::zero()) {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y), a) in pairs.iter().zip(alphas.iter().rev()) {
        let sy = dot(s, y);
        if !(sy > T::zero()) {
            continue;
        }
        let b = dot(y, &q) / sy;
        q.iter_mut().zip(s).for_each(|(q, &s)| *q += (*a - b) * s);
    }
    q.iter().map(|&v| -v).collect()
}
