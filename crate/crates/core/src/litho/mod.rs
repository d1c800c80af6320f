//! Lithography prediction models: the map from drawn mask to printed density.

mod external;
mod gaussian;

use crate::geometry::DensityGrid;
use crate::io::FormatError;
use crate::scalar::Real;

pub use external::{ExternalConfig, ExternalPredictor};
pub use gaussian::{GaussianThreshold, GaussianThresholdParams};

#[derive(Debug, thiserror::Error)]
pub enum LithoError {
    #[error("litho configuration: {0}")]
    Config(String),
    #[error("litho model '{0}' is not differentiable")]
    NonDifferentiableModel(String),
    #[error("shape mismatch: expected {expected} cells, got {got}")]
    Shape { expected: usize, got: usize },
    #[error("external predictor failed with {status}: {stderr}")]
    ExternalPredictorFailed { status: String, stderr: String },
    #[error("external predictor timed out after {seconds} s")]
    ExternalTimeout { seconds: f64 },
    #[error("could not launch external predictor '{command}': {source}")]
    ExternalSpawn { command: String, source: std::io::Error },
    #[error("external predictor output unreadable: {0}")]
    ExternalOutput(FormatError),
    #[error("external predictor returned a {nx}x{ny} grid for a {expected_nx}x{expected_ny} mask")]
    ExternalShape { expected_nx: usize, expected_ny: usize, nx: usize, ny: usize },
    #[error("exchange directory: {0}")]
    Exchange(std::io::Error),
}

/// The transformation from drawn mask to predicted printed density.
pub trait LithoModel<T: Real>: Send + Sync {
    fn name(&self) -> String;

    fn predict(&self, mask: &DensityGrid<T>) -> Result<DensityGrid<T>, LithoError>;

    fn differentiable(&self) -> bool {
        false
    }

    /// `Jᵀ cot` with `J = ∂predict/∂mask` at `mask`.
    fn vjp(&self, _mask: &DensityGrid<T>, _cot: &[T]) -> Result<Vec<T>, LithoError> {
        Err(LithoError::NonDifferentiableModel(self.name()))
    }
}

fn check_len(expected: usize, got: usize) -> Result<(), LithoError> {
    if expected != got {
        return Err(LithoError::Shape { expected, got });
    }
    Ok(())
}

/// Ideal process: the printed density equals the mask.
#[derive(Debug, Clone, Copy, Default)]
pub struct Identity;

impl<T: Real> LithoModel<T> for Identity {
    fn name(&self) -> String {
        "identity".into()
    }

    fn predict(&self, mask: &DensityGrid<T>) -> Result<DensityGrid<T>, LithoError> {
        Ok(mask.clone())
    }

    fn differentiable(&self) -> bool {
        true
    }

    fn vjp(&self, mask: &DensityGrid<T>, cot: &[T]) -> Result<Vec<T>, LithoError> {
        check_len(mask.values.len(), cot.len())?;
        Ok(cot.to_vec())
    }
}

/// Applies models in sequence.
pub struct Chain<T: Real> {
    pub stages: Vec<Box<dyn LithoModel<T>>>,
}

impl<T: Real> LithoModel<T> for Chain<T> {
    fn name(&self) -> String {
        self.stages.iter().map(|s| s.name()).collect::<Vec<_>>().join("+")
    }

    fn predict(&self, mask: &DensityGrid<T>) -> Result<DensityGrid<T>, LithoError> {
        let mut cur = mask.clone();
        for s in &self.stages {
            cur = s.predict(&cur)?;
        }
        Ok(cur)
    }

    fn differentiable(&self) -> bool {
        self.stages.iter().all(|s| s.differentiable())
    }

    fn vjp(&self, mask: &DensityGrid<T>, cot: &[T]) -> Result<Vec<T>, LithoError> {
        let mut inputs = vec![mask.clone()];
        for s in &self.stages[..self.stages.len().saturating_sub(1)] {
            let next = s.predict(inputs.last().unwrap())?;
            inputs.push(next);
        }
        let mut c = cot.to_vec();
        for (s, x) in self.stages.iter().zip(&inputs).rev() {
            c = s.vjp(x, &c)?;
        }
        Ok(c)
    }
}
