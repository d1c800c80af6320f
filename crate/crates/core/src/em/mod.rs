//! 2D scalar frequency-domain Helmholtz solver with absorbing layers and modal
//! transmission between ports.

mod assemble;
mod band;
mod material;
mod modes;
mod port;
mod solve;

pub use assemble::{assemble, Pml, SystemMatrix};
pub use band::BandLdlt;
pub use material::{density_to_eps, Materials, PermittivityGrid};
pub use modes::{solve_modes, ModeProfile};
pub use port::{mode_overlap_fom, FomValue, PortMode};
pub use solve::{
    factorize, sensitivity_field, solve_adjoint, solve_forward, Factorized, FieldKind, FieldSolution,
    SensitivityField,
};

#[derive(Debug, thiserror::Error)]
pub enum EmError {
    #[error("solver configuration: {0}")]
    Config(String),
    #[error("invalid solver input: {0}")]
    InvalidInput(String),
    #[error("no guided mode on port slice")]
    NoGuidedMode,
    #[error("port '{name}' slice lies outside the grid")]
    PortOutsideGrid { name: String },
    #[error("grids or wavelengths do not match")]
    GridMismatch,
    #[error("factorization failed at column {column}: |pivot| = {pivot:e} (matrix scale {scale:e})")]
    Factorization { column: usize, pivot: f64, scale: f64 },
    #[error("solve did not converge: relative residual {relative:e} (pivot ratio {pivot_ratio:e})")]
    Residual { relative: f64, pivot_ratio: f64 },
}
