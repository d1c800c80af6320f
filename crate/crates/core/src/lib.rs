//! Fabrication-aware adjoint shape optimization for 2D photonic devices,
//! generic over `f32`/`f64`.

pub mod em;
pub mod faid;
pub mod geometry;
pub mod io;
pub mod litho;
pub mod optim;
pub mod scalar;

pub type Pipeline = faid::Pipeline<f64>;
pub type Pipeline32 = faid::Pipeline<f32>;
pub type DeviceSpec = geometry::DeviceSpec<f64>;
pub type DeviceSpec32 = geometry::DeviceSpec<f32>;
pub type DensityGrid = geometry::DensityGrid<f64>;
pub type DensityGrid32 = geometry::DensityGrid<f32>;
pub type DesignParams = geometry::DesignParams<f64>;
pub type DesignParams32 = geometry::DesignParams<f32>;
pub type GaussianThreshold = litho::GaussianThreshold<f64>;
pub type GaussianThreshold32 = litho::GaussianThreshold<f32>;
pub type OptConfig = optim::OptConfig<f64>;
pub type OptConfig32 = optim::OptConfig<f32>;
