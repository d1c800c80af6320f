//! Device parameterization and its conversion to polygons and density grids.

mod contour;
mod device;
mod grid;
mod jacobian;
mod params;
mod polygon;
mod raster;
pub mod spline;

pub use contour::contour_polygons;
pub use device::{
    DeviceKind, DeviceSpec, Direction, Layout, Port, Rect, StraightLayout, SwgLayout, YBranchLayout,
};
pub use grid::{DensityGrid, GridSpec};
pub use jacobian::{mask_jacobian_column, mask_jacobian_column_forward};
pub use params::DesignParams;
pub use polygon::{param_hash, Point, Polygon, PolygonSet};
pub use raster::rasterize;

use crate::scalar::Real;

#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("expected {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("self-intersecting boundary: {detail}")]
    SelfIntersection { detail: String },
    #[error("tooth {index} {what} {value} µm below minimum feature {min} µm")]
    MinFeature { what: &'static str, index: usize, value: f64, min: f64 },
    #[error("tooth {tooth} overlaps its neighbour")]
    Overlap { tooth: usize },
    #[error("grating length {total} µm exceeds design region {region} µm")]
    TeethExceedRegion { total: f64, region: f64 },
    #[error("polygon {polygon} vertex {vertex} at ({x}, {y}) lies outside the grid")]
    OutsideGrid { polygon: usize, vertex: usize, x: f64, y: f64 },
    #[error("polygon {polygon} has fewer than three vertices")]
    DegeneratePolygon { polygon: usize },
    #[error("polygon {polygon} has a non-finite coordinate")]
    NonFinite { polygon: usize },
    #[error("operation requires a {expected:?} device, got {got:?}")]
    WrongKind { expected: DeviceKind, got: DeviceKind },
    #[error("parse error: {0}")]
    Parse(String),
}

/// Convenience: `polygons(p)` for a Y-branch spec.
pub fn ybranch_polygons<T: Real>(spec: &DeviceSpec<T>, p: &DesignParams<T>) -> Result<PolygonSet<T>, GeometryError> {
    if spec.kind() != DeviceKind::YBranch {
        return Err(GeometryError::WrongKind { expected: DeviceKind::YBranch, got: spec.kind() });
    }
    spec.polygons(p.values())
}

/// Convenience: `polygons(p)` for an SWG converter spec.
pub fn swg_converter_polygons<T: Real>(
    spec: &DeviceSpec<T>,
    p: &DesignParams<T>,
) -> Result<PolygonSet<T>, GeometryError> {
    if spec.kind() != DeviceKind::SwgToStripConverter {
        return Err(GeometryError::WrongKind { expected: DeviceKind::SwgToStripConverter, got: spec.kind() });
    }
    spec.polygons(p.values())
}
