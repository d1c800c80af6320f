use crate::geometry::{rasterize, DensityGrid, DeviceSpec, GeometryError, GridSpec};
use crate::scalar::Real;

/// One-sided difference `(mask(p + h e_i) - mask(p)) / h`. First-order in `h`;
/// see [`mask_jacobian_column`] for the variant used by the gradient paths.
pub fn mask_jacobian_column_forward<T: Real>(
    spec: &DeviceSpec<T>,
    grid: &GridSpec<T>,
    p: &[T],
    i: usize,
    h: T,
) -> Result<Vec<T>, GeometryError> {
    check_step(spec, p, i, h)?;
    let base = rasterize(&spec.polygons(p)?, grid)?;
    let plus = rasterize(&spec.polygons(&shifted(p, i, h))?, grid)?;
    Ok(difference(&plus, &base, h))
}

/// Column `i` of `∂mask/∂p` as a signed vector on the grid, by central differences
/// `(mask(p + h e_i) - mask(p - h e_i)) / 2h`.
///
/// Exact-coverage rasterization is piecewise quadratic in boundary position, so the
/// one-sided difference carries an `O(h / dx)` error that the central form cancels.
pub fn mask_jacobian_column<T: Real>(
    spec: &DeviceSpec<T>,
    grid: &GridSpec<T>,
    p: &[T],
    i: usize,
    h: T,
) -> Result<Vec<T>, GeometryError> {
    check_step(spec, p, i, h)?;
    let plus = rasterize(&spec.polygons(&shifted(p, i, h))?, grid)?;
    let minus = rasterize(&spec.polygons(&shifted(p, i, -h))?, grid)?;
    Ok(difference(&plus, &minus, h + h))
}

fn check_step<T: Real>(spec: &DeviceSpec<T>, p: &[T], i: usize, h: T) -> Result<(), GeometryError> {
    if p.len() != spec.param_count() {
        return Err(GeometryError::ParamCount { expected: spec.param_count(), got: p.len() });
    }
    if i >= p.len() {
        return Err(GeometryError::InvalidParams(format!("parameter index {i} out of range 0..{}", p.len())));
    }
    if !(h > T::zero()) {
        return Err(GeometryError::InvalidParams(format!("difference step must be positive, got {h}")));
    }
    Ok(())
}

fn shifted<T: Real>(p: &[T], i: usize, h: T) -> Vec<T> {
    let mut q = p.to_vec();
    q[i] += h;
    q
}

fn difference<T: Real>(a: &DensityGrid<T>, b: &DensityGrid<T>, scale: T) -> Vec<T> {
    a.values.iter().zip(&b.values).map(|(&x, &y)| (x - y) / scale).collect()
}
