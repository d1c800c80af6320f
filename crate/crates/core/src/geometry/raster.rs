//! Exact area-coverage rasterization.
//!
//! Each polygon edge deposits signed area and cover into a per-row accumulation
//! buffer; a prefix sum along each row then yields the exact fraction of every cell
//! covered by the polygon interior. Polygons are normalized to counter-clockwise
//! order first so that non-overlapping pieces of one shape sum to their union.

use crate::geometry::{DensityGrid, GeometryError, GridSpec, Point, PolygonSet};
use crate::scalar::Real;

pub fn rasterize<T: Real>(polys: &PolygonSet<T>, grid: &GridSpec<T>) -> Result<DensityGrid<T>, GeometryError> {
    polys.validate()?;
    for (k, poly) in polys.polygons.iter().enumerate() {
        if let Some((v, p)) = poly.vertices.iter().enumerate().find(|(_, p)| !grid.contains_point(p.x, p.y)) {
            return Err(GeometryError::OutsideGrid {
                polygon: k,
                vertex: v,
                x: p.x.to_f64_lossy(),
                y: p.y.to_f64_lossy(),
            });
        }
    }

    let stride = grid.nx + 2;
    let mut acc = vec![T::zero(); stride * grid.ny];
    let inv = T::one() / grid.dx;
    for poly in &polys.polygons {
        let ccw = poly.signed_area() >= T::zero();
        let n = poly.vertices.len();
        let to_cell = |p: Point<T>| Point::new((p.x - grid.x0) * inv, (p.y - grid.y0) * inv);
        for k in 0..n {
            let (a, b) = (poly.vertices[k], poly.vertices[(k + 1) % n]);
            // Clockwise loops are traversed backwards.
            let (a, b) = if ccw { (a, b) } else { (b, a) };
            accumulate_edge(&mut acc, stride, grid.ny, to_cell(a), to_cell(b));
        }
    }

    let mut values = vec![T::zero(); grid.len()];
    for j in 0..grid.ny {
        let row = &acc[j * stride..(j + 1) * stride];
        let mut run = T::zero();
        for i in 0..grid.nx {
            run += row[i];
            // CCW loops accumulate negative cover under this edge convention.
            values[grid.index(i, j)] = (-run).max(T::zero()).min(T::one());
        }
    }
    Ok(DensityGrid { grid: *grid, values })
}

/// Deposits one line segment (in cell units) into the accumulation buffer.
fn accumulate_edge<T: Real>(acc: &mut [T], stride: usize, rows: usize, p0: Point<T>, p1: Point<T>) {
    if p0.y == p1.y {
        return;
    }
    let (dir, p0, p1) = if p0.y < p1.y { (T::one(), p0, p1) } else { (-T::one(), p1, p0) };
    let dxdy = (p1.x - p0.x) / (p1.y - p0.y);
    let mut x = p0.x;
    let y_start = p0.y.floor().max(T::zero()).to_usize().unwrap_or(0);
    let y_end = p1.y.ceil().to_usize().unwrap_or(0).min(rows);
    let half = T::lit(0.5);
    for y in y_start..y_end {
        let yf = T::from_usize_lossy(y);
        let line = y * stride;
        let dy = (yf + T::one()).min(p1.y) - yf.max(p0.y);
        let xnext = x + dxdy * dy;
        let d = dy * dir;
        let (x0, x1) = if x < xnext { (x, xnext) } else { (xnext, x) };
        let x0floor = x0.floor();
        let x0i = x0floor.to_usize().unwrap_or(0);
        let x1ceil = x1.ceil();
        let x1i = x1ceil.to_usize().unwrap_or(0);
        if x1i <= x0i + 1 {
            let xmf = half * (x + xnext) - x0floor;
            acc[line + x0i] += d - d * xmf;
            acc[line + x0i + 1] += d * xmf;
        } else {
            let s = T::one() / (x1 - x0);
            let x0f = x0 - x0floor;
            let a0 = half * s * (T::one() - x0f) * (T::one() - x0f);
            let x1f = x1 - x1ceil + T::one();
            let am = half * s * x1f * x1f;
            acc[line + x0i] += d * a0;
            if x1i == x0i + 2 {
                acc[line + x0i + 1] += d * (T::one() - a0 - am);
            } else {
                let a1 = s * (T::lit(1.5) - x0f);
                acc[line + x0i + 1] += d * (a1 - a0);
                for xi in x0i + 2..x1i - 1 {
                    acc[line + xi] += d * s;
                }
                let a2 = a1 + T::from_usize_lossy(x1i - x0i - 3) * s;
                acc[line + x1i - 1] += d * (T::one() - a2 - am);
            }
            acc[line + x1i] += d * am;
        }
        x = xnext;
    }
}
