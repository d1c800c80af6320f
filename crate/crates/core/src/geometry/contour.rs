//! Marching-squares iso-contours of a density grid.

use std::collections::HashMap;

use crate::geometry::{DensityGrid, Point, Polygon, PolygonSet};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Edge {
    /// Between nodes (i, j) and (i + 1, j).
    H(usize, usize),
    /// Between nodes (i, j) and (i, j + 1).
    V(usize, usize),
}

/// Closed loops of the `level` iso-line through cell centers. The grid is padded
/// with a ring of zeros so that every loop closes.
pub fn contour_polygons<T: Real>(rho: &DensityGrid<T>, level: T) -> PolygonSet<T> {
    let g = rho.grid;
    let (w, h) = (g.nx + 2, g.ny + 2);
    let node = |i: usize, j: usize| -> T {
        if i == 0 || j == 0 || i == w - 1 || j == h - 1 {
            T::zero()
        } else {
            rho.get(i - 1, j - 1)
        }
    };
    let pos = |i: usize, j: usize| -> (T, T) {
        (
            g.x0 + (T::from_usize_lossy(i) - T::lit(0.5)) * g.dx,
            g.y0 + (T::from_usize_lossy(j) - T::lit(0.5)) * g.dx,
        )
    };
    let crossing = |e: Edge| -> Point<T> {
        let ((ia, ja), (ib, jb)) = match e {
            Edge::H(i, j) => ((i, j), (i + 1, j)),
            Edge::V(i, j) => ((i, j), (i, j + 1)),
        };
        let (va, vb) = (node(ia, ja), node(ib, jb));
        let t = if vb == va { T::lit(0.5) } else { (level - va) / (vb - va) };
        let (xa, ya) = pos(ia, ja);
        let (xb, yb) = pos(ib, jb);
        Point::new(xa + t * (xb - xa), ya + t * (yb - ya))
    };

    let mut segments: Vec<(Edge, Edge)> = Vec::new();
    for j in 0..h - 1 {
        for i in 0..w - 1 {
            let v = [node(i, j), node(i + 1, j), node(i + 1, j + 1), node(i, j + 1)];
            let inside = v.map(|x| x >= level);
            let code = inside.iter().enumerate().fold(0u8, |c, (k, &b)| c | ((b as u8) << k));
            let (bottom, right, top, left) = (Edge::H(i, j), Edge::V(i + 1, j), Edge::H(i, j + 1), Edge::V(i, j));
            let center_in = (v[0] + v[1] + v[2] + v[3]) * T::lit(0.25) >= level;
            match code {
                0 | 15 => {}
                1 | 14 => segments.push((left, bottom)),
                2 | 13 => segments.push((bottom, right)),
                3 | 12 => segments.push((left, right)),
                4 | 11 => segments.push((right, top)),
                6 | 9 => segments.push((bottom, top)),
                7 | 8 => segments.push((left, top)),
                5 => {
                    if center_in {
                        segments.push((left, top));
                        segments.push((bottom, right));
                    } else {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    }
                }
                10 => {
                    if center_in {
                        segments.push((left, bottom));
                        segments.push((right, top));
                    } else {
                        segments.push((left, top));
                        segments.push((bottom, right));
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    let mut by_edge: HashMap<Edge, Vec<usize>> = HashMap::new();
    for (s, &(a, b)) in segments.iter().enumerate() {
        by_edge.entry(a).or_default().push(s);
        by_edge.entry(b).or_default().push(s);
    }
    let mut used = vec![false; segments.len()];
    let mut loops = Vec::new();
    for start in 0..segments.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (first, mut at) = segments[start];
        let mut verts = vec![crossing(first)];
        while at != first {
            verts.push(crossing(at));
            let next = by_edge[&at].iter().copied().find(|&s| !used[s]);
            let Some(s) = next else { break };
            used[s] = true;
            let (a, b) = segments[s];
            at = if a == at { b } else { a };
        }
        if verts.len() >= 3 {
            loops.push(Polygon::new(verts));
        }
    }
    PolygonSet::new(loops)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{rasterize, GridSpec};

    #[test]
    fn square_contour_recovers_area() {
        let g = GridSpec::new(40, 40, 0.05, 0.0, 0.0).unwrap();
        let sq = PolygonSet::new(vec![Polygon::rect(0.5f64, 0.5, 1.5, 1.25)]);
        let rho = rasterize(&sq, &g).unwrap();
        let c = contour_polygons(&rho, 0.5);
        assert_eq!(c.len(), 1);
        // Corners are cut by the linear interpolation; the area is close.
        assert!((c.total_area() - 0.75).abs() < 0.01, "area {}", c.total_area());
    }

    #[test]
    fn two_blobs_two_loops() {
        let g = GridSpec::new(30, 20, 0.1, 0.0, 0.0).unwrap();
        let set = PolygonSet::new(vec![Polygon::rect(0.3, 0.3, 0.9, 0.9), Polygon::rect(1.5, 0.4, 2.5, 1.6)]);
        let rho = rasterize(&set, &g).unwrap();
        assert_eq!(contour_polygons(&rho, 0.5).len(), 2);
    }
}
