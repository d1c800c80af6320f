use std::fmt::Write as _;

use crate::geometry::GeometryError;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point<T = f64> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Point<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }
}

/// Closed vertex loop; the closing edge from the last vertex back to the first is implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon<T = f64> {
    pub vertices: Vec<Point<T>>,
}

impl<T: Real> Polygon<T> {
    pub fn new(vertices: Vec<Point<T>>) -> Self {
        Self { vertices }
    }

    pub fn rect(x_lo: T, y_lo: T, x_hi: T, y_hi: T) -> Self {
        Self::new(vec![
            Point::new(x_lo, y_lo),
            Point::new(x_hi, y_lo),
            Point::new(x_hi, y_hi),
            Point::new(x_lo, y_hi),
        ])
    }

    /// Shoelace signed area, positive for counter-clockwise loops.
    pub fn signed_area(&self) -> T {
        let n = self.vertices.len();
        let mut acc = T::zero();
        for k in 0..n {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            acc += a.x * b.y - b.x * a.y;
        }
        acc * T::lit(0.5)
    }

    pub fn area(&self) -> T {
        self.signed_area().abs()
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point<T>, Point<T>)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |k| (self.vertices[k], self.vertices[(k + 1) % n]))
    }

    pub(crate) fn validate(&self, index: usize) -> Result<(), GeometryError> {
        if self.vertices.len() < 3 {
            return Err(GeometryError::DegeneratePolygon { polygon: index });
        }
        if self.vertices.iter().any(|v| !v.x.is_finite() || !v.y.is_finite()) {
            return Err(GeometryError::NonFinite { polygon: index });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PolygonSet<T = f64> {
    pub polygons: Vec<Polygon<T>>,
}

impl<T: Real> PolygonSet<T> {
    pub fn new(polygons: Vec<Polygon<T>>) -> Self {
        Self { polygons }
    }

    pub fn len(&self) -> usize {
        self.polygons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polygons.is_empty()
    }

    pub fn total_area(&self) -> T {
        self.polygons.iter().map(Polygon::area).sum()
    }

    pub fn push(&mut self, polygon: Polygon<T>) {
        self.polygons.push(polygon);
    }

    pub fn extend(&mut self, other: PolygonSet<T>) {
        self.polygons.extend(other.polygons);
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        self.polygons.iter().enumerate().try_for_each(|(k, p)| p.validate(k))
    }

    /// Plain-text export: a `#` header line, then one block of `x y` lines per polygon,
    /// blocks separated by a blank line.
    pub fn to_text(&self, device_kind: &str, param_hash: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# device={device_kind} params={param_hash} polygons={}", self.len());
        for (k, poly) in self.polygons.iter().enumerate() {
            if k > 0 {
                out.push('\n');
            }
            for v in &poly.vertices {
                let _ = writeln!(out, "{} {}", v.x, v.y);
            }
        }
        out
    }

    /// Parses the format written by [`PolygonSet::to_text`]; `#` lines are ignored.
    pub fn from_text(text: &str) -> Result<Self, GeometryError> {
        let mut polygons = Vec::new();
        let mut current = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.starts_with('#') {
                continue;
            }
            if line.is_empty() {
                if !current.is_empty() {
                    polygons.push(Polygon::new(std::mem::take(&mut current)));
                }
                continue;
            }
            let mut it = line.split_whitespace().map(str::parse::<f64>);
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(x)), Some(Ok(y)), None) => current.push(Point::new(T::lit(x), T::lit(y))),
                _ => {
                    return Err(GeometryError::Parse(format!(
                        "line {}: expected `x y`, got `{line}`",
                        lineno + 1
                    )))
                }
            }
        }
        if !current.is_empty() {
            polygons.push(Polygon::new(current));
        }
        let set = Self { polygons };
        set.validate()?;
        Ok(set)
    }
}

/// Stable short hash of a parameter vector, used in export headers.
pub fn param_hash<T: Real>(values: &[T]) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_f64_lossy().to_le_bytes());
    }
    hex::encode(&h.finalize()[..8])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shoelace_orientation() {
        let sq = Polygon::rect(0.0, 0.0, 2.0, 1.0);
        assert_eq!(sq.signed_area(), 2.0);
        let mut rev = sq.clone();
        rev.vertices.reverse();
        assert_eq!(rev.signed_area(), -2.0);
    }

    #[test]
    fn text_format_round_trip() {
        let set = PolygonSet::new(vec![
            Polygon::rect(0.0, 0.0, 1.5, 0.25),
            Polygon::new(vec![Point::new(0.1, 0.2), Point::new(0.3, 0.2), Point::new(0.2, 0.123456789)]),
        ]);
        let text = set.to_text("ybranch", &param_hash(&[0.0f64, 1.0]));
        assert!(text.starts_with("# device=ybranch params="));
        assert_eq!(PolygonSet::<f64>::from_text(&text).unwrap(), set);
    }

    #[test]
    fn too_few_vertices_rejected() {
        let err = PolygonSet::<f64>::from_text("0 0\n1 1\n").unwrap_err();
        assert!(matches!(err, GeometryError::DegeneratePolygon { polygon: 0 }));
    }
}
