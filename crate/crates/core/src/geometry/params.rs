use crate::geometry::GeometryError;
use crate::scalar::Real;

/// Design parameter vector with elementwise box bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignParams<T = f64> {
    values: Vec<T>,
    lower: Vec<T>,
    upper: Vec<T>,
}

impl<T: Real> DesignParams<T> {
    pub fn new(values: Vec<T>, lower: Vec<T>, upper: Vec<T>) -> Result<Self, GeometryError> {
        if values.len() != lower.len() || values.len() != upper.len() {
            return Err(GeometryError::InvalidParams(format!(
                "length mismatch: {} values, {} lower, {} upper",
                values.len(),
                lower.len(),
                upper.len()
            )));
        }
        for (k, ((&v, &lo), &hi)) in values.iter().zip(&lower).zip(&upper).enumerate() {
            if !v.is_finite() || !lo.is_finite() || !hi.is_finite() {
                return Err(GeometryError::InvalidParams(format!("parameter {k} is not finite")));
            }
            if !(lo <= v && v <= hi) {
                return Err(GeometryError::InvalidParams(format!(
                    "parameter {k} = {v} outside bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(Self { values, lower, upper })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn lower(&self) -> &[T] {
        &self.lower
    }

    pub fn upper(&self) -> &[T] {
        &self.upper
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same bounds, new values (checked).
    pub fn with_values(&self, values: Vec<T>) -> Result<Self, GeometryError> {
        Self::new(values, self.lower.clone(), self.upper.clone())
    }

    /// Clamps `values` into the box.
    pub fn project(&self, values: &mut [T]) {
        for ((v, &lo), &hi) in values.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.max(lo).min(hi);
        }
    }

    pub fn midpoint(&self) -> Vec<T> {
        let half = T::lit(0.5);
        self.lower.iter().zip(&self.upper).map(|(&lo, &hi)| half * (lo + hi)).collect()
    }
}
