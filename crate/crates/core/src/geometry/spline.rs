use crate::scalar::Real;

/// Natural cubic spline through `(knots[k], values[k])`.
#[derive(Debug, Clone)]
pub struct NaturalSpline<T> {
    knots: Vec<T>,
    values: Vec<T>,
    second: Vec<T>,
}

impl<T: Real> NaturalSpline<T> {
    /// `knots` must be strictly increasing with at least two entries.
    pub fn new(knots: &[T], values: &[T]) -> Self {
        assert_eq!(knots.len(), values.len());
        assert!(knots.len() >= 2);
        let n = knots.len();
        let mut second = vec![T::zero(); n];
        if n > 2 {
            // Thomas algorithm on the interior second-derivative system.
            let m = n - 2;
            let mut diag = vec![T::zero(); m];
            let mut rhs = vec![T::zero(); m];
            let mut upper = vec![T::zero(); m];
            let two = T::lit(2.0);
            let six = T::lit(6.0);
            for k in 0..m {
                let h0 = knots[k + 1] - knots[k];
                let h1 = knots[k + 2] - knots[k + 1];
                diag[k] = two * (h0 + h1);
                upper[k] = h1;
                rhs[k] = six * ((values[k + 2] - values[k + 1]) / h1 - (values[k + 1] - values[k]) / h0);
            }
            for k in 1..m {
                let lower = knots[k + 1] - knots[k];
                let w = lower / diag[k - 1];
                diag[k] -= w * upper[k - 1];
                rhs[k] = rhs[k] - w * rhs[k - 1];
            }
            second[m] = rhs[m - 1] / diag[m - 1];
            for k in (0..m - 1).rev() {
                second[k + 1] = (rhs[k] - upper[k] * second[k + 2]) / diag[k];
            }
        }
        Self { knots: knots.to_vec(), values: values.to_vec(), second }
    }

    pub fn eval(&self, x: T) -> T {
        let n = self.knots.len();
        let k = match self.knots.iter().rposition(|&t| t <= x) {
            Some(k) if k >= n - 1 => n - 2,
            Some(k) => k,
            None => 0,
        };
        let h = self.knots[k + 1] - self.knots[k];
        let a = (self.knots[k + 1] - x) / h;
        let b = (x - self.knots[k]) / h;
        let six = T::lit(6.0);
        a * self.values[k]
            + b * self.values[k + 1]
            + ((a * a * a - a) * self.second[k] + (b * b * b - b) * self.second[k + 1]) * h * h / six
    }
}

/// Points on `[a, b]` that include every knot, with spacing at most `step` between them.
pub fn sample_with_knots<T: Real>(knots: &[T], step: T) -> Vec<T> {
    let mut xs = Vec::new();
    for w in knots.windows(2) {
        let pieces = ((w[1] - w[0]) / step).ceil().to_usize().unwrap_or(1).max(1);
        for s in 0..pieces {
            xs.push(w[0] + (w[1] - w[0]) * T::from_usize_lossy(s) / T::from_usize_lossy(pieces));
        }
    }
    xs.push(*knots.last().expect("non-empty knots"));
    xs
}

/// `n` evenly spaced knots on `[a, b]`, both ends included.
pub fn even_knots<T: Real>(a: T, b: T, n: usize) -> Vec<T> {
    assert!(n >= 2);
    (0..n).map(|k| a + (b - a) * T::from_usize_lossy(k) / T::from_usize_lossy(n - 1)).collect()
}
