use crate::geometry::GeometryError;
use crate::scalar::Real;

/// Uniform square-cell grid. Cell `(i, j)` covers
/// `[x0 + i*dx, x0 + (i+1)*dx] x [y0 + j*dx, y0 + (j+1)*dx]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec<T = f64> {
    pub nx: usize,
    pub ny: usize,
    /// Cell size in µm.
    pub dx: T,
    pub x0: T,
    pub y0: T,
}

impl<T: Real> GridSpec<T> {
    pub const MIN_CELLS: usize = 8;

    pub fn new(nx: usize, ny: usize, dx: T, x0: T, y0: T) -> Result<Self, GeometryError> {
        if nx < Self::MIN_CELLS || ny < Self::MIN_CELLS {
            return Err(GeometryError::InvalidGrid(format!(
                "grid must have at least {} cells per axis, got {nx}x{ny}",
                Self::MIN_CELLS
            )));
        }
        if !(dx > T::zero()) || !dx.is_finite() {
            return Err(GeometryError::InvalidGrid(format!("cell size must be positive, got {dx}")));
        }
        if !x0.is_finite() || !y0.is_finite() {
            return Err(GeometryError::InvalidGrid("grid origin must be finite".into()));
        }
        Ok(Self { nx, ny, dx, x0, y0 })
    }

    /// Smallest grid with cell size `dx` covering the rectangle `[x_min, x_max] x [y_min, y_max]`.
    pub fn covering(x_min: T, x_max: T, y_min: T, y_max: T, dx: T) -> Result<Self, GeometryError> {
        let slack = T::lit(1e-9);
        let nx = ((x_max - x_min) / dx - slack).ceil().to_usize().unwrap_or(0);
        let ny = ((y_max - y_min) / dx - slack).ceil().to_usize().unwrap_or(0);
        Self::new(nx, ny, dx, x_min, y_min)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major linear index (x fastest).
    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn x_max(&self) -> T {
        self.x0 + T::from_usize_lossy(self.nx) * self.dx
    }

    pub fn y_max(&self) -> T {
        self.y0 + T::from_usize_lossy(self.ny) * self.dx
    }

    pub fn cell_center_x(&self, i: usize) -> T {
        self.x0 + (T::from_usize_lossy(i) + T::lit(0.5)) * self.dx
    }

    pub fn cell_center_y(&self, j: usize) -> T {
        self.y0 + (T::from_usize_lossy(j) + T::lit(0.5)) * self.dx
    }

    /// Column whose cell contains `x`, if inside the grid.
    pub fn column_of(&self, x: T) -> Option<usize> {
        let u = ((x - self.x0) / self.dx).floor();
        if u < T::zero() {
            return None;
        }
        u.to_usize().filter(|&i| i < self.nx)
    }

    /// Rows whose cell centers lie in `[y_lo, y_hi]`.
    pub fn rows_between(&self, y_lo: T, y_hi: T) -> std::ops::Range<usize> {
        let first = (0..self.ny).find(|&j| self.cell_center_y(j) >= y_lo).unwrap_or(self.ny);
        let last = (0..self.ny).rev().find(|&j| self.cell_center_y(j) <= y_hi).map_or(0, |j| j + 1);
        first..last.max(first)
    }

    pub fn contains_point(&self, x: T, y: T) -> bool {
        x >= self.x0 && x <= self.x_max() && y >= self.y0 && y <= self.y_max()
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.nx == other.nx && self.ny == other.ny
    }
}

/// Material density `ρ ∈ [0, 1]` sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid<T = f64> {
    pub grid: GridSpec<T>,
    pub values: Vec<T>,
}

impl<T: Real> DensityGrid<T> {
    pub fn zeros(grid: GridSpec<T>) -> Self {
        Self { grid, values: vec![T::zero(); grid.len()] }
    }

    pub fn filled(grid: GridSpec<T>, value: T) -> Result<Self, GeometryError> {
        Self::from_values(grid, vec![value; grid.len()])
    }

    /// Builds a grid, checking shape and the `[0, 1]` range.
    pub fn from_values(grid: GridSpec<T>, values: Vec<T>) -> Result<Self, GeometryError> {
        if values.len() != grid.len() {
            return Err(GeometryError::InvalidGrid(format!(
                "expected {} values for a {}x{} grid, got {}",
                grid.len(),
                grid.nx,
                grid.ny,
                values.len()
            )));
        }
        if let Some(k) = values.iter().position(|&v| !(v >= T::zero() && v <= T::one())) {
            return Err(GeometryError::InvalidGrid(format!(
                "density value {} at cell {k} outside [0, 1]",
                values[k]
            )));
        }
        Ok(Self { grid, values })
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.values[self.grid.index(i, j)]
    }

    /// Total material area `Σρ·dx²` in µm².
    pub fn mass(&self) -> T {
        let s: T = self.values.iter().copied().sum();
        s * self.grid.dx * self.grid.dx
    }
}
