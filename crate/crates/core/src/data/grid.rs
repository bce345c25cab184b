use crate::{Error, Result};

/// Scalar field on the nodes of a regular grid over the unit square.
///
/// Node `(i, j)` sits at `x = i·hx`, `y = j·hy` with `hx = 1/(nx−1)`,
/// `hy = 1/(ny−1)`; values are stored row-major with `x` varying fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if nx < 3 || ny < 3 {
            return Err(Error::InvalidArgument(format!("grid must be at least 3x3, got {nx}x{ny}")));
        }
        if values.len() != nx * ny {
            return Err(Error::InvalidArgument(format!(
                "{nx}x{ny} grid needs {} values, got {}",
                nx * ny,
                values.len()
            )));
        }
        if let Some(p) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { context: format!("grid field node {p}") });
        }
        Ok(Self { nx, ny, values })
    }

    pub fn from_fn(nx: usize, ny: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let (hx, hy) = (1.0 / (nx as f64 - 1.0), 1.0 / (ny as f64 - 1.0));
        let mut v = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                v.push(f(i as f64 * hx, j as f64 * hy));
            }
        }
        Self::new(nx, ny, v)
    }

    pub fn constant(nx: usize, ny: usize, value: f64) -> Result<Self> {
        Self::new(nx, ny, vec![value; nx * ny])
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn hx(&self) -> f64 {
        1.0 / (self.nx as f64 - 1.0)
    }

    pub fn hy(&self) -> f64 {
        1.0 / (self.ny as f64 - 1.0)
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.idx(i, j)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.nx - 1 || j == self.ny - 1
    }

    pub fn same_grid(&self, other: &GridField) -> bool {
        self.nx == other.nx && self.ny == other.ny
    }

    pub(crate) fn check_same(&self, other: &GridField, op: &'static str) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::shape(op, format!("{}x{} vs {}x{}", self.nx, self.ny, other.nx, other.ny)))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<GridField> {
        Self::new(self.nx, self.ny, self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }
}
