use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::data::GridField;
use crate::diffcore::CsrMatrix;

/// Precomputed linear operators for one grid size.
#[derive(Debug)]
pub struct GridOps {
    pub nx: usize,
    pub ny: usize,
    /// `∂/∂x`: central in the interior, second-order one-sided on the edges.
    pub dx: Arc<CsrMatrix>,
    pub dy: Arc<CsrMatrix>,
    /// Trapezoidal quadrature weights (sum to 1).
    pub quad_weights: Vec<f64>,
    /// 1 on interior nodes, 0 on the boundary.
    pub interior: Vec<f64>,
    /// 1 on boundary nodes, 0 in the interior.
    pub boundary: Vec<f64>,
    /// `16·x(1−x)·y(1−y)`, zero on the boundary and one at the center.
    pub bubble: Vec<f64>,
}

fn stencil_1d(n: usize, h: f64, i: usize) -> [(usize, f64); 3] {
    let s = 1.0 / (2.0 * h);
    if i == 0 {
        [(0, -3.0 * s), (1, 4.0 * s), (2, -s)]
    } else if i == n - 1 {
        [(n - 1, 3.0 * s), (n - 2, -4.0 * s), (n - 3, s)]
    } else {
        [(i - 1, -s), (i + 1, s), (i, 0.0)]
    }
}

impl GridOps {
    pub fn new(nx: usize, ny: usize) -> Self {
        assert!(nx >= 3 && ny >= 3, "grid must be at least 3x3");
        let (hx, hy) = (1.0 / (nx as f64 - 1.0), 1.0 / (ny as f64 - 1.0));
        let n = nx * ny;
        let mut dx_rows = Vec::with_capacity(n);
        let mut dy_rows = Vec::with_capacity(n);
        let mut quad_weights = Vec::with_capacity(n);
        let mut interior = Vec::with_capacity(n);
        let mut bubble = Vec::with_capacity(n);
        for j in 0..ny {
            for i in 0..nx {
                dx_rows
                    .push(stencil_1d(nx, hx, i).iter().filter(|e| e.1 != 0.0).map(|&(c, v)| (j * nx + c, v)).collect());
                dy_rows
                    .push(stencil_1d(ny, hy, j).iter().filter(|e| e.1 != 0.0).map(|&(c, v)| (c * nx + i, v)).collect());
                let cx = if i == 0 || i == nx - 1 { 0.5 } else { 1.0 };
                let cy = if j == 0 || j == ny - 1 { 0.5 } else { 1.0 };
                quad_weights.push(cx * cy * hx * hy);
                let inside = i > 0 && j > 0 && i < nx - 1 && j < ny - 1;
                interior.push(if inside { 1.0 } else { 0.0 });
                let (x, y) = (i as f64 * hx, j as f64 * hy);
                bubble.push(if inside { 16.0 * x * (1.0 - x) * y * (1.0 - y) } else { 0.0 });
            }
        }
        let boundary = interior.iter().map(|v| 1.0 - v).collect();
        Self {
            nx,
            ny,
            dx: Arc::new(CsrMatrix::from_rows(n, dx_rows)),
            dy: Arc::new(CsrMatrix::from_rows(n, dy_rows)),
            quad_weights,
            interior,
            boundary,
            bubble,
        }
    }

    pub fn interior_count(&self) -> usize {
        (self.nx - 2) * (self.ny - 2)
    }

    pub fn boundary_count(&self) -> usize {
        self.nx * self.ny - self.interior_count()
    }
}

/// Shared operators for `nx × ny`, built once per size.
pub fn grid_ops(nx: usize, ny: usize) -> Arc<GridOps> {
    type Cache = Mutex<HashMap<(usize, usize), Arc<GridOps>>>;
    static CACHE: OnceLock<Cache> = OnceLock::new();
    let mut map = CACHE.get_or_init(Default::default).lock().unwrap();
    Arc::clone(map.entry((nx, ny)).or_insert_with(|| Arc::new(GridOps::new(nx, ny))))
}

/// `(∂T/∂x, ∂T/∂y)` by explicit finite-difference stencils.
pub fn grad_field(t: &GridField) -> (GridField, GridField) {
    let ops = grid_ops(t.nx(), t.ny());
    let tx = ops.dx.apply(t.values());
    let ty = ops.dy.apply(t.values());
    (
        GridField::new(t.nx(), t.ny(), tx).expect("finite derivative"),
        GridField::new(t.nx(), t.ny(), ty).expect("finite derivative"),
    )
}
