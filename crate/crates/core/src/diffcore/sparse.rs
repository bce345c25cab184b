use super::tensor::Tensor;

/// Compressed-sparse-row matrix; used for fixed linear stencils inside graphs.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists. Duplicate columns are kept
    /// as separate entries (they sum on application).
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in &rows {
            for &(c, v) in row {
                assert!(c < cols, "column {c} out of range {cols}");
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self { rows: rows.len(), cols, indptr, indices, values }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// `y = A·x` for a vector.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|r| (self.indptr[r]..self.indptr[r + 1]).map(|e| self.values[e] * x[self.indices[e]]).sum())
            .collect()
    }

    /// `Y = A·X` where `X` has `cols` rows.
    pub(crate) fn apply_mat(&self, x: &Tensor) -> Tensor {
        let c = x.cols();
        let xd = x.data();
        let mut out = vec![0.0; self.rows * c];
        for r in 0..self.rows {
            let o = &mut out[r * c..(r + 1) * c];
            for e in self.indptr[r]..self.indptr[r + 1] {
                let v = self.values[e];
                let xr = &xd[self.indices[e] * c..(self.indices[e] + 1) * c];
                for (oo, xx) in o.iter_mut().zip(xr) {
                    *oo += v * xx;
                }
            }
        }
        Tensor::from_parts(self.rows, c, out)
    }

    /// `X += Aᵀ·G` where `G` has `rows` rows.
    pub(crate) fn apply_transpose_acc(&self, g: &Tensor, acc: &mut Tensor) {
        let c = g.cols();
        let gd = g.data();
        let ad = acc.data_mut();
        for r in 0..self.rows {
            let gr = &gd[r * c..(r + 1) * c];
            for e in self.indptr[r]..self.indptr[r + 1] {
                let v = self.values[e];
                let o = &mut ad[self.indices[e] * c..(self.indices[e] + 1) * c];
                for (oo, gg) in o.iter_mut().zip(gr) {
                    *oo += v * gg;
                }
            }
        }
    }
}
