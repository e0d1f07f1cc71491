use crate::error::{check_dim, param, Result};
use crate::geometry::PointCloud;

/// Row-major dense matrix, used for cost matrices and transport plans.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for r in rows {
            check_dim(ncols, r.len(), "matrix row")?;
            data.extend_from_slice(r);
        }
        Ok(Self {
            nrows: rows.len(),
            ncols,
            data,
        })
    }

    pub fn from_fn(nrows: usize, ncols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(nrows * ncols);
        for r in 0..nrows {
            for c in 0..ncols {
                data.push(f(r, c));
            }
        }
        Self { nrows, ncols, data }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.ncols..(r + 1) * self.ncols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.ncols..(r + 1) * self.ncols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|r| self.row(r).iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for r in 0..self.nrows {
            for (o, v) in out.iter_mut().zip(self.row(r)) {
                *o += v;
            }
        }
        out
    }

    /// Frobenius inner product `Σ self[i][j]·other[i][j]`.
    pub fn dot(&self, other: &DenseMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.ncols + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.ncols + c]
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `C[i][j] = ‖x_i − y_j‖²`.
pub fn squared_cost_matrix(x: &PointCloud, y: &PointCloud) -> Result<DenseMatrix> {
    check_dim(x.dim(), y.dim(), "cost matrix clouds")?;
    let mut c = DenseMatrix::zeros(x.len(), y.len());
    for (i, p) in x.points().enumerate() {
        for (out, q) in c.row_mut(i).iter_mut().zip(y.points()) {
            *out = squared_distance(p, q);
        }
    }
    Ok(c)
}

/// Squared costs after moving both clouds to mean zero. This differs from
/// [`squared_cost_matrix`] by row and column terms only, so assignments agree,
/// and it is much better conditioned when the clouds sit far apart.
pub fn centered_cost_matrix(x: &PointCloud, y: &PointCloud) -> Result<DenseMatrix> {
    check_dim(x.dim(), y.dim(), "cost matrix clouds")?;
    let mean = |c: &PointCloud| {
        let mut m = vec![0.0; c.dim()];
        for p in c.points() {
            m.iter_mut().zip(p).for_each(|(a, b)| *a += b);
        }
        m.iter_mut().for_each(|a| *a /= c.len().max(1) as f64);
        m
    };
    let shift: Vec<f64> = mean(y).iter().zip(mean(x)).map(|(b, a)| b - a).collect();
    let mut c = DenseMatrix::zeros(x.len(), y.len());
    let mut q = vec![0.0; x.dim()];
    for j in 0..y.len() {
        q.iter_mut().zip(y.point(j)).zip(&shift).for_each(|((o, v), s)| *o = v - s);
        for i in 0..x.len() {
            c[(i, j)] = squared_distance(x.point(i), &q);
        }
    }
    Ok(c)
}

pub(crate) fn check_finite(c: &DenseMatrix) -> Result<()> {
    if c.as_slice().iter().any(|v| !v.is_finite()) {
        return param("cost matrix has non-finite entries");
    }
    Ok(())
}
