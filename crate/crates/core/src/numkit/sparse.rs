use nalgebra::DMatrix;

use crate::error::{invalid, Result};

/// A linear map on `R^n` given only through its action.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.apply_into(x, &mut y);
        y
    }
}

/// Wraps a closure as a [`LinearOperator`].
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> LinearOperator for FnOperator<F>
where
    F: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let v = (self.f)(x);
        y.copy_from_slice(&v);
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        (self.f)(x)
    }
}

/// Square sparse matrix in compressed-row form. Used for the symmetric
/// operators coming out of finite-element assembly; `tag` names the ledger
/// bucket that solves with this matrix are charged to.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
    tag: String,
}

impl CsrMatrix {
    /// Builds an all-zero matrix with the given sorted row patterns.
    pub fn from_pattern(rows: Vec<Vec<usize>>, tag: impl Into<String>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        let mut col_idx = Vec::new();
        for mut r in rows {
            r.sort_unstable();
            r.dedup();
            col_idx.extend_from_slice(&r);
            row_ptr.push(col_idx.len());
        }
        let nnz = col_idx.len();
        Self {
            n,
            row_ptr,
            col_idx,
            vals: vec![0.0; nnz],
            tag: tag.into(),
        }
    }

    pub fn identity(n: usize, tag: impl Into<String>) -> Self {
        let mut m = Self::from_pattern((0..n).map(|i| vec![i]).collect(), tag);
        m.vals.iter_mut().for_each(|v| *v = 1.0);
        m
    }

    pub fn from_dense(a: &DMatrix<f64>, tag: impl Into<String>) -> Self {
        let n = a.nrows();
        let rows = (0..n)
            .map(|i| (0..n).filter(|&j| a[(i, j)] != 0.0).collect())
            .collect();
        let mut m = Self::from_pattern(rows, tag);
        for i in 0..n {
            for k in m.row_ptr[i]..m.row_ptr[i + 1] {
                m.vals[k] = a[(i, m.col_idx[k])];
            }
        }
        m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn with_tag(mut self, tag: impl Into<String>) -> Self {
        self.tag = tag.into();
        self
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.col_idx[r.clone()], &self.vals[r])
    }

    fn position(&self, i: usize, j: usize) -> Option<usize> {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()]
            .binary_search(&j)
            .ok()
            .map(|k| r.start + k)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.position(i, j).map_or(0.0, |k| self.vals[k])
    }

    /// Adds `v` at `(i, j)`; the entry must be in the pattern.
    pub fn add_at(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) not in sparsity pattern"));
        self.vals[k] += v;
    }

    pub fn scale(&mut self, alpha: f64) {
        self.vals.iter_mut().for_each(|v| *v *= alpha);
    }

    /// `self + alpha * other`; patterns may differ.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix) -> Result<CsrMatrix> {
        if self.n != other.n {
            return Err(invalid("matrix dimensions differ"));
        }
        let rows = (0..self.n)
            .map(|i| {
                let mut r: Vec<usize> = self.row(i).0.to_vec();
                r.extend_from_slice(other.row(i).0);
                r
            })
            .collect();
        let mut out = CsrMatrix::from_pattern(rows, self.tag.clone());
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (j, x) in c.iter().zip(v) {
                out.add_at(i, *j, *x);
            }
            let (c, v) = other.row(i);
            for (j, x) in c.iter().zip(v) {
                out.add_at(i, *j, alpha * x);
            }
        }
        Ok(out)
    }

    /// Zeroes the rows and columns in `dofs` and puts `diag` on their
    /// diagonals, keeping the matrix symmetric.
    pub fn eliminate_symmetric(&mut self, dofs: &[usize], diag: f64) {
        let mut fixed = vec![false; self.n];
        for &d in dofs {
            fixed[d] = true;
        }
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                if fixed[i] || fixed[j] {
                    self.vals[k] = if i == j { diag } else { 0.0 };
                }
            }
        }
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    /// `x^T A y`.
    pub fn quad(&self, x: &[f64], y: &[f64]) -> f64 {
        super::dot(x, &self.matvec(y))
    }

    /// `max |A_ij - A_ji| / max |A_ij|`.
    pub fn symmetry_defect(&self) -> f64 {
        let mut defect: f64 = 0.0;
        let mut scale: f64 = 0.0;
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (j, x) in c.iter().zip(v) {
                scale = scale.max(x.abs());
                defect = defect.max((x - self.get(*j, i)).abs());
            }
        }
        if scale == 0.0 {
            0.0
        } else {
            defect / scale
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (j, x) in c.iter().zip(v) {
                a[(i, *j)] += *x;
            }
        }
        a
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).1.iter().sum()).collect()
    }
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.matvec_into(x, y);
    }
}

/// Accumulates `(i, j, v)` entries and compresses them into a [`CsrMatrix`].
#[derive(Debug, Clone)]
pub struct TripletBuilder {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.n && j < self.n);
        self.entries.push((i, j, v));
    }

    pub fn build(self, tag: impl Into<String>) -> CsrMatrix {
        let mut rows = vec![Vec::new(); self.n];
        for &(i, j, _) in &self.entries {
            rows[i].push(j);
        }
        let mut m = CsrMatrix::from_pattern(rows, tag);
        for (i, j, v) in self.entries {
            m.add_at(i, j, v);
        }
        m
    }
}
