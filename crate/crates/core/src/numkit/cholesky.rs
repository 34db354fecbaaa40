//! Envelope (profile) Cholesky factorization for sparse SPD matrices,
//! ordered with reverse Cuthill-McKee.

use std::collections::VecDeque;
use std::sync::Arc;

use super::ledger::SolveLedger;
use super::sparse::CsrMatrix;
use crate::error::{Error, Result};

/// Reverse Cuthill-McKee ordering of the symmetric sparsity graph of `a`.
/// Returns `perm` with `perm[new] = old`.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).0.iter().copied().filter(|&j| j != i).collect())
        .collect();
    let degree: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);

    let bfs_levels = |start: usize, visited: &[bool]| -> (Vec<usize>, usize) {
        let mut level = vec![usize::MAX; n];
        let mut queue = VecDeque::new();
        level[start] = 0;
        queue.push_back(start);
        let mut last = start;
        while let Some(v) = queue.pop_front() {
            last = v;
            for &w in &adj[v] {
                if !visited[w] && level[w] == usize::MAX {
                    level[w] = level[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        (level, last)
    };

    while order.len() < n {
        // lowest-degree unvisited node, then walk to a pseudo-peripheral node
        let mut start = (0..n)
            .filter(|&i| !visited[i])
            .min_by_key(|&i| degree[i])
            .expect("unvisited node exists");
        let mut ecc = 0;
        for _ in 0..4 {
            let (level, far) = bfs_levels(start, &visited);
            let depth = level[far];
            if depth <= ecc {
                break;
            }
            ecc = depth;
            let candidate = (0..n)
                .filter(|&i| level[i] == depth)
                .min_by_key(|&i| degree[i])
                .unwrap_or(far);
            start = candidate;
        }

        let mut queue = VecDeque::new();
        visited[start] = true;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            order.push(v);
            let mut next: Vec<usize> = adj[v].iter().copied().filter(|&w| !visited[w]).collect();
            next.sort_by_key(|&w| (degree[w], w));
            for w in next {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

/// `P A P^T = L L^T` with `L` stored row-wise over its envelope.
#[derive(Debug, Clone)]
pub struct SparseCholesky {
    n: usize,
    perm: Vec<usize>,
    first: Vec<usize>,
    start: Vec<usize>,
    vals: Vec<f64>,
    tag: String,
    ledger: Option<Arc<SolveLedger>>,
}

impl SparseCholesky {
    /// Factors `a` with an RCM ordering. Solves are charged to `a.tag()`.
    pub fn factor(a: &CsrMatrix, ledger: Option<Arc<SolveLedger>>) -> Result<Self> {
        let perm = reverse_cuthill_mckee(a);
        Self::factor_with_ordering(a, perm, ledger)
    }

    pub fn factor_with_ordering(
        a: &CsrMatrix,
        perm: Vec<usize>,
        ledger: Option<Arc<SolveLedger>>,
    ) -> Result<Self> {
        let n = a.n();
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let mut first: Vec<usize> = (0..n).collect();
        for old_i in 0..n {
            let i = inv[old_i];
            for &old_j in a.row(old_i).0 {
                let j = inv[old_j];
                if j < i {
                    first[i] = first[i].min(j);
                } else if i < j {
                    first[j] = first[j].min(i);
                }
            }
        }
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut vals = vec![0.0; start[n]];
        for old_i in 0..n {
            let i = inv[old_i];
            let (cols, v) = a.row(old_i);
            for (&old_j, &x) in cols.iter().zip(v) {
                let j = inv[old_j];
                if j <= i {
                    vals[start[i] + (j - first[i])] += x;
                }
            }
        }

        for i in 0..n {
            let fi = first[i];
            let ri = start[i];
            for j in fi..i {
                let fj = first[j];
                let rj = start[j];
                let k0 = fi.max(fj);
                let len = j - k0;
                let li = &vals[ri + (k0 - fi)..ri + (k0 - fi) + len];
                let lj = &vals[rj + (k0 - fj)..rj + (k0 - fj) + len];
                let s: f64 = li.iter().zip(lj).map(|(x, y)| x * y).sum();
                let djj = vals[rj + (j - fj)];
                let idx = ri + (j - fi);
                vals[idx] = (vals[idx] - s) / djj;
            }
            let row = &vals[ri..ri + (i - fi)];
            let s: f64 = row.iter().map(|x| x * x).sum();
            let d = vals[ri + (i - fi)] - s;
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::Factorization(format!(
                    "matrix '{}' is not positive definite (pivot {d:.3e} at row {i})",
                    a.tag()
                )));
            }
            vals[ri + (i - fi)] = d.sqrt();
        }

        Ok(Self {
            n,
            perm,
            first,
            start,
            vals,
            tag: a.tag().to_string(),
            ledger,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    /// Number of stored factor entries.
    pub fn envelope_size(&self) -> usize {
        self.vals.len()
    }

    fn lower_solve_in_place(&self, y: &mut [f64]) {
        for i in 0..self.n {
            let fi = self.first[i];
            let ri = self.start[i];
            let row = &self.vals[ri..ri + (i - fi)];
            let s: f64 = row.iter().zip(&y[fi..i]).map(|(l, v)| l * v).sum();
            y[i] = (y[i] - s) / self.vals[ri + (i - fi)];
        }
    }

    fn upper_solve_in_place(&self, y: &mut [f64]) {
        for i in (0..self.n).rev() {
            let fi = self.first[i];
            let ri = self.start[i];
            let xi = y[i] / self.vals[ri + (i - fi)];
            y[i] = xi;
            let row = &self.vals[ri..ri + (i - fi)];
            for (yk, l) in y[fi..i].iter_mut().zip(row) {
                *yk -= l * xi;
            }
        }
    }

    /// Solves `A x = b` without touching the ledger.
    pub fn solve_uncounted(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.n, "rhs length mismatch");
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        self.lower_solve_in_place(&mut y);
        self.upper_solve_in_place(&mut y);
        let mut x = vec![0.0; self.n];
        for (new, &old) in self.perm.iter().enumerate() {
            x[old] = y[new];
        }
        x
    }

    /// Solves `A x = b`; one ledger entry under the matrix tag.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        if let Some(l) = &self.ledger {
            l.record(&self.tag);
        }
        self.solve_uncounted(b)
    }

    /// `G z` with `G = P^T L`, so that `G G^T = A`.
    pub fn factor_mul(&self, z: &[f64]) -> Vec<f64> {
        assert_eq!(z.len(), self.n);
        let mut out = vec![0.0; self.n];
        for i in 0..self.n {
            let fi = self.first[i];
            let ri = self.start[i];
            let row = &self.vals[ri..=ri + (i - fi)];
            let s: f64 = row.iter().zip(&z[fi..=i]).map(|(l, v)| l * v).sum();
            out[self.perm[i]] = s;
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{gaussian_vector, stream, TripletBuilder};
    use nalgebra::DMatrix;

    fn laplacian_2d(k: usize) -> CsrMatrix {
        let n = k * k;
        let mut b = TripletBuilder::new(n);
        for j in 0..k {
            for i in 0..k {
                let p = i + k * j;
                b.push(p, p, 4.5);
                if i + 1 < k {
                    b.push(p, p + 1, -1.0);
                    b.push(p + 1, p, -1.0);
                }
                if j + 1 < k {
                    b.push(p, p + k, -1.0);
                    b.push(p + k, p, -1.0);
                }
            }
        }
        b.build("lap")
    }

    #[test]
    fn rcm_is_a_permutation() {
        let a = laplacian_2d(7);
        let mut p = reverse_cuthill_mckee(&a);
        p.sort_unstable();
        assert_eq!(p, (0..49).collect::<Vec<_>>());
    }

    #[test]
    fn solve_matches_dense() {
        let a = laplacian_2d(9);
        let chol = SparseCholesky::factor(&a, None).unwrap();
        let b = gaussian_vector(&mut stream(1, "rhs", 0), a.n());
        let x = chol.solve(&b);
        let dense = a.to_dense().cholesky().unwrap();
        let xd = dense.solve(&nalgebra::DVector::from_vec(b.clone()));
        for (u, v) in x.iter().zip(xd.iter()) {
            assert!((u - v).abs() < 1e-12 * (1.0 + v.abs()));
        }
    }

    #[test]
    fn factor_reproduces_matrix() {
        let a = laplacian_2d(5);
        let chol = SparseCholesky::factor(&a, None).unwrap();
        // G G^T e_j recovers column j of A
        let n = a.n();
        let mut g = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let col = chol.factor_mul(&e);
            for i in 0..n {
                g[(i, j)] = col[i];
            }
        }
        let diff = &g * g.transpose() - a.to_dense();
        assert!(diff.amax() < 1e-12);
    }

    #[test]
    fn indefinite_matrix_is_rejected() {
        let a = CsrMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]), "bad");
        assert!(matches!(SparseCholesky::factor(&a, None), Err(Error::Factorization(_))));
    }

    #[test]
    fn solves_are_counted() {
        let ledger = SolveLedger::new();
        let a = laplacian_2d(4).with_tag("state");
        let chol = SparseCholesky::factor(&a, Some(ledger.clone())).unwrap();
        for _ in 0..3 {
            chol.solve(&[1.0; 16]);
        }
        chol.solve_uncounted(&[1.0; 16]);
        assert_eq!(ledger.count("state"), 3);
    }
}
