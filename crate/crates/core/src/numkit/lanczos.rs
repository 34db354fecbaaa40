//! Lanczos iteration for the leading eigenpairs of an operator that is
//! self-adjoint in a weighted inner product `<x, y>_W = x^T W y`.

use nalgebra::{DMatrix, SymmetricEigen};

use super::rng::{gaussian_vector, stream};
use super::sparse::LinearOperator;
use super::{axpy, dot, EIG_TRUNCATION};
use crate::error::{invalid, Error, Result};

/// The Gram operator `W` of an inner product.
pub trait Metric: Sync {
    fn apply(&self, x: &[f64]) -> Vec<f64>;

    fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, &self.apply(y))
    }
}

/// Plain dot product.
#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl Metric for Euclidean {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        dot(x, y)
    }
}

/// Eigenpairs sorted by decreasing eigenvalue; vectors are orthonormal in the
/// metric used to compute them.
#[derive(Debug, Clone, Default)]
pub struct EigPairs {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl EigPairs {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Number of eigenvalues that survived truncation.
    pub fn nonzero(&self) -> usize {
        self.values.iter().filter(|v| **v > 0.0).count()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LanczosOptions {
    /// Ritz pair accepted once `||A v - theta v||_W <= tol * max(|theta|, 1)`.
    pub tol: f64,
    /// Defaults to the operator dimension.
    pub max_steps: Option<usize>,
    /// Check `<A v, w>_W = <v, A w>_W` on two random probes before iterating.
    pub symmetry_probe: bool,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_steps: None,
            symmetry_probe: true,
            seed: 0x1a2c05,
        }
    }
}

fn check_symmetry(op: &dyn LinearOperator, metric: &dyn Metric, seed: u64) -> Result<()> {
    let n = op.dim();
    let v = gaussian_vector(&mut stream(seed, "lanczos-probe", 0), n);
    let w = gaussian_vector(&mut stream(seed, "lanczos-probe", 1), n);
    let av = op.apply(&v);
    let aw = op.apply(&w);
    let lhs = metric.inner(&av, &w);
    let rhs = metric.inner(&v, &aw);
    let scale = (metric.inner(&av, &av) * metric.inner(&w, &w)).sqrt()
        + (metric.inner(&aw, &aw) * metric.inner(&v, &v)).sqrt();
    if (lhs - rhs).abs() > 1e-8 * scale.max(f64::MIN_POSITIVE) {
        return Err(Error::ContractViolation(format!(
            "operator is not self-adjoint: <Av,w> = {lhs:.6e}, <v,Aw> = {rhs:.6e}"
        )));
    }
    Ok(())
}

/// Leading `k` eigenpairs of `op` with full reorthogonalization.
///
/// When the Krylov space becomes invariant before `k` pairs are found, the
/// iteration restarts from a random vector orthogonal to the current basis,
/// so zero eigenvalues of low-rank operators are still returned.
pub fn lanczos_eigs(
    op: &dyn LinearOperator,
    metric: &dyn Metric,
    k: usize,
    opts: &LanczosOptions,
) -> Result<EigPairs> {
    let n = op.dim();
    if k > n {
        return Err(invalid(format!("requested {k} eigenpairs of a {n}-dimensional operator")));
    }
    if k == 0 || n == 0 {
        return Ok(EigPairs::default());
    }
    if opts.symmetry_probe {
        check_symmetry(op, metric, opts.seed)?;
    }
    let max_steps = opts.max_steps.unwrap_or(n).clamp(k, n);

    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut w_basis: Vec<Vec<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    // beta[j] couples q_j and q_{j+1}; zero at restarts
    let mut beta: Vec<f64> = Vec::new();
    let mut restarts = 0u64;

    // Orthogonalizes x against the basis (twice) and normalizes it.
    let orthonormalize = |x: &mut Vec<f64>, basis: &[Vec<f64>], w_basis: &[Vec<f64>]| -> Option<(f64, Vec<f64>)> {
        let before = metric.inner(x, x).max(0.0).sqrt();
        for _ in 0..2 {
            for (q, wq) in basis.iter().zip(w_basis) {
                let c = dot(x, wq);
                axpy(-c, q, x);
            }
        }
        let wx = metric.apply(x);
        let norm = dot(x, &wx).max(0.0).sqrt();
        if norm <= 1e-10 * before || norm == 0.0 {
            return None;
        }
        x.iter_mut().for_each(|v| *v /= norm);
        Some((norm, wx.into_iter().map(|v| v / norm).collect()))
    };

    let mut q = gaussian_vector(&mut stream(opts.seed, "lanczos-start", 0), n);
    let (_, mut wq) = orthonormalize(&mut q, &[], &[])
        .ok_or_else(|| Error::ContractViolation("metric is not positive definite".into()))?;
    let mut ritz: Option<(Vec<f64>, DMatrix<f64>)>;

    loop {
        let j = basis.len();
        let mut r = op.apply(&q);
        let a = dot(&r, &wq);
        axpy(-a, &q, &mut r);
        if j > 0 && beta[j - 1] != 0.0 {
            axpy(-beta[j - 1], &basis[j - 1], &mut r);
        }
        basis.push(q);
        w_basis.push(wq);
        alpha.push(a);

        let m = basis.len();
        let (values, vectors) = tridiagonal_eigen(&alpha, &beta);
        let scale = values.iter().fold(0.0f64, |s, v| s.max(v.abs()));

        let next = orthonormalize(&mut r, &basis, &w_basis);
        let b = match &next {
            Some((norm, _)) if *norm > 1e-10 * scale.max(f64::MIN_POSITIVE) => *norm,
            _ => 0.0,
        };
        let converged = m >= k
            && (0..k).all(|i| b * vectors[(m - 1, i)].abs() <= opts.tol * values[i].abs().max(1.0));
        ritz = Some((values, vectors));
        if converged || m >= max_steps {
            if !converged {
                let (values, vectors) = ritz.as_ref().expect("ritz values computed");
                let worst = (0..k.min(m))
                    .map(|i| b * vectors[(m - 1, i)].abs() / values[i].abs().max(1.0))
                    .fold(0.0, f64::max);
                if m < n || worst > opts.tol {
                    return Err(Error::IterationLimit {
                        solver: "lanczos",
                        iterations: m,
                        residual: worst,
                    });
                }
            }
            break;
        }

        if b > 0.0 {
            let (_, wr) = next.expect("nonzero residual");
            beta.push(b);
            q = r;
            wq = wr;
        } else {
            // invariant subspace found; continue in its complement
            beta.push(0.0);
            let mut fresh = None;
            for _ in 0..8 {
                restarts += 1;
                let mut x = gaussian_vector(&mut stream(opts.seed, "lanczos-restart", restarts), n);
                if let Some((_, wx)) = orthonormalize(&mut x, &basis, &w_basis) {
                    fresh = Some((x, wx));
                    break;
                }
            }
            match fresh {
                Some((x, wx)) => {
                    q = x;
                    wq = wx;
                }
                None => break,
            }
        }
    }

    let (values, vectors) = ritz.expect("at least one step taken");
    let take = k.min(basis.len());
    let lead = values.first().copied().unwrap_or(0.0).max(0.0);
    let mut out = EigPairs::default();
    for i in 0..take {
        let mut v = vec![0.0; n];
        for (jj, qj) in basis.iter().enumerate() {
            axpy(vectors[(jj, i)], qj, &mut v);
        }
        let lam = values[i];
        out.values.push(if lam <= EIG_TRUNCATION * lead { 0.0 } else { lam });
        out.vectors.push(v);
    }
    Ok(out)
}

/// Eigen-decomposition of the symmetric tridiagonal matrix, columns of the
/// returned matrix sorted by decreasing eigenvalue.
fn tridiagonal_eigen(alpha: &[f64], beta: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(m, m, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::CsrMatrix;
    use nalgebra::DMatrix;

    struct Dense(DMatrix<f64>);

    impl LinearOperator for Dense {
        fn dim(&self) -> usize {
            self.0.nrows()
        }
        fn apply_into(&self, x: &[f64], y: &mut [f64]) {
            let v = &self.0 * nalgebra::DVector::from_column_slice(x);
            y.copy_from_slice(v.as_slice());
        }
    }

    fn random_psd(n: usize, seed: u64) -> DMatrix<f64> {
        let g = gaussian_vector(&mut stream(seed, "psd", 0), n * n);
        let b = DMatrix::from_vec(n, n, g);
        &b * b.transpose()
    }

    #[test]
    fn diagonal_operator() {
        let a = CsrMatrix::from_dense(&DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 2.0, 1.0])), "d");
        let e = lanczos_eigs(&a, &Euclidean, 2, &LanczosOptions::default()).unwrap();
        assert_eq!(e.len(), 2);
        assert!((e.values[0] - 3.0).abs() < 1e-10);
        assert!((e.values[1] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn rank_one_operator() {
        let v = nalgebra::DVector::from_vec(vec![0.6, 0.0, 0.8]);
        let a = Dense(&v * v.transpose());
        let e = lanczos_eigs(&a, &Euclidean, 3, &LanczosOptions::default()).unwrap();
        assert_eq!(e.len(), 3);
        assert!((e.values[0] - 1.0).abs() < 1e-10);
        assert!(e.values[1].abs() < 1e-10 && e.values[2].abs() < 1e-10);
        assert_eq!(e.nonzero(), 1);
    }

    #[test]
    fn random_psd_matches_dense_eigensolve() {
        let a = random_psd(20, 9);
        let mut dense: Vec<f64> = SymmetricEigen::new(a.clone()).eigenvalues.iter().copied().collect();
        dense.sort_by(|x, y| y.total_cmp(x));
        let e = lanczos_eigs(&Dense(a.clone()), &Euclidean, 20, &LanczosOptions::default()).unwrap();
        for (l, d) in e.values.iter().zip(&dense) {
            assert!((l - d).abs() <= 1e-8 * d.abs().max(1.0), "{l} vs {d}");
        }
        // eigenvector residuals and orthonormality
        for (i, v) in e.vectors.iter().enumerate() {
            let av = Dense(a.clone()).apply(v);
            let res: f64 = av.iter().zip(v).map(|(x, y)| (x - e.values[i] * y).powi(2)).sum::<f64>().sqrt();
            assert!(res <= 1e-6 * e.values[i].max(1.0));
            for (j, u) in e.vectors.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot(u, v) - expect).abs() < 1e-8);
            }
        }
    }

    struct Weighted(Vec<f64>);

    impl Metric for Weighted {
        fn apply(&self, x: &[f64]) -> Vec<f64> {
            x.iter().zip(&self.0).map(|(a, b)| a * b).collect()
        }
    }

    #[test]
    fn generalized_problem_in_weighted_metric() {
        // T = W^{-1} G is self-adjoint in <.,.>_W
        let n = 12;
        let g = random_psd(n, 4);
        let w: Vec<f64> = (0..n).map(|i| 1.0 + i as f64 * 0.3).collect();
        let t = DMatrix::from_fn(n, n, |i, j| g[(i, j)] / w[i]);
        let e = lanczos_eigs(&Dense(t), &Weighted(w.clone()), 5, &LanczosOptions::default()).unwrap();
        let wh = DMatrix::from_fn(n, n, |i, j| g[(i, j)] / (w[i] * w[j]).sqrt());
        let mut dense: Vec<f64> = SymmetricEigen::new(wh).eigenvalues.iter().copied().collect();
        dense.sort_by(|x, y| y.total_cmp(x));
        for i in 0..5 {
            assert!((e.values[i] - dense[i]).abs() < 1e-8 * dense[i].max(1.0));
            let metric = Weighted(w.clone());
            assert!((metric.inner(&e.vectors[i], &e.vectors[i]) - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn non_symmetric_operator_is_rejected() {
        let a = Dense(DMatrix::from_row_slice(2, 2, &[1.0, 5.0, 0.0, 1.0]));
        assert!(matches!(
            lanczos_eigs(&a, &Euclidean, 1, &LanczosOptions::default()),
            Err(Error::ContractViolation(_))
        ));
    }
}
