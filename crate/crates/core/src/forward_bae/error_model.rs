//! The total-error model `nu ~ N(eps0, Gamma_eps + sigma^2 I)` and its text
//! persistence.

use std::fs;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorModel {
    pub eps0: Vec<f64>,
    pub gamma_eps: DMatrix<f64>,
    pub sigma: f64,
    gamma_nu: DMatrix<f64>,
    pub n_mc_used: usize,
    pub seed: Option<u64>,
}

impl ErrorModel {
    /// Builds the model from a mean and a (repaired) error covariance.
    pub fn new(eps0: Vec<f64>, gamma_eps: DMatrix<f64>, sigma: f64, n_mc_used: usize, seed: Option<u64>) -> Result<Self> {
        let n = eps0.len();
        if gamma_eps.nrows() != n || gamma_eps.ncols() != n {
            return Err(invalid("error covariance does not match the mean"));
        }
        if !(sigma > 0.0) {
            return Err(invalid(format!("noise level must be positive, got {sigma}")));
        }
        let mut gamma_nu = gamma_eps.clone();
        for i in 0..n {
            gamma_nu[(i, i)] += sigma * sigma;
        }
        Ok(Self {
            eps0,
            gamma_eps,
            sigma,
            gamma_nu,
            n_mc_used,
            seed,
        })
    }

    /// `eps0 = 0`, `Gamma_eps = 0`: the model that ignores approximation error.
    pub fn unaware(n_s: usize, sigma: f64) -> Result<Self> {
        Self::new(vec![0.0; n_s], DMatrix::zeros(n_s, n_s), sigma, 0, None)
    }

    /// Sample mean and unbiased covariance of error draws, symmetrized and
    /// with negative eigenvalues clipped before the noise is added.
    pub fn from_samples(samples: &[Vec<f64>], sigma: f64, seed: Option<u64>) -> Result<Self> {
        let n_mc = samples.len();
        if n_mc < 2 {
            return Err(invalid(format!("need at least 2 error samples, got {n_mc}")));
        }
        let n = samples[0].len();
        if samples.iter().any(|s| s.len() != n) {
            return Err(invalid("error samples have different lengths"));
        }
        let mut mean = vec![0.0; n];
        for s in samples {
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n_mc as f64);
        let mut cov = DMatrix::zeros(n, n);
        for s in samples {
            let d = nalgebra::DVector::from_iterator(n, s.iter().zip(&mean).map(|(v, m)| v - m));
            cov.ger(1.0, &d, &d, 1.0);
        }
        cov /= (n_mc - 1) as f64;
        Self::new(mean, repair_psd(cov), sigma, n_mc, seed)
    }

    pub fn n_s(&self) -> usize {
        self.eps0.len()
    }

    pub fn gamma_noise(&self) -> DMatrix<f64> {
        DMatrix::identity(self.n_s(), self.n_s()) * (self.sigma * self.sigma)
    }

    pub fn gamma_nu(&self) -> &DMatrix<f64> {
        &self.gamma_nu
    }

    /// Marginal standard deviations of the approximation error.
    pub fn eps_std(&self) -> Vec<f64> {
        (0..self.n_s()).map(|i| self.gamma_eps[(i, i)].max(0.0).sqrt()).collect()
    }

    /// Largest off-diagonal correlation coefficient of `Gamma_eps`.
    pub fn max_offdiag_correlation(&self) -> f64 {
        let sd = self.eps_std();
        let mut best = f64::NEG_INFINITY;
        for i in 0..self.n_s() {
            for j in 0..self.n_s() {
                if i != j && sd[i] > 0.0 && sd[j] > 0.0 {
                    best = best.max(self.gamma_eps[(i, j)] / (sd[i] * sd[j]));
                }
            }
        }
        best
    }

    fn header(&self) -> String {
        let seed = self.seed.map_or("none".to_string(), |s| s.to_string());
        format!("# n_mc={},seed={},sigma={:.16e}\n", self.n_mc_used, seed, self.sigma)
    }

    /// Writes `eps0.csv`, `gamma_eps.csv` and `gamma_nu.csv` to `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        let row = |v: &mut dyn Iterator<Item = f64>| {
            v.map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(",")
        };
        let mut eps = self.header();
        eps.push_str(&row(&mut self.eps0.iter().copied()));
        eps.push('\n');
        fs::write(dir.join("eps0.csv"), eps)?;
        for (name, m) in [("gamma_eps.csv", &self.gamma_eps), ("gamma_nu.csv", &self.gamma_nu)] {
            let mut text = self.header();
            for i in 0..m.nrows() {
                text.push_str(&row(&mut m.row(i).iter().copied()));
                text.push('\n');
            }
            fs::write(dir.join(name), text)?;
        }
        Ok(())
    }

    pub fn read_dir(dir: &Path) -> Result<Self> {
        let (meta, eps_rows) = read_csv(&dir.join("eps0.csv"))?;
        let eps0 = eps_rows
            .into_iter()
            .next()
            .ok_or_else(|| Error::Parse("eps0.csv has no data row".into()))?;
        let n = eps0.len();
        let gamma_eps = read_matrix(&dir.join("gamma_eps.csv"), n)?;
        let gamma_nu = read_matrix(&dir.join("gamma_nu.csv"), n)?;
        let field = |key: &str| {
            meta.split(',')
                .find_map(|kv| kv.trim().strip_prefix(key).and_then(|r| r.strip_prefix('=')))
                .map(str::to_string)
                .ok_or_else(|| Error::Parse(format!("error model header lacks {key}")))
        };
        let parse_err = |k: &str| Error::Parse(format!("bad {k} in error model header"));
        let n_mc_used = field("n_mc")?.parse().map_err(|_| parse_err("n_mc"))?;
        let seed = match field("seed")?.as_str() {
            "none" => None,
            s => Some(s.parse().map_err(|_| parse_err("seed"))?),
        };
        let sigma = field("sigma")?.parse().map_err(|_| parse_err("sigma"))?;
        Ok(Self {
            eps0,
            gamma_eps,
            sigma,
            gamma_nu,
            n_mc_used,
            seed,
        })
    }
}

/// Symmetrizes and clips negative eigenvalues to zero.
pub fn repair_psd(cov: DMatrix<f64>) -> DMatrix<f64> {
    let sym = (&cov + cov.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    if eig.eigenvalues.iter().all(|l| *l >= 0.0) {
        return sym;
    }
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    let rebuilt = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    (&rebuilt + rebuilt.transpose()) * 0.5
}

fn read_csv(path: &Path) -> Result<(String, Vec<Vec<f64>>)> {
    let text = fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    let mut meta = String::new();
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(h) = line.strip_prefix('#') {
            meta = h.trim().to_string();
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        rows.push(row);
    }
    Ok((meta, rows))
}

fn read_matrix(path: &Path, n: usize) -> Result<DMatrix<f64>> {
    let (_, rows) = read_csv(path)?;
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse(format!("{} is not a {n}x{n} matrix", path.display())));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}
