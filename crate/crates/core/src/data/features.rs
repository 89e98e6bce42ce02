//! Dense feature matrices: numeric CSV ingestion, per-column
//! standardization and the synthetic Gaussian-cluster generator.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Binomial, Distribution, Normal};

use crate::rng::stream_rng;
use crate::{Error, Result};

/// N x d row-major matrix with optional per-row labels (labels are
/// carried for evaluation only, never used by inference).
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub n: usize,
    pub d: usize,
    data: Vec<f64>,
    pub labels: Option<Vec<usize>>,
}

impl FeatureMatrix {
    pub fn new(n: usize, d: usize, data: Vec<f64>, labels: Option<Vec<usize>>) -> Result<Self> {
        if data.len() != n * d {
            return Err(Error::Contract(format!(
                "feature matrix of {n}x{d} needs {} values, got {}",
                n * d,
                data.len()
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite feature value".into()));
        }
        Ok(FeatureMatrix { n, d, data, labels })
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| self.row(i).to_vec()).collect()
    }

    pub fn column_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.d];
        for i in 0..self.n {
            for (m, v) in mean.iter_mut().zip(self.row(i)) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= self.n as f64;
        }
        mean
    }

    /// Sample covariance (denominator N).
    pub fn covariance(&self) -> DMatrix<f64> {
        let mean = DVector::from_vec(self.column_mean());
        let mut cov = DMatrix::zeros(self.d, self.d);
        for i in 0..self.n {
            let x = DVector::from_column_slice(self.row(i)) - &mean;
            cov += &x * x.transpose();
        }
        cov / self.n as f64
    }

    /// Zero mean, unit variance per column. Constant columns are left
    /// centered but unscaled.
    pub fn standardize(&self) -> FeatureMatrix {
        let mean = self.column_mean();
        let mut var = vec![0.0; self.d];
        for i in 0..self.n {
            for (s, (v, m)) in var.iter_mut().zip(self.row(i).iter().zip(&mean)) {
                *s += (v - m) * (v - m);
            }
        }
        let sd: Vec<f64> = var
            .iter()
            .map(|s| {
                let sd = (s / self.n as f64).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        let mut data = Vec::with_capacity(self.data.len());
        for i in 0..self.n {
            for ((v, m), s) in self.row(i).iter().zip(&mean).zip(&sd) {
                data.push((v - m) / s);
            }
        }
        FeatureMatrix {
            n: self.n,
            d: self.d,
            data,
            labels: self.labels.clone(),
        }
    }
}

/// Plain numeric CSV, one row per line. All rows must have the same
/// number of columns.
pub fn parse_csv_matrix(path: impl AsRef<Path>, skip_header: bool) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut data = Vec::new();
    let mut d = 0usize;
    let mut n = 0usize;
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() || (skip_header && i == 0) {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if d == 0 {
            d = fields.len();
        } else if fields.len() != d {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {d} columns, got {}", fields.len()),
            });
        }
        for f in fields {
            data.push(f.trim().parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("cannot parse number from {f:?}"),
            })?);
        }
        n += 1;
    }
    if n == 0 {
        return Err(Error::Contract(format!("no rows in {}", path.display())));
    }
    FeatureMatrix::new(n, d, data, None)
}

/// Mixture layout for the synthetic generator.
#[derive(Debug, Clone)]
pub struct ClusterSpec {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Per-cluster covariance Cholesky factors are derived internally;
    /// these are the covariance matrices.
    pub covariances: Vec<DMatrix<f64>>,
}

impl ClusterSpec {
    pub fn k(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }
}

impl Default for ClusterSpec {
    /// Four equally weighted 2D Gaussians at (+-3, +-3) with identity
    /// covariance.
    fn default() -> Self {
        ClusterSpec {
            weights: vec![0.25; 4],
            means: vec![
                vec![3.0, 3.0],
                vec![3.0, -3.0],
                vec![-3.0, 3.0],
                vec![-3.0, -3.0],
            ],
            covariances: (0..4).map(|_| DMatrix::identity(2, 2)).collect(),
        }
    }
}

/// Synthetic mixture draw with exact per-cluster counts from a
/// multinomial split of `n`. Labels record the generating cluster.
pub fn gen_gmm_synthetic(n: usize, spec: &ClusterSpec, seed: u64) -> Result<FeatureMatrix> {
    let k = spec.k();
    if n < k {
        return Err(Error::Contract(format!(
            "need at least {k} samples for {k} clusters, got {n}"
        )));
    }
    if spec.means.len() != k || spec.covariances.len() != k {
        return Err(Error::Contract(
            "cluster spec weights/means/covariances lengths differ".into(),
        ));
    }
    let d = spec.dim();
    let mut rng = stream_rng(seed, "gen-gmm", 0);

    // Multinomial counts via sequential conditional binomials.
    let mut counts = vec![0usize; k];
    let mut remaining = n as u64;
    let mut wsum: f64 = spec.weights.iter().sum();
    for j in 0..k {
        if j == k - 1 {
            counts[j] = remaining as usize;
            break;
        }
        let p = (spec.weights[j] / wsum).clamp(0.0, 1.0);
        let c = Binomial::new(remaining, p)
            .expect("valid binomial")
            .sample(&mut rng);
        counts[j] = c as usize;
        remaining -= c;
        wsum -= spec.weights[j];
    }

    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for (j, &c) in counts.iter().enumerate() {
        let chol = spec.covariances[j]
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidParameter(format!("cluster {j} covariance not SPD")))?;
        let l = chol.l();
        for _ in 0..c {
            let z = DVector::from_iterator(d, (0..d).map(|_| std_normal.sample(&mut rng)));
            let x = &l * z + DVector::from_column_slice(&spec.means[j]);
            data.extend(x.iter());
            labels.push(j);
        }
    }
    FeatureMatrix::new(n, d, data, Some(labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write as _;

    #[test]
    fn default_spec_draws_expected_shape() {
        let m = gen_gmm_synthetic(250, &ClusterSpec::default(), 1).unwrap();
        assert_eq!((m.n, m.d), (250, 2));
        let labels = m.labels.as_ref().unwrap();
        assert!(labels.iter().all(|&l| l < 4));
        assert_eq!(labels.len(), 250);
    }

    #[test]
    fn generator_is_deterministic() {
        let a = gen_gmm_synthetic(100, &ClusterSpec::default(), 11).unwrap();
        let b = gen_gmm_synthetic(100, &ClusterSpec::default(), 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn per_cluster_means_within_clt_bound() {
        let m = gen_gmm_synthetic(2000, &ClusterSpec::default(), 3).unwrap();
        let labels = m.labels.as_ref().unwrap();
        let spec = ClusterSpec::default();
        for j in 0..4 {
            let rows: Vec<&[f64]> = (0..m.n).filter(|&i| labels[i] == j).map(|i| m.row(i)).collect();
            let nk = rows.len() as f64;
            for c in 0..2 {
                let mean = rows.iter().map(|r| r[c]).sum::<f64>() / nk;
                let bound = 3.0 / nk.sqrt();
                assert!(
                    (mean - spec.means[j][c]).abs() < bound,
                    "cluster {j} coord {c}: {mean} vs {} (bound {bound})",
                    spec.means[j][c]
                );
            }
        }
    }

    #[test]
    fn csv_parse_and_standardize() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"a,b\n1.0,10\n2.0,20\n3.0,30\n").unwrap();
        let m = parse_csv_matrix(f.path(), true).unwrap();
        assert_eq!((m.n, m.d), (3, 2));
        let s = m.standardize();
        for c in 0..2 {
            let mean: f64 = (0..3).map(|i| s.row(i)[c]).sum::<f64>() / 3.0;
            let var: f64 = (0..3).map(|i| s.row(i)[c].powi(2)).sum::<f64>() / 3.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ragged_csv_rejected() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(b"1.0,2.0\n3.0\n").unwrap();
        assert!(matches!(
            parse_csv_matrix(f.path(), false),
            Err(Error::Parse { line: 2, .. })
        ));
    }
}
