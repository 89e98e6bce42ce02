//! Empirical verification of the gradient-noise contracts: replicate
//! gradient collection at a frozen state, Gaussianity metrics
//! (per-coordinate KS, energy distance), the batch-size trend of the
//! max-entropy convergence claim, and cluster-occupancy summaries.

pub mod gof;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::engine::{draw_noise_weights, sample_batch};
use crate::expfam::NaturalParam;
use crate::models::{CefModel, GmmModel};
use crate::rng::{derive_seed, stream_rng};
use crate::{Error, Result};

/// Per-datum expected sufficient statistics scattered into one dense
/// vector per datum (globals concatenated in order).
pub struct StatMatrix {
    pub dim: usize,
    pub n: usize,
    data: Vec<f64>,
}

impl StatMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    /// Mean statistic over the whole dataset (the full-data gradient at
    /// per-datum scale).
    pub fn full_data_mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
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

    /// Population covariance of the per-datum statistics.
    pub fn covariance(&self) -> DMatrix<f64> {
        covariance_of(&self.data, self.n, self.dim)
    }
}

/// Computes every datum's concatenated statistic vector once; replicate
/// collection then only samples indices and noise.
pub fn per_datum_stats<M: CefModel>(
    model: &M,
    data: &[M::Datum],
    globals: &[NaturalParam],
) -> Result<StatMatrix> {
    if data.is_empty() {
        return Err(Error::Contract("cannot collect gradients on empty data".into()));
    }
    let offsets: Vec<usize> = globals
        .iter()
        .scan(0usize, |acc, g| {
            let off = *acc;
            *acc += g.len();
            Some(off)
        })
        .collect();
    let dim = offsets.last().unwrap() + globals.last().unwrap().len();
    let ctx = model.prepare(globals)?;
    let rows: Vec<Vec<f64>> = data
        .par_iter()
        .map(|datum| {
            let mut row = vec![0.0; dim];
            for (g, stat) in model.local_step(datum, &ctx)? {
                let off = offsets[g];
                for (slot, v) in row[off..off + stat.len()].iter_mut().zip(stat.values()) {
                    *slot += v;
                }
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut flat = Vec::with_capacity(data.len() * dim);
    for r in rows {
        flat.extend(r);
    }
    Ok(StatMatrix {
        dim,
        n: data.len(),
        data: flat,
    })
}

/// R replicate gradients at a frozen state; rows are the normalized
/// per-datum-scale gradient (1/|S|) sum_n w_n t_n.
pub struct GradientSample {
    pub replicates: usize,
    pub dim: usize,
    pub batch_size: usize,
    pub effective_batch: usize,
    data: Vec<f64>,
}

impl GradientSample {
    /// Wraps externally collected replicate rows (row-major).
    pub fn from_raw_rows(
        data: Vec<f64>,
        replicates: usize,
        dim: usize,
        batch_size: usize,
        effective_batch: usize,
    ) -> Self {
        assert_eq!(data.len(), replicates * dim);
        GradientSample {
            replicates,
            dim,
            batch_size,
            effective_batch,
            data,
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.dim];
        for r in 0..self.replicates {
            for (m, v) in mean.iter_mut().zip(self.row(r)) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= self.replicates as f64;
        }
        mean
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        covariance_of(&self.data, self.replicates, self.dim)
    }
}

fn covariance_of(data: &[f64], n: usize, dim: usize) -> DMatrix<f64> {
    let mut mean = vec![0.0; dim];
    for i in 0..n {
        for (m, v) in mean.iter_mut().zip(&data[i * dim..(i + 1) * dim]) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= n as f64;
    }
    let mut cov = DMatrix::zeros(dim, dim);
    let mut centered = DVector::zeros(dim);
    for i in 0..n {
        for (c, (v, m)) in centered
            .iter_mut()
            .zip(data[i * dim..(i + 1) * dim].iter().zip(&mean))
        {
            *c = v - m;
        }
        cov.syger(1.0, &centered, &centered, 1.0);
    }
    cov /= n as f64;
    // syger fills one triangle; mirror it.
    for i in 0..dim {
        for j in (i + 1)..dim {
            let v = cov[(j, i)];
            cov[(i, j)] = v;
        }
    }
    cov
}

/// Draws `replicates` independent (batch, noise) pairs against the
/// precomputed statistics. Replicate r owns RNG substreams keyed by r.
pub fn collect_from_stats(
    stats: &StatMatrix,
    batch_size: usize,
    effective_batch: usize,
    replicates: usize,
    master_seed: u64,
) -> Result<GradientSample> {
    if batch_size > stats.n {
        return Err(Error::Contract(format!(
            "batch size {batch_size} exceeds dataset size {}",
            stats.n
        )));
    }
    crate::engine::alpha(batch_size, effective_batch)?;
    let dim = stats.dim;
    let rows: Vec<Vec<f64>> = (0..replicates)
        .into_par_iter()
        .map(|r| {
            let mut batch_rng = stream_rng(master_seed, "diag-batch", r as u64);
            let mut noise_rng = stream_rng(master_seed, "diag-noise", r as u64);
            let idx = sample_batch(stats.n, batch_size, &mut batch_rng)?;
            let w = draw_noise_weights(batch_size, effective_batch, &mut noise_rng)?;
            let mut row = vec![0.0; dim];
            for (&i, &wi) in idx.iter().zip(w.weights()) {
                for (slot, v) in row.iter_mut().zip(stats.row(i)) {
                    *slot += wi * v;
                }
            }
            for v in row.iter_mut() {
                *v /= batch_size as f64;
            }
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut flat = Vec::with_capacity(replicates * dim);
    for r in rows {
        flat.extend(r);
    }
    Ok(GradientSample {
        replicates,
        dim,
        batch_size,
        effective_batch,
        data: flat,
    })
}

/// Holds the globals fixed and collects R replicate SVI+ gradients.
pub fn collect_gradients<M: CefModel>(
    model: &M,
    data: &[M::Datum],
    globals: &[NaturalParam],
    batch_size: usize,
    effective_batch: usize,
    replicates: usize,
    master_seed: u64,
) -> Result<GradientSample> {
    let stats = per_datum_stats(model, data, globals)?;
    collect_from_stats(&stats, batch_size, effective_batch, replicates, master_seed)
}

/// Per-coordinate KS against a moment-matched normal plus the energy
/// distance to a moment-matched Gaussian reference sample.
#[derive(Debug, Clone)]
pub struct GaussianityReport {
    pub ks: Vec<f64>,
    /// Coordinates with zero variance, reported as exactly
    /// Gaussian-degenerate (KS 0).
    pub degenerate: Vec<bool>,
    pub max_ks: f64,
    pub energy_distance: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct GofOptions {
    /// Cap on the number of rows entering the O(n^2) energy-distance
    /// sums; rows beyond the cap are dropped deterministically.
    pub energy_points: usize,
}

impl Default for GofOptions {
    fn default() -> Self {
        GofOptions { energy_points: 1000 }
    }
}

pub fn gaussianity(sample: &GradientSample, reference_seed: u64) -> GaussianityReport {
    gaussianity_with(sample, reference_seed, &GofOptions::default())
}

pub fn gaussianity_with(
    sample: &GradientSample,
    reference_seed: u64,
    opts: &GofOptions,
) -> GaussianityReport {
    let (r, dim) = (sample.replicates, sample.dim);
    let mean = sample.mean();
    let mut ks = vec![0.0; dim];
    let mut degenerate = vec![false; dim];
    let mut coord = vec![0.0; r];
    for j in 0..dim {
        for (i, c) in coord.iter_mut().enumerate() {
            *c = sample.row(i)[j];
        }
        let var = coord.iter().map(|x| (x - mean[j]) * (x - mean[j])).sum::<f64>() / r as f64;
        if var <= 0.0 {
            degenerate[j] = true;
            ks[j] = 0.0;
        } else {
            ks[j] = gof::ks_statistic_normal(&coord, mean[j], var.sqrt());
        }
    }
    let max_ks = ks.iter().cloned().fold(0.0, f64::max);

    // Moment-matched multivariate Gaussian reference of equal size.
    let n_energy = r.min(opts.energy_points);
    let cov = sample.covariance();
    let chol_m = {
        let mut m = cov.clone();
        let mut boost = 0.0;
        loop {
            match (m.clone()).cholesky() {
                Some(c) => break c,
                None => {
                    boost = if boost == 0.0 { 1e-12 } else { boost * 10.0 };
                    let scale = m.trace().max(1e-300) / dim as f64;
                    m = cov.clone() + DMatrix::identity(dim, dim) * (boost * scale);
                    if boost > 1e-3 {
                        break m.cholesky().expect("heavily ridged covariance is SPD");
                    }
                }
            }
        }
    };
    let l = chol_m.l();
    let mut rng = stream_rng(reference_seed, "gof-reference", 0);
    let normal = rand_distr::Normal::new(0.0, 1.0).expect("unit normal");
    let mut reference = Vec::with_capacity(n_energy * dim);
    for _ in 0..n_energy {
        let z = DVector::from_iterator(
            dim,
            (0..dim).map(|_| rand_distr::Distribution::sample(&normal, &mut rng)),
        );
        let x = &l * z + DVector::from_column_slice(&mean);
        reference.extend(x.iter());
    }
    let energy = gof::energy_distance(
        &sample.data[..n_energy * dim],
        &reference,
        n_energy,
        n_energy,
        dim,
    );

    GaussianityReport {
        ks,
        degenerate,
        max_ks,
        energy_distance: energy,
    }
}

/// One row of the batch-size trend table.
#[derive(Debug, Clone)]
pub struct TrendRow {
    pub tau: usize,
    pub batch_size: usize,
    pub mean_max_ks: f64,
    pub mean_energy: f64,
}

/// For each tau, collects SVI+ gradients at (|S| = tau * M, M) over
/// `repeats` independent repetitions of `replicates` draws and averages
/// the Gaussianity metrics. Larger tau should be closer to Gaussian.
pub fn theorem1_trend<M: CefModel>(
    model: &M,
    data: &[M::Datum],
    globals: &[NaturalParam],
    effective_batch: usize,
    taus: &[usize],
    replicates: usize,
    repeats: usize,
    master_seed: u64,
) -> Result<Vec<TrendRow>> {
    if replicates < 100 {
        return Err(Error::Contract("need at least 100 replicates".into()));
    }
    for &tau in taus {
        if tau < 1 || tau * effective_batch > data.len() {
            return Err(Error::Contract(format!(
                "tau {tau} with M = {effective_batch} needs {} data points, have {}",
                tau * effective_batch,
                data.len()
            )));
        }
    }
    let stats = per_datum_stats(model, data, globals)?;
    let mut rows = Vec::with_capacity(taus.len());
    for &tau in taus {
        let batch = tau * effective_batch;
        let reports: Vec<GaussianityReport> = (0..repeats)
            .map(|rep| {
                let seed = derive_seed(master_seed, "trend", (tau * 1_000_003 + rep) as u64);
                let sample =
                    collect_from_stats(&stats, batch, effective_batch, replicates, seed)?;
                Ok(gaussianity(&sample, derive_seed(seed, "reference", 0)))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(TrendRow {
            tau,
            batch_size: batch,
            mean_max_ks: reports.iter().map(|r| r.max_ks).sum::<f64>() / repeats as f64,
            mean_energy: reports.iter().map(|r| r.energy_distance).sum::<f64>()
                / repeats as f64,
        });
    }
    Ok(rows)
}

/// Argmax-responsibility cluster shares of one fitted model, sorted
/// descending.
pub fn occupancy_shares(
    model: &GmmModel,
    data: &[Vec<f64>],
    globals: &[NaturalParam],
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::Contract("occupancy needs data".into()));
    }
    let ctx = model.prepare(globals)?;
    let mut counts = vec![0usize; model.k()];
    for x in data {
        let r = model.responsibilities(x, &ctx)?;
        let best = r
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite responsibilities"))
            .map(|(i, _)| i)
            .expect("nonempty responsibilities");
        counts[best] += 1;
    }
    let mut shares: Vec<f64> = counts
        .iter()
        .map(|&c| c as f64 / data.len() as f64)
        .collect();
    shares.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite shares"));
    Ok(shares)
}

/// Size-sorted occupancy averaged across runs plus per-rank
/// min/quartile/max of the cumulative share (box-plot data).
#[derive(Debug, Clone)]
pub struct OccupancySummary {
    pub mean_shares: Vec<f64>,
    /// Per rank: [min, q1, median, q3, max] of the cumulative share.
    pub cumulative_quartiles: Vec<[f64; 5]>,
}

pub fn cluster_occupancy(per_run_shares: &[Vec<f64>]) -> Result<OccupancySummary> {
    let first = per_run_shares
        .first()
        .ok_or_else(|| Error::Contract("occupancy summary needs at least one run".into()))?;
    let k = first.len();
    if per_run_shares.iter().any(|s| s.len() != k) {
        return Err(Error::Contract("runs have different cluster counts".into()));
    }
    let runs = per_run_shares.len() as f64;
    let mut mean_shares = vec![0.0; k];
    for shares in per_run_shares {
        for (m, s) in mean_shares.iter_mut().zip(shares) {
            *m += s / runs;
        }
    }
    let mut cumulative_quartiles = Vec::with_capacity(k);
    let mut cums: Vec<Vec<f64>> = per_run_shares
        .iter()
        .map(|shares| {
            shares
                .iter()
                .scan(0.0, |acc, s| {
                    *acc += s;
                    Some(*acc)
                })
                .collect()
        })
        .collect();
    for rank in 0..k {
        let mut vals: Vec<f64> = cums.iter_mut().map(|c| c[rank]).collect();
        vals.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite shares"));
        cumulative_quartiles.push([
            vals[0],
            quantile(&vals, 0.25),
            quantile(&vals, 0.5),
            quantile(&vals, 0.75),
            vals[vals.len() - 1],
        ]);
    }
    Ok(OccupancySummary {
        mean_shares,
        cumulative_quartiles,
    })
}

/// Number of clusters holding more than `threshold` of the data.
pub fn effective_clusters(shares: &[f64], threshold: f64) -> usize {
    shares.iter().filter(|&&s| s > threshold).count()
}

/// Linear-interpolated quantile of a sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
    }
}
