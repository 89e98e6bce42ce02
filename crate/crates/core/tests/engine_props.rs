//! Statistical contracts of the SVI+ kernel: injected-noise covariance,
//! unbiasedness over (batch, noise) draws, effective-batch covariance
//! matching, and the two algebraic routes to the noise vector.

mod common;

use common::relative_frobenius;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use svip_core::engine::{draw_noise_weights, sample_batch, svi_plus_gradient};
use svip_core::expfam::{Family, SuffStat};
use svip_core::rng::stream_rng;

const DIM: usize = 3;

fn carrier() -> Family {
    Family::Dirichlet { k: DIM }
}

fn random_stats(n: usize, seed: u64) -> Vec<SuffStat> {
    let mut rng = stream_rng(seed, "stats", 0);
    (0..n)
        .map(|_| {
            let values: Vec<f64> = (0..DIM).map(|_| rng.random_range(-2.0..2.0)).collect();
            SuffStat::from_values(carrier(), values).unwrap()
        })
        .collect()
}

fn covariance(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len() as f64;
    let mut mean = DVector::zeros(DIM);
    for r in rows {
        mean += DVector::from_column_slice(r);
    }
    mean /= n;
    let mut cov = DMatrix::zeros(DIM, DIM);
    for r in rows {
        let c = DVector::from_column_slice(r) - &mean;
        cov += &c * c.transpose();
    }
    cov / n
}

/// Population covariance (1/n normalization) of raw statistic vectors.
fn stat_covariance(stats: &[SuffStat]) -> DMatrix<f64> {
    covariance(&stats.iter().map(|s| s.values().to_vec()).collect::<Vec<_>>())
}

#[test]
fn injected_noise_covariance_matches_target() {
    // Holding one batch fixed and redrawing only the noise, the output
    // covariance must be N^2 * alpha * Sigma_t with Sigma_t the batch
    // covariance of the statistics.
    let (s, m, n_data, redraws) = (200usize, 50usize, 1000usize, 100_000usize);
    let batch = random_stats(s, 1);
    let mut rows = Vec::with_capacity(redraws);
    for r in 0..redraws {
        let mut rng = stream_rng(2, "noise", r as u64);
        let w = draw_noise_weights(s, m, &mut rng).unwrap();
        rows.push(svi_plus_gradient(&batch, &w, n_data).unwrap().values().to_vec());
    }
    let empirical = covariance(&rows);
    let alpha = svip_core::engine::alpha(s, m).unwrap();
    let target = stat_covariance(&batch) * alpha * (n_data as f64).powi(2);
    let err = relative_frobenius(&empirical, &target);
    assert!(err < 0.05, "relative Frobenius error {err}");
}

#[test]
fn gradient_is_unbiased_over_batch_and_noise() {
    let (n, s, m, draws) = (500usize, 100usize, 20usize, 100_000usize);
    // Offset coordinates keep the full-data sums well away from zero so
    // a per-coordinate relative gate is meaningful.
    let stats: Vec<SuffStat> = {
        let mut rng = stream_rng(3, "stats", 0);
        let centers = [2.0, -3.0, 5.0];
        (0..n)
            .map(|_| {
                let values: Vec<f64> = centers
                    .iter()
                    .map(|c| c + rng.random_range(-1.0..1.0))
                    .collect();
                SuffStat::from_values(carrier(), values).unwrap()
            })
            .collect()
    };
    let mut full = vec![0.0; DIM];
    for st in &stats {
        for (f, v) in full.iter_mut().zip(st.values()) {
            *f += v;
        }
    }
    let mut acc = vec![0.0; DIM];
    for r in 0..draws {
        let idx = sample_batch(n, s, &mut stream_rng(4, "batch", r as u64)).unwrap();
        let batch: Vec<SuffStat> = idx.iter().map(|&i| stats[i].clone()).collect();
        let w = draw_noise_weights(s, m, &mut stream_rng(4, "noise", r as u64)).unwrap();
        let g = svi_plus_gradient(&batch, &w, n).unwrap();
        for (a, v) in acc.iter_mut().zip(g.values()) {
            *a += v;
        }
    }
    for (a, f) in acc.iter().zip(&full) {
        let mean = a / draws as f64;
        assert!(
            (mean - f).abs() / f.abs() < 0.01,
            "coordinate mean {mean} vs full-data {f}"
        );
    }
}

#[test]
fn effective_batch_covariance_matches_small_batch_svi() {
    // Total gradient covariance of SVI+ at (|S| = 200, M = 50) matches
    // plain SVI at |S| = 50 on the same data.
    let (n, draws) = (500usize, 100_000usize);
    let stats = random_stats(n, 5);
    let collect = |s: usize, m: usize, tag: u64| -> DMatrix<f64> {
        let rows: Vec<Vec<f64>> = (0..draws)
            .map(|r| {
                let idx = sample_batch(n, s, &mut stream_rng(tag, "batch", r as u64)).unwrap();
                let batch: Vec<SuffStat> = idx.iter().map(|&i| stats[i].clone()).collect();
                let w = draw_noise_weights(s, m, &mut stream_rng(tag, "noise", r as u64)).unwrap();
                svi_plus_gradient(&batch, &w, n).unwrap().values().to_vec()
            })
            .collect();
        covariance(&rows)
    };
    let svi_plus = collect(200, 50, 10);
    let svi_small = collect(50, 50, 11);
    let err = relative_frobenius(&svi_plus, &svi_small);
    assert!(err < 0.10, "relative Frobenius error {err}");
}

#[test]
fn centered_and_raw_noise_routes_agree() {
    // xi via centered statistics times eps equals xi via raw statistics
    // times (eps - mean eps); both recoverable from the weights.
    let (s, m, n) = (128usize, 16usize, 1000usize);
    let batch = random_stats(s, 7);
    let mut rng = stream_rng(8, "noise", 0);
    let w = draw_noise_weights(s, m, &mut rng).unwrap();

    let impl_route = svi_plus_gradient(&batch, &w, n).unwrap();

    // mu_t = batch mean; raw route: (N/|S|) (sum s + sum (s - mu)(w - 1)).
    let mut mu = vec![0.0; DIM];
    for st in &batch {
        for (a, v) in mu.iter_mut().zip(st.values()) {
            *a += v / s as f64;
        }
    }
    let mut out = vec![0.0; DIM];
    for (st, &wi) in batch.iter().zip(w.weights()) {
        for (o, (v, mu_j)) in out.iter_mut().zip(st.values().iter().zip(&mu)) {
            *o += v + (v - mu_j) * (wi - 1.0);
        }
    }
    for o in out.iter_mut() {
        *o *= n as f64 / s as f64;
    }
    for (a, b) in impl_route.values().iter().zip(&out) {
        assert!(
            (a - b).abs() < 1e-12 * b.abs().max(1.0),
            "routes differ: {a} vs {b}"
        );
    }
}
