//! Diagnostics contracts: degenerate replicate collection, unbiasedness
//! and covariance of collected gradients, Gaussianity metrics on known
//! inputs, the batch-size trend, and occupancy summaries.

mod common;

use common::relative_frobenius;
use rand::Rng;
use rand_distr::Distribution;
use svip_core::data::{gen_gmm_synthetic, ClusterSpec};
use svip_core::diagnostics::{
    cluster_occupancy, collect_from_stats, collect_gradients, effective_clusters, gaussianity,
    occupancy_shares, per_datum_stats, theorem1_trend, GradientSample,
};
use svip_core::engine::updated_param;
use svip_core::expfam::{DomainFloor, NaturalParam, SuffStat};
use svip_core::models::{CefModel, GmmModel};
use svip_core::rng::stream_rng;

/// Synthetic 4-cluster data with a partially trained K=4 state (five
/// batch-VI sweeps), the frozen state used across the noise diagnostics.
fn frozen_gmm_state() -> (GmmModel, Vec<Vec<f64>>, Vec<NaturalParam>) {
    let data = gen_gmm_synthetic(250, &ClusterSpec::default(), 42).unwrap().rows();
    let mixing = NaturalParam::symmetric_dirichlet(4, 1.0).unwrap();
    let model = GmmModel::with_data_prior(4, &data, mixing).unwrap();
    let priors = model.priors();
    let floor = DomainFloor::default();
    let mut globals = model.init_globals(&data, 1).unwrap();
    for _ in 0..5 {
        let ctx = model.prepare(&globals).unwrap();
        let mut grads: Vec<SuffStat> =
            priors.iter().map(|p| SuffStat::zeros(p.family())).collect();
        for x in &data {
            for (g, stat) in model.local_step(x, &ctx).unwrap() {
                grads[g].add_scaled(1.0, &stat);
            }
        }
        globals = globals
            .iter()
            .zip(&priors)
            .zip(&grads)
            .map(|((l, e), g)| updated_param(l, e, g, 1.0, &floor).unwrap())
            .collect();
    }
    (model, data, globals)
}

#[test]
fn full_batch_without_noise_gives_identical_replicates() {
    let (model, data, globals) = frozen_gmm_state();
    let n = data.len();
    let sample = collect_gradients(&model, &data, &globals, n, n, 200, 9).unwrap();
    let first = sample.row(0).to_vec();
    for r in 1..sample.replicates {
        assert_eq!(sample.row(r), &first[..], "replicate {r} differs");
    }
}

#[test]
fn replicate_mean_matches_full_data_statistic() {
    let (model, data, globals) = frozen_gmm_state();
    let stats = per_datum_stats(&model, &data, &globals).unwrap();
    let full = stats.full_data_mean();
    let sample = collect_from_stats(&stats, 200, 50, 100_000, 11).unwrap();
    let mean = sample.mean();
    for (m, f) in mean.iter().zip(&full) {
        assert!(
            (m - f).abs() <= 0.01 * f.abs().max(1e-12),
            "coordinate {m} vs full-data {f}"
        );
    }
}

#[test]
fn svi_covariance_shrinks_like_one_over_batch() {
    // At M = |S| the replicate covariance approximates
    // (1/|S|) Cov(per-datum statistics).
    let (model, data, globals) = frozen_gmm_state();
    let stats = per_datum_stats(&model, &data, &globals).unwrap();
    let s = 50usize;
    let sample = collect_from_stats(&stats, s, s, 100_000, 13).unwrap();
    let empirical = sample.covariance();
    // Without-replacement sampling from a finite population carries the
    // (N - S)/(N - 1) correction.
    let n = data.len() as f64;
    let fpc = (n - s as f64) / (n - 1.0);
    let target = stats.covariance() * (fpc / s as f64);
    let err = relative_frobenius(&empirical, &target);
    assert!(err < 0.10, "relative Frobenius error {err}");
}

fn gaussian_sample(r: usize, dim: usize, seed: u64) -> GradientSample {
    let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
    let mut rng = stream_rng(seed, "gauss-input", 0);
    let scale: Vec<f64> = (0..dim).map(|j| 1.0 + j as f64).collect();
    let data: Vec<f64> = (0..r * dim)
        .map(|i| normal.sample(&mut rng) * scale[i % dim])
        .collect();
    GradientSample::from_raw_rows(data, r, dim, 100, 10)
}

#[test]
fn gaussian_input_passes_ks_gate() {
    let sample = gaussian_sample(10_000, 3, 5);
    let report = gaussianity(&sample, 77);
    let critical = 1.63 / (10_000.0_f64).sqrt();
    assert!(
        report.max_ks < critical,
        "max KS {} vs critical {critical}",
        report.max_ks
    );
    assert!(report.energy_distance < 0.05, "energy {}", report.energy_distance);
}

#[test]
fn bernoulli_input_fails_ks_gate() {
    let mut rng = stream_rng(6, "bern", 0);
    let r = 5000;
    let data: Vec<f64> = (0..r * 2)
        .map(|_| if rng.random::<f64>() < 0.5 { 0.0 } else { 1.0 })
        .collect();
    let sample = GradientSample::from_raw_rows(data, r, 2, 100, 10);
    let report = gaussianity(&sample, 77);
    assert!(report.max_ks > 0.3, "max KS {}", report.max_ks);
}

#[test]
fn duplicated_replicates_leave_ks_unchanged() {
    let sample = gaussian_sample(2000, 2, 8);
    let mut doubled_data = Vec::with_capacity(2 * 2000 * 2);
    for r in 0..2000 {
        doubled_data.extend_from_slice(sample.row(r));
    }
    for r in 0..2000 {
        doubled_data.extend_from_slice(sample.row(r));
    }
    let doubled = GradientSample::from_raw_rows(doubled_data, 4000, 2, 100, 10);
    let a = gaussianity(&sample, 3);
    let b = gaussianity(&doubled, 3);
    for (x, y) in a.ks.iter().zip(&b.ks) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn degenerate_coordinate_is_flagged() {
    let r = 500;
    let mut rng = stream_rng(9, "degen", 0);
    let normal = rand_distr::Normal::new(0.0, 1.0).unwrap();
    let data: Vec<f64> = (0..r)
        .flat_map(|_| vec![2.5, normal.sample(&mut rng)])
        .collect();
    let sample = GradientSample::from_raw_rows(data, r, 2, 100, 10);
    let report = gaussianity(&sample, 1);
    assert!(report.degenerate[0]);
    assert_eq!(report.ks[0], 0.0);
    assert!(!report.degenerate[1]);
}

#[test]
fn trend_tau_one_is_plain_svi() {
    let (model, data, globals) = frozen_gmm_state();
    let stats = per_datum_stats(&model, &data, &globals).unwrap();
    // tau = 1 means |S| = M: the noise path is skipped entirely, so the
    // sample must be bit-identical to an |S| = M SVI collection with the
    // same seeds.
    let a = collect_from_stats(&stats, 25, 25, 500, 21).unwrap();
    let b = collect_from_stats(&stats, 25, 25, 500, 21).unwrap();
    for r in 0..a.replicates {
        assert_eq!(a.row(r), b.row(r));
    }
}

#[test]
fn trend_covariance_is_tau_invariant() {
    // Fixed M: total gradient covariance should match across tau
    // within 10% relative Frobenius.
    let (model, data, globals) = frozen_gmm_state();
    let stats = per_datum_stats(&model, &data, &globals).unwrap();
    let m = 25usize;
    let base = collect_from_stats(&stats, m, m, 50_000, 31).unwrap().covariance();
    for tau in [2usize, 4, 8] {
        let cov = collect_from_stats(&stats, tau * m, m, 50_000, 32 + tau as u64)
            .unwrap()
            .covariance();
        let err = relative_frobenius(&cov, &base);
        assert!(err < 0.10, "tau {tau}: relative Frobenius error {err}");
    }
}

#[test]
fn trend_metrics_approach_gaussian_null_for_large_tau() {
    let (model, data, globals) = frozen_gmm_state();
    let rows = theorem1_trend(&model, &data, &globals, 25, &[1, 8], 2000, 10, 51).unwrap();
    assert_eq!(rows.len(), 2);
    let small_tau = &rows[0];
    let large_tau = &rows[1];
    assert!(
        large_tau.mean_max_ks < small_tau.mean_max_ks,
        "tau=8 KS {} should be below tau=1 KS {}",
        large_tau.mean_max_ks,
        small_tau.mean_max_ks
    );
    // Null level for the max over ~32 fitted coordinates at R = 2000 is
    // roughly 0.02-0.03; allow headroom.
    assert!(
        large_tau.mean_max_ks < 0.06,
        "tau=8 KS {} not near the Gaussian null",
        large_tau.mean_max_ks
    );
}

#[test]
fn occupancy_shares_on_oracle_labels() {
    // Well-separated 4-cluster data with a K=50 truncation: argmax
    // assignment after a few sweeps recovers 4 effective clusters when
    // the state is trained enough; here we check the bookkeeping path on
    // a K=4 fitted state instead.
    let (model, data, globals) = frozen_gmm_state();
    let shares = occupancy_shares(&model, &data, &globals).unwrap();
    assert_eq!(shares.len(), 4);
    let total: f64 = shares.iter().sum();
    assert!((total - 1.0).abs() < 1e-10);
    for w in shares.windows(2) {
        assert!(w[0] >= w[1], "shares not sorted: {shares:?}");
    }
    assert_eq!(effective_clusters(&shares, 0.01), 4);
}

#[test]
fn occupancy_summary_handles_degenerate_and_permuted_runs() {
    // All data in one cluster.
    let single = cluster_occupancy(&[vec![1.0, 0.0, 0.0]]).unwrap();
    assert_eq!(single.mean_shares, vec![1.0, 0.0, 0.0]);
    assert_eq!(single.cumulative_quartiles[0], [1.0; 5]);

    // Two runs with permuted labels but identical partitions sort to the
    // same shares.
    let a = vec![0.6, 0.3, 0.1];
    let b = vec![0.6, 0.3, 0.1];
    let summary = cluster_occupancy(&[a.clone(), b]).unwrap();
    assert_eq!(summary.mean_shares, a);
    for (rank, q) in summary.cumulative_quartiles.iter().enumerate() {
        assert_eq!(q[0], q[4], "rank {rank} min != max across identical runs");
    }

    // Non-increasing mean shares and cumulative reaching 1.
    let summary = cluster_occupancy(&[vec![0.5, 0.3, 0.2], vec![0.7, 0.2, 0.1]]).unwrap();
    for w in summary.mean_shares.windows(2) {
        assert!(w[0] >= w[1]);
    }
    let last = summary.cumulative_quartiles.last().unwrap();
    assert!((last[2] - 1.0).abs() < 1e-10);
}

#[test]
fn collect_rejects_undersized_data() {
    let (model, data, globals) = frozen_gmm_state();
    assert!(collect_gradients(&model, &data, &globals, 251, 10, 200, 1).is_err());
    assert!(theorem1_trend(&model, &data, &globals, 100, &[3], 2000, 2, 1).is_err());
    assert!(theorem1_trend(&model, &data, &globals, 25, &[2], 50, 2, 1).is_err());
}

#[test]
fn oracle_labels_give_four_effective_clusters() {
    // Ground-truth-labeled synthetic data with oracle responsibilities:
    // 4 effective clusters out of a 50-wide truncation.
    let features = gen_gmm_synthetic(400, &ClusterSpec::default(), 3).unwrap();
    let labels = features.labels.clone().unwrap();
    let mut counts = vec![0usize; 50];
    for &l in &labels {
        counts[l] += 1;
    }
    let mut shares: Vec<f64> = counts.iter().map(|&c| c as f64 / 400.0).collect();
    shares.sort_unstable_by(|a, b| b.partial_cmp(a).unwrap());
    assert_eq!(effective_clusters(&shares, 0.01), 4);
}
