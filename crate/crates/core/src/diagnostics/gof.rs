//! Goodness-of-fit statistics: one-sample Kolmogorov-Smirnov against a
//! fitted normal, and the energy distance between two vector samples.

use crate::special::normal_cdf;

/// Two-sided KS statistic of `xs` against N(mean, sd^2).
pub fn ks_statistic_normal(xs: &[f64], mean: f64, sd: f64) -> f64 {
    let mut sorted = xs.to_vec();
    sorted.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let n = sorted.len() as f64;
    let mut max = 0.0_f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = normal_cdf((x - mean) / sd);
        let lo = (f - i as f64 / n).abs();
        let hi = ((i + 1) as f64 / n - f).abs();
        max = max.max(lo).max(hi);
    }
    max
}

/// Energy distance between samples X (n rows) and Y (m rows) of `dim`
/// columns: 2 E||X - Y|| - E||X - X'|| - E||Y - Y'|| over all pairs.
pub fn energy_distance(x: &[f64], y: &[f64], n: usize, m: usize, dim: usize) -> f64 {
    debug_assert_eq!(x.len(), n * dim);
    debug_assert_eq!(y.len(), m * dim);
    let dist = |a: &[f64], b: &[f64]| -> f64 {
        a.iter()
            .zip(b)
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt()
    };
    fn row(s: &[f64], i: usize, dim: usize) -> &[f64] {
        &s[i * dim..(i + 1) * dim]
    }

    let mut xy = 0.0;
    for i in 0..n {
        for j in 0..m {
            xy += dist(row(x, i, dim), row(y, j, dim));
        }
    }
    xy /= (n * m) as f64;

    let mut xx = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            xx += dist(row(x, i, dim), row(x, j, dim));
        }
    }
    xx *= 2.0 / (n * n) as f64;

    let mut yy = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            yy += dist(row(y, i, dim), row(y, j, dim));
        }
    }
    yy *= 2.0 / (m * m) as f64;

    2.0 * xy - xx - yy
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn ks_of_exact_normal_sample_is_small() {
        let mut rng = stream_rng(1, "gof", 0);
        let normal = Normal::new(2.0, 3.0).unwrap();
        let xs: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
        let ks = ks_statistic_normal(&xs, mean, var.sqrt());
        assert!(ks < 1.63 / (xs.len() as f64).sqrt(), "ks = {ks}");
    }

    #[test]
    fn ks_of_two_point_mass_is_large() {
        let mut rng = stream_rng(2, "gof", 0);
        let xs: Vec<f64> = (0..5000)
            .map(|_| if rng.random::<f64>() < 0.5 { 0.0 } else { 1.0 })
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64;
        let ks = ks_statistic_normal(&xs, mean, var.sqrt());
        assert!(ks > 0.3, "ks = {ks}");
    }

    #[test]
    fn ks_invariant_under_duplication() {
        let mut rng = stream_rng(3, "gof", 0);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..500).map(|_| normal.sample(&mut rng)).collect();
        let mut doubled = xs.clone();
        doubled.extend_from_slice(&xs);
        let a = ks_statistic_normal(&xs, 0.0, 1.0);
        let b = ks_statistic_normal(&doubled, 0.0, 1.0);
        assert!((a - b).abs() < 1e-12);
    }

    // rand::Rng must be in scope for random::<f64>() above.
    use rand::Rng as _;

    #[test]
    fn energy_distance_zero_for_identical_samples() {
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let e = energy_distance(&x, &x, 3, 3, 2);
        assert!(e.abs() < 1e-12);
    }

    #[test]
    fn energy_distance_positive_for_shifted_samples() {
        let x = vec![0.0, 0.0, 1.0, 1.0];
        let y = vec![10.0, 10.0, 11.0, 11.0];
        assert!(energy_distance(&x, &y, 2, 2, 2) > 1.0);
    }
}
