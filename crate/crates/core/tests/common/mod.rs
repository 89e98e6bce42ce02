//! Shared test oracles: seeded Monte-Carlo samplers for the three
//! families, a k-NN entropy estimator, and matrix comparison helpers.
//! Everything here is written from standard-parameter closed forms,
//! independent of the library's natural-parameter code paths.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Normal};
use svip_core::expfam::packed::pack;
use svip_core::expfam::{Family, NaturalParam};

pub fn sample_dirichlet<R: Rng>(conc: &[f64], rng: &mut R) -> Vec<f64> {
    let draws: Vec<f64> = conc
        .iter()
        .map(|&a| Gamma::new(a, 1.0).unwrap().sample(rng))
        .collect();
    let total: f64 = draws.iter().sum();
    draws.iter().map(|g| g / total).collect()
}

/// Multivariate normal draw given the covariance Cholesky factor.
pub fn sample_mvn<R: Rng>(mean: &DVector<f64>, cov_l: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let std = Normal::new(0.0, 1.0).unwrap();
    let z = DVector::from_iterator(mean.len(), (0..mean.len()).map(|_| std.sample(rng)));
    cov_l * z + mean
}

/// Wishart draw via the Bartlett decomposition: Lambda = (L A)(L A)^T
/// with W = L L^T, A lower-triangular, A_ii^2 ~ chi2(dof - i + 1).
pub fn sample_wishart<R: Rng>(scale: &DMatrix<f64>, dof: f64, rng: &mut R) -> DMatrix<f64> {
    let d = scale.nrows();
    let l = scale.clone().cholesky().expect("scale SPD").l();
    let std = Normal::new(0.0, 1.0).unwrap();
    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        let chi2 = Gamma::new(0.5 * (dof - i as f64), 2.0).unwrap();
        a[(i, i)] = chi2.sample(rng).sqrt();
        for j in 0..i {
            a[(i, j)] = std.sample(rng);
        }
    }
    let la = l * a;
    &la * la.transpose()
}

/// Joint Normal-Wishart draw (mu, Lambda).
pub fn sample_normal_wishart<R: Rng>(
    mean: &DVector<f64>,
    kappa: f64,
    scale: &DMatrix<f64>,
    dof: f64,
    rng: &mut R,
) -> (DVector<f64>, DMatrix<f64>) {
    let lambda = sample_wishart(scale, dof, rng);
    let cov = (lambda.clone() * kappa)
        .try_inverse()
        .expect("kappa Lambda invertible");
    let cov_l = cov.cholesky().expect("conditional covariance SPD").l();
    let mu = sample_mvn(mean, &cov_l, rng);
    (mu, lambda)
}

/// One Monte-Carlo draw of the family's sufficient statistic, in the
/// library's flat layout.
pub fn sample_suff_stat<R: Rng>(param: &NaturalParam, rng: &mut R) -> Vec<f64> {
    match param.family() {
        Family::Dirichlet { .. } => {
            let conc = param.concentrations().unwrap();
            sample_dirichlet(&conc, rng).iter().map(|p| p.ln()).collect()
        }
        Family::MultivariateGaussian { .. } => {
            let m = param.gaussian_moments().unwrap();
            let cov_l = m.covariance.clone().cholesky().unwrap().l();
            let x = sample_mvn(&m.mean, &cov_l, rng);
            let mut out: Vec<f64> = x.iter().cloned().collect();
            out.extend(pack(&(&x * x.transpose())));
            out
        }
        Family::NormalWishart { .. } => {
            let p = param.normal_wishart_params().unwrap();
            let (mu, lambda) = sample_normal_wishart(&p.mean, p.kappa, &p.scale, p.dof, rng);
            let lam_mu = &lambda * &mu;
            let mut out: Vec<f64> = lam_mu.iter().cloned().collect();
            out.extend(pack(&lambda));
            out.push(lam_mu.dot(&mu));
            out.push(
                lambda
                    .clone()
                    .cholesky()
                    .expect("Wishart draw SPD")
                    .l_dirty()
                    .diagonal()
                    .iter()
                    .map(|v| 2.0 * v.ln())
                    .sum(),
            );
            out
        }
    }
}

/// Mean of `n` Monte-Carlo sufficient-statistic draws.
pub fn mc_expected_suff_stats<R: Rng>(param: &NaturalParam, n: usize, rng: &mut R) -> Vec<f64> {
    let mut acc = vec![0.0; param.len()];
    for _ in 0..n {
        for (a, v) in acc.iter_mut().zip(sample_suff_stat(param, rng)) {
            *a += v;
        }
    }
    for a in acc.iter_mut() {
        *a /= n as f64;
    }
    acc
}

/// Kozachenko-Leonenko k-NN differential entropy estimate.
pub fn knn_entropy(samples: &[Vec<f64>], k: usize) -> f64 {
    let n = samples.len();
    let d = samples[0].len();
    let mut log_eps_sum = 0.0;
    for i in 0..n {
        let mut dists: Vec<f64> = (0..n)
            .filter(|&j| j != i)
            .map(|j| {
                samples[i]
                    .iter()
                    .zip(&samples[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt()
            })
            .collect();
        dists.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
        log_eps_sum += dists[k - 1].max(1e-300).ln();
    }
    let unit_ball = 0.5 * d as f64 * std::f64::consts::PI.ln()
        - svip_core::special::ln_gamma(0.5 * d as f64 + 1.0);
    svip_core::special::digamma(n as f64) - svip_core::special::digamma(k as f64)
        + unit_ball
        + d as f64 / n as f64 * log_eps_sum
}

pub fn relative_frobenius(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).norm() / b.norm()
}

/// Random valid natural parameters for property sweeps.
pub mod gen {
    use super::*;
    use rand::Rng;

    pub fn random_dirichlet<R: Rng>(k: usize, rng: &mut R) -> NaturalParam {
        let conc: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..15.0)).collect();
        NaturalParam::dirichlet(&conc).unwrap()
    }

    pub fn random_spd<R: Rng>(d: usize, rng: &mut R) -> DMatrix<f64> {
        let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        &a * a.transpose() + DMatrix::identity(d, d) * rng.random_range(0.1..1.0)
    }

    pub fn random_gaussian<R: Rng>(d: usize, rng: &mut R) -> NaturalParam {
        let mean = DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
        NaturalParam::gaussian(&mean, &random_spd(d, rng)).unwrap()
    }

    pub fn random_normal_wishart<R: Rng>(d: usize, rng: &mut R) -> NaturalParam {
        let mean = DVector::from_fn(d, |_, _| rng.random_range(-2.0..2.0));
        let kappa = rng.random_range(0.2..5.0);
        let dof = d as f64 + rng.random_range(1.0..6.0);
        NaturalParam::normal_wishart(&mean, kappa, &random_spd(d, rng), dof).unwrap()
    }
}
