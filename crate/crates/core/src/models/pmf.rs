//! Probabilistic matrix factorization: y_ij ~ N(u_i^T v_j, sigma2) with
//! Gaussian priors N(0, c I) on user and item factors. Both factor sets
//! are global variables; each rating contributes statistics to its
//! user's and its item's posterior, and a per-rating noise weight
//! multiplies both contributions.

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};

use crate::data::Rating;
use crate::expfam::packed::pack;
use crate::expfam::{Family, NaturalParam, SuffStat};
use crate::models::CefModel;
use crate::rng::stream_rng;
use crate::{Error, Result};

use std::f64::consts::PI;

#[derive(Debug, Clone)]
pub struct PmfModel {
    pub n_users: usize,
    pub n_items: usize,
    /// Factorization rank.
    pub d: usize,
    /// Observation noise variance.
    pub sigma2: f64,
    /// Prior variance of each factor coordinate.
    pub c: f64,
}

struct FactorMoments {
    mean: DVector<f64>,
    /// E[x x^T] = Sigma + mean mean^T.
    second: DMatrix<f64>,
}

pub struct PmfCtx {
    moments: Vec<FactorMoments>,
}

impl PmfModel {
    pub fn new(n_users: usize, n_items: usize, d: usize, sigma2: f64, c: f64) -> Result<Self> {
        if n_users < 1 || n_items < 1 || d < 1 {
            return Err(Error::Contract(
                "PMF needs at least one user, one item and rank >= 1".into(),
            ));
        }
        if sigma2 <= 0.0 || c <= 0.0 {
            return Err(Error::Contract(format!(
                "PMF variances must be positive, got sigma2 = {sigma2}, c = {c}"
            )));
        }
        Ok(PmfModel {
            n_users,
            n_items,
            d,
            sigma2,
            c,
        })
    }

    pub fn user_global(&self, i: usize) -> usize {
        i
    }

    pub fn item_global(&self, j: usize) -> usize {
        self.n_users + j
    }

    fn factor_prior(&self) -> NaturalParam {
        let mean = DVector::zeros(self.d);
        let precision = DMatrix::identity(self.d, self.d) / self.c;
        NaturalParam::gaussian(&mean, &precision).expect("valid prior")
    }

    /// Statistic one rating contributes to a factor's posterior given the
    /// other side's moments: sigma^-2 (y E[x], -1/2 E[x x^T]).
    fn rating_stat(&self, y: f64, other: &FactorMoments) -> SuffStat {
        let s2inv = 1.0 / self.sigma2;
        let mut values = Vec::with_capacity(self.d + self.d * (self.d + 1) / 2);
        values.extend(other.mean.iter().map(|m| s2inv * y * m));
        values.extend(pack(&(&other.second * (-0.5 * s2inv))));
        SuffStat::from_values(Family::MultivariateGaussian { d: self.d }, values)
            .expect("rating stat layout")
    }

    /// Posterior mean prediction E[u_i]^T E[v_j].
    pub fn predict(&self, ctx: &PmfCtx, user: usize, item: usize) -> f64 {
        ctx.moments[self.user_global(user)]
            .mean
            .dot(&ctx.moments[self.item_global(item)].mean)
    }
}

impl CefModel for PmfModel {
    type Datum = Rating;
    type Ctx = PmfCtx;

    fn name(&self) -> &'static str {
        "pmf"
    }

    fn priors(&self) -> Vec<NaturalParam> {
        vec![self.factor_prior(); self.n_users + self.n_items]
    }

    /// Factor means iid N(0, 0.1), covariance c I.
    fn init_globals(&self, _data: &[Rating], seed: u64) -> Result<Vec<NaturalParam>> {
        let mut rng = stream_rng(seed, "init", 0);
        let normal = Normal::new(0.0, 0.1_f64.sqrt()).expect("finite sd");
        let precision = DMatrix::identity(self.d, self.d) / self.c;
        (0..self.n_users + self.n_items)
            .map(|_| {
                let mean = DVector::from_iterator(self.d, (0..self.d).map(|_| normal.sample(&mut rng)));
                NaturalParam::gaussian(&mean, &precision)
            })
            .collect()
    }

    fn prepare(&self, globals: &[NaturalParam]) -> Result<PmfCtx> {
        if globals.len() != self.n_users + self.n_items {
            return Err(Error::Contract(format!(
                "expected {} globals, got {}",
                self.n_users + self.n_items,
                globals.len()
            )));
        }
        let moments = globals
            .iter()
            .map(|g| {
                let m = g.gaussian_moments()?;
                let second = &m.covariance + &m.mean * m.mean.transpose();
                Ok(FactorMoments {
                    mean: m.mean,
                    second,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(PmfCtx { moments })
    }

    fn local_step(&self, r: &Rating, ctx: &PmfCtx) -> Result<Vec<(usize, SuffStat)>> {
        if r.user >= self.n_users || r.item >= self.n_items {
            return Err(Error::Contract(format!(
                "rating ({}, {}) outside {}x{}",
                r.user, r.item, self.n_users, self.n_items
            )));
        }
        let u = &ctx.moments[self.user_global(r.user)];
        let v = &ctx.moments[self.item_global(r.item)];
        Ok(vec![
            (self.user_global(r.user), self.rating_stat(r.value, v)),
            (self.item_global(r.item), self.rating_stat(r.value, u)),
        ])
    }

    fn elbo(&self, data: &[Rating], globals: &[NaturalParam]) -> Result<f64> {
        let ctx = self.prepare(globals)?;
        let s2inv = 1.0 / self.sigma2;
        let mut total = 0.0;
        for r in data {
            let u = &ctx.moments[self.user_global(r.user)];
            let v = &ctx.moments[self.item_global(r.item)];
            // E[(y - u^T v)^2] = y^2 - 2 y E[u]^T E[v] + tr(E[uu^T] E[vv^T]).
            let cross = u.mean.dot(&v.mean);
            let second = u.second.component_mul(&v.second).sum();
            total += -0.5 * (2.0 * PI * self.sigma2).ln()
                - 0.5 * s2inv * (r.value * r.value - 2.0 * r.value * cross + second);
        }
        let prior = self.factor_prior();
        for g in globals {
            total -= g.kl_divergence(&prior)?;
        }
        Ok(total)
    }
}
