//! Gaussian mixture model with Dirichlet mixing weights and
//! Normal-Wishart component posteriors. A truncated-DP variant is the
//! same model with a sparsity-inducing symmetric Dirichlet prior
//! (mass / K per component).

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::expfam::packed::pack;
use crate::expfam::{Family, NaturalParam, SuffStat};
use crate::models::CefModel;
use crate::rng::stream_rng;
use crate::{Error, Result};

use std::f64::consts::PI;

/// Symmetric Dirichlet prior with per-component concentration mass / K;
/// the finite sparsity-inducing approximation of a DP.
pub fn dp_gmm_prior(k_trunc: usize, mass: f64) -> Result<NaturalParam> {
    if k_trunc < 2 {
        return Err(Error::Contract(format!(
            "DP truncation needs K >= 2, got {k_trunc}"
        )));
    }
    if mass <= 0.0 {
        return Err(Error::Contract(format!("DP mass must be > 0, got {mass}")));
    }
    NaturalParam::symmetric_dirichlet(k_trunc, mass / k_trunc as f64)
}

#[derive(Debug, Clone)]
pub struct GmmModel {
    k: usize,
    d: usize,
    mixing_prior: NaturalParam,
    component_prior: NaturalParam,
    /// Size of the data subsample used by the seeding pass.
    init_subsample: usize,
}

/// Per-component expectations shared across a batch.
#[derive(Debug, Clone)]
struct ComponentCtx {
    mean: DVector<f64>,
    kappa: f64,
    scale: DMatrix<f64>,
    dof: f64,
    e_ln_det: f64,
}

#[derive(Debug, Clone)]
pub struct GmmCtx {
    e_log_pi: Vec<f64>,
    comps: Vec<ComponentCtx>,
}

impl GmmModel {
    pub fn new(
        k: usize,
        d: usize,
        mixing_prior: NaturalParam,
        component_prior: NaturalParam,
    ) -> Result<Self> {
        if mixing_prior.family() != (Family::Dirichlet { k }) {
            return Err(Error::Contract(format!(
                "mixing prior must be Dirichlet({k}), got {:?}",
                mixing_prior.family()
            )));
        }
        if component_prior.family() != (Family::NormalWishart { d }) {
            return Err(Error::Contract(format!(
                "component prior must be NormalWishart({d}), got {:?}",
                component_prior.family()
            )));
        }
        mixing_prior.validate()?;
        component_prior.validate()?;
        Ok(GmmModel {
            k,
            d,
            mixing_prior,
            component_prior,
            init_subsample: 512,
        })
    }

    /// Weakly informative data-scale priors: component mean at the data
    /// mean, mean-precision 1, dof d + 2, Wishart scale (dof * Cov)^-1
    /// so E[Lambda] matches the data precision.
    pub fn with_data_prior(
        k: usize,
        data: &[Vec<f64>],
        mixing_prior: NaturalParam,
    ) -> Result<Self> {
        let first = data
            .first()
            .ok_or_else(|| Error::Contract("cannot derive priors from empty data".into()))?;
        let d = first.len();
        let n = data.len() as f64;
        let mut mean = DVector::zeros(d);
        for x in data {
            mean += DVector::from_column_slice(x);
        }
        mean /= n;
        let mut cov = DMatrix::zeros(d, d);
        for x in data {
            let diff = DVector::from_column_slice(x) - &mean;
            cov += &diff * diff.transpose();
        }
        cov /= n;
        // Ridge keeps degenerate data (constant columns) workable.
        cov += DMatrix::identity(d, d) * 1e-6;
        let dof = d as f64 + 2.0;
        let scale = (cov * dof)
            .try_inverse()
            .ok_or_else(|| Error::Numerical("data covariance is not invertible".into()))?;
        let component_prior = NaturalParam::normal_wishart(&mean, 1.0, &scale, dof)?;
        GmmModel::new(k, d, mixing_prior, component_prior)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn mixing<'a>(&self, globals: &'a [NaturalParam]) -> &'a NaturalParam {
        &globals[0]
    }

    pub fn component<'a>(&self, globals: &'a [NaturalParam], k: usize) -> &'a NaturalParam {
        &globals[1 + k]
    }

    /// Posterior responsibilities r_nk, normalized in log space.
    pub fn responsibilities(&self, x: &[f64], ctx: &GmmCtx) -> Result<Vec<f64>> {
        if x.len() != self.d {
            return Err(Error::Contract(format!(
                "datum has dimension {}, model expects {}",
                x.len(),
                self.d
            )));
        }
        let xv = DVector::from_column_slice(x);
        let mut log_r = Vec::with_capacity(self.k);
        for (k, comp) in ctx.comps.iter().enumerate() {
            let diff = &xv - &comp.mean;
            let quad = comp.dof * (&comp.scale * &diff).dot(&diff) + self.d as f64 / comp.kappa;
            log_r.push(
                ctx.e_log_pi[k] + 0.5 * comp.e_ln_det
                    - 0.5 * self.d as f64 * (2.0 * PI).ln()
                    - 0.5 * quad,
            );
        }
        let max = log_r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numerical(
                "all mixture log-responsibilities underflowed".into(),
            ));
        }
        let mut sum = 0.0;
        let mut r: Vec<f64> = log_r
            .iter()
            .map(|l| {
                let e = (l - max).exp();
                sum += e;
                e
            })
            .collect();
        for v in r.iter_mut() {
            *v /= sum;
        }
        Ok(r)
    }

    /// Sufficient statistic a unit-weight observation contributes to a
    /// component: (x, -1/2 x x^T, -1/2, 1/2) in the Normal-Wishart layout.
    fn component_stat(&self, x: &DVector<f64>, weight: f64) -> SuffStat {
        let mut values = Vec::with_capacity(self.component_prior.len());
        values.extend(x.iter().map(|v| weight * v));
        let outer = x * x.transpose() * (-0.5 * weight);
        values.extend(pack(&outer));
        values.push(-0.5 * weight);
        values.push(0.5 * weight);
        SuffStat::from_values(Family::NormalWishart { d: self.d }, values)
            .expect("component stat layout")
    }
}

impl CefModel for GmmModel {
    type Datum = Vec<f64>;
    type Ctx = GmmCtx;

    fn name(&self) -> &'static str {
        "gmm"
    }

    fn priors(&self) -> Vec<NaturalParam> {
        let mut p = Vec::with_capacity(1 + self.k);
        p.push(self.mixing_prior.clone());
        p.extend(std::iter::repeat_n(self.component_prior.clone(), self.k));
        p
    }

    /// k-means++-style seeding on a data subsample: component means are
    /// the seeded points, everything else starts at the prior.
    fn init_globals(&self, data: &[Self::Datum], seed: u64) -> Result<Vec<NaturalParam>> {
        if data.is_empty() {
            return Err(Error::Contract("cannot initialize on empty data".into()));
        }
        let mut rng = stream_rng(seed, "init", 0);
        let n = data.len();
        let sub = crate::engine::sample_batch(n, self.init_subsample.min(n), &mut rng)?;

        let mut centers: Vec<usize> = Vec::with_capacity(self.k);
        centers.push(sub[rng.random_range(0..sub.len())]);
        let mut d2: Vec<f64> = sub
            .iter()
            .map(|&i| sq_dist(&data[i], &data[centers[0]]))
            .collect();
        while centers.len() < self.k {
            let total: f64 = d2.iter().sum();
            let pick = if total > 0.0 {
                let mut u: f64 = rng.random::<f64>() * total;
                let mut chosen = sub.len() - 1;
                for (j, &w) in d2.iter().enumerate() {
                    u -= w;
                    if u <= 0.0 {
                        chosen = j;
                        break;
                    }
                }
                chosen
            } else {
                rng.random_range(0..sub.len())
            };
            let c = sub[pick];
            centers.push(c);
            for (j, &i) in sub.iter().enumerate() {
                d2[j] = d2[j].min(sq_dist(&data[i], &data[c]));
            }
        }

        let nw = self.component_prior.normal_wishart_params()?;
        let mut globals = Vec::with_capacity(1 + self.k);
        globals.push(self.mixing_prior.clone());
        for &c in &centers {
            let mean = DVector::from_column_slice(&data[c]);
            globals.push(NaturalParam::normal_wishart(&mean, nw.kappa, &nw.scale, nw.dof)?);
        }
        Ok(globals)
    }

    fn prepare(&self, globals: &[NaturalParam]) -> Result<GmmCtx> {
        if globals.len() != 1 + self.k {
            return Err(Error::Contract(format!(
                "expected {} globals, got {}",
                1 + self.k,
                globals.len()
            )));
        }
        let e_log_pi = self.mixing(globals).expected_suff_stats()?.values().to_vec();
        let mut comps = Vec::with_capacity(self.k);
        for k in 0..self.k {
            let p = self.component(globals, k).normal_wishart_params()?;
            let e_ln_det = crate::expfam::expected_ln_det(&p);
            comps.push(ComponentCtx {
                mean: p.mean,
                kappa: p.kappa,
                scale: p.scale,
                dof: p.dof,
                e_ln_det,
            });
        }
        Ok(GmmCtx { e_log_pi, comps })
    }

    fn local_step(&self, datum: &Self::Datum, ctx: &GmmCtx) -> Result<Vec<(usize, SuffStat)>> {
        let r = self.responsibilities(datum, ctx)?;
        let xv = DVector::from_column_slice(datum);
        let mut out = Vec::with_capacity(1 + self.k);
        out.push((
            0,
            SuffStat::from_values(Family::Dirichlet { k: self.k }, r.clone())?,
        ));
        for (k, &rk) in r.iter().enumerate() {
            out.push((1 + k, self.component_stat(&xv, rk)));
        }
        Ok(out)
    }

    fn elbo(&self, data: &[Self::Datum], globals: &[NaturalParam]) -> Result<f64> {
        let ctx = self.prepare(globals)?;
        let mut total = 0.0;
        for x in data {
            let r = self.responsibilities(x, &ctx)?;
            let xv = DVector::from_column_slice(x);
            for (k, comp) in ctx.comps.iter().enumerate() {
                if r[k] <= 0.0 {
                    continue;
                }
                let diff = &xv - &comp.mean;
                let quad = comp.dof * (&comp.scale * &diff).dot(&diff) + self.d as f64 / comp.kappa;
                let e_log_lik = 0.5 * comp.e_ln_det
                    - 0.5 * self.d as f64 * (2.0 * PI).ln()
                    - 0.5 * quad;
                total += r[k] * (ctx.e_log_pi[k] + e_log_lik - r[k].ln());
            }
        }
        total -= self.mixing(globals).kl_divergence(&self.mixing_prior)?;
        for k in 0..self.k {
            total -= self.component(globals, k).kl_divergence(&self.component_prior)?;
        }
        Ok(total)
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
