//! Normal-Wishart family over (mu, Lambda): mu | Lambda ~ N(m, (kappa Lambda)^-1),
//! Lambda ~ Wishart(W, nu) with E[Lambda] = nu W.
//!
//! Natural layout (paired with t = (Lambda mu, Lambda, mu^T Lambda mu, ln |Lambda|)):
//! (kappa m, packed -1/2 (W^-1 + kappa m m^T), -kappa/2, (nu - d)/2).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use std::f64::consts::PI;

use crate::expfam::packed::{floor_spd, pack, packed_len, unpack};
use crate::expfam::{DomainFloor, Family, NaturalParam};
use crate::special::{digamma, ln_multigamma};
use crate::{Error, Result};

/// Standard-parameter view of a Normal-Wishart natural parameter.
#[derive(Debug, Clone)]
pub struct NormalWishartParams {
    pub mean: DVector<f64>,
    /// Mean-precision scalar kappa.
    pub kappa: f64,
    /// Wishart scale matrix W (E[Lambda] = dof * W).
    pub scale: DMatrix<f64>,
    pub dof: f64,
    /// ln |W|, kept alongside since every consumer needs it.
    pub ln_det_scale: f64,
}

struct Raw {
    kappa: f64,
    mean: DVector<f64>,
    scale_inv: DMatrix<f64>,
    dof: f64,
}

fn split(values: &[f64], d: usize) -> Raw {
    let p = packed_len(d);
    let kappa = -2.0 * values[d + p];
    let dof = 2.0 * values[d + p + 1] + d as f64;
    let h = DVector::from_column_slice(&values[..d]);
    let mean = &h / kappa;
    // W^-1 = -2 eta_2 - kappa m m^T
    let scale_inv = unpack(&values[d..d + p], d) * -2.0 - &mean * mean.transpose() * kappa;
    Raw {
        kappa,
        mean,
        scale_inv,
        dof,
    }
}

fn cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    m.clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("Normal-Wishart scale block is not SPD".into()))
}

pub fn validate(values: &[f64], d: usize) -> Result<()> {
    let raw = split(values, d);
    if raw.kappa <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "Normal-Wishart mean-precision must be > 0, got {}",
            raw.kappa
        )));
    }
    if raw.dof <= d as f64 - 1.0 {
        return Err(Error::InvalidParameter(format!(
            "Normal-Wishart dof must exceed d - 1 = {}, got {}",
            d as f64 - 1.0,
            raw.dof
        )));
    }
    cholesky(&raw.scale_inv).map(|_| ())
}

pub fn from_standard(
    mean: &DVector<f64>,
    kappa: f64,
    scale: &DMatrix<f64>,
    dof: f64,
) -> Result<NaturalParam> {
    let d = mean.len();
    if scale.nrows() != d || scale.ncols() != d {
        return Err(Error::Contract(format!(
            "scale shape {}x{} does not match mean length {d}",
            scale.nrows(),
            scale.ncols()
        )));
    }
    let chol = scale
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("Normal-Wishart scale must be SPD".into()))?;
    let scale_inv = chol.inverse();
    let eta2 = (scale_inv + mean * mean.transpose() * kappa) * -0.5;
    let mut values = Vec::with_capacity(d + packed_len(d) + 2);
    values.extend((mean * kappa).iter());
    values.extend(pack(&eta2));
    values.push(-0.5 * kappa);
    values.push(0.5 * (dof - d as f64));
    let p = NaturalParam::from_raw(Family::NormalWishart { d }, values)?;
    p.validate()?;
    Ok(p)
}

pub fn standard(values: &[f64], d: usize) -> Result<NormalWishartParams> {
    let raw = split(values, d);
    if raw.kappa <= 0.0 || raw.dof <= d as f64 - 1.0 {
        validate(values, d)?;
    }
    let chol = cholesky(&raw.scale_inv)?;
    let ln_det_scale_inv: f64 = 2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    Ok(NormalWishartParams {
        mean: raw.mean,
        kappa: raw.kappa,
        scale: chol.inverse(),
        dof: raw.dof,
        ln_det_scale: -ln_det_scale_inv,
    })
}

/// E[ln |Lambda|] = sum_i psi((nu + 1 - i)/2) + d ln 2 + ln |W|.
pub fn expected_ln_det(params: &NormalWishartParams) -> f64 {
    let d = params.mean.len();
    (1..=d)
        .map(|i| digamma(0.5 * (params.dof + 1.0 - i as f64)))
        .sum::<f64>()
        + d as f64 * 2.0_f64.ln()
        + params.ln_det_scale
}

pub fn expected_suff_stats(values: &[f64], d: usize) -> Vec<f64> {
    let params = standard(values, d).expect("validated upstream");
    let e_lambda = &params.scale * params.dof;
    let e_lambda_mu = &e_lambda * &params.mean;
    let quad = d as f64 / params.kappa + e_lambda_mu.dot(&params.mean);
    let mut out = Vec::with_capacity(values.len());
    out.extend(e_lambda_mu.iter());
    out.extend(pack(&e_lambda));
    out.push(quad);
    out.push(expected_ln_det(&params));
    out
}

/// A = (nu d / 2) ln 2 + (nu / 2) ln |W| + ln Gamma_d(nu / 2)
///   + (d / 2) ln 2 pi - (d / 2) ln kappa.
pub fn log_partition(values: &[f64], d: usize) -> f64 {
    let params = standard(values, d).expect("validated upstream");
    let d_f = d as f64;
    0.5 * params.dof * d_f * 2.0_f64.ln()
        + 0.5 * params.dof * params.ln_det_scale
        + ln_multigamma(d, 0.5 * params.dof)
        + 0.5 * d_f * (2.0 * PI).ln()
        - 0.5 * d_f * params.kappa.ln()
}

/// Wishart entropy plus the expected entropy of the conditional Gaussian.
pub fn entropy(values: &[f64], d: usize) -> f64 {
    let params = standard(values, d).expect("validated upstream");
    let d_f = d as f64;
    let e_ln_det = expected_ln_det(&params);
    let ln_z_wishart = 0.5 * params.dof * d_f * 2.0_f64.ln()
        + 0.5 * params.dof * params.ln_det_scale
        + ln_multigamma(d, 0.5 * params.dof);
    let h_wishart =
        ln_z_wishart - 0.5 * (params.dof - d_f - 1.0) * e_ln_det + 0.5 * params.dof * d_f;
    let h_gaussian =
        0.5 * d_f * (1.0 + (2.0 * PI).ln()) - 0.5 * d_f * params.kappa.ln() - 0.5 * e_ln_det;
    h_wishart + h_gaussian
}

pub fn repair(values: &[f64], d: usize, floor: &DomainFloor) -> Vec<f64> {
    let p = packed_len(d);
    let kappa = (-2.0 * values[d + p]).max(floor.eig_min);
    let dof = (2.0 * values[d + p + 1] + d as f64).max(d as f64 - 1.0 + floor.dof_margin);
    let h = DVector::from_column_slice(&values[..d]);
    let mean = &h / kappa;
    let scale_inv = unpack(&values[d..d + p], d) * -2.0 - &mean * mean.transpose() * kappa;
    let fixed = floor_spd(&scale_inv, floor.eig_min);
    let eta2 = (fixed + &mean * mean.transpose() * kappa) * -0.5;
    let mut out = values[..d].to_vec();
    out.extend(pack(&eta2));
    out.push(-0.5 * kappa);
    out.push(0.5 * (dof - d as f64));
    out
}
