//! Multivariate Gaussian family: natural values are
//! (precision * mean, packed -1/2 * precision).

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use std::f64::consts::PI;

use crate::expfam::packed::{floor_spd, pack, packed_len, unpack};
use crate::expfam::{DomainFloor, Family, NaturalParam};
use crate::{Error, Result};

/// Standard-parameter view of a Gaussian natural parameter.
#[derive(Debug, Clone)]
pub struct GaussianMoments {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
    pub precision: DMatrix<f64>,
}

fn precision_from(values: &[f64], d: usize) -> DMatrix<f64> {
    unpack(&values[d..], d) * -2.0
}

fn cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    m.clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidParameter("precision matrix is not SPD".into()))
}

pub fn validate(values: &[f64], d: usize) -> Result<()> {
    cholesky(&precision_from(values, d)).map(|_| ())
}

pub fn from_mean_precision(mean: &DVector<f64>, precision: &DMatrix<f64>) -> Result<NaturalParam> {
    let d = mean.len();
    if precision.nrows() != d || precision.ncols() != d {
        return Err(Error::Contract(format!(
            "precision shape {}x{} does not match mean length {d}",
            precision.nrows(),
            precision.ncols()
        )));
    }
    let mut values = Vec::with_capacity(d + packed_len(d));
    values.extend((precision * mean).iter());
    values.extend(pack(&(precision * -0.5)));
    let p = NaturalParam::from_raw(Family::MultivariateGaussian { d }, values)?;
    p.validate()?;
    Ok(p)
}

pub fn moments(values: &[f64], d: usize) -> Result<GaussianMoments> {
    let precision = precision_from(values, d);
    let chol = cholesky(&precision)?;
    let h = DVector::from_column_slice(&values[..d]);
    let mean = chol.solve(&h);
    let covariance = chol.inverse();
    Ok(GaussianMoments {
        mean,
        covariance,
        precision,
    })
}

/// (E[x], packed E[x x^T]) with E[x x^T] = Sigma + mu mu^T.
pub fn expected_suff_stats(values: &[f64], d: usize) -> Vec<f64> {
    let m = moments(values, d).expect("validated upstream");
    let second = &m.covariance + &m.mean * m.mean.transpose();
    let mut out = Vec::with_capacity(values.len());
    out.extend(m.mean.iter());
    out.extend(pack(&second));
    out
}

fn ln_det_precision(values: &[f64], d: usize) -> f64 {
    let chol = cholesky(&precision_from(values, d)).expect("validated upstream");
    2.0 * chol.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>()
}

/// d/2 (1 + ln 2 pi) + 1/2 ln |Sigma|.
pub fn entropy(values: &[f64], d: usize) -> f64 {
    0.5 * (d as f64) * (1.0 + (2.0 * PI).ln()) - 0.5 * ln_det_precision(values, d)
}

/// A = 1/2 (mu^T Lambda mu - ln |Lambda| + d ln 2 pi).
pub fn log_partition(values: &[f64], d: usize) -> f64 {
    let m = moments(values, d).expect("validated upstream");
    let quad = (m.precision * &m.mean).dot(&m.mean);
    0.5 * (quad - ln_det_precision(values, d) + d as f64 * (2.0 * PI).ln())
}

/// Repairs the precision block by eigenvalue flooring; the linear block
/// is untouched.
pub fn repair(values: &[f64], d: usize, floor: &DomainFloor) -> Vec<f64> {
    let fixed = floor_spd(&precision_from(values, d), floor.eig_min);
    let mut out = values[..d].to_vec();
    out.extend(pack(&(fixed * -0.5)));
    out
}
