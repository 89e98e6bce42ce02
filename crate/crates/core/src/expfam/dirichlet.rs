//! Dirichlet family: natural values are concentrations minus one.

use crate::expfam::DomainFloor;
use crate::special::{digamma, ln_gamma};
use crate::{Error, Result};

fn concentrations(values: &[f64]) -> impl Iterator<Item = f64> + '_ {
    values.iter().map(|v| v + 1.0)
}

pub fn validate(values: &[f64]) -> Result<()> {
    if values.iter().any(|&v| v <= -1.0) {
        return Err(Error::InvalidParameter(
            "Dirichlet concentration must be > 0".into(),
        ));
    }
    Ok(())
}

/// E[ln pi_k] = psi(alpha_k) - psi(alpha_0).
pub fn expected_suff_stats(values: &[f64]) -> Vec<f64> {
    let total: f64 = concentrations(values).sum();
    let psi_total = digamma(total);
    concentrations(values).map(|a| digamma(a) - psi_total).collect()
}

/// ln B(alpha) = sum ln Gamma(alpha_k) - ln Gamma(alpha_0).
pub fn log_partition(values: &[f64]) -> f64 {
    let total: f64 = concentrations(values).sum();
    concentrations(values).map(ln_gamma).sum::<f64>() - ln_gamma(total)
}

pub fn entropy(values: &[f64]) -> f64 {
    let k = values.len() as f64;
    let total: f64 = concentrations(values).sum();
    log_partition(values) + (total - k) * digamma(total)
        - concentrations(values)
            .map(|a| (a - 1.0) * digamma(a))
            .sum::<f64>()
}

pub fn repair(values: &[f64], floor: &DomainFloor) -> Vec<f64> {
    let min_natural = floor.dirichlet_min - 1.0;
    values.iter().map(|&v| v.max(min_natural)).collect()
}
