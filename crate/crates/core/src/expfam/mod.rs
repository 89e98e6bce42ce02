//! Exponential-family primitives for the three conjugate families used
//! by the model plugins: Dirichlet, multivariate Gaussian and
//! Normal-Wishart.
//!
//! Natural parameters and expected sufficient statistics share one flat
//! vector layout per family (version [`LAYOUT_VERSION`]), so conjugate
//! updates are plain vector arithmetic:
//!
//! - `Dirichlet(K)`: `K` entries, concentration minus one.
//! - `MultivariateGaussian(d)`: `precision * mean` (d entries), then
//!   `-1/2 * precision` packed (upper triangle, row-major).
//! - `NormalWishart(d)`: `kappa * mean` (d), then
//!   `-1/2 * (W^-1 + kappa * mean * mean^T)` packed, then `-kappa / 2`,
//!   then `(dof - d) / 2`.
//!
//! Matching sufficient statistics (same layout) are
//! `E[ln pi]`, `(E[x], E[x x^T])` and
//! `(E[Lambda mu], E[Lambda], E[mu^T Lambda mu], E[ln |Lambda|])`.

mod dirichlet;
mod gaussian;
mod normal_wishart;
pub mod packed;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};
pub use gaussian::GaussianMoments;
pub use normal_wishart::{expected_ln_det, NormalWishartParams};

/// Version tag for the flat parameter layouts above; embedded in state
/// snapshots so a reader can refuse mismatched files.
pub const LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    Dirichlet { k: usize },
    MultivariateGaussian { d: usize },
    NormalWishart { d: usize },
}

impl Family {
    pub fn param_len(&self) -> usize {
        match *self {
            Family::Dirichlet { k } => k,
            Family::MultivariateGaussian { d } => d + packed::packed_len(d),
            Family::NormalWishart { d } => d + packed::packed_len(d) + 2,
        }
    }

    /// K = 1 is allowed as the degenerate point-mass Dirichlet so a
    /// single-component mixture normalizes through the same code path.
    pub fn validate(&self) -> Result<()> {
        match *self {
            Family::Dirichlet { k } if k < 1 => Err(Error::InvalidParameter(format!(
                "Dirichlet needs K >= 1, got K = {k}"
            ))),
            Family::MultivariateGaussian { d } | Family::NormalWishart { d } if d < 1 => Err(
                Error::InvalidParameter(format!("{self:?} needs d >= 1, got d = {d}")),
            ),
            _ => Ok(()),
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len != self.param_len() {
            return Err(Error::Contract(format!(
                "{self:?} expects {} values, got {len}",
                self.param_len()
            )));
        }
        Ok(())
    }

    /// Inner product between two same-layout vectors under the family's
    /// pairing: packed off-diagonal positions count twice.
    pub fn pair_dot(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Family::Dirichlet { .. } => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Family::MultivariateGaussian { d } => {
                let lin: f64 = a[..d].iter().zip(&b[..d]).map(|(x, y)| x * y).sum();
                lin + packed::packed_tr_dot(&a[d..], &b[d..], d)
            }
            Family::NormalWishart { d } => {
                let p = packed::packed_len(d);
                let lin: f64 = a[..d].iter().zip(&b[..d]).map(|(x, y)| x * y).sum();
                lin + packed::packed_tr_dot(&a[d..d + p], &b[d..d + p], d)
                    + a[d + p] * b[d + p]
                    + a[d + p + 1] * b[d + p + 1]
            }
        }
    }
}

/// Floors applied when repairing a parameter that noise pushed outside
/// its domain; see [`NaturalParam::project_to_domain`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DomainFloor {
    /// Minimum Dirichlet concentration.
    pub dirichlet_min: f64,
    /// Normal-Wishart dof is kept >= d - 1 + this margin.
    pub dof_margin: f64,
    /// Eigenvalue floor for SPD blocks (and the NW mean-precision scalar).
    pub eig_min: f64,
}

impl Default for DomainFloor {
    fn default() -> Self {
        DomainFloor {
            dirichlet_min: 1e-6,
            dof_margin: 1e-3,
            eig_min: 1e-8,
        }
    }
}

/// Natural parameter of one of the supported families.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaturalParam {
    family: Family,
    values: Vec<f64>,
}

/// Expected sufficient statistic in the same layout as its family's
/// natural parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStat {
    family: Family,
    values: Vec<f64>,
}

impl NaturalParam {
    /// Wraps raw values without domain validation (lengths still checked).
    /// Noisy engine arithmetic produces raw vectors that are repaired by
    /// [`Self::project_to_domain`] afterwards.
    pub fn from_raw(family: Family, values: Vec<f64>) -> Result<Self> {
        family.validate()?;
        family.check_len(values.len())?;
        Ok(NaturalParam { family, values })
    }

    /// Dirichlet from concentrations (all > 0).
    pub fn dirichlet(concentrations: &[f64]) -> Result<Self> {
        let family = Family::Dirichlet {
            k: concentrations.len(),
        };
        let p = Self::from_raw(family, concentrations.iter().map(|a| a - 1.0).collect())?;
        p.validate()?;
        Ok(p)
    }

    /// Symmetric Dirichlet with `k` components of the given concentration.
    pub fn symmetric_dirichlet(k: usize, concentration: f64) -> Result<Self> {
        Self::dirichlet(&vec![concentration; k])
    }

    /// Multivariate Gaussian from mean and precision (SPD).
    pub fn gaussian(mean: &nalgebra::DVector<f64>, precision: &nalgebra::DMatrix<f64>) -> Result<Self> {
        gaussian::from_mean_precision(mean, precision)
    }

    /// Normal-Wishart from (mean, mean-precision kappa, Wishart scale W,
    /// dof). `E[Lambda] = dof * W`.
    pub fn normal_wishart(
        mean: &nalgebra::DVector<f64>,
        kappa: f64,
        scale: &nalgebra::DMatrix<f64>,
        dof: f64,
    ) -> Result<Self> {
        normal_wishart::from_standard(mean, kappa, scale, dof)
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Checks the family's domain invariants.
    pub fn validate(&self) -> Result<()> {
        if !self.values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{:?} has non-finite entries",
                self.family
            )));
        }
        match self.family {
            Family::Dirichlet { .. } => dirichlet::validate(&self.values),
            Family::MultivariateGaussian { d } => gaussian::validate(&self.values, d),
            Family::NormalWishart { d } => normal_wishart::validate(&self.values, d),
        }
    }

    /// Dirichlet concentrations (alpha = natural + 1).
    pub fn concentrations(&self) -> Result<Vec<f64>> {
        match self.family {
            Family::Dirichlet { .. } => Ok(self.values.iter().map(|v| v + 1.0).collect()),
            f => Err(Error::Contract(format!("not a Dirichlet parameter: {f:?}"))),
        }
    }

    /// Gaussian (mean, covariance, precision) view.
    pub fn gaussian_moments(&self) -> Result<GaussianMoments> {
        match self.family {
            Family::MultivariateGaussian { d } => gaussian::moments(&self.values, d),
            f => Err(Error::Contract(format!("not a Gaussian parameter: {f:?}"))),
        }
    }

    /// Normal-Wishart (mean, kappa, W, dof) view.
    pub fn normal_wishart_params(&self) -> Result<NormalWishartParams> {
        match self.family {
            Family::NormalWishart { d } => normal_wishart::standard(&self.values, d),
            f => Err(Error::Contract(format!("not a Normal-Wishart parameter: {f:?}"))),
        }
    }

    /// E_q[t(.)] for the family's sufficient statistic.
    pub fn expected_suff_stats(&self) -> Result<SuffStat> {
        self.validate()?;
        let values = match self.family {
            Family::Dirichlet { .. } => dirichlet::expected_suff_stats(&self.values),
            Family::MultivariateGaussian { d } => gaussian::expected_suff_stats(&self.values, d),
            Family::NormalWishart { d } => normal_wishart::expected_suff_stats(&self.values, d),
        };
        Ok(SuffStat {
            family: self.family,
            values,
        })
    }

    /// Differential entropy in nats.
    pub fn entropy(&self) -> Result<f64> {
        self.validate()?;
        Ok(match self.family {
            Family::Dirichlet { .. } => dirichlet::entropy(&self.values),
            Family::MultivariateGaussian { d } => gaussian::entropy(&self.values, d),
            Family::NormalWishart { d } => normal_wishart::entropy(&self.values, d),
        })
    }

    /// Log-normalizer A(lambda).
    pub fn log_partition(&self) -> Result<f64> {
        self.validate()?;
        Ok(match self.family {
            Family::Dirichlet { .. } => dirichlet::log_partition(&self.values),
            Family::MultivariateGaussian { d } => gaussian::log_partition(&self.values, d),
            Family::NormalWishart { d } => normal_wishart::log_partition(&self.values, d),
        })
    }

    /// KL(q || p) for two parameters of the same family and dimension.
    ///
    /// Uses the exponential-family identity
    /// KL = <lambda_q - lambda_p, E_q[t]> - A(q) + A(p).
    pub fn kl_divergence(&self, p: &NaturalParam) -> Result<f64> {
        if self.family != p.family {
            return Err(Error::Contract(format!(
                "KL between mismatched families: {:?} vs {:?}",
                self.family, p.family
            )));
        }
        let eq_t = self.expected_suff_stats()?;
        p.validate()?;
        let diff: Vec<f64> = self
            .values
            .iter()
            .zip(&p.values)
            .map(|(a, b)| a - b)
            .collect();
        Ok(self.family.pair_dot(&diff, eq_t.values())
            - self.log_partition()?
            + p.log_partition()?)
    }

    /// Returns the nearest valid parameter under the module's clamping
    /// rules; inputs that already validate are returned unchanged
    /// (bit-exact), which makes projection exactly idempotent.
    pub fn project_to_domain(&self, floor: &DomainFloor) -> Result<NaturalParam> {
        if !self.values.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cannot project non-finite {:?} parameter",
                self.family
            )));
        }
        if self.validate().is_ok() {
            return Ok(self.clone());
        }
        // Reconstructing a badly broken parameter can lose the eigenvalue
        // floor to cancellation (the conjugate block may dwarf it);
        // escalate the floor until the repaired parameter validates.
        let mut f = *floor;
        for _ in 0..6 {
            let values = match self.family {
                Family::Dirichlet { .. } => dirichlet::repair(&self.values, &f),
                Family::MultivariateGaussian { d } => gaussian::repair(&self.values, d, &f),
                Family::NormalWishart { d } => normal_wishart::repair(&self.values, d, &f),
            };
            let repaired = NaturalParam {
                family: self.family,
                values,
            };
            if repaired.validate().is_ok() {
                return Ok(repaired);
            }
            f.eig_min *= 1e4;
        }
        Err(Error::Numerical(
            "domain repair failed to produce a valid parameter".into(),
        ))
    }
}

impl SuffStat {
    pub fn zeros(family: Family) -> Self {
        SuffStat {
            family,
            values: vec![0.0; family.param_len()],
        }
    }

    pub fn from_values(family: Family, values: Vec<f64>) -> Result<Self> {
        family.check_len(values.len())?;
        Ok(SuffStat { family, values })
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// self += w * other.
    pub fn add_scaled(&mut self, w: f64, other: &SuffStat) {
        debug_assert_eq!(self.family, other.family);
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += w * b;
        }
    }

    pub fn scale(&mut self, s: f64) {
        for a in self.values.iter_mut() {
            *a *= s;
        }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}
