//! The update kernel shared by batch VI, SVI and SVI+: batch sampling,
//! step-size and effective-batch-size schedules, per-datum noise
//! weights and the stochastic natural-parameter update.
//!
//! SVI+ multiplies each datum's expected sufficient statistic by
//! `w_n = 1 + eps_n - mean(eps)`, `eps_n ~ N(0, |S|/M - 1)`, which
//! inflates the gradient noise of an actual batch `|S|` to match the
//! variance of a smaller effective batch `M` while keeping the larger
//! batch's Gaussianity. `M = |S|` draws nothing and degenerates to SVI
//! on the identical code path.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::expfam::{DomainFloor, NaturalParam, SuffStat};
use crate::{Error, Result};

/// Step-size schedule rho_t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StepSchedule {
    Constant(f64),
    /// rho_t = (tau0 + t)^(-kappa); 0.5 < kappa <= 1 gives the
    /// Robbins-Monro conditions.
    PowerDecay { tau0: f64, kappa: f64 },
}

impl StepSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StepSchedule::Constant(rho) if rho <= 0.0 || rho > 1.0 => Err(Error::Config(format!(
                "constant step size must be in (0, 1], got {rho}"
            ))),
            StepSchedule::PowerDecay { tau0, kappa } if tau0 < 0.0 || kappa <= 0.5 || kappa > 1.0 => {
                Err(Error::Config(format!(
                    "power decay needs tau0 >= 0 and kappa in (0.5, 1], got tau0 = {tau0}, kappa = {kappa}"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Step size at iteration t (1-based).
    pub fn rho(&self, t: u64) -> f64 {
        debug_assert!(t >= 1);
        match *self {
            StepSchedule::Constant(rho) => rho,
            StepSchedule::PowerDecay { tau0, kappa } => (tau0 + t as f64).powf(-kappa),
        }
    }
}

/// Effective-batch-size schedule M_t.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EffectiveBatchSchedule {
    Constant(usize),
    /// M_t = min(slope * t, cap), then clamped to the batch size.
    LinearRamp { slope: usize, cap: usize },
}

impl EffectiveBatchSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EffectiveBatchSchedule::Constant(m) if m < 1 => {
                Err(Error::Config("effective batch size must be >= 1".into()))
            }
            EffectiveBatchSchedule::LinearRamp { slope, .. } if slope < 1 => {
                Err(Error::Config("effective batch ramp slope must be >= 1".into()))
            }
            _ => Ok(()),
        }
    }

    /// M_t clamped to [1, batch_size]; t is 1-based.
    pub fn effective_m(&self, t: u64, batch_size: usize) -> usize {
        debug_assert!(t >= 1);
        let raw = match *self {
            EffectiveBatchSchedule::Constant(m) => m,
            EffectiveBatchSchedule::LinearRamp { slope, cap } => {
                cap.min(slope.saturating_mul(t.try_into().unwrap_or(usize::MAX)))
            }
        };
        raw.clamp(1, batch_size)
    }
}

/// Added-noise variance multiplier alpha = (|S| - M) / (M |S|),
/// satisfying 1/M = alpha + 1/|S|.
pub fn alpha(actual_batch: usize, effective_batch: usize) -> Result<f64> {
    if effective_batch < 1 || effective_batch > actual_batch {
        return Err(Error::Contract(format!(
            "effective batch {effective_batch} must lie in [1, {actual_batch}]"
        )));
    }
    Ok((actual_batch - effective_batch) as f64 / (effective_batch as f64 * actual_batch as f64))
}

/// Per-batch SVI+ annealing multipliers w_n = 1 + eps_n - mean(eps).
#[derive(Debug, Clone)]
pub struct NoiseWeights {
    weights: Vec<f64>,
    sigma2: f64,
}

impl NoiseWeights {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Variance |S|/M - 1 of the underlying eps draws.
    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }
}

/// Draws the SVI+ noise weights for one batch. `m == batch_size`
/// consumes no RNG values and yields exactly-one weights, so SVI is
/// literally this code path.
pub fn draw_noise_weights<R: Rng + ?Sized>(
    batch_size: usize,
    m: usize,
    rng: &mut R,
) -> Result<NoiseWeights> {
    if m < 1 || m > batch_size {
        return Err(Error::Contract(format!(
            "effective batch {m} must lie in [1, {batch_size}]"
        )));
    }
    if m == batch_size {
        return Ok(NoiseWeights {
            weights: vec![1.0; batch_size],
            sigma2: 0.0,
        });
    }
    let sigma2 = batch_size as f64 / m as f64 - 1.0;
    let normal = Normal::new(0.0, sigma2.sqrt()).expect("finite sigma");
    let eps: Vec<f64> = (0..batch_size).map(|_| normal.sample(rng)).collect();
    let mean = eps.iter().sum::<f64>() / batch_size as f64;
    Ok(NoiseWeights {
        weights: eps.iter().map(|e| 1.0 + e - mean).collect(),
        sigma2,
    })
}

/// The SVI+ stochastic gradient (N / |S|) sum_n w_n E_q[t(theta_n)].
/// With all-ones weights this is the plain SVI gradient.
pub fn svi_plus_gradient(stats: &[SuffStat], weights: &NoiseWeights, n: usize) -> Result<SuffStat> {
    let first = stats
        .first()
        .ok_or_else(|| Error::Contract("svi_plus_gradient needs a nonempty batch".into()))?;
    if stats.len() != weights.len() {
        return Err(Error::Contract(format!(
            "{} statistics but {} noise weights",
            stats.len(),
            weights.len()
        )));
    }
    let mut acc = SuffStat::zeros(first.family());
    for (s, &w) in stats.iter().zip(weights.weights()) {
        if s.family() != first.family() {
            return Err(Error::Contract("mixed statistic families in one batch".into()));
        }
        acc.add_scaled(w, s);
    }
    acc.scale(n as f64 / stats.len() as f64);
    Ok(acc)
}

/// Uniform sample of `batch_size` distinct indices from {0, .., n-1}.
/// `batch_size == n` returns all indices in natural order without
/// consuming RNG values (batch mode).
pub fn sample_batch<R: Rng + ?Sized>(n: usize, batch_size: usize, rng: &mut R) -> Result<Vec<usize>> {
    if batch_size < 1 || batch_size > n {
        return Err(Error::Contract(format!(
            "batch size {batch_size} must lie in [1, {n}]"
        )));
    }
    if batch_size == n {
        return Ok((0..n).collect());
    }
    Ok(rand::seq::index::sample(rng, n, batch_size).into_vec())
}

/// One global variational parameter together with its prior and loop
/// bookkeeping.
#[derive(Debug, Clone)]
pub struct UpdateState {
    pub lambda: NaturalParam,
    pub eta: NaturalParam,
    /// Completed iterations.
    pub t: u64,
    /// Dataset size.
    pub n: usize,
}

impl UpdateState {
    pub fn new(lambda: NaturalParam, eta: NaturalParam, n: usize) -> Result<Self> {
        if lambda.family() != eta.family() {
            return Err(Error::Contract(format!(
                "state and prior families differ: {:?} vs {:?}",
                lambda.family(),
                eta.family()
            )));
        }
        if n < 1 {
            return Err(Error::Contract("dataset size must be >= 1".into()));
        }
        Ok(UpdateState { lambda, eta, t: 0, n })
    }

    /// lambda <- project((1 - rho) lambda + rho (eta + grad)); t + 1.
    pub fn apply_update(&self, grad: &SuffStat, rho: f64, floor: &DomainFloor) -> Result<UpdateState> {
        let lambda = updated_param(&self.lambda, &self.eta, grad, rho, floor).map_err(|e| {
            Error::Numerical(format!("update failed at iteration {}: {e}", self.t + 1))
        })?;
        Ok(UpdateState {
            lambda,
            eta: self.eta.clone(),
            t: self.t + 1,
            n: self.n,
        })
    }
}

/// The stochastic update formula, shared by [`UpdateState::apply_update`]
/// and the multi-global run loop.
pub fn updated_param(
    lambda: &NaturalParam,
    eta: &NaturalParam,
    grad: &SuffStat,
    rho: f64,
    floor: &DomainFloor,
) -> Result<NaturalParam> {
    if rho <= 0.0 || rho > 1.0 {
        return Err(Error::Contract(format!("step size must be in (0, 1], got {rho}")));
    }
    if grad.family() != lambda.family() {
        return Err(Error::Contract(format!(
            "gradient family {:?} does not match parameter family {:?}",
            grad.family(),
            lambda.family()
        )));
    }
    if !grad.is_finite() {
        return Err(Error::Numerical("non-finite gradient".into()));
    }
    let values: Vec<f64> = lambda
        .values()
        .iter()
        .zip(eta.values())
        .zip(grad.values())
        .map(|((&l, &e), &g)| (1.0 - rho) * l + rho * (e + g))
        .collect();
    NaturalParam::from_raw(lambda.family(), values)?.project_to_domain(floor)
}
