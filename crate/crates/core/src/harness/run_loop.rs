//! The generic experiment loop: sample a batch, run local steps in
//! parallel, draw noise weights, accumulate per-global gradients in a
//! fixed order, update every global synchronously, and periodically
//! evaluate the objective.

use std::time::Instant;

use rayon::prelude::*;

use crate::engine::{
    draw_noise_weights, sample_batch, updated_param, EffectiveBatchSchedule, StepSchedule,
};
use crate::expfam::{DomainFloor, NaturalParam, SuffStat};
use crate::harness::trace::{ElboTrace, TraceRow};
use crate::models::CefModel;
use crate::rng::stream_rng;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct LoopConfig {
    pub batch_size: usize,
    pub m_schedule: EffectiveBatchSchedule,
    pub step: StepSchedule,
    pub iters: u64,
    pub seed: u64,
    pub eval_every: u64,
    pub floor: DomainFloor,
}

pub struct RunResult {
    pub trace: ElboTrace,
    pub globals: Vec<NaturalParam>,
}

/// Runs the configured loop on pre-validated settings. The objective is
/// evaluated on `eval` (the training set, or a held-out set with the
/// same datum type) every `eval_every` iterations and at the end.
pub fn run_model<M: CefModel>(
    model: &M,
    train: &[M::Datum],
    eval: &[M::Datum],
    cfg: &LoopConfig,
) -> Result<RunResult> {
    let n = train.len();
    if n == 0 {
        return Err(Error::Contract("cannot run on empty data".into()));
    }
    if cfg.batch_size < 1 || cfg.batch_size > n {
        return Err(Error::Config(format!(
            "batch_size {} must lie in [1, {n}]",
            cfg.batch_size
        )));
    }
    let priors = model.priors();
    let mut globals = model.init_globals(train, cfg.seed)?;
    if globals.len() != priors.len() {
        return Err(Error::Contract(
            "model initialized a different number of globals than it has priors".into(),
        ));
    }
    let scale = n as f64 / cfg.batch_size as f64;
    let start = Instant::now();
    let mut trace = ElboTrace::default();

    for t in 1..=cfg.iters {
        let rho = cfg.step.rho(t);
        let m = cfg.m_schedule.effective_m(t, cfg.batch_size);

        let idx = sample_batch(n, cfg.batch_size, &mut stream_rng(cfg.seed, "batch", t))?;
        let ctx = model.prepare(&globals)?;
        let contribs: Vec<Vec<(usize, SuffStat)>> = idx
            .par_iter()
            .map(|&i| model.local_step(&train[i], &ctx))
            .collect::<Result<Vec<_>>>()?;
        let weights =
            draw_noise_weights(cfg.batch_size, m, &mut stream_rng(cfg.seed, "noise", t))?;

        // Fixed-order sequential reduction keeps runs bit-identical
        // across thread counts.
        let mut grads: Vec<SuffStat> =
            priors.iter().map(|p| SuffStat::zeros(p.family())).collect();
        for (contrib, &w) in contribs.iter().zip(weights.weights()) {
            for (g, stat) in contrib {
                grads[*g].add_scaled(w, stat);
            }
        }

        for ((lambda, eta), grad) in globals.iter_mut().zip(&priors).zip(&mut grads) {
            grad.scale(scale);
            *lambda = updated_param(lambda, eta, grad, rho, &cfg.floor)
                .map_err(|e| Error::Numerical(format!("iteration {t}: {e}")))?;
        }

        if t % cfg.eval_every == 0 || t == cfg.iters {
            let elbo = model.elbo(eval, &globals)?;
            if !elbo.is_finite() {
                return Err(Error::Numerical(format!(
                    "objective became non-finite at iteration {t}"
                )));
            }
            trace.push(TraceRow {
                iteration: t,
                wall_ms: start.elapsed().as_secs_f64() * 1e3,
                elbo,
                batch_size: cfg.batch_size,
                effective_batch: m,
                rho,
                seed: cfg.seed,
            });
        }
    }
    Ok(RunResult { trace, globals })
}
