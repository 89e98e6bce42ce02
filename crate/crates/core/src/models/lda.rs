//! Latent Dirichlet Allocation: K topic-word Dirichlets over a fixed
//! vocabulary as globals, per-document topic proportions and token
//! responsibilities as locals fit by a small fixed-point loop.

use rand_distr::{Distribution, Gamma};

use crate::data::BowCorpus;
use crate::expfam::{Family, NaturalParam, SuffStat};
use crate::models::CefModel;
use crate::rng::stream_rng;
use crate::special::digamma;
use crate::{Error, Result};

/// A document as sparse (word id, count) terms, counts > 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Doc {
    pub terms: Vec<(usize, f64)>,
}

impl Doc {
    pub fn total(&self) -> f64 {
        self.terms.iter().map(|&(_, c)| c).sum()
    }
}

pub fn docs_from_corpus(corpus: &BowCorpus) -> Vec<Doc> {
    corpus
        .docs
        .iter()
        .map(|d| Doc {
            terms: d.iter().map(|&(w, c)| (w, c as f64)).collect(),
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct LdaModel {
    pub n_topics: usize,
    pub vocab_size: usize,
    /// Document-topic Dirichlet hyperparameter.
    pub doc_topic_prior: f64,
    /// Topic-word Dirichlet hyperparameter.
    pub topic_word_prior: f64,
    pub local_max_iters: usize,
    pub local_tol: f64,
}

pub struct LdaCtx {
    /// E[ln beta_kw], K rows over the vocabulary.
    e_log_beta: Vec<Vec<f64>>,
}

impl LdaModel {
    pub fn new(n_topics: usize, vocab_size: usize, alpha: f64, eta: f64) -> Result<Self> {
        if n_topics < 1 || vocab_size < 2 {
            return Err(Error::Contract(
                "LDA needs at least one topic and two vocabulary words".into(),
            ));
        }
        if alpha <= 0.0 || eta <= 0.0 {
            return Err(Error::Contract(format!(
                "Dirichlet hyperparameters must be positive, got alpha = {alpha}, eta = {eta}"
            )));
        }
        Ok(LdaModel {
            n_topics,
            vocab_size,
            doc_topic_prior: alpha,
            topic_word_prior: eta,
            local_max_iters: 100,
            local_tol: 1e-3,
        })
    }

    fn topic_prior(&self) -> NaturalParam {
        NaturalParam::symmetric_dirichlet(self.vocab_size, self.topic_word_prior)
            .expect("valid topic prior")
    }

    /// Alternates phi and gamma from the deterministic init
    /// gamma_k = alpha + total/K until the mean absolute gamma change
    /// drops below tolerance. Returns (gamma, phi rows per term).
    pub fn fit_doc(&self, doc: &Doc, ctx: &LdaCtx) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        if doc.terms.is_empty() {
            return Err(Error::Contract("cannot fit an empty document".into()));
        }
        let k = self.n_topics;
        let total = doc.total();
        let mut gamma = vec![self.doc_topic_prior + total / k as f64; k];
        let mut phi = vec![vec![0.0; k]; doc.terms.len()];
        for _ in 0..self.local_max_iters {
            let gamma_total: f64 = gamma.iter().sum();
            let psi_total = digamma(gamma_total);
            let e_log_theta: Vec<f64> = gamma.iter().map(|&g| digamma(g) - psi_total).collect();

            let mut new_gamma = vec![self.doc_topic_prior; k];
            for (row, &(w, count)) in phi.iter_mut().zip(&doc.terms) {
                let mut max = f64::NEG_INFINITY;
                for t in 0..k {
                    row[t] = e_log_theta[t] + ctx.e_log_beta[t][w];
                    max = max.max(row[t]);
                }
                let mut sum = 0.0;
                for v in row.iter_mut() {
                    *v = (*v - max).exp();
                    sum += *v;
                }
                for (t, v) in row.iter_mut().enumerate() {
                    *v /= sum;
                    new_gamma[t] += count * *v;
                }
            }

            let delta: f64 = gamma
                .iter()
                .zip(&new_gamma)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>()
                / k as f64;
            gamma = new_gamma;
            if delta < self.local_tol {
                break;
            }
        }
        Ok((gamma, phi))
    }
}

impl CefModel for LdaModel {
    type Datum = Doc;
    type Ctx = LdaCtx;

    fn name(&self) -> &'static str {
        "lda"
    }

    fn priors(&self) -> Vec<NaturalParam> {
        vec![self.topic_prior(); self.n_topics]
    }

    /// lambda_kw = eta + Gamma(100, 0.01)/V per entry.
    fn init_globals(&self, _data: &[Doc], seed: u64) -> Result<Vec<NaturalParam>> {
        let mut rng = stream_rng(seed, "init", 0);
        let gamma = Gamma::new(100.0, 0.01).expect("valid gamma");
        (0..self.n_topics)
            .map(|_| {
                let conc: Vec<f64> = (0..self.vocab_size)
                    .map(|_| {
                        self.topic_word_prior + gamma.sample(&mut rng) / self.vocab_size as f64
                    })
                    .collect();
                NaturalParam::dirichlet(&conc)
            })
            .collect()
    }

    fn prepare(&self, globals: &[NaturalParam]) -> Result<LdaCtx> {
        if globals.len() != self.n_topics {
            return Err(Error::Contract(format!(
                "expected {} globals, got {}",
                self.n_topics,
                globals.len()
            )));
        }
        let e_log_beta = globals
            .iter()
            .map(|g| Ok(g.expected_suff_stats()?.values().to_vec()))
            .collect::<Result<Vec<_>>>()?;
        Ok(LdaCtx { e_log_beta })
    }

    /// Topic k receives the word-count vector sum_w count_w phi_wk e_w
    /// over the document's support.
    fn local_step(&self, doc: &Doc, ctx: &LdaCtx) -> Result<Vec<(usize, SuffStat)>> {
        let (_, phi) = self.fit_doc(doc, ctx)?;
        let mut stats = vec![vec![0.0; self.vocab_size]; self.n_topics];
        for (row, &(w, count)) in phi.iter().zip(&doc.terms) {
            for (t, &p) in row.iter().enumerate() {
                stats[t][w] += count * p;
            }
        }
        stats
            .into_iter()
            .enumerate()
            .map(|(t, values)| {
                Ok((
                    t,
                    SuffStat::from_values(Family::Dirichlet { k: self.vocab_size }, values)?,
                ))
            })
            .collect()
    }

    fn elbo(&self, data: &[Doc], globals: &[NaturalParam]) -> Result<f64> {
        let ctx = self.prepare(globals)?;
        let doc_prior =
            NaturalParam::symmetric_dirichlet(self.n_topics, self.doc_topic_prior)?;
        let mut total = 0.0;
        for doc in data {
            let (gamma, phi) = self.fit_doc(doc, &ctx)?;
            let q_theta = NaturalParam::dirichlet(&gamma)?;
            let e_log_theta = q_theta.expected_suff_stats()?;
            for (row, &(w, count)) in phi.iter().zip(&doc.terms) {
                for (t, &p) in row.iter().enumerate() {
                    if p <= 0.0 {
                        continue;
                    }
                    total +=
                        count * p * (e_log_theta.values()[t] + ctx.e_log_beta[t][w] - p.ln());
                }
            }
            total -= q_theta.kl_divergence(&doc_prior)?;
        }
        let topic_prior = self.topic_prior();
        for g in globals {
            total -= g.kl_divergence(&topic_prior)?;
        }
        Ok(total)
    }
}
