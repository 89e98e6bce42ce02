//! Experiment harness: run configuration (flat key-value files plus
//! overrides), dataset loading, model dispatch, multi-seed comparisons
//! and CSV outputs.

pub mod config_file;
pub mod run_loop;
pub mod snapshot;
pub mod trace;

use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::data::{
    self, gen_gmm_synthetic, gen_lda_synthetic, gen_ratings_synthetic, parse_bow,
    parse_csv_matrix, parse_movielens, ClusterSpec, MovielensFormat, RatingsGenOptions,
};
use crate::engine::{EffectiveBatchSchedule, StepSchedule};
use crate::expfam::{DomainFloor, NaturalParam};
use crate::models::{docs_from_corpus, dp_gmm_prior, Doc, GmmModel, LdaModel, PmfModel};
use crate::{Error, Result};

pub use config_file::{parse_flat_config, render_flat_config, ConfigMap};
pub use run_loop::{run_model, LoopConfig, RunResult};
pub use snapshot::{load_snapshot, save_snapshot, Snapshot};
pub use trace::{write_csv, ElboTrace, TraceRow};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Batch,
    Svi,
    SviPlus,
}

impl Algorithm {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "batch" => Ok(Algorithm::Batch),
            "svi" => Ok(Algorithm::Svi),
            "svi+" => Ok(Algorithm::SviPlus),
            other => Err(Error::Config(format!(
                "algo must be batch, svi or svi+, got {other:?}"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Algorithm::Batch => "batch",
            Algorithm::Svi => "svi",
            Algorithm::SviPlus => "svi+",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Gmm {
        k: usize,
        dirichlet: f64,
    },
    DpGmm {
        k_trunc: usize,
        mass: f64,
    },
    Pmf {
        rank: usize,
        sigma2: f64,
        c: f64,
    },
    Lda {
        topics: usize,
        alpha: f64,
        eta: f64,
        local_iters: usize,
        local_tol: f64,
    },
}

impl ModelSpec {
    pub fn id(&self) -> &'static str {
        match self {
            ModelSpec::Gmm { .. } => "gmm",
            ModelSpec::DpGmm { .. } => "dpgmm",
            ModelSpec::Pmf { .. } => "pmf",
            ModelSpec::Lda { .. } => "lda",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileFormat {
    /// MovieLens "user::item::rating::timestamp".
    Dat,
    /// MovieLens CSV with header.
    Csv,
    /// UCI bag-of-words.
    Bow,
    /// Plain numeric CSV matrix.
    Matrix,
}

impl FileFormat {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dat" => Ok(FileFormat::Dat),
            "csv" => Ok(FileFormat::Csv),
            "bow" => Ok(FileFormat::Bow),
            "matrix" => Ok(FileFormat::Matrix),
            other => Err(Error::Config(format!(
                "format must be dat, csv, bow or matrix, got {other:?}"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            FileFormat::Dat => "dat",
            FileFormat::Csv => "csv",
            FileFormat::Bow => "bow",
            FileFormat::Matrix => "matrix",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSpec {
    File {
        path: PathBuf,
        format: FileFormat,
        vocab: Option<PathBuf>,
        skip_header: bool,
        standardize: bool,
    },
    GenGmm {
        n: usize,
        seed: u64,
    },
    GenRatings {
        users: usize,
        items: usize,
        rank: usize,
        density: f64,
        sigma2: f64,
        seed: u64,
    },
    GenLda {
        docs: usize,
        vocab: usize,
        topics: usize,
        doc_len: usize,
        seed: u64,
    },
}

/// A fully described run; `resolve` turns it into loop settings once
/// the dataset size is known.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub name: String,
    pub model: ModelSpec,
    pub data: DatasetSpec,
    pub algo: Algorithm,
    pub batch_size: Option<usize>,
    pub m: Option<EffectiveBatchSchedule>,
    pub rho: Option<StepSchedule>,
    pub iters: u64,
    pub seed: u64,
    pub eval_every: Option<u64>,
    /// Number of trailing data points held out for objective evaluation;
    /// 0 evaluates on the training set.
    pub heldout: usize,
    pub out: Option<PathBuf>,
}

fn parse_key<T: std::str::FromStr>(map: &ConfigMap, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v.parse().map(Some).map_err(|_| {
            Error::Config(format!("cannot parse {key} = {v:?}"))
        }),
    }
}

fn require<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("missing required key: {key}")))
}

/// Parses "50", "ramp:<slope>" or "ramp:<slope>:<cap>".
pub fn parse_m_schedule(s: &str) -> Result<EffectiveBatchSchedule> {
    let sched = if let Some(rest) = s.strip_prefix("ramp:") {
        let mut parts = rest.split(':');
        let slope = parts
            .next()
            .unwrap_or("")
            .parse()
            .map_err(|_| Error::Config(format!("cannot parse ramp slope in m = {s:?}")))?;
        let cap = match parts.next() {
            None => usize::MAX,
            Some(c) => c
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse ramp cap in m = {s:?}")))?,
        };
        EffectiveBatchSchedule::LinearRamp { slope, cap }
    } else {
        EffectiveBatchSchedule::Constant(
            s.parse()
                .map_err(|_| Error::Config(format!("m must be an integer or ramp:<c>, got {s:?}")))?,
        )
    };
    sched.validate()?;
    Ok(sched)
}

pub fn render_m_schedule(m: &EffectiveBatchSchedule) -> String {
    match m {
        EffectiveBatchSchedule::Constant(v) => v.to_string(),
        EffectiveBatchSchedule::LinearRamp { slope, cap } if *cap == usize::MAX => {
            format!("ramp:{slope}")
        }
        EffectiveBatchSchedule::LinearRamp { slope, cap } => format!("ramp:{slope}:{cap}"),
    }
}

/// Parses "const:<rho>" or "power:<tau0>,<kappa>".
pub fn parse_step_schedule(s: &str) -> Result<StepSchedule> {
    let sched = if let Some(v) = s.strip_prefix("const:") {
        StepSchedule::Constant(
            v.parse()
                .map_err(|_| Error::Config(format!("cannot parse rho = {s:?}")))?,
        )
    } else if let Some(rest) = s.strip_prefix("power:") {
        let (tau0, kappa) = rest.split_once(',').ok_or_else(|| {
            Error::Config(format!("rho power form is power:<tau0>,<kappa>, got {s:?}"))
        })?;
        StepSchedule::PowerDecay {
            tau0: tau0
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse tau0 in rho = {s:?}")))?,
            kappa: kappa
                .parse()
                .map_err(|_| Error::Config(format!("cannot parse kappa in rho = {s:?}")))?,
        }
    } else {
        return Err(Error::Config(format!(
            "rho must be const:<v> or power:<tau0>,<kappa>, got {s:?}"
        )));
    };
    sched.validate()?;
    Ok(sched)
}

pub fn render_step_schedule(s: &StepSchedule) -> String {
    match s {
        StepSchedule::Constant(v) => format!("const:{v}"),
        StepSchedule::PowerDecay { tau0, kappa } => format!("power:{tau0},{kappa}"),
    }
}

const KNOWN_KEYS: [&str; 32] = [
    "name", "model", "algo", "batch_size", "m", "rho", "iters", "seed", "eval_every", "heldout",
    "out", "data", "format", "vocab", "skip_header", "standardize", "generate", "gen_seed",
    "gen_n", "gen_users", "gen_items", "gen_rank", "gen_density", "gen_sigma2", "gen_docs",
    "gen_vocab", "gen_topics", "gen_doc_len", "k", "dirichlet", "k_trunc", "mass",
];
const KNOWN_MODEL_KEYS: [&str; 7] = ["rank", "sigma2", "c", "topics", "alpha", "eta", "lda_iters"];

impl RunConfig {
    /// Builds and validates a config from a flat key-value map.
    pub fn from_map(map: &ConfigMap) -> Result<RunConfig> {
        for key in map.keys() {
            if !KNOWN_KEYS.contains(&key.as_str())
                && !KNOWN_MODEL_KEYS.contains(&key.as_str())
                && key != "lda_tol"
            {
                return Err(Error::Config(format!("unknown config key: {key}")));
            }
        }
        let model_id: String = require(parse_key(map, "model")?, "model")?;
        let model = match model_id.as_str() {
            "gmm" => ModelSpec::Gmm {
                k: require(parse_key(map, "k")?, "k (gmm components)")?,
                dirichlet: parse_key(map, "dirichlet")?.unwrap_or(1.0),
            },
            "dpgmm" => ModelSpec::DpGmm {
                k_trunc: parse_key(map, "k_trunc")?.unwrap_or(50),
                mass: parse_key(map, "mass")?.unwrap_or(1.0),
            },
            "pmf" => ModelSpec::Pmf {
                rank: parse_key(map, "rank")?.unwrap_or(5),
                sigma2: parse_key(map, "sigma2")?.unwrap_or(0.5),
                c: parse_key(map, "c")?.unwrap_or(1.0),
            },
            "lda" => ModelSpec::Lda {
                topics: parse_key(map, "topics")?.unwrap_or(10),
                alpha: parse_key(map, "alpha")?.unwrap_or(0.1),
                eta: parse_key(map, "eta")?.unwrap_or(0.01),
                local_iters: parse_key(map, "lda_iters")?.unwrap_or(100),
                local_tol: parse_key(map, "lda_tol")?.unwrap_or(1e-3),
            },
            other => {
                return Err(Error::Config(format!(
                    "model must be gmm, dpgmm, pmf or lda, got {other:?}"
                )))
            }
        };

        let data = match (map.get("data"), map.get("generate")) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "data and generate are mutually exclusive; set exactly one".into(),
                ))
            }
            (Some(path), None) => {
                let format =
                    FileFormat::parse(&require(parse_key::<String>(map, "format")?, "format")?)?;
                DatasetSpec::File {
                    path: PathBuf::from(path),
                    format,
                    vocab: map.get("vocab").map(PathBuf::from),
                    skip_header: parse_key(map, "skip_header")?.unwrap_or(false),
                    standardize: parse_key(map, "standardize")?.unwrap_or(false),
                }
            }
            (None, Some(kind)) => {
                let gen_seed = parse_key(map, "gen_seed")?.unwrap_or(42);
                match kind.as_str() {
                    "gmm" => DatasetSpec::GenGmm {
                        n: parse_key(map, "gen_n")?.unwrap_or(250),
                        seed: gen_seed,
                    },
                    "ratings" => DatasetSpec::GenRatings {
                        users: parse_key(map, "gen_users")?.unwrap_or(500),
                        items: parse_key(map, "gen_items")?.unwrap_or(300),
                        rank: parse_key(map, "gen_rank")?.unwrap_or(5),
                        density: parse_key(map, "gen_density")?.unwrap_or(0.05),
                        sigma2: parse_key(map, "gen_sigma2")?.unwrap_or(0.25),
                        seed: gen_seed,
                    },
                    "lda" => DatasetSpec::GenLda {
                        docs: parse_key(map, "gen_docs")?.unwrap_or(2000),
                        vocab: parse_key(map, "gen_vocab")?.unwrap_or(500),
                        topics: parse_key(map, "gen_topics")?.unwrap_or(10),
                        doc_len: parse_key(map, "gen_doc_len")?.unwrap_or(100),
                        seed: gen_seed,
                    },
                    other => {
                        return Err(Error::Config(format!(
                            "generate must be gmm, ratings or lda, got {other:?}"
                        )))
                    }
                }
            }
            (None, None) => {
                return Err(Error::Config(
                    "no dataset: set data = <path> or generate = <kind>".into(),
                ))
            }
        };

        let algo = Algorithm::parse(&require(parse_key::<String>(map, "algo")?, "algo")?)?;
        let m = match map.get("m") {
            None => None,
            Some(s) => Some(parse_m_schedule(s)?),
        };
        let rho = match map.get("rho") {
            None => None,
            Some(s) => Some(parse_step_schedule(s)?),
        };
        let eval_every = parse_key(map, "eval_every")?;
        if eval_every == Some(0) {
            return Err(Error::Config("eval_every must be >= 1".into()));
        }

        let cfg = RunConfig {
            name: parse_key(map, "name")?
                .unwrap_or_else(|| format!("{}-{}", model.id(), algo.as_str())),
            model,
            data,
            algo,
            batch_size: parse_key(map, "batch_size")?,
            m,
            rho,
            iters: require(parse_key(map, "iters")?, "iters")?,
            seed: parse_key(map, "seed")?.unwrap_or(0),
            eval_every,
            heldout: parse_key(map, "heldout")?.unwrap_or(0),
            out: map.get("out").map(PathBuf::from),
        };
        if cfg.iters == 0 {
            return Err(Error::Config("iters must be >= 1".into()));
        }
        Ok(cfg)
    }

    /// Renders the config (with any resolved settings overlaid by the
    /// caller) back to the flat key-value form.
    pub fn to_map(&self) -> ConfigMap {
        let mut map = ConfigMap::new();
        map.insert("name".into(), self.name.clone());
        map.insert("model".into(), self.model.id().into());
        match &self.model {
            ModelSpec::Gmm { k, dirichlet } => {
                map.insert("k".into(), k.to_string());
                map.insert("dirichlet".into(), dirichlet.to_string());
            }
            ModelSpec::DpGmm { k_trunc, mass } => {
                map.insert("k_trunc".into(), k_trunc.to_string());
                map.insert("mass".into(), mass.to_string());
            }
            ModelSpec::Pmf { rank, sigma2, c } => {
                map.insert("rank".into(), rank.to_string());
                map.insert("sigma2".into(), sigma2.to_string());
                map.insert("c".into(), c.to_string());
            }
            ModelSpec::Lda {
                topics,
                alpha,
                eta,
                local_iters,
                local_tol,
            } => {
                map.insert("topics".into(), topics.to_string());
                map.insert("alpha".into(), alpha.to_string());
                map.insert("eta".into(), eta.to_string());
                map.insert("lda_iters".into(), local_iters.to_string());
                map.insert("lda_tol".into(), local_tol.to_string());
            }
        }
        match &self.data {
            DatasetSpec::File {
                path,
                format,
                vocab,
                skip_header,
                standardize,
            } => {
                map.insert("data".into(), path.display().to_string());
                map.insert("format".into(), format.as_str().into());
                if let Some(v) = vocab {
                    map.insert("vocab".into(), v.display().to_string());
                }
                map.insert("skip_header".into(), skip_header.to_string());
                map.insert("standardize".into(), standardize.to_string());
            }
            DatasetSpec::GenGmm { n, seed } => {
                map.insert("generate".into(), "gmm".into());
                map.insert("gen_n".into(), n.to_string());
                map.insert("gen_seed".into(), seed.to_string());
            }
            DatasetSpec::GenRatings {
                users,
                items,
                rank,
                density,
                sigma2,
                seed,
            } => {
                map.insert("generate".into(), "ratings".into());
                map.insert("gen_users".into(), users.to_string());
                map.insert("gen_items".into(), items.to_string());
                map.insert("gen_rank".into(), rank.to_string());
                map.insert("gen_density".into(), density.to_string());
                map.insert("gen_sigma2".into(), sigma2.to_string());
                map.insert("gen_seed".into(), seed.to_string());
            }
            DatasetSpec::GenLda {
                docs,
                vocab,
                topics,
                doc_len,
                seed,
            } => {
                map.insert("generate".into(), "lda".into());
                map.insert("gen_docs".into(), docs.to_string());
                map.insert("gen_vocab".into(), vocab.to_string());
                map.insert("gen_topics".into(), topics.to_string());
                map.insert("gen_doc_len".into(), doc_len.to_string());
                map.insert("gen_seed".into(), seed.to_string());
            }
        }
        map.insert("algo".into(), self.algo.as_str().into());
        if let Some(b) = self.batch_size {
            map.insert("batch_size".into(), b.to_string());
        }
        if let Some(m) = &self.m {
            map.insert("m".into(), render_m_schedule(m));
        }
        if let Some(r) = &self.rho {
            map.insert("rho".into(), render_step_schedule(r));
        }
        map.insert("iters".into(), self.iters.to_string());
        map.insert("seed".into(), self.seed.to_string());
        if let Some(e) = self.eval_every {
            map.insert("eval_every".into(), e.to_string());
        }
        map.insert("heldout".into(), self.heldout.to_string());
        if let Some(out) = &self.out {
            map.insert("out".into(), out.display().to_string());
        }
        map
    }

    /// Resolves loop settings against the training-set size, rejecting
    /// every contradictory combination with a message naming the fields.
    pub fn resolve(&self, n: usize) -> Result<LoopConfig> {
        let batch_size = self.batch_size.unwrap_or(n);
        if batch_size < 1 || batch_size > n {
            return Err(Error::Config(format!(
                "batch_size = {batch_size} must lie in [1, {n}] (dataset size)"
            )));
        }
        if self.algo == Algorithm::Batch && batch_size != n {
            return Err(Error::Config(format!(
                "algo = batch forces batch_size = {n}, but batch_size = {batch_size}"
            )));
        }
        let m_schedule = match (self.algo, &self.m) {
            (Algorithm::Batch, None) => EffectiveBatchSchedule::Constant(n),
            (Algorithm::Batch, Some(m)) => {
                if *m != EffectiveBatchSchedule::Constant(n) {
                    return Err(Error::Config(format!(
                        "algo = batch forces m = {n}, but m = {}",
                        render_m_schedule(m)
                    )));
                }
                *m
            }
            (Algorithm::Svi, None) => EffectiveBatchSchedule::Constant(batch_size),
            (Algorithm::Svi, Some(m)) => {
                if *m != EffectiveBatchSchedule::Constant(batch_size) {
                    return Err(Error::Config(format!(
                        "algo = svi forces m = batch_size = {batch_size}, but m = {}",
                        render_m_schedule(m)
                    )));
                }
                *m
            }
            (Algorithm::SviPlus, None) => {
                return Err(Error::Config(
                    "algo = svi+ requires m (an integer or ramp:<c>)".into(),
                ))
            }
            (Algorithm::SviPlus, Some(m)) => {
                if let EffectiveBatchSchedule::Constant(v) = m {
                    if *v > batch_size {
                        return Err(Error::Config(format!(
                            "m = {v} exceeds batch_size = {batch_size}"
                        )));
                    }
                }
                *m
            }
        };
        let step = match (self.algo, &self.rho) {
            (Algorithm::Batch, None) => StepSchedule::Constant(1.0),
            (Algorithm::Batch, Some(r)) => {
                if *r != StepSchedule::Constant(1.0) {
                    return Err(Error::Config(format!(
                        "algo = batch forces rho = const:1, but rho = {}",
                        render_step_schedule(r)
                    )));
                }
                *r
            }
            (_, None) => StepSchedule::PowerDecay { tau0: 1.0, kappa: 0.7 },
            (_, Some(r)) => *r,
        };
        step.validate()?;
        m_schedule.validate()?;
        let eval_every = self
            .eval_every
            .unwrap_or(if self.iters <= 1000 { 1 } else { 10 });
        Ok(LoopConfig {
            batch_size,
            m_schedule,
            step,
            iters: self.iters,
            seed: self.seed,
            eval_every,
            floor: DomainFloor::default(),
        })
    }

    pub fn with_seed(&self, seed: u64) -> RunConfig {
        let mut cfg = self.clone();
        cfg.seed = seed;
        cfg
    }
}

/// Loaded training material, one variant per datum type.
pub enum LoadedData {
    Features(Vec<Vec<f64>>),
    Ratings(data::RatingsDataset),
    Docs { docs: Vec<Doc>, vocab: usize },
}

pub fn load_data(spec: &DatasetSpec) -> Result<LoadedData> {
    match spec {
        DatasetSpec::File {
            path,
            format,
            vocab,
            skip_header,
            standardize,
        } => match format {
            FileFormat::Dat => Ok(LoadedData::Ratings(parse_movielens(
                path,
                MovielensFormat::DoubleColonDat,
            )?)),
            FileFormat::Csv => Ok(LoadedData::Ratings(parse_movielens(
                path,
                MovielensFormat::Csv,
            )?)),
            FileFormat::Bow => {
                let corpus = parse_bow(path, vocab.as_deref())?;
                Ok(LoadedData::Docs {
                    docs: docs_from_corpus(&corpus),
                    vocab: corpus.vocab_size,
                })
            }
            FileFormat::Matrix => {
                let m = parse_csv_matrix(path, *skip_header)?;
                let m = if *standardize { m.standardize() } else { m };
                Ok(LoadedData::Features(m.rows()))
            }
        },
        DatasetSpec::GenGmm { n, seed } => {
            let m = gen_gmm_synthetic(*n, &ClusterSpec::default(), *seed)?;
            Ok(LoadedData::Features(m.rows()))
        }
        DatasetSpec::GenRatings {
            users,
            items,
            rank,
            density,
            sigma2,
            seed,
        } => {
            let (ds, _, _) = gen_ratings_synthetic(
                *users,
                *items,
                *rank,
                *density,
                *sigma2,
                *seed,
                &RatingsGenOptions::default(),
            )?;
            Ok(LoadedData::Ratings(ds))
        }
        DatasetSpec::GenLda {
            docs,
            vocab,
            topics,
            doc_len,
            seed,
        } => {
            let (corpus, _) = gen_lda_synthetic(*docs, *vocab, *topics, *doc_len, *seed)?;
            Ok(LoadedData::Docs {
                docs: docs_from_corpus(&corpus),
                vocab: corpus.vocab_size,
            })
        }
    }
}

/// Splits the trailing `heldout` elements off for evaluation.
fn split_heldout<T>(data: &[T], heldout: usize) -> Result<(&[T], &[T])> {
    if heldout >= data.len() {
        return Err(Error::Config(format!(
            "heldout = {heldout} must be smaller than the dataset size {}",
            data.len()
        )));
    }
    let cut = data.len() - heldout;
    let train = &data[..cut];
    let eval = if heldout > 0 { &data[cut..] } else { train };
    Ok((train, eval))
}

pub struct RunOutput {
    pub name: String,
    pub model: String,
    pub trace: ElboTrace,
    pub globals: Vec<NaturalParam>,
}

/// Executes one configured run end to end, writing trace, snapshot and
/// the resolved config when an output directory is set.
pub fn run_config(cfg: &RunConfig) -> Result<RunOutput> {
    let loaded = load_data(&cfg.data)?;
    let result = match (&cfg.model, &loaded) {
        (ModelSpec::Gmm { k, dirichlet }, LoadedData::Features(rows)) => {
            let (train, eval) = split_heldout(rows, cfg.heldout)?;
            let mixing = NaturalParam::symmetric_dirichlet(*k, *dirichlet)?;
            let model = GmmModel::with_data_prior(*k, train, mixing)?;
            run_model(&model, train, eval, &cfg.resolve(train.len())?)?
        }
        (ModelSpec::DpGmm { k_trunc, mass }, LoadedData::Features(rows)) => {
            let (train, eval) = split_heldout(rows, cfg.heldout)?;
            let mixing = dp_gmm_prior(*k_trunc, *mass)?;
            let model = GmmModel::with_data_prior(*k_trunc, train, mixing)?;
            run_model(&model, train, eval, &cfg.resolve(train.len())?)?
        }
        (ModelSpec::Pmf { rank, sigma2, c }, LoadedData::Ratings(ds)) => {
            let (train, eval) = split_heldout(&ds.ratings, cfg.heldout)?;
            let model = PmfModel::new(ds.n_users, ds.n_items, *rank, *sigma2, *c)?;
            run_model(&model, train, eval, &cfg.resolve(train.len())?)?
        }
        (
            ModelSpec::Lda {
                topics,
                alpha,
                eta,
                local_iters,
                local_tol,
            },
            LoadedData::Docs { docs, vocab },
        ) => {
            let (train, eval) = split_heldout(docs, cfg.heldout)?;
            let mut model = LdaModel::new(*topics, *vocab, *alpha, *eta)?;
            model.local_max_iters = *local_iters;
            model.local_tol = *local_tol;
            run_model(&model, train, eval, &cfg.resolve(train.len())?)?
        }
        (model, _) => {
            return Err(Error::Config(format!(
                "model = {} does not match the dataset kind (gmm/dpgmm need features, pmf needs ratings, lda needs documents)",
                model.id()
            )))
        }
    };

    let output = RunOutput {
        name: cfg.name.clone(),
        model: cfg.model.id().to_string(),
        trace: result.trace,
        globals: result.globals,
    };
    if let Some(dir) = &cfg.out {
        write_run_outputs(cfg, &output, dir)?;
    }
    Ok(output)
}

fn write_run_outputs(cfg: &RunConfig, output: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    output.trace.write_csv(dir.join("trace.csv"))?;
    save_snapshot(dir.join("state.json"), &output.model, &output.globals)?;
    let conf = render_flat_config(&cfg.to_map());
    std::fs::write(dir.join("run.conf"), conf).map_err(|e| Error::io(dir.join("run.conf"), e))?;
    Ok(())
}

/// Mean/sd objective curves per config plus final-objective win counts.
pub struct CompareCurve {
    pub name: String,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub final_elbos: Vec<f64>,
    pub wins: usize,
}

pub struct CompareSummary {
    pub iterations: Vec<u64>,
    pub curves: Vec<CompareCurve>,
}

/// Runs every (config, seed) pair with shared batch-stream seeding
/// (the same master seed across configs) and summarizes.
pub fn compare(configs: &[RunConfig], seeds: &[u64]) -> Result<CompareSummary> {
    if configs.len() < 2 {
        return Err(Error::Config("compare needs at least two configs".into()));
    }
    if seeds.is_empty() {
        return Err(Error::Config("compare needs at least one seed".into()));
    }
    for (i, c) in configs.iter().enumerate().skip(1) {
        if c.iters != configs[0].iters || c.eval_every != configs[0].eval_every {
            return Err(Error::Config(format!(
                "configs 0 and {i} disagree on iters/eval_every; comparison rows would not align"
            )));
        }
    }
    let pairs: Vec<(usize, u64)> = (0..configs.len())
        .flat_map(|c| seeds.iter().map(move |&s| (c, s)))
        .collect();
    let runs: Vec<((usize, u64), RunOutput)> = pairs
        .par_iter()
        .map(|&(c, s)| {
            let mut cfg = configs[c].with_seed(s);
            cfg.out = None;
            Ok(((c, s), run_config(&cfg)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let iterations: Vec<u64> = runs[0].1.trace.rows.iter().map(|r| r.iteration).collect();
    for (_, out) in &runs {
        let got: Vec<u64> = out.trace.rows.iter().map(|r| r.iteration).collect();
        if got != iterations {
            return Err(Error::Contract(
                "runs produced misaligned evaluation points".into(),
            ));
        }
    }

    let mut curves = Vec::with_capacity(configs.len());
    for (c, cfg) in configs.iter().enumerate() {
        let traces: Vec<&ElboTrace> = runs
            .iter()
            .filter(|((ci, _), _)| *ci == c)
            .map(|(_, out)| &out.trace)
            .collect();
        let rows = iterations.len();
        let mut mean = vec![0.0; rows];
        let mut sd = vec![0.0; rows];
        for r in 0..rows {
            let vals: Vec<f64> = traces.iter().map(|t| t.rows[r].elbo).collect();
            let m = vals.iter().sum::<f64>() / vals.len() as f64;
            let v = vals.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / vals.len() as f64;
            mean[r] = m;
            sd[r] = v.sqrt();
        }
        let final_elbos: Vec<f64> = traces
            .iter()
            .map(|t| t.final_elbo().expect("nonempty trace"))
            .collect();
        curves.push(CompareCurve {
            name: cfg.name.clone(),
            mean,
            sd,
            final_elbos,
            wins: 0,
        });
    }

    // A config wins a seed when its final objective is strictly highest.
    for s in 0..seeds.len() {
        let finals: Vec<f64> = curves.iter().map(|c| c.final_elbos[s]).collect();
        let best = finals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let winners: Vec<usize> = (0..finals.len()).filter(|&i| finals[i] == best).collect();
        if winners.len() == 1 {
            curves[winners[0]].wins += 1;
        }
    }

    Ok(CompareSummary { iterations, curves })
}

pub fn write_compare_csv(summary: &CompareSummary, path: impl AsRef<Path>) -> Result<()> {
    let mut header = vec!["iteration".to_string()];
    for c in &summary.curves {
        header.push(format!("{}_mean", c.name));
        header.push(format!("{}_sd", c.name));
    }
    write_csv(
        path,
        &header,
        summary.iterations.iter().enumerate().map(|(r, it)| {
            let mut row = vec![it.to_string()];
            for c in &summary.curves {
                row.push(c.mean[r].to_string());
                row.push(c.sd[r].to_string());
            }
            row
        }),
    )
}

pub fn write_wins_csv(summary: &CompareSummary, path: impl AsRef<Path>) -> Result<()> {
    write_csv(
        path,
        &["config".to_string(), "wins".to_string(), "mean_final_elbo".to_string()],
        summary.curves.iter().map(|c| {
            let mean = c.final_elbos.iter().sum::<f64>() / c.final_elbos.len() as f64;
            vec![c.name.clone(), c.wins.to_string(), mean.to_string()]
        }),
    )
}

pub fn write_trend_csv(
    rows: &[crate::diagnostics::TrendRow],
    path: impl AsRef<Path>,
) -> Result<()> {
    write_csv(
        path,
        &[
            "tau".to_string(),
            "batch_size".to_string(),
            "mean_max_ks".to_string(),
            "mean_energy".to_string(),
        ],
        rows.iter().map(|r| {
            vec![
                r.tau.to_string(),
                r.batch_size.to_string(),
                r.mean_max_ks.to_string(),
                r.mean_energy.to_string(),
            ]
        }),
    )
}

pub fn write_occupancy_csv(
    summary: &crate::diagnostics::OccupancySummary,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_csv(
        path,
        &[
            "rank".to_string(),
            "mean_share".to_string(),
            "cum_min".to_string(),
            "cum_q1".to_string(),
            "cum_median".to_string(),
            "cum_q3".to_string(),
            "cum_max".to_string(),
        ],
        summary
            .mean_shares
            .iter()
            .zip(&summary.cumulative_quartiles)
            .enumerate()
            .map(|(rank, (share, q))| {
                vec![
                    (rank + 1).to_string(),
                    share.to_string(),
                    q[0].to_string(),
                    q[1].to_string(),
                    q[2].to_string(),
                    q[3].to_string(),
                    q[4].to_string(),
                ]
            }),
    )
}
