//! Model plugins behind a single contract: per-datum local steps that
//! emit expected sufficient statistics for each global variable, global
//! initialization, and ELBO evaluation.

mod gmm;
mod lda;
mod pmf;

pub use gmm::{dp_gmm_prior, GmmCtx, GmmModel};
pub use lda::{docs_from_corpus, Doc, LdaCtx, LdaModel};
pub use pmf::{PmfCtx, PmfModel};

use crate::expfam::{NaturalParam, SuffStat};
use crate::Result;

/// A conjugate-exponential-family model the engine can drive.
///
/// Globals are a flat list of natural parameters in a fixed order; a
/// local step maps one datum to sparse statistic contributions, one per
/// touched global, in that global's layout. `local_step` must be a
/// deterministic function of (datum, globals) — all randomness lives in
/// the engine — and is safe to call from many threads at once.
pub trait CefModel: Sync {
    type Datum: Sync + Send + Clone;
    /// Expectations of the current globals, computed once per sweep and
    /// shared read-only across the batch.
    type Ctx: Sync + Send;

    fn name(&self) -> &'static str;

    /// One prior natural parameter per global, in global order.
    fn priors(&self) -> Vec<NaturalParam>;

    /// Deterministic seeded initialization of the globals.
    fn init_globals(&self, data: &[Self::Datum], seed: u64) -> Result<Vec<NaturalParam>>;

    fn prepare(&self, globals: &[NaturalParam]) -> Result<Self::Ctx>;

    /// Expected sufficient statistics contributed by one datum, as
    /// (global index, statistic) pairs.
    fn local_step(&self, datum: &Self::Datum, ctx: &Self::Ctx) -> Result<Vec<(usize, SuffStat)>>;

    /// The variational objective on the given data; local parameters are
    /// refit internally, so evaluating held-out data with frozen globals
    /// is the same call.
    fn elbo(&self, data: &[Self::Datum], globals: &[NaturalParam]) -> Result<f64>;
}
