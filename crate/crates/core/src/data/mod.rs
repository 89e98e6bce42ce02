//! Dataset ingestion (MovieLens ratings, UCI bag-of-words, numeric CSV)
//! and seeded synthetic generators for desk-scale experiments.
//!
//! Parsers are single-threaded streaming readers; every returned dataset
//! is immutable. Generators are pure functions of (params, seed).

mod bow;
mod features;
mod ratings;

pub use bow::{gen_lda_synthetic, parse_bow, write_bow, BowCorpus};
pub use features::{gen_gmm_synthetic, parse_csv_matrix, ClusterSpec, FeatureMatrix};
pub use ratings::{
    gen_ratings_synthetic, parse_movielens, write_movielens, MovielensFormat, Rating,
    RatingsDataset, RatingsGenOptions,
};
