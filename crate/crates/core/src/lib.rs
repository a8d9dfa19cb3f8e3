//! Patch-aware hero representations for Dota 2.
//!
//! The pipeline turns OpenDota per-patch game constants into a standardized
//! ability feature table, clusters abilities once on a set of reference
//! patches, and encodes heroes and lineups as cluster-count vectors. Those
//! vectors feed small regression networks that predict per-team kill counts,
//! evaluated as a "kill race" ranking problem. Because the encoding is defined
//! by ability properties rather than hero identity, heroes released after the
//! clustering was fit (and heroes whose abilities were reworked) can be encoded
//! without touching the trained models.

pub mod clustering;
pub mod encoding;
pub mod evaluation;
pub mod match_data;
pub mod matrix;
pub mod model;
pub mod patch_ingest;

pub use matrix::Matrix;
