//! Seq-to-3seq: joint prediction of actions and auxiliary countdown sequences
//! on the SCAN command-to-action task.
//!
//! The crate is organized around six parts:
//!
//! - [`grammar`] — tokenizer, parser, and interpreter for SCAN commands; also
//!   enumerates the complete command space as a ground-truth oracle.
//! - [`auxgen`] — derives the two auxiliary supervision sequences (repetition
//!   countdown and within-unit countdown) for any parsed command.
//! - [`data`] — split files, vocabularies, labeled examples, deterministic
//!   subsampling and supervision masking.
//! - [`model`] — the dual-embedding encoder/decoder transformer with an
//!   attention action head and a configurable auxiliary head, implemented
//!   from scratch with analytic gradients.
//! - [`train`] — Adam, batching, metrics logging, checkpointing.
//! - [`eval`] — exact-match evaluation, error taxonomy, and the experiment
//!   suites (few-shot curves, ablation grid).

pub mod auxgen;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod grammar;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod train;
pub mod vocab;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
