//! Signed-graph prompt tuning.
//!
//! Pre-train an unsigned GCN with self-supervised link prediction, compile a
//! downstream signed graph into balance-theory semantic channels (positive,
//! negative, topological), and adapt the frozen backbone to few-shot node
//! classification and link-sign prediction by tuning lightweight prompts.
//!
//! The crate is organized bottom-up:
//!
//! - [`dense`] / [`sparse`]: numeric carriers (row-major dense tensors, CSR
//!   binary / real sparse matrices) and the adjacency algebra.
//! - [`graph`]: canonical edge-list ingestion, few-shot splits and tasks.
//! - [`autodiff`]: tape-based reverse-mode differentiation plus Adam.
//! - [`gcn`]: the GCN encoder and its frozen checkpoint format.
//! - [`pretrain`]: link-prediction pre-training producing the checkpoint.
//! - [`template`]: balance-theory channel construction, prototypes, prediction.
//! - [`prompt`]: feature prompts, hop-wise fusion, and the semantic adapter.
//! - [`tune`]: downstream prompt tuning and the few-shot evaluation harness.
//! - [`synth`]: seeded synthetic graph generators for demos and tests.

pub mod autodiff;
pub mod container;
pub mod dense;
pub mod gcn;
pub mod graph;
pub mod pretrain;
pub mod prompt;
pub mod seed;
pub mod sparse;
pub mod synth;
pub mod template;
pub mod tune;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum SgptError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(
        "statistics mismatch: found {found_nodes} nodes, {found_pos} positive, \
         {found_neg} negative; expected {expected_nodes}, {expected_pos}, {expected_neg}"
    )]
    StatsMismatch {
        found_nodes: usize,
        found_pos: usize,
        found_neg: usize,
        expected_nodes: usize,
        expected_pos: usize,
        expected_neg: usize,
    },
    #[error("edge ({u},{v}) appears with conflicting signs")]
    ConflictingSign { u: usize, v: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("shape mismatch in {context}: {details}")]
    ShapeMismatch {
        context: &'static str,
        details: String,
    },
    #[error(
        "insufficient edges: requested {requested} supervision edges but only \
         {available} remain outside the message-passing set"
    )]
    InsufficientEdges { requested: usize, available: usize },
    #[error("class {class} has only {available} labeled members, need {needed}")]
    ClassTooSmall {
        class: usize,
        available: usize,
        needed: usize,
    },
    #[error("class {class} has no support examples")]
    EmptyClass { class: usize },
    #[error("corrupt file: {0}")]
    Corrupt(String),
    #[error("config hash mismatch: stored {stored}, expected {expected}")]
    HashMismatch { stored: String, expected: String },
    #[error("non-finite loss at step {step}: {value}")]
    NonFiniteLoss { step: usize, value: f64 },
    #[error("negative sampling failed for node {node} after {attempts} attempts")]
    SamplingFailed { node: usize, attempts: usize },
    #[error("metric undefined: scores contain a single class only")]
    SingleClass,
}

pub type Result<T> = std::result::Result<T, SgptError>;

/// Version string embedded in generated artifacts.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
