//! Bilingual word-embedding alignment and zero-shot cross-lingual sentiment
//! classification.
//!
//! The crate aligns two monolingual embedding spaces into a shared bilingual
//! space with one of five linear transformations (least-squares, orthogonal
//! Procrustes, CCA, max-margin ranking, orthogonality-constrained ranking),
//! evaluates alignments by nearest-neighbor translation retrieval, and trains
//! a convolutional sentence classifier over the frozen aligned embeddings so
//! a model fit on one language can be evaluated on another.

pub mod bli_eval;
pub mod dictionary;
pub mod embeddings;
pub mod harness;
pub mod numerics;
pub mod textclf;
pub mod transforms;

use thiserror::Error;

/// Coarse failure class, used by the CLI to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Caller misuse: bad flags, bad config values, schema violations.
    Usage,
    /// Broken or inconsistent input data and I/O failures.
    Data,
    /// Numerical failure: non-convergence or divergence.
    Numeric,
}

/// Any error the pipeline stages can produce.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Numerics(#[from] numerics::NumericsError),
    #[error(transparent)]
    Embedding(#[from] embeddings::EmbeddingError),
    #[error(transparent)]
    Dictionary(#[from] dictionary::DictionaryError),
    #[error(transparent)]
    Transform(#[from] transforms::TransformError),
    #[error(transparent)]
    Bli(#[from] bli_eval::BliError),
    #[error(transparent)]
    TextClf(#[from] textclf::TextClfError),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Numerics(e) => match e {
                numerics::NumericsError::NoConvergence { .. } => ErrorClass::Numeric,
                _ => ErrorClass::Data,
            },
            Error::Embedding(_) | Error::Dictionary(_) => ErrorClass::Data,
            Error::Transform(e) => match e {
                transforms::TransformError::Diverged { .. } => ErrorClass::Numeric,
                transforms::TransformError::Numerics(
                    numerics::NumericsError::NoConvergence { .. },
                ) => ErrorClass::Numeric,
                transforms::TransformError::InvalidConfig { .. } => ErrorClass::Usage,
                _ => ErrorClass::Data,
            },
            Error::Bli(e) => match e {
                bli_eval::BliError::InvalidKs => ErrorClass::Usage,
                _ => ErrorClass::Data,
            },
            Error::TextClf(e) => match e {
                textclf::TextClfError::NonFiniteLoss { .. } => ErrorClass::Numeric,
                textclf::TextClfError::InvalidConfig { .. } => ErrorClass::Usage,
                _ => ErrorClass::Data,
            },
        }
    }
}
