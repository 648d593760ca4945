//! Batch toolkit for converting per-frame face/head tracking recordings into
//! per-segment behavioral feature vectors and evaluating two-stage RBF-SVM
//! group classifiers under leave-one-subject-out protocols.
//!
//! Pipeline: [`session`] parses and validates recordings, [`features`] builds
//! the 2976-dimensional session descriptor, [`preprocess`] standardizes and
//! runs forward feature selection, [`svm`] trains the RBF C-SVC by SMO, and
//! [`eval`] runs the leave-one-subject-out two-stage protocol. [`synth`]
//! generates deterministic synthetic cohorts for end-to-end testing, and
//! [`report`] handles CSV/table/scatter exports.

pub mod eval;
pub mod features;
pub mod preprocess;
pub mod report;
pub mod session;
pub mod svm;
pub mod synth;

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Session(#[from] session::SessionError),
    #[error(transparent)]
    Feature(#[from] features::FeatureError),
    #[error(transparent)]
    Preprocess(#[from] preprocess::PreprocessError),
    #[error(transparent)]
    Svm(#[from] svm::SvmError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Synth(#[from] synth::SynthError),
    #[error("{0}")]
    Format(String),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Error {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Stable exit-code contract: 1 validation, 2 protocol/config, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 3,
            Error::Session(_) | Error::Feature(_) | Error::Format(_) => 1,
            Error::Preprocess(_) | Error::Svm(_) | Error::Eval(_) | Error::Synth(_) => 2,
        }
    }
}
