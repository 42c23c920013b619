//! File formats, synthetic mixtures and the command-line front end for
//! `morphsep-core`.

// `!(x > 0.0)` is how NaN gets rejected alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};

pub mod cli;
pub mod formats;
pub mod fsutil;
pub mod manifest;
pub mod synth;
pub mod wav;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Wav { path: PathBuf, message: String },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] morphsep_core::Error),
}

impl Error {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn wav(path: &Path, message: impl Into<String>) -> Self {
        Error::Wav {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    pub fn format(message: String) -> Self {
        Error::Format(message)
    }
}
