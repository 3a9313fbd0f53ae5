use std::path::PathBuf;

use thiserror::Error;

use crate::labels::Rect;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty scene: manifest lists no views")]
    EmptyScene,

    #[error("missing file {path}")]
    MissingFile { path: PathBuf },

    #[error("failed to read raster {path}: {reason}")]
    Raster { path: PathBuf, reason: String },

    #[error("{entry}: expected {expected_height}x{expected_width}, found {height}x{width}")]
    DimensionMismatch {
        entry: String,
        expected_height: usize,
        expected_width: usize,
        height: usize,
        width: usize,
    },

    #[error("label {index} {rect:?} lies outside the {height}x{width} image")]
    RectOutOfBounds {
        index: usize,
        rect: Rect,
        height: usize,
        width: usize,
    },

    #[error("expected {expected} channels, got {found}")]
    ChannelCount { expected: usize, found: usize },

    #[error("invalid manifest {path}: {reason}")]
    Manifest { path: PathBuf, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid detector config: {0}")]
    InvalidConfig(String),

    #[error("unknown token {token:?} (expected one of {expected})")]
    UnknownToken { token: String, expected: &'static str },

    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },

    #[error("expectation-maximization failed: {0}")]
    EmFailure(String),

    #[error("infeasible synthetic scene: {0}")]
    Infeasible(String),

    #[error("label mask must contain both positive and negative pixels")]
    DegenerateMask,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
