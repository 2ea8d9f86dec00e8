//! Error type shared by every module of the toolkit.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode image {path}: {source}")]
    ImageDecode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("cannot encode image {path}: {source}")]
    ImageEncode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}: expected a single-channel 8- or 16-bit raster, found {found}")]
    MultiChannel { path: PathBuf, found: String },

    #[error("image has a zero dimension ({width}x{height})")]
    ZeroDimension { width: usize, height: usize },

    #[error("pixel buffer length {len} does not match {width}x{height}")]
    BufferLength {
        len: usize,
        width: usize,
        height: usize,
    },

    #[error("intensity at index {index} is {value}, expected a finite non-negative value")]
    InvalidIntensity { index: usize, value: f64 },

    #[error("dimension mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
    DimensionMismatch {
        left_width: usize,
        left_height: usize,
        right_width: usize,
        right_height: usize,
    },

    #[error("cannot parse {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("manifest entry duplicated: image {image:?} listed twice for kind {kind}")]
    DuplicateEntry { image: String, kind: String },

    #[error("manifest entry {image:?} has split {split} but no mask")]
    MissingMask { image: String, split: String },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("defect center ({x}, {y}) lies outside the {width}x{height} image")]
    DefectOutsideImage {
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    },

    #[error("contrast transform undefined on a constant image (max == min)")]
    ConstantImage,

    #[error("scale factor {factor} collapses a {width}x{height} image below one pixel")]
    DegenerateScale {
        factor: f64,
        width: usize,
        height: usize,
    },

    #[error("{window}px window exceeds the {width}x{height} image")]
    WindowTooLarge {
        window: usize,
        width: usize,
        height: usize,
    },

    #[error("training entry {image:?} has no mask; augmentation needs labelled sources")]
    UnlabelledTrainingImage { image: String },

    #[error("manifest has no entries in the {split} split")]
    EmptySplit { split: String },

    #[error("model {id:?}: {detail}")]
    ModelConstraint { id: String, detail: String },

    #[error("no stored prediction for patch {key} (expected {path})")]
    MissingPrediction { key: String, path: PathBuf },

    #[error("tiling plan leaves pixels uncovered after trimming (axis {axis}, near {position})")]
    CoverageHole { axis: char, position: usize },

    #[error("{operation} needs a non-empty input")]
    EmptyInput { operation: &'static str },

    #[error("no defined {metric} samples to take a median of")]
    NoDefinedSamples { metric: &'static str },

    #[error("baseline {metric} is not positive; cannot normalize")]
    ZeroBaseline { metric: &'static str },

    #[error("{side} values have zero variance; correlation undefined")]
    ZeroVariance { side: &'static str },

    #[error("correlation needs at least {needed} joined records, found {found}")]
    InsufficientJoin { needed: usize, found: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
