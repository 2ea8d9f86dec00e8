//! elseg — an evaluation toolkit for defect segmentation in
//! electroluminescence images of thin-film photovoltaic modules.
//!
//! The pipeline stages are:
//!
//! 1. **synth** – synthetic module generator with exact ground-truth masks.
//! 2. **augment** – training-data augmentation: rescaling, mirroring, a
//!    min/max anchored contrast transform and sliding-window patches with a
//!    defect-pixel filter.
//! 3. **segmenter** – the patch-in/mask-out model abstraction: model specs
//!    with input-size constraints, a classical reference segmenter and a
//!    loader for externally computed predictions.
//! 4. **tiling** – full-module inference by overlapping patches with border
//!    trimming and OR-stitching.
//! 5. **metrics** – Jaccard index, component-level precision/recall from the
//!    component instance function, double-annotation baseline and
//!    normalization.
//! 6. **select** – per-model medians, Pareto frontier on precision/recall,
//!    final choice by Jaccard.
//! 7. **aggregate** – population heat maps and defect-count/performance
//!    correlation.
//!
//! Library code is purely sequential; operations documented as associative
//! or per-item pure can be parallelized by the caller.

pub mod aggregate;
pub mod augment;
pub mod core;
pub mod error;
pub mod metrics;
pub mod segmenter;
pub mod select;
pub mod synth;
pub mod tiling;

pub use error::{Error, Result};
