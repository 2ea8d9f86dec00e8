//! Domain types shared by every stage of the pipeline: intensity images,
//! binary masks, module geometry and dataset manifests.
//!
//! All types are immutable values after construction and can be shared or
//! sent between workers freely.

pub mod geometry;
pub mod grid;
pub mod image;
pub mod manifest;

pub use geometry::{ModuleGeometry, Orientation, StitchLine};
pub use image::{
    load_image, load_mask, save_image, save_mask, BinaryMask, BitDepth, ComponentSet,
    Connectivity, GrayImage,
};
pub use manifest::{parse_manifest, DatasetManifest, DefectKind, ManifestEntry, Split};
