//! Training-data augmentation: rescaling, mirroring, a min/max anchored
//! contrast transform, sliding-window patch extraction with a defect-pixel
//! filter, and a seeded shuffle of the combined patch stream.
//!
//! The contrast transform maps intensities by
//!
//! ```text
//! ((1-a)M - (1+a)m) * (I - m) / (M - m) + m(1+a)
//! ```
//!
//! with M and m the image maximum and minimum; at a = 0 it reduces to the
//! identity, and it is undefined on constant images.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::core::grid::axis_offsets;
use crate::core::{BinaryMask, DatasetManifest, DefectKind, GrayImage, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MirrorAxis {
    Horizontal,
    Vertical,
}

/// Which mirror variants the pipeline emits; the unmirrored image is always
/// included.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MirrorMode {
    Horizontal,
    Vertical,
    Both,
}

impl MirrorMode {
    /// Mirror flag combinations (horizontal, vertical) emitted per image.
    pub fn variants(self) -> Vec<(bool, bool)> {
        match self {
            MirrorMode::Horizontal => vec![(false, false), (true, false)],
            MirrorMode::Vertical => vec![(false, false), (false, true)],
            MirrorMode::Both => vec![(false, false), (true, false), (false, true)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub scale_range: (f64, f64),
    /// Number of evenly spaced scale factors sampled from `scale_range`.
    pub scale_steps: usize,
    pub alpha_range: (f64, f64),
    /// Number of evenly spaced contrast strengths sampled from `alpha_range`.
    pub alpha_steps: usize,
    pub window_size: usize,
    pub window_shift: usize,
    pub min_defect_pixels: usize,
    pub mirror: MirrorMode,
    pub shuffle_seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            scale_range: (0.7, 1.3),
            scale_steps: 5,
            alpha_range: (-0.4, 0.4),
            alpha_steps: 3,
            window_size: 256,
            window_shift: 50,
            min_defect_pixels: 200,
            mirror: MirrorMode::Both,
            shuffle_seed: 0,
        }
    }
}

fn linspace((lo, hi): (f64, f64), steps: usize) -> Vec<f64> {
    if steps == 1 {
        return vec![(lo + hi) / 2.0];
    }
    (0..steps)
        .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
        .collect()
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let (slo, shi) = self.scale_range;
        if !(slo.is_finite() && shi.is_finite() && 0.0 < slo && slo <= shi) {
            return Err(Error::InvalidParam(
                "scale_range must satisfy 0 < lo <= hi".into(),
            ));
        }
        let (alo, ahi) = self.alpha_range;
        if !(alo.is_finite() && ahi.is_finite() && -1.0 < alo && alo <= ahi && ahi < 1.0) {
            return Err(Error::InvalidParam(
                "alpha_range must lie inside (-1, 1)".into(),
            ));
        }
        if self.scale_steps == 0 || self.alpha_steps == 0 {
            return Err(Error::InvalidParam("grid steps must be >= 1".into()));
        }
        if self.window_size == 0 {
            return Err(Error::InvalidParam("window_size must be >= 1".into()));
        }
        if self.window_shift == 0 {
            return Err(Error::InvalidParam("window_shift must be >= 1".into()));
        }
        Ok(())
    }

    pub fn scale_grid(&self) -> Vec<f64> {
        linspace(self.scale_range, self.scale_steps)
    }

    pub fn alpha_grid(&self) -> Vec<f64> {
        linspace(self.alpha_range, self.alpha_steps)
    }
}

/// Everything needed to re-derive a patch from its source image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source_id: String,
    pub offset: (usize, usize),
    pub scale: f64,
    pub alpha: f64,
    pub mirror_h: bool,
    pub mirror_v: bool,
}

impl Provenance {
    fn source_only(source_id: &str) -> Self {
        Provenance {
            source_id: source_id.to_string(),
            offset: (0, 0),
            scale: 1.0,
            alpha: 0.0,
            mirror_h: false,
            mirror_v: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatchPair {
    pub image: GrayImage,
    pub mask: BinaryMask,
    pub provenance: Provenance,
}

impl PatchPair {
    pub fn defect_pixels(&self) -> usize {
        self.mask.count_true()
    }
}

/// Resize image and mask by the same factor on both axes. Output dimensions
/// are `round(factor * dim)`; the image is resampled bilinearly, the mask by
/// nearest neighbor so it stays binary.
pub fn rescale(
    img: &GrayImage,
    mask: &BinaryMask,
    factor: f64,
) -> Result<(GrayImage, BinaryMask)> {
    check_pairing(img, mask)?;
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::InvalidParam(format!(
            "scale factor {factor} must be positive"
        )));
    }
    let scaled_w = factor * img.width() as f64;
    let scaled_h = factor * img.height() as f64;
    if scaled_w < 1.0 || scaled_h < 1.0 {
        return Err(Error::DegenerateScale {
            factor,
            width: img.width(),
            height: img.height(),
        });
    }
    let out_w = scaled_w.round() as usize;
    let out_h = scaled_h.round() as usize;
    Ok((
        img.resize_bilinear(out_w, out_h)?,
        mask.resample_nearest(out_w, out_h)?,
    ))
}

/// Mirror image and mask with the same pixel permutation. An involution:
/// mirroring twice restores the input.
pub fn mirror(
    img: &GrayImage,
    mask: &BinaryMask,
    axis: MirrorAxis,
) -> Result<(GrayImage, BinaryMask)> {
    check_pairing(img, mask)?;
    let (h, v) = match axis {
        MirrorAxis::Horizontal => (true, false),
        MirrorAxis::Vertical => (false, true),
    };
    Ok((mirror_image(img, h, v), mirror_mask(mask, h, v)))
}

fn mirror_coords(x: usize, y: usize, w: usize, h: usize, mh: bool, mv: bool) -> (usize, usize) {
    (
        if mh { w - 1 - x } else { x },
        if mv { h - 1 - y } else { y },
    )
}

fn mirror_image(img: &GrayImage, mh: bool, mv: bool) -> GrayImage {
    let (w, h) = (img.width(), img.height());
    GrayImage::from_fn(w, h, img.bit_depth(), |x, y| {
        let (sx, sy) = mirror_coords(x, y, w, h, mh, mv);
        img.get(sx, sy)
    })
    .expect("dimensions preserved")
}

fn mirror_mask(mask: &BinaryMask, mh: bool, mv: bool) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    BinaryMask::from_fn(w, h, |x, y| {
        let (sx, sy) = mirror_coords(x, y, w, h, mh, mv);
        mask.get(sx, sy)
    })
    .expect("dimensions preserved")
}

/// Min/max anchored contrast transform; errors on constant images where the
/// denominator M - m vanishes.
pub fn contrast(img: &GrayImage, alpha: f64) -> Result<GrayImage> {
    let (m, max) = img.min_max();
    if max == m {
        return Err(Error::ConstantImage);
    }
    let slope = ((1.0 - alpha) * max - (1.0 + alpha) * m) / (max - m);
    let intercept = m * (1.0 + alpha);
    GrayImage::from_fn(img.width(), img.height(), img.bit_depth(), |x, y| {
        slope * (img.get(x, y) - m) + intercept
    })
}

fn check_pairing(img: &GrayImage, mask: &BinaryMask) -> Result<()> {
    if img.width() != mask.width() || img.height() != mask.height() {
        return Err(Error::DimensionMismatch {
            left_width: img.width(),
            left_height: img.height(),
            right_width: mask.width(),
            right_height: mask.height(),
        });
    }
    Ok(())
}

/// Summed-area table over the mask for O(1) window popcounts.
struct DefectCounter {
    sums: Vec<u64>,
    width: usize,
}

impl DefectCounter {
    fn new(mask: &BinaryMask) -> Self {
        let (w, h) = (mask.width(), mask.height());
        let mut sums = vec![0u64; (w + 1) * (h + 1)];
        for y in 0..h {
            let mut row_sum = 0u64;
            for x in 0..w {
                row_sum += u64::from(mask.get(x, y));
                sums[(y + 1) * (w + 1) + (x + 1)] = sums[y * (w + 1) + (x + 1)] + row_sum;
            }
        }
        DefectCounter { sums, width: w }
    }

    fn window_count(&self, x: usize, y: usize, size: usize) -> u64 {
        let s = self.width + 1;
        self.sums[(y + size) * s + (x + size)] + self.sums[y * s + x]
            - self.sums[(y + size) * s + x]
            - self.sums[y * s + (x + size)]
    }
}

fn windows_with(
    img: &GrayImage,
    mask: &BinaryMask,
    cfg: &AugmentConfig,
    base: &Provenance,
) -> Result<Vec<PatchPair>> {
    check_pairing(img, mask)?;
    if cfg.window_size > img.width() || cfg.window_size > img.height() {
        return Err(Error::WindowTooLarge {
            window: cfg.window_size,
            width: img.width(),
            height: img.height(),
        });
    }
    let counter = DefectCounter::new(mask);
    let xs = axis_offsets(img.width(), cfg.window_size, cfg.window_shift);
    let ys = axis_offsets(img.height(), cfg.window_size, cfg.window_shift);
    let mut patches = Vec::new();
    for &oy in &ys {
        for &ox in &xs {
            if counter.window_count(ox, oy, cfg.window_size) < cfg.min_defect_pixels as u64 {
                continue;
            }
            let mut provenance = base.clone();
            provenance.offset = (ox, oy);
            patches.push(PatchPair {
                image: img.crop(ox, oy, cfg.window_size, cfg.window_size)?,
                mask: mask.crop(ox, oy, cfg.window_size, cfg.window_size)?,
                provenance,
            });
        }
    }
    Ok(patches)
}

/// Slide a square window over the pair and emit every window holding at
/// least `min_defect_pixels` defect pixels. Offsets step by `window_shift`
/// with the last window clamped to the far edge.
pub fn extract_patches(
    img: &GrayImage,
    mask: &BinaryMask,
    cfg: &AugmentConfig,
) -> Result<Vec<PatchPair>> {
    cfg.validate()?;
    windows_with(img, mask, cfg, &Provenance::source_only(""))
}

fn apply_variant(
    img: &GrayImage,
    mask: &BinaryMask,
    scale: f64,
    mirror_h: bool,
    mirror_v: bool,
    alpha: f64,
) -> Result<(GrayImage, BinaryMask)> {
    let (mut img, mut mask) = rescale(img, mask, scale)?;
    if mirror_h || mirror_v {
        img = mirror_image(&img, mirror_h, mirror_v);
        mask = mirror_mask(&mask, mirror_h, mirror_v);
    }
    // alpha = 0 is the identity by algebra; skipping it also tolerates
    // constant sources on the identity grid point.
    if alpha != 0.0 {
        img = contrast(&img, alpha)?;
    }
    Ok((img, mask))
}

/// Run the full generator pipeline over the train split of a manifest:
/// rescale -> mirror variants -> contrast variants -> sliding windows, then
/// shuffle the combined stream with the seeded permutation.
pub fn pipeline(
    manifest: &DatasetManifest,
    cfg: &AugmentConfig,
    kind: Option<DefectKind>,
) -> Result<Vec<PatchPair>> {
    cfg.validate()?;
    let entries: Vec<_> = manifest.filter(kind, Some(Split::Train)).collect();
    if entries.is_empty() {
        return Err(Error::EmptySplit {
            split: "train".into(),
        });
    }
    let mut patches = Vec::new();
    for entry in entries {
        let mask_name = entry.mask.as_ref().ok_or_else(|| {
            Error::UnlabelledTrainingImage {
                image: entry.image.clone(),
            }
        })?;
        let img = crate::core::load_image(manifest.image_path(entry))?;
        let mask = crate::core::load_mask(manifest.root.join(mask_name))?;
        patches.extend(source_patches(&entry.image, &img, &mask, cfg)?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    patches.shuffle(&mut rng);
    Ok(patches)
}

/// All augmented patches of a single source pair, unshuffled.
pub fn source_patches(
    source_id: &str,
    img: &GrayImage,
    mask: &BinaryMask,
    cfg: &AugmentConfig,
) -> Result<Vec<PatchPair>> {
    let mut patches = Vec::new();
    for &scale in &cfg.scale_grid() {
        for &(mh, mv) in &cfg.mirror.variants() {
            for &alpha in &cfg.alpha_grid() {
                let (varied_img, varied_mask) = apply_variant(img, mask, scale, mh, mv, alpha)?;
                let base = Provenance {
                    source_id: source_id.to_string(),
                    offset: (0, 0),
                    scale,
                    alpha,
                    mirror_h: mh,
                    mirror_v: mv,
                };
                patches.extend(windows_with(&varied_img, &varied_mask, cfg, &base)?);
            }
        }
    }
    Ok(patches)
}

/// A patch the pipeline would emit, identified by provenance only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPatch {
    pub provenance: Provenance,
    pub defect_pixels: usize,
}

/// The shuffled patch stream as provenance records, without materializing
/// pixel data. The plan enumerates exactly the patches [`pipeline`] emits,
/// in the same seeded order; the filter runs on transformed masks alone, so
/// planning a large corpus stays cheap. Use [`reconstruct_patch`] to
/// materialize any entry.
pub fn pipeline_plan(
    manifest: &DatasetManifest,
    cfg: &AugmentConfig,
    kind: Option<DefectKind>,
) -> Result<Vec<PlannedPatch>> {
    cfg.validate()?;
    let entries: Vec<_> = manifest.filter(kind, Some(Split::Train)).collect();
    if entries.is_empty() {
        return Err(Error::EmptySplit {
            split: "train".into(),
        });
    }
    let mut planned = Vec::new();
    for entry in entries {
        let mask_name = entry.mask.as_ref().ok_or_else(|| {
            Error::UnlabelledTrainingImage {
                image: entry.image.clone(),
            }
        })?;
        let mask = crate::core::load_mask(manifest.root.join(mask_name))?;
        let (w, h) = (mask.width(), mask.height());
        for &scale in &cfg.scale_grid() {
            let scaled_w = scale * w as f64;
            let scaled_h = scale * h as f64;
            if scaled_w < 1.0 || scaled_h < 1.0 {
                return Err(Error::DegenerateScale {
                    factor: scale,
                    width: w,
                    height: h,
                });
            }
            let scaled = mask.resample_nearest(
                scaled_w.round() as usize,
                scaled_h.round() as usize,
            )?;
            for &(mh, mv) in &cfg.mirror.variants() {
                let variant_mask = if mh || mv {
                    mirror_mask(&scaled, mh, mv)
                } else {
                    scaled.clone()
                };
                if cfg.window_size > variant_mask.width()
                    || cfg.window_size > variant_mask.height()
                {
                    return Err(Error::WindowTooLarge {
                        window: cfg.window_size,
                        width: variant_mask.width(),
                        height: variant_mask.height(),
                    });
                }
                let counter = DefectCounter::new(&variant_mask);
                let xs = axis_offsets(variant_mask.width(), cfg.window_size, cfg.window_shift);
                let ys = axis_offsets(variant_mask.height(), cfg.window_size, cfg.window_shift);
                for &alpha in &cfg.alpha_grid() {
                    for &oy in &ys {
                        for &ox in &xs {
                            let defect_pixels =
                                counter.window_count(ox, oy, cfg.window_size) as usize;
                            if defect_pixels < cfg.min_defect_pixels {
                                continue;
                            }
                            planned.push(PlannedPatch {
                                provenance: Provenance {
                                    source_id: entry.image.clone(),
                                    offset: (ox, oy),
                                    scale,
                                    alpha,
                                    mirror_h: mh,
                                    mirror_v: mv,
                                },
                                defect_pixels,
                            });
                        }
                    }
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
    planned.shuffle(&mut rng);
    Ok(planned)
}

/// Re-derive a patch from its provenance and the original source pair.
/// Reconstruction is bit-identical to the emitted patch.
pub fn reconstruct_patch(
    source_img: &GrayImage,
    source_mask: &BinaryMask,
    provenance: &Provenance,
    window_size: usize,
) -> Result<PatchPair> {
    let (img, mask) = apply_variant(
        source_img,
        source_mask,
        provenance.scale,
        provenance.mirror_h,
        provenance.mirror_v,
        provenance.alpha,
    )?;
    let (ox, oy) = provenance.offset;
    Ok(PatchPair {
        image: img.crop(ox, oy, window_size, window_size)?,
        mask: mask.crop(ox, oy, window_size, window_size)?,
        provenance: provenance.clone(),
    })
}
