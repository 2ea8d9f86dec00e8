//! Full-module inference: decompose an EL image into overlapping patches,
//! run a segmenter on each, trim the patch borders where predictions are
//! least reliable, and OR-combine the surviving votes.
//!
//! Windows overlap by shifting 10 pixels less than the patch size; a 5-pixel
//! frame of every patch prediction is discarded except where that frame lies
//! on the image boundary, which no other window covers. With these defaults
//! the surviving regions of neighboring patches abut exactly, and overlap
//! votes are merged by logical OR. Structures larger than the patch size are
//! not guaranteed detectable; that is a documented limitation of patch-wise
//! inference, not of the stitcher.

use crate::core::grid::axis_offsets;
use crate::core::{BinaryMask, GrayImage};
use crate::error::{Error, Result};
use crate::segmenter::Segmenter;

/// Default overlap between neighboring windows.
pub const DEFAULT_OVERLAP: usize = 10;
/// Default width of the discarded prediction border.
pub const DEFAULT_TRIM: usize = 5;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TilingPlan {
    pub patch_size: usize,
    pub shift: usize,
    pub trim: usize,
    /// Image dimensions the plan was laid out for.
    pub width: usize,
    pub height: usize,
    /// Window origins, row-major.
    pub offsets: Vec<(usize, usize)>,
}

/// Lay out the default plan for an image: shift = patch_size - 10, trim = 5,
/// final window per axis clamped to the far edge.
pub fn plan(width: usize, height: usize, patch_size: usize) -> Result<TilingPlan> {
    if patch_size <= DEFAULT_OVERLAP {
        return Err(Error::InvalidParam(format!(
            "patch size {patch_size} cannot accommodate a {DEFAULT_OVERLAP}px overlap"
        )));
    }
    plan_custom(
        width,
        height,
        patch_size,
        patch_size - DEFAULT_OVERLAP,
        DEFAULT_TRIM,
    )
}

/// Lay out a plan with explicit shift and trim, validating full coverage
/// after trimming.
pub fn plan_custom(
    width: usize,
    height: usize,
    patch_size: usize,
    shift: usize,
    trim: usize,
) -> Result<TilingPlan> {
    if patch_size > width || patch_size > height {
        return Err(Error::WindowTooLarge {
            window: patch_size,
            width,
            height,
        });
    }
    if shift == 0 || shift > patch_size {
        return Err(Error::InvalidParam(format!(
            "shift {shift} must satisfy 1 <= shift <= patch_size ({patch_size})"
        )));
    }
    if 2 * trim >= patch_size {
        return Err(Error::InvalidParam(format!(
            "trim {trim} leaves no interior in a {patch_size}px patch"
        )));
    }
    let xs = axis_offsets(width, patch_size, shift);
    let ys = axis_offsets(height, patch_size, shift);
    check_axis_coverage(&xs, width, patch_size, trim, 'x')?;
    check_axis_coverage(&ys, height, patch_size, trim, 'y')?;
    let mut offsets = Vec::with_capacity(xs.len() * ys.len());
    for &y in &ys {
        for &x in &xs {
            offsets.push((x, y));
        }
    }
    Ok(TilingPlan {
        patch_size,
        shift,
        trim,
        width,
        height,
        offsets,
    })
}

/// Surviving (untrimmed) span of a window along one axis: the trim is kept
/// at the image boundary, discarded elsewhere.
fn surviving_span(origin: usize, patch: usize, trim: usize, dim: usize) -> (usize, usize) {
    let lo = if origin == 0 { 0 } else { origin + trim };
    let hi = if origin + patch == dim {
        dim
    } else {
        origin + patch - trim
    };
    (lo, hi)
}

fn check_axis_coverage(
    offsets: &[usize],
    dim: usize,
    patch: usize,
    trim: usize,
    axis: char,
) -> Result<()> {
    let mut covered_until = 0usize;
    for &origin in offsets {
        let (lo, hi) = surviving_span(origin, patch, trim, dim);
        if lo > covered_until {
            return Err(Error::CoverageHole {
                axis,
                position: covered_until,
            });
        }
        covered_until = covered_until.max(hi);
    }
    if covered_until < dim {
        return Err(Error::CoverageHole {
            axis,
            position: covered_until,
        });
    }
    Ok(())
}

impl TilingPlan {
    /// Distinct origins along x, ascending.
    pub fn x_offsets(&self) -> Vec<usize> {
        let mut xs: Vec<usize> = self.offsets.iter().map(|&(x, _)| x).collect();
        xs.sort_unstable();
        xs.dedup();
        xs
    }

    /// Distinct origins along y, ascending.
    pub fn y_offsets(&self) -> Vec<usize> {
        let mut ys: Vec<usize> = self.offsets.iter().map(|&(_, y)| y).collect();
        ys.sort_unstable();
        ys.dedup();
        ys
    }

    /// Number of surviving votes each pixel receives.
    pub fn vote_counts(&self) -> Vec<u32> {
        let mut votes = vec![0u32; self.width * self.height];
        for &(ox, oy) in &self.offsets {
            let (x_lo, x_hi) = surviving_span(ox, self.patch_size, self.trim, self.width);
            let (y_lo, y_hi) = surviving_span(oy, self.patch_size, self.trim, self.height);
            for y in y_lo..y_hi {
                for x in x_lo..x_hi {
                    votes[y * self.width + x] += 1;
                }
            }
        }
        votes
    }
}

/// Segment a full image patch-by-patch and stitch the binary result.
/// Predictions are independent per patch; surviving votes are OR-combined.
pub fn segment_full(
    img: &GrayImage,
    segmenter: &dyn Segmenter,
    plan: &TilingPlan,
) -> Result<BinaryMask> {
    if img.width() != plan.width || img.height() != plan.height {
        return Err(Error::DimensionMismatch {
            left_width: img.width(),
            left_height: img.height(),
            right_width: plan.width,
            right_height: plan.height,
        });
    }
    let (w, h) = (plan.width, plan.height);
    let mut combined = vec![false; w * h];
    for &(ox, oy) in &plan.offsets {
        let patch = img.crop(ox, oy, plan.patch_size, plan.patch_size)?;
        let prediction = segmenter.predict(&patch)?;
        if prediction.width() != plan.patch_size || prediction.height() != plan.patch_size {
            return Err(Error::DimensionMismatch {
                left_width: prediction.width(),
                left_height: prediction.height(),
                right_width: plan.patch_size,
                right_height: plan.patch_size,
            });
        }
        let (x_lo, x_hi) = surviving_span(ox, plan.patch_size, plan.trim, w);
        let (y_lo, y_hi) = surviving_span(oy, plan.patch_size, plan.trim, h);
        for y in y_lo..y_hi {
            for x in x_lo..x_hi {
                if prediction.get(x - ox, y - oy) {
                    combined[y * w + x] = true;
                }
            }
        }
    }
    BinaryMask::new(w, h, combined)
}
