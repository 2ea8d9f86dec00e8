//! Synthetic thin-film EL module generator with exact ground-truth masks.
//!
//! The renderer reproduces the structures a real module image shows: cell
//! stripes separated by dark interconnect lines, submodules separated by dark
//! isolation lines, a mosaic of stitch patches with differing overall
//! intensity, dark shunt defects confined to one cell stripe, and bright
//! stain-like droplet defects. Defect fields are truncated at half of their
//! peak effect, so the rendered support of a defect *is* its ground-truth
//! mask: every masked shunt pixel is strictly darker than the defect-free
//! render, every masked droplet pixel strictly brighter.

use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::aggregate::HeatMap;
use crate::core::{
    save_image, save_mask, BinaryMask, BitDepth, DatasetManifest, DefectKind, GrayImage,
    ManifestEntry, ModuleGeometry, Orientation, Split, StitchLine,
};
use crate::error::{Error, Result};

/// Brightness of interconnect and isolation lines relative to the cell.
const LINE_DIM_FACTOR: f64 = 0.35;

/// Dark defect: radial exponential intensity decay, clipped to the cell
/// stripe that contains the center. The attenuation halves every `radius`
/// pixels and is truncated below half its peak, so the mask is the disk of
/// exactly `radius` pixels (intersected with the stripe).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShuntSpec {
    pub center: (usize, usize),
    /// Peak fraction of intensity removed at the center, in (0, 1].
    pub severity: f64,
    pub radius: f64,
}

/// Bright stain-like defect: an annulus of radius `radius` whose cross
/// section is a Gaussian of full width at half maximum `ring_width`. The
/// gain field is truncated below half its peak, so the mask is the ring
/// `|d - radius| < ring_width / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropletSpec {
    pub center: (usize, usize),
    /// Peak intensity multiplier on the ring, > 1.
    pub brightness_gain: f64,
    pub radius: f64,
    pub ring_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub geometry: ModuleGeometry,
    pub base_intensity: f64,
    /// One intensity multiplier per stitch patch, row-major over
    /// (horizontal lines + 1) x (vertical lines + 1) bands.
    pub patch_offsets: Vec<f64>,
    pub noise_sigma: f64,
    #[serde(default)]
    pub shunts: Vec<ShuntSpec>,
    #[serde(default)]
    pub droplets: Vec<DropletSpec>,
    pub seed: u64,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        let (w, h) = (self.geometry.image_width(), self.geometry.image_height());
        if !(self.base_intensity.is_finite() && self.base_intensity > 0.0) {
            return Err(Error::InvalidParam("base_intensity must be > 0".into()));
        }
        let expected = self.geometry.stitch_patch_count();
        if self.patch_offsets.len() != expected {
            return Err(Error::InvalidParam(format!(
                "expected {expected} patch offsets for the stitch grid, found {}",
                self.patch_offsets.len()
            )));
        }
        if self.patch_offsets.iter().any(|&o| !(o.is_finite() && o > 0.0)) {
            return Err(Error::InvalidParam("patch offsets must be > 0".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidParam("noise_sigma must be >= 0".into()));
        }
        for shunt in &self.shunts {
            if shunt.center.0 >= w || shunt.center.1 >= h {
                return Err(Error::DefectOutsideImage {
                    x: shunt.center.0,
                    y: shunt.center.1,
                    width: w,
                    height: h,
                });
            }
            if !(shunt.radius.is_finite() && shunt.radius > 0.0) {
                return Err(Error::InvalidParam("shunt radius must be > 0".into()));
            }
            if !(shunt.severity > 0.0 && shunt.severity <= 1.0) {
                return Err(Error::InvalidParam("shunt severity must be in (0, 1]".into()));
            }
        }
        for droplet in &self.droplets {
            if droplet.center.0 >= w || droplet.center.1 >= h {
                return Err(Error::DefectOutsideImage {
                    x: droplet.center.0,
                    y: droplet.center.1,
                    width: w,
                    height: h,
                });
            }
            if !(droplet.radius.is_finite() && droplet.radius > 0.0) {
                return Err(Error::InvalidParam("droplet radius must be > 0".into()));
            }
            if !(droplet.ring_width.is_finite() && droplet.ring_width > 0.0) {
                return Err(Error::InvalidParam("droplet ring_width must be > 0".into()));
            }
            if !(droplet.brightness_gain.is_finite() && droplet.brightness_gain > 1.0) {
                return Err(Error::InvalidParam(
                    "droplet brightness_gain must be > 1".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Render a module image together with exact shunt and droplet masks.
/// Deterministic for a fixed spec (the noise field depends only on the seed
/// and the image dimensions, never on the defects).
pub fn render(spec: &SynthSpec) -> Result<(GrayImage, BinaryMask, BinaryMask)> {
    spec.validate()?;
    let geometry = &spec.geometry;
    let (w, h) = (geometry.image_width(), geometry.image_height());

    let mut data = vec![0.0f64; w * h];
    for y in 0..h {
        let dark_row = geometry.is_interconnect_row(y);
        for x in 0..w {
            let mut v = spec.base_intensity * spec.patch_offsets[geometry.stitch_patch_index(x, y)];
            if dark_row || geometry.is_isolation_col(x) {
                v *= LINE_DIM_FACTOR;
            }
            data[y * w + x] = v;
        }
    }

    let mut shunt_mask = vec![false; w * h];
    for shunt in &spec.shunts {
        let (cx, cy) = (shunt.center.0 as f64, shunt.center.1 as f64);
        let stripe = geometry.cell_stripe_rows(geometry.cell_of_row(shunt.center.1));
        let reach = shunt.radius.ceil() as usize;
        let y_lo = stripe.start.max(shunt.center.1.saturating_sub(reach));
        let y_hi = stripe.end.min(shunt.center.1 + reach + 1).min(h);
        let x_lo = shunt.center.0.saturating_sub(reach);
        let x_hi = (shunt.center.0 + reach + 1).min(w);
        for y in y_lo..y_hi {
            for x in x_lo..x_hi {
                let d = (x as f64 - cx).hypot(y as f64 - cy);
                if d < shunt.radius {
                    let attenuation = shunt.severity * (-d / shunt.radius).exp2();
                    data[y * w + x] *= 1.0 - attenuation;
                    shunt_mask[y * w + x] = true;
                }
            }
        }
    }

    let mut droplet_mask = vec![false; w * h];
    for droplet in &spec.droplets {
        let (cx, cy) = (droplet.center.0 as f64, droplet.center.1 as f64);
        let half_ring = droplet.ring_width / 2.0;
        // FWHM = ring_width, so the half-peak cut sits exactly at half_ring.
        let sigma = droplet.ring_width / (2.0 * (2.0 * std::f64::consts::LN_2).sqrt());
        let reach = (droplet.radius + half_ring).ceil() as usize;
        let y_lo = droplet.center.1.saturating_sub(reach);
        let y_hi = (droplet.center.1 + reach + 1).min(h);
        let x_lo = droplet.center.0.saturating_sub(reach);
        let x_hi = (droplet.center.0 + reach + 1).min(w);
        for y in y_lo..y_hi {
            for x in x_lo..x_hi {
                let d = (x as f64 - cx).hypot(y as f64 - cy);
                if (d - droplet.radius).abs() < half_ring {
                    let deviation = d - droplet.radius;
                    let gain = (droplet.brightness_gain - 1.0)
                        * (-deviation * deviation / (2.0 * sigma * sigma)).exp();
                    data[y * w + x] *= 1.0 + gain;
                    droplet_mask[y * w + x] = true;
                }
            }
        }
    }

    if spec.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let normal = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::InvalidParam(format!("noise distribution: {e}")))?;
        for v in &mut data {
            *v = (*v + normal.sample(&mut rng)).max(0.0);
        }
    }

    Ok((
        GrayImage::new(w, h, data, BitDepth::Sixteen)?,
        BinaryMask::new(w, h, shunt_mask)?,
        BinaryMask::new(w, h, droplet_mask)?,
    ))
}

/// Draw a defect center, either uniformly over the image or weighted by a
/// per-pixel prior. A prior with zero total weight falls back to uniform.
pub fn sample_center(
    prior: Option<&HeatMap>,
    width: usize,
    height: usize,
    rng: &mut impl Rng,
) -> (usize, usize) {
    if let Some(map) = prior {
        let total: u64 = map.counts.iter().sum();
        if total > 0 {
            let mut target = rng.gen_range(0..total);
            let mut index = 0;
            for (i, &c) in map.counts.iter().enumerate() {
                if target < c {
                    index = i;
                    break;
                }
                target -= c;
            }
            let (px, py) = (index % map.width, index / map.width);
            // Map the prior cell onto the image grid.
            let x = ((px as f64 + 0.5) * width as f64 / map.width as f64) as usize;
            let y = ((py as f64 + 0.5) * height as f64 / map.height as f64) as usize;
            return (x.min(width - 1), y.min(height - 1));
        }
    }
    (rng.gen_range(0..width), rng.gen_range(0..height))
}

/// One generated module on disk, with the exact spec that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusItem {
    pub index: usize,
    pub split: Split,
    pub image_file: String,
    pub shunt_mask_file: String,
    pub droplet_mask_file: String,
    pub spec: SynthSpec,
}

/// Generate `count` modules from a template spec, re-drawing every defect
/// center per image (from `prior` when given, uniformly otherwise) and
/// deriving a fresh noise seed per image. Writes the image and both masks as
/// PNG files under `out_dir` plus a `manifest.json` listing every file.
///
/// Splits cycle deterministically: of every five images, three go to train,
/// one to test, one to final.
pub fn render_corpus(
    template: &SynthSpec,
    count: usize,
    prior: Option<&HeatMap>,
    out_dir: impl AsRef<Path>,
) -> Result<(Vec<CorpusItem>, DatasetManifest)> {
    if count == 0 {
        return Err(Error::InvalidParam("corpus count must be >= 1".into()));
    }
    template.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let specs = resolve_corpus_specs(template, count, prior);
    let mut items = Vec::with_capacity(count);
    let mut entries = Vec::with_capacity(count * 2);
    for (index, spec) in specs.into_iter().enumerate() {
        let (image, shunt_mask, droplet_mask) = render(&spec)?;
        let image_file = format!("module_{index:04}.png");
        let shunt_mask_file = format!("module_{index:04}_shunt.png");
        let droplet_mask_file = format!("module_{index:04}_droplet.png");
        save_image(&image, out_dir.join(&image_file))?;
        save_mask(&shunt_mask, out_dir.join(&shunt_mask_file))?;
        save_mask(&droplet_mask, out_dir.join(&droplet_mask_file))?;

        let split = match index % 5 {
            3 => Split::Test,
            4 => Split::Final,
            _ => Split::Train,
        };
        entries.push(ManifestEntry {
            image: image_file.clone(),
            mask: Some(shunt_mask_file.clone()),
            kind: DefectKind::Shunt,
            split,
        });
        entries.push(ManifestEntry {
            image: image_file.clone(),
            mask: Some(droplet_mask_file.clone()),
            kind: DefectKind::Droplet,
            split,
        });
        items.push(CorpusItem {
            index,
            split,
            image_file,
            shunt_mask_file,
            droplet_mask_file,
            spec,
        });
    }

    // On disk the root is ".", resolved against the manifest's own directory
    // at parse time, so a corpus directory is relocatable and two runs with
    // the same seed are byte-identical wherever they land.
    let portable = DatasetManifest::new(".", entries)?;
    portable.save(out_dir.join("manifest.json"))?;
    let manifest = DatasetManifest {
        root: out_dir.to_path_buf(),
        ..portable
    };
    Ok((items, manifest))
}

/// Resolve the per-image specs a corpus render will use, without rendering.
pub fn resolve_corpus_specs(
    template: &SynthSpec,
    count: usize,
    prior: Option<&HeatMap>,
) -> Vec<SynthSpec> {
    let (w, h) = (
        template.geometry.image_width(),
        template.geometry.image_height(),
    );
    let mut master = ChaCha8Rng::seed_from_u64(template.seed);
    (0..count)
        .map(|_| {
            let mut spec = template.clone();
            spec.seed = master.next_u64();
            for shunt in &mut spec.shunts {
                shunt.center = sample_center(prior, w, h, &mut master);
            }
            for droplet in &mut spec.droplets {
                droplet.center = sample_center(prior, w, h, &mut master);
            }
            spec
        })
        .collect()
}

/// Template used by tests and the demo pipeline: a small module that keeps
/// rendering fast while preserving every structural feature.
pub fn demo_template(seed: u64, noise_sigma: f64) -> SynthSpec {
    let stitch = |orientation, position| StitchLine {
        orientation,
        position,
    };
    let geometry = ModuleGeometry {
        cell_count: 20,
        submodule_count: 5,
        cell_pitch: 24,
        submodule_width: 100,
        interconnect_width: 2,
        isolation_line_width: 2,
        stitch_lines: vec![
            stitch(Orientation::Horizontal, 240),
            stitch(Orientation::Vertical, 125),
            stitch(Orientation::Vertical, 250),
            stitch(Orientation::Vertical, 375),
        ],
    };
    SynthSpec {
        geometry,
        base_intensity: 30000.0,
        patch_offsets: vec![0.90, 1.05, 0.97, 1.10, 1.02, 0.88, 1.07, 0.95],
        noise_sigma,
        shunts: vec![
            ShuntSpec {
                center: (150, 130),
                severity: 0.85,
                radius: 9.0,
            },
            ShuntSpec {
                center: (350, 300),
                severity: 0.7,
                radius: 8.0,
            },
        ],
        droplets: vec![
            DropletSpec {
                center: (100, 380),
                brightness_gain: 1.7,
                radius: 10.0,
                ring_width: 5.0,
            },
            DropletSpec {
                center: (420, 90),
                brightness_gain: 1.5,
                radius: 12.0,
                ring_width: 4.0,
            },
        ],
        seed,
    }
}
