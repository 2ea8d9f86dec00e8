//! Segmentation-model abstraction.
//!
//! Trained networks run elsewhere; here a model is a metadata record
//! ([`ModelSpec`]) plus a prediction source behind the [`Segmenter`] trait.
//! Three sources are provided: a classical statistics-based reference
//! segmenter used to exercise the pipeline end to end, an external loader
//! that serves masks precomputed by real networks (keyed by a content hash
//! of the patch), and a trivial per-pixel thresholder used as a
//! translation-invariant probe in tests.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::core::{load_mask, BinaryMask, DefectKind, GrayImage};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Encoder {
    MobileNet,
    ResNet,
    VggNet,
    UNet,
}

impl fmt::Display for Encoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Encoder::MobileNet => "mobilenet",
            Encoder::ResNet => "resnet",
            Encoder::VggNet => "vggnet",
            Encoder::UNet => "unet",
        };
        write!(f, "{name}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decoder {
    PspNet,
    SegNet,
    UNet,
    FcnNet,
}

impl fmt::Display for Decoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Decoder::PspNet => "pspnet",
            Decoder::SegNet => "segnet",
            Decoder::UNet => "unet",
            Decoder::FcnNet => "fcnnet",
        };
        write!(f, "{name}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeConstraint {
    Fixed(u32),
    DivisibleBy(u32),
}

impl SizeConstraint {
    pub fn accepts(self, size: u32) -> bool {
        match self {
            SizeConstraint::Fixed(n) => size == n,
            SizeConstraint::DivisibleBy(n) => n > 0 && size.is_multiple_of(n),
        }
    }
}

impl fmt::Display for SizeConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SizeConstraint::Fixed(n) => write!(f, "fixed input size of {n}"),
            SizeConstraint::DivisibleBy(n) => write!(f, "input size divisible by {n}"),
        }
    }
}

/// Identity and input contract of one encoder/decoder candidate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub id: String,
    pub encoder: Encoder,
    pub decoder: Decoder,
    pub input_size: u32,
    pub size_constraint: SizeConstraint,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
    #[serde(default = "default_enabled")]
    pub enabled: bool,
}

fn default_enabled() -> bool {
    true
}

/// Input-size rule imposed by the encoder family.
pub fn encoder_constraint(encoder: Encoder) -> SizeConstraint {
    match encoder {
        Encoder::MobileNet => SizeConstraint::Fixed(224),
        // Five downsampling stages; the input must survive them evenly.
        Encoder::ResNet | Encoder::VggNet | Encoder::UNet => SizeConstraint::DivisibleBy(32),
    }
}

/// Extra input-size rule imposed by the decoder, when it has one.
pub fn decoder_constraint(decoder: Decoder) -> Option<SizeConstraint> {
    match decoder {
        Decoder::PspNet => Some(SizeConstraint::DivisibleBy(192)),
        _ => None,
    }
}

/// Encoder/decoder pairs available for combination; the U-Net encoder never
/// feeds the PSP decoder.
pub fn valid_combination(encoder: Encoder, decoder: Decoder) -> bool {
    !(encoder == Encoder::UNet && decoder == Decoder::PspNet)
}

/// Accept a spec iff its input size satisfies the declared constraint, the
/// encoder-family constraint and any decoder constraint; the error names the
/// violated rule.
pub fn validate_spec(spec: &ModelSpec) -> Result<()> {
    if !valid_combination(spec.encoder, spec.decoder) {
        return Err(Error::ModelConstraint {
            id: spec.id.clone(),
            detail: format!(
                "encoder {} cannot be combined with decoder {}",
                spec.encoder, spec.decoder
            ),
        });
    }
    if !spec.size_constraint.accepts(spec.input_size) {
        return Err(Error::ModelConstraint {
            id: spec.id.clone(),
            detail: format!(
                "input size {} violates the declared {}",
                spec.input_size, spec.size_constraint
            ),
        });
    }
    let family = encoder_constraint(spec.encoder);
    if !family.accepts(spec.input_size) {
        return Err(Error::ModelConstraint {
            id: spec.id.clone(),
            detail: format!(
                "input size {} violates the {} encoder family's {}",
                spec.input_size, spec.encoder, family
            ),
        });
    }
    if let Some(constraint) = decoder_constraint(spec.decoder) {
        if !constraint.accepts(spec.input_size) {
            return Err(Error::ModelConstraint {
                id: spec.id.clone(),
                detail: format!(
                    "input size {} violates the {} decoder's {}",
                    spec.input_size, spec.decoder, constraint
                ),
            });
        }
    }
    Ok(())
}

fn spec_entry(
    encoder: Encoder,
    decoder: Decoder,
    decoder_tag: &str,
    input_size: u32,
    sized_id: bool,
    params: BTreeMap<String, serde_json::Value>,
    enabled: bool,
) -> ModelSpec {
    let id = if sized_id {
        format!("{encoder}+{decoder_tag}@{input_size}")
    } else {
        format!("{encoder}+{decoder_tag}")
    };
    ModelSpec {
        id,
        encoder,
        decoder,
        input_size,
        size_constraint: encoder_constraint(encoder),
        params,
        enabled,
    }
}

/// The full catalogue of 34 encoder/decoder combinations with their tuning
/// parameters. The two mobilenet+psp entries are shipped disabled: their
/// fixed 224px input cannot satisfy the PSP 192-divisibility rule.
pub fn table1_models() -> Vec<ModelSpec> {
    let mut models = Vec::new();
    let sized_encoders = [Encoder::ResNet, Encoder::VggNet, Encoder::UNet];

    // FCN decoder, feature parameter 8 or 32.
    for features in [8u32, 32] {
        let tag = format!("fcn{features}");
        let params = BTreeMap::from([("features".to_string(), serde_json::json!(features))]);
        models.push(spec_entry(
            Encoder::MobileNet,
            Decoder::FcnNet,
            &tag,
            224,
            false,
            params.clone(),
            true,
        ));
        for encoder in sized_encoders {
            for size in [256u32, 512] {
                models.push(spec_entry(
                    encoder,
                    Decoder::FcnNet,
                    &tag,
                    size,
                    true,
                    params.clone(),
                    true,
                ));
            }
        }
    }

    // U-Net decoder.
    models.push(spec_entry(
        Encoder::MobileNet,
        Decoder::UNet,
        "unet",
        224,
        false,
        BTreeMap::new(),
        true,
    ));
    for encoder in sized_encoders {
        for size in [256u32, 512] {
            models.push(spec_entry(
                encoder,
                Decoder::UNet,
                "unet",
                size,
                true,
                BTreeMap::new(),
                true,
            ));
        }
    }

    // SegNet decoder with its upsampling-routine parameter.
    let segnet_params = BTreeMap::from([("upsampling".to_string(), serde_json::json!(3))]);
    models.push(spec_entry(
        Encoder::MobileNet,
        Decoder::SegNet,
        "segnet",
        224,
        false,
        segnet_params.clone(),
        true,
    ));
    for encoder in sized_encoders {
        for size in [256u32, 512] {
            models.push(spec_entry(
                encoder,
                Decoder::SegNet,
                "segnet",
                size,
                true,
                segnet_params.clone(),
                true,
            ));
        }
    }

    // PSP decoder at its two admissible sizes.
    for encoder in [Encoder::MobileNet, Encoder::ResNet, Encoder::VggNet] {
        for size in [192u32, 384] {
            let enabled = encoder != Encoder::MobileNet;
            models.push(spec_entry(
                encoder,
                Decoder::PspNet,
                "psp",
                size,
                true,
                BTreeMap::new(),
                enabled,
            ));
        }
    }

    models
}

pub fn write_models_json(path: impl AsRef<Path>, models: &[ModelSpec]) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(models).expect("model specs serialize");
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_models_json(path: impl AsRef<Path>) -> Result<Vec<ModelSpec>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// Uniform patch-in/mask-out prediction interface. Implementations are pure:
/// the same patch always yields the same mask, with identical dimensions.
pub trait Segmenter: Send + Sync {
    fn id(&self) -> &str;
    fn predict(&self, patch: &GrayImage) -> Result<BinaryMask>;
}

/// Content address of a patch: SHA-256 over dimensions and the pixel values
/// quantized to 16 bits, truncated to 32 hex characters. Stable across a
/// save/load PNG round trip.
pub fn patch_key(patch: &GrayImage) -> String {
    let mut hasher = Sha256::new();
    hasher.update((patch.width() as u32).to_le_bytes());
    hasher.update((patch.height() as u32).to_le_bytes());
    for &v in patch.data() {
        let q = v.clamp(0.0, 65535.0).round() as u16;
        hasher.update(q.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut key = String::with_capacity(32);
    for byte in &digest[..16] {
        use std::fmt::Write;
        write!(key, "{byte:02x}").expect("writing to a String cannot fail");
    }
    key
}

/// Serves masks precomputed by an external model run, laid out as
/// `<dir>/<model-id>/<patch-hash>.png`.
pub struct ExternalSegmenter {
    spec: ModelSpec,
    root: PathBuf,
}

/// Build a segmenter that looks prediction masks up by patch content hash.
pub fn external_segmenter(spec: ModelSpec, prediction_dir: impl Into<PathBuf>) -> ExternalSegmenter {
    ExternalSegmenter {
        root: prediction_dir.into(),
        spec,
    }
}

impl ExternalSegmenter {
    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Path a prediction for this patch is expected at.
    pub fn prediction_path(&self, patch: &GrayImage) -> PathBuf {
        self.root
            .join(&self.spec.id)
            .join(format!("{}.png", patch_key(patch)))
    }
}

impl Segmenter for ExternalSegmenter {
    fn id(&self) -> &str {
        &self.spec.id
    }

    fn predict(&self, patch: &GrayImage) -> Result<BinaryMask> {
        let path = self.prediction_path(patch);
        if !path.exists() {
            return Err(Error::MissingPrediction {
                key: patch_key(patch),
                path,
            });
        }
        let mask = load_mask(&path)?;
        if mask.width() != patch.width() || mask.height() != patch.height() {
            return Err(Error::DimensionMismatch {
                left_width: mask.width(),
                left_height: mask.height(),
                right_width: patch.width(),
                right_height: patch.height(),
            });
        }
        Ok(mask)
    }
}

/// Per-pixel fixed-threshold segmenter. Windowless by construction, so tiled
/// and whole-image application agree bit-exactly; used as a probe for the
/// stitching machinery.
pub struct PixelThresholdSegmenter {
    id: String,
    threshold: f64,
    flag_darker: bool,
}

impl PixelThresholdSegmenter {
    pub fn new(threshold: f64, flag_darker: bool) -> Self {
        PixelThresholdSegmenter {
            id: format!(
                "threshold-{}-{threshold}",
                if flag_darker { "dark" } else { "bright" }
            ),
            threshold,
            flag_darker,
        }
    }
}

impl Segmenter for PixelThresholdSegmenter {
    fn id(&self) -> &str {
        &self.id
    }

    fn predict(&self, patch: &GrayImage) -> Result<BinaryMask> {
        BinaryMask::new(
            patch.width(),
            patch.height(),
            patch
                .data()
                .iter()
                .map(|&v| {
                    if self.flag_darker {
                        v < self.threshold
                    } else {
                        v > self.threshold
                    }
                })
                .collect(),
        )
    }
}

/// Classical reference segmenter: flags pixels that deviate from the
/// cell-local lower median by more than `threshold_sigma` times the local
/// MAD (darker for shunts, brighter for droplets), then removes speckle
/// with a 3x3 morphological opening.
///
/// Local statistics are computed on tiles no larger than one cell pitch;
/// when no pitch is supplied it is estimated from the autocorrelation of the
/// row-mean profile, where the dark interconnect lines repeat with the cell
/// period. Tile boundaries additionally snap to intensity discontinuities of
/// the row- and column-median profiles, so interconnect/isolation lines and
/// stitch-patch offsets fall into their own tiles instead of poisoning their
/// neighbors' statistics. The profiles are medians over a full axis, which
/// keeps them insensitive to compact defects.
pub struct ReferenceSegmenter {
    id: String,
    kind: DefectKind,
    threshold_sigma: f64,
    cell_pitch: Option<usize>,
}

/// Default deviation threshold, tuned on the synthetic corpus.
pub const DEFAULT_THRESHOLD_SIGMA: f64 = 5.0;

/// Build a reference segmenter for one defect kind.
pub fn reference_segmenter(kind: DefectKind, threshold_sigma: f64) -> Result<ReferenceSegmenter> {
    if !(threshold_sigma.is_finite() && threshold_sigma > 0.0) {
        return Err(Error::InvalidParam(format!(
            "threshold_sigma {threshold_sigma} must be > 0"
        )));
    }
    Ok(ReferenceSegmenter {
        id: format!("reference-{kind}-s{threshold_sigma}"),
        kind,
        threshold_sigma,
        cell_pitch: None,
    })
}

impl ReferenceSegmenter {
    /// Use a known cell pitch instead of estimating one per patch.
    pub fn with_cell_pitch(mut self, pitch: usize) -> Self {
        self.cell_pitch = Some(pitch.max(2));
        self
    }
}

/// Lower median of a scratch buffer (sorted in place).
fn lower_median_mut(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite intensities"));
    values[(values.len() - 1) / 2]
}

/// Estimate the cell pitch from the vertical period of the row-mean profile.
fn estimate_cell_pitch(img: &GrayImage) -> usize {
    let (w, h) = (img.width(), img.height());
    let fallback = 32.min(h).min(w).max(2);
    if h < 8 {
        return fallback;
    }
    let mut profile = Vec::with_capacity(h);
    for y in 0..h {
        let row = &img.data()[y * w..(y + 1) * w];
        profile.push(row.iter().sum::<f64>() / w as f64);
    }
    let mean = profile.iter().sum::<f64>() / h as f64;
    let centered: Vec<f64> = profile.iter().map(|p| p - mean).collect();
    let r0: f64 = centered.iter().map(|c| c * c).sum();
    if r0 <= 0.0 {
        return fallback;
    }
    let mut best_lag = 0usize;
    let mut best = 0.0f64;
    for lag in 4..=h / 2 {
        let r: f64 = centered[..h - lag]
            .iter()
            .zip(&centered[lag..])
            .map(|(a, b)| a * b)
            .sum();
        if r > best {
            best = r;
            best_lag = lag;
        }
    }
    // Require a clear periodic structure before trusting the peak.
    if best_lag == 0 || best < 0.2 * r0 {
        return fallback;
    }
    best_lag
}

/// Steps of the diff profile clearly above its bulk level; 8x the median
/// absolute step separates structure from noise, and differencing makes the
/// rule invariant under affine intensity changes.
const STEP_FACTOR: f64 = 8.0;

/// Split one axis into bands: cut where the median profile jumps, then cap
/// band length at `cap`.
fn split_bands(profile: &[f64], cap: usize) -> Vec<(usize, usize)> {
    let n = profile.len();
    let cap = cap.clamp(1, n.max(1));
    let mut cuts = vec![0usize];
    if n >= 2 {
        let diffs: Vec<f64> = profile.windows(2).map(|w| w[1] - w[0]).collect();
        let mut magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
        let bulk = lower_median_mut(&mut magnitudes);
        let threshold = STEP_FACTOR * bulk;
        for (i, d) in diffs.iter().enumerate() {
            if d.abs() > threshold {
                cuts.push(i + 1);
            }
        }
    }
    cuts.push(n);
    cuts.dedup();
    let mut bands = Vec::new();
    for pair in cuts.windows(2) {
        let (mut start, end) = (pair[0], pair[1]);
        while end - start > cap {
            bands.push((start, start + cap));
            start += cap;
        }
        if end > start {
            bands.push((start, end));
        }
    }
    bands
}

fn erode3x3(mask: &[bool], w: usize, h: usize) -> Vec<bool> {
    let mut out = vec![false; w * h];
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let mut all = true;
            'scan: for dy in 0..3 {
                for dx in 0..3 {
                    if !mask[(y + dy - 1) * w + (x + dx - 1)] {
                        all = false;
                        break 'scan;
                    }
                }
            }
            out[y * w + x] = all;
        }
    }
    out
}

fn dilate3x3(mask: &[bool], w: usize, h: usize) -> Vec<bool> {
    let mut out = vec![false; w * h];
    for y in 0..h {
        for x in 0..w {
            if !mask[y * w + x] {
                continue;
            }
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                        out[ny as usize * w + nx as usize] = true;
                    }
                }
            }
        }
    }
    out
}

impl Segmenter for ReferenceSegmenter {
    fn id(&self) -> &str {
        &self.id
    }

    fn predict(&self, patch: &GrayImage) -> Result<BinaryMask> {
        let (w, h) = (patch.width(), patch.height());
        let pitch = self.cell_pitch.unwrap_or_else(|| estimate_cell_pitch(patch));
        let mut scratch: Vec<f64> = Vec::new();

        let row_profile: Vec<f64> = (0..h)
            .map(|y| {
                scratch.clear();
                scratch.extend_from_slice(&patch.data()[y * w..(y + 1) * w]);
                lower_median_mut(&mut scratch)
            })
            .collect();
        let col_profile: Vec<f64> = (0..w)
            .map(|x| {
                scratch.clear();
                scratch.extend((0..h).map(|y| patch.get(x, y)));
                lower_median_mut(&mut scratch)
            })
            .collect();
        let row_bands = split_bands(&row_profile, pitch);
        let col_bands = split_bands(&col_profile, pitch);

        let mut flagged = vec![false; w * h];
        for &(y0, y1) in &row_bands {
            for &(x0, x1) in &col_bands {
                scratch.clear();
                for y in y0..y1 {
                    for x in x0..x1 {
                        scratch.push(patch.get(x, y));
                    }
                }
                let median = lower_median_mut(&mut scratch);
                let mut deviations: Vec<f64> =
                    scratch.iter().map(|v| (v - median).abs()).collect();
                let mad = lower_median_mut(&mut deviations);
                let margin = self.threshold_sigma * mad;
                for y in y0..y1 {
                    for x in x0..x1 {
                        let v = patch.get(x, y);
                        let hit = match self.kind {
                            DefectKind::Shunt => v < median - margin,
                            DefectKind::Droplet => v > median + margin,
                        };
                        flagged[y * w + x] = hit;
                    }
                }
            }
        }

        let opened = dilate3x3(&erode3x3(&flagged, w, h), w, h);
        BinaryMask::new(w, h, opened)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::core::{save_mask, BitDepth};
    use crate::metrics::jaccard;
    use crate::synth;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn table1_has_34_models_with_unique_ids() {
        let models = table1_models();
        assert_eq!(models.len(), 34);
        let ids: std::collections::HashSet<&str> =
            models.iter().map(|m| m.id.as_str()).collect();
        assert_eq!(ids.len(), 34);
        // Every enabled model passes validation; disabled ones are the two
        // mobilenet+psp entries whose constraints cannot be met.
        for model in &models {
            if model.enabled {
                validate_spec(model).unwrap();
            } else {
                assert_eq!(model.encoder, Encoder::MobileNet);
                assert_eq!(model.decoder, Decoder::PspNet);
                assert!(validate_spec(model).is_err());
            }
        }
    }

    #[test]
    fn models_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("models.json");
        let models = table1_models();
        write_models_json(&path, &models).unwrap();
        assert_eq!(read_models_json(&path).unwrap(), models);
    }

    #[test]
    fn resnet_at_256_is_accepted() {
        let spec = ModelSpec {
            id: "resnet+unet@256".into(),
            encoder: Encoder::ResNet,
            decoder: Decoder::UNet,
            input_size: 256,
            size_constraint: SizeConstraint::DivisibleBy(32),
            params: BTreeMap::new(),
            enabled: true,
        };
        validate_spec(&spec).unwrap();
    }

    #[test]
    fn psp_decoder_rejects_256() {
        let spec = ModelSpec {
            id: "resnet+psp@256".into(),
            encoder: Encoder::ResNet,
            decoder: Decoder::PspNet,
            input_size: 256,
            size_constraint: SizeConstraint::DivisibleBy(32),
            params: BTreeMap::new(),
            enabled: true,
        };
        let err = validate_spec(&spec).unwrap_err();
        let message = err.to_string();
        assert!(message.contains("divisible by 192"), "{message}");
    }

    #[test]
    fn mobilenet_at_224_is_accepted() {
        let spec = ModelSpec {
            id: "mobilenet+fcn8".into(),
            encoder: Encoder::MobileNet,
            decoder: Decoder::FcnNet,
            input_size: 224,
            size_constraint: SizeConstraint::Fixed(224),
            params: BTreeMap::new(),
            enabled: true,
        };
        validate_spec(&spec).unwrap();
        // ... and any other size is named as a fixed-size violation.
        let wrong = ModelSpec {
            input_size: 256,
            ..spec
        };
        assert!(validate_spec(&wrong).is_err());
    }

    fn demo_render() -> (GrayImage, BinaryMask, BinaryMask, usize) {
        let spec = synth::demo_template(13, 0.0);
        let pitch = spec.geometry.cell_pitch;
        let (img, shunt_mask, droplet_mask) = synth::render(&spec).unwrap();
        (img, shunt_mask, droplet_mask, pitch)
    }

    #[test]
    fn reference_shunt_segmenter_matches_truth_on_noise_free_render() {
        let (img, truth, _, _) = demo_render();
        let seg = reference_segmenter(DefectKind::Shunt, DEFAULT_THRESHOLD_SIGMA).unwrap();
        let pred = seg.predict(&img).unwrap();
        let score = jaccard(&pred, &truth).unwrap().unwrap();
        assert!(score >= 0.7, "jaccard {score}");
    }

    #[test]
    fn reference_droplet_segmenter_matches_truth_on_noise_free_render() {
        let (img, _, truth, _) = demo_render();
        let seg = reference_segmenter(DefectKind::Droplet, DEFAULT_THRESHOLD_SIGMA).unwrap();
        let pred = seg.predict(&img).unwrap();
        let score = jaccard(&pred, &truth).unwrap().unwrap();
        assert!(score >= 0.7, "jaccard {score}");
    }

    #[test]
    fn droplet_segmenter_stays_quiet_on_pure_shunt_image() {
        let mut spec = synth::demo_template(29, 0.0);
        spec.droplets.clear();
        let (img, _, _) = synth::render(&spec).unwrap();
        let seg = reference_segmenter(DefectKind::Droplet, DEFAULT_THRESHOLD_SIGMA).unwrap();
        let pred = seg.predict(&img).unwrap();
        let total = (img.width() * img.height()) as f64;
        assert!(
            (pred.count_true() as f64) < 0.01 * total,
            "{} of {} pixels flagged",
            pred.count_true(),
            total
        );
    }

    #[test]
    fn constant_image_yields_empty_mask() {
        let img = GrayImage::constant(64, 64, 500.0, BitDepth::Sixteen).unwrap();
        for kind in [DefectKind::Shunt, DefectKind::Droplet] {
            let seg = reference_segmenter(kind, 3.0).unwrap();
            assert!(seg.predict(&img).unwrap().is_empty());
        }
    }

    #[test]
    fn reference_output_is_affine_invariant() {
        // a is a power of two and b exactly representable, so the transform
        // introduces no rounding and the masks must match exactly.
        let mut rng = ChaCha8Rng::seed_from_u64(314);
        let (w, h) = (96, 96);
        let img = GrayImage::from_fn(w, h, BitDepth::Sixteen, |_, _| {
            rng.gen_range(100.0..5000.0)
        })
        .unwrap();
        let rescaled = GrayImage::from_fn(w, h, BitDepth::Sixteen, |x, y| {
            2.0 * img.get(x, y) + 16.0
        })
        .unwrap();
        for kind in [DefectKind::Shunt, DefectKind::Droplet] {
            let seg = reference_segmenter(kind, 2.0).unwrap().with_cell_pitch(16);
            let a = seg.predict(&img).unwrap();
            let b = seg.predict(&rescaled).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn segmenters_are_deterministic_and_dimension_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let w = rng.gen_range(24..80);
            let h = rng.gen_range(24..80);
            let img = GrayImage::from_fn(w, h, BitDepth::Sixteen, |_, _| {
                rng.gen_range(0.0..1000.0)
            })
            .unwrap();
            let segs: Vec<Box<dyn Segmenter>> = vec![
                Box::new(reference_segmenter(DefectKind::Shunt, 3.0).unwrap()),
                Box::new(PixelThresholdSegmenter::new(500.0, true)),
            ];
            for seg in &segs {
                let a = seg.predict(&img).unwrap();
                let b = seg.predict(&img).unwrap();
                assert_eq!(a, b);
                assert_eq!((a.width(), a.height()), (w, h));
            }
        }
    }

    #[test]
    fn pitch_estimate_recovers_cell_period() {
        let (img, _, _, pitch) = demo_render();
        let estimated = estimate_cell_pitch(&img);
        assert!(
            estimated.is_multiple_of(pitch) || pitch.is_multiple_of(estimated),
            "estimated {estimated}, true {pitch}"
        );
    }

    #[test]
    fn external_segmenter_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let spec = table1_models()
            .into_iter()
            .find(|m| m.id == "mobilenet+fcn8")
            .unwrap();
        let patch = GrayImage::from_fn(16, 16, BitDepth::Eight, |x, y| (x + y) as f64).unwrap();
        let stored = BinaryMask::from_fn(16, 16, |x, _| x % 2 == 0).unwrap();

        let seg = external_segmenter(spec.clone(), dir.path());
        // Missing prediction first.
        match seg.predict(&patch) {
            Err(Error::MissingPrediction { key, .. }) => assert_eq!(key, patch_key(&patch)),
            other => panic!("expected MissingPrediction, got {other:?}"),
        }
        // Store it, then predict returns it verbatim.
        let path = seg.prediction_path(&patch);
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        save_mask(&stored, &path).unwrap();
        assert_eq!(seg.predict(&patch).unwrap(), stored);

        // A stored mask of the wrong size is a dimension error.
        let small = BinaryMask::empty(8, 8).unwrap();
        save_mask(&small, &path).unwrap();
        assert!(matches!(
            seg.predict(&patch),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn patch_key_is_stable_across_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let patch = GrayImage::from_fn(20, 10, BitDepth::Sixteen, |x, y| {
            (x * 700 + y * 13) as f64
        })
        .unwrap();
        let key = patch_key(&patch);
        let path = dir.path().join("p.png");
        crate::core::save_image(&patch, &path).unwrap();
        let reloaded = crate::core::load_image(&path).unwrap();
        assert_eq!(patch_key(&reloaded), key);
        assert_eq!(key.len(), 32);
    }
}
