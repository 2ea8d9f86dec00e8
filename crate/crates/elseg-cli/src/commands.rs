//! One module per concern would be overkill; each subcommand is a clap
//! `Args` struct plus a `run` function returning a [`CliResult`].

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use rayon::prelude::*;

use elseg::aggregate::{self, HeatScale};
use elseg::augment::{self, AugmentConfig};
use elseg::core::{
    load_image, load_mask, parse_manifest, save_mask, DefectKind, GrayImage, Split,
};
use elseg::metrics::{self, MetricRow};
use elseg::segmenter::{
    self, external_segmenter, patch_key, reference_segmenter, ModelSpec, Segmenter,
    DEFAULT_THRESHOLD_SIGMA,
};
use elseg::select::{self, records_from_rows};
use elseg::synth::{self, SynthSpec};
use elseg::tiling;

use crate::{CliError, CliResult};

fn parse_kind(kind: &str) -> CliResult<DefectKind> {
    match kind {
        "shunt" => Ok(DefectKind::Shunt),
        "droplet" => Ok(DefectKind::Droplet),
        other => Err(CliError::validation(format!(
            "unknown defect kind {other:?}; expected \"shunt\" or \"droplet\""
        ))),
    }
}

fn parse_split(split: &str) -> CliResult<Split> {
    match split {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        "final" => Ok(Split::Final),
        other => Err(CliError::validation(format!(
            "unknown split {other:?}; expected \"train\", \"test\" or \"final\""
        ))),
    }
}

/// PNG files of a directory, sorted by file name for determinism.
fn sorted_pngs(dir: &Path) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in std::fs::read_dir(dir)
        .with_context(|| format!("cannot list {}", dir.display()))
        .map_err(CliError::Runtime)?
    {
        let path = entry.map_err(CliError::from)?.path();
        if path.extension().is_some_and(|e| e == "png") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn file_stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Generator spec JSON; the built-in demo template when omitted.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Number of modules to generate.
    #[arg(long)]
    pub count: usize,
    /// Output directory for images, masks and manifest.json.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional defect-location prior (heat-map JSON).
    #[arg(long)]
    pub prior: Option<PathBuf>,
}

pub fn run_synth(args: &SynthArgs) -> CliResult<()> {
    if args.count == 0 {
        return Err(CliError::validation("--count must be >= 1"));
    }
    let template: SynthSpec = match &args.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read spec {}", path.display()))
                .map_err(CliError::Runtime)?;
            serde_json::from_str(&text)
                .with_context(|| format!("cannot parse spec {}", path.display()))
                .map_err(CliError::Runtime)?
        }
        None => synth::demo_template(7, 250.0),
    };
    let prior = match &args.prior {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read prior {}", path.display()))
                .map_err(CliError::Runtime)?;
            Some(
                serde_json::from_str(&text)
                    .with_context(|| format!("cannot parse prior {}", path.display()))
                    .map_err(CliError::Runtime)?,
            )
        }
        None => None,
    };
    let (items, _manifest) = synth::render_corpus(&template, args.count, prior.as_ref(), &args.out)?;
    // Record the template actually used, so a demo run is reproducible.
    let spec_path = args.out.join("spec.json");
    std::fs::write(
        &spec_path,
        serde_json::to_string_pretty(&template).expect("spec serializes"),
    )
    .map_err(CliError::from)?;
    log::info!(
        "generated {} modules under {}",
        items.len(),
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// augment
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct AugmentArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Augmentation config JSON; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory for patch PNG pairs and provenance.jsonl.
    #[arg(long)]
    pub out: PathBuf,
    /// Restrict to one defect kind.
    #[arg(long)]
    pub kind: Option<String>,
}

/// One line of provenance.jsonl.
#[derive(Debug, serde::Serialize)]
struct ProvenanceLine<'a> {
    index: usize,
    image: String,
    mask: String,
    source: &'a str,
    offset: (usize, usize),
    scale: f64,
    alpha: f64,
    mirror_h: bool,
    mirror_v: bool,
    defect_pixels: usize,
    patch_hash: String,
}

pub fn run_augment(args: &AugmentArgs) -> CliResult<()> {
    let kind = args.kind.as_deref().map(parse_kind).transpose()?;
    let cfg: AugmentConfig = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))
                .map_err(CliError::Runtime)?;
            serde_json::from_str(&text)
                .with_context(|| format!("cannot parse config {}", path.display()))
                .map_err(CliError::Runtime)?
        }
        None => AugmentConfig::default(),
    };
    cfg.validate()?;
    let manifest = parse_manifest(&args.manifest)?;
    std::fs::create_dir_all(&args.out).map_err(CliError::from)?;

    let plan = augment::pipeline_plan(&manifest, &cfg, kind)?;

    // Group the shuffled plan by source variant so each transformed image is
    // materialized exactly once, then write every patch under its shuffled
    // index.
    let mut by_variant: BTreeMap<(String, u64, bool, bool, u64), Vec<usize>> = BTreeMap::new();
    for (index, planned) in plan.iter().enumerate() {
        let p = &planned.provenance;
        by_variant
            .entry((
                p.source_id.clone(),
                p.scale.to_bits(),
                p.mirror_h,
                p.mirror_v,
                p.alpha.to_bits(),
            ))
            .or_default()
            .push(index);
    }

    let mut lines: Vec<Option<String>> = vec![None; plan.len()];
    let mut current_source: Option<(String, GrayImage, elseg::core::BinaryMask)> = None;
    for ((source_id, _, _, _, _), indices) in &by_variant {
        if current_source.as_ref().map(|(id, _, _)| id) != Some(source_id) {
            let entry = manifest
                .entries
                .iter()
                .find(|e| &e.image == source_id && e.mask.is_some())
                .ok_or_else(|| {
                    CliError::Runtime(anyhow::anyhow!("source {source_id} vanished from manifest"))
                })?;
            let img = load_image(manifest.image_path(entry))?;
            let mask = load_mask(manifest.mask_path(entry).expect("mask presence checked"))?;
            current_source = Some((source_id.clone(), img, mask));
        }
        let (_, source_img, source_mask) = current_source.as_ref().expect("just set");
        for &index in indices {
            let planned = &plan[index];
            let patch = augment::reconstruct_patch(
                source_img,
                source_mask,
                &planned.provenance,
                cfg.window_size,
            )?;
            let image_name = format!("patch_{index:06}.png");
            let mask_name = format!("patch_{index:06}_mask.png");
            elseg::core::save_image(&patch.image, args.out.join(&image_name))?;
            save_mask(&patch.mask, args.out.join(&mask_name))?;
            let line = ProvenanceLine {
                index,
                image: image_name,
                mask: mask_name,
                source: &planned.provenance.source_id,
                offset: planned.provenance.offset,
                scale: planned.provenance.scale,
                alpha: planned.provenance.alpha,
                mirror_h: planned.provenance.mirror_h,
                mirror_v: planned.provenance.mirror_v,
                defect_pixels: planned.defect_pixels,
                patch_hash: patch_key(&patch.image),
            };
            lines[index] = Some(serde_json::to_string(&line).expect("line serializes"));
        }
    }

    let mut jsonl = String::new();
    for line in lines.into_iter().flatten() {
        jsonl.push_str(&line);
        jsonl.push('\n');
    }
    std::fs::write(args.out.join("provenance.jsonl"), jsonl).map_err(CliError::from)?;
    log::info!("wrote {} patch pairs to {}", plan.len(), args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// infer
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct InferArgs {
    /// Full-module EL image (PNG).
    #[arg(long)]
    pub image: PathBuf,
    /// Model id from the model catalogue (external predictions).
    #[arg(long, conflicts_with = "reference")]
    pub model: Option<String>,
    /// Directory of stored predictions, laid out <dir>/<model-id>/<hash>.png.
    #[arg(long, requires = "model")]
    pub predictions: Option<PathBuf>,
    /// Model catalogue JSON; "builtin" for the built-in table.
    #[arg(long, default_value = "builtin")]
    pub models: String,
    /// Use the classical reference segmenter for this defect kind.
    #[arg(long)]
    pub reference: Option<String>,
    /// Deviation threshold of the reference segmenter, in MADs.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD_SIGMA)]
    pub threshold_sigma: f64,
    /// Patch size when using the reference segmenter.
    #[arg(long, default_value_t = 256)]
    pub patch_size: usize,
    /// Write every tile this inference needs as <hash>.png into a directory
    /// (to hand to an external inference run), then continue.
    #[arg(long)]
    pub dump_patches: Option<PathBuf>,
    /// Output mask PNG.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn load_model_catalogue(source: &str) -> CliResult<Vec<ModelSpec>> {
    if source == "builtin" {
        return Ok(segmenter::table1_models());
    }
    Ok(segmenter::read_models_json(source)?)
}

pub fn run_infer(args: &InferArgs) -> CliResult<()> {
    if args.threshold_sigma <= 0.0 {
        return Err(CliError::validation("--threshold-sigma must be > 0"));
    }
    let (seg, patch_size): (Box<dyn Segmenter>, usize) = match (&args.reference, &args.model) {
        (Some(kind), None) => {
            let kind = parse_kind(kind)?;
            if args.patch_size <= 10 {
                return Err(CliError::validation("--patch-size must exceed the 10px overlap"));
            }
            (
                Box::new(reference_segmenter(kind, args.threshold_sigma)?),
                args.patch_size,
            )
        }
        (None, Some(id)) => {
            let catalogue = load_model_catalogue(&args.models)?;
            let spec = catalogue
                .into_iter()
                .find(|m| &m.id == id)
                .ok_or_else(|| {
                    CliError::Runtime(anyhow::anyhow!("model {id:?} not in the catalogue"))
                })?;
            segmenter::validate_spec(&spec)?;
            let dir = args.predictions.as_ref().ok_or_else(|| {
                CliError::validation("--model needs --predictions (or use --reference)")
            })?;
            let size = spec.input_size as usize;
            (Box::new(external_segmenter(spec, dir)), size)
        }
        (None, None) => {
            return Err(CliError::validation(
                "choose a prediction source: --reference <kind> or --model <id>",
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap conflicts_with"),
    };

    let img = load_image(&args.image)?;
    let plan = tiling::plan(img.width(), img.height(), patch_size)?;

    if let Some(dump_dir) = &args.dump_patches {
        std::fs::create_dir_all(dump_dir).map_err(CliError::from)?;
        for &(ox, oy) in &plan.offsets {
            let patch = img.crop(ox, oy, plan.patch_size, plan.patch_size)?;
            elseg::core::save_image(
                &patch,
                dump_dir.join(format!("{}.png", patch_key(&patch))),
            )?;
        }
        log::info!(
            "dumped {} tiles to {}",
            plan.offsets.len(),
            dump_dir.display()
        );
    }

    let mask = tiling::segment_full(&img, seg.as_ref(), &plan)?;
    save_mask(&mask, &args.out)?;
    log::info!(
        "{}: {} defect pixels -> {}",
        seg.id(),
        mask.count_true(),
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory of predicted full-module masks named <image-stem>.png.
    #[arg(long)]
    pub pred: PathBuf,
    /// Output metrics CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Model id recorded in the CSV rows.
    #[arg(long, default_value = "external")]
    pub model_id: String,
    /// Restrict to one defect kind.
    #[arg(long)]
    pub kind: Option<String>,
    /// Restrict to one split; all labelled entries when omitted.
    #[arg(long)]
    pub split: Option<String>,
}

pub fn run_eval(args: &EvalArgs) -> CliResult<()> {
    let kind = args.kind.as_deref().map(parse_kind).transpose()?;
    let split = args.split.as_deref().map(parse_split).transpose()?;
    let manifest = parse_manifest(&args.manifest)?;
    let entries: Vec<_> = manifest
        .filter(kind, split)
        .filter(|e| e.mask.is_some())
        .collect();
    if entries.is_empty() {
        return Err(CliError::Runtime(anyhow::anyhow!(
            "manifest {} has no labelled entries matching the filters",
            args.manifest.display()
        )));
    }
    let rows: Vec<MetricRow> = entries
        .par_iter()
        .map(|entry| -> CliResult<MetricRow> {
            let stem = file_stem(Path::new(&entry.image));
            let truth = load_mask(manifest.mask_path(entry).expect("filtered on mask"))?;
            let pred_path = args.pred.join(format!("{stem}.png"));
            let pred = load_mask(&pred_path)?;
            let sample = metrics::evaluate(&stem, &pred, &truth)?;
            Ok(MetricRow::from_sample(&args.model_id, &sample))
        })
        .collect::<CliResult<Vec<_>>>()?;
    metrics::write_metrics_csv(&args.out, &rows)?;
    log::info!("evaluated {} images -> {}", rows.len(), args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// baseline
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// Directory with the first annotation round (mask PNGs).
    #[arg(long)]
    pub first: PathBuf,
    /// Directory with the second annotation round; file names must match.
    #[arg(long)]
    pub second: PathBuf,
    /// Output baseline JSON.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_baseline(args: &BaselineArgs) -> CliResult<()> {
    let mut pairs = Vec::new();
    for first_path in sorted_pngs(&args.first)? {
        let name = first_path.file_name().expect("png file has a name");
        let second_path = args.second.join(name);
        if !second_path.exists() {
            return Err(CliError::Runtime(anyhow::anyhow!(
                "no second annotation for {}",
                first_path.display()
            )));
        }
        pairs.push((load_mask(&first_path)?, load_mask(&second_path)?));
    }
    let baseline = metrics::estimate_baseline(&pairs)?;
    std::fs::write(
        &args.out,
        serde_json::to_string_pretty(&baseline).expect("baseline serializes"),
    )
    .map_err(CliError::from)?;
    log::info!(
        "baseline over {} pairs: precision {:.3}, recall {:.3}, jaccard {:.3}",
        pairs.len(),
        baseline.precision,
        baseline.recall,
        baseline.jaccard
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Metrics CSV produced by eval.
    #[arg(long)]
    pub metrics: PathBuf,
    /// Output selection JSON.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional scatter plot of the medians with the frontier polyline.
    #[arg(long)]
    pub plot: Option<PathBuf>,
    /// Optional baseline JSON; when given, samples are normalized before
    /// medians are taken.
    #[arg(long)]
    pub baseline: Option<PathBuf>,
    /// Model catalogue used to attach specs to records ("builtin" or a
    /// models.json path); "none" to skip.
    #[arg(long, default_value = "none")]
    pub models: String,
}

pub fn run_select(args: &SelectArgs) -> CliResult<()> {
    let rows = metrics::read_metrics_csv(&args.metrics)?;
    let mut records = records_from_rows(&rows);
    if records.is_empty() {
        return Err(CliError::Runtime(anyhow::anyhow!(
            "{} holds no metric rows",
            args.metrics.display()
        )));
    }
    if let Some(path) = &args.baseline {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read baseline {}", path.display()))
            .map_err(CliError::Runtime)?;
        let baseline: metrics::Baseline = serde_json::from_str(&text)
            .with_context(|| format!("cannot parse baseline {}", path.display()))
            .map_err(CliError::Runtime)?;
        for record in &mut records {
            record.samples = record
                .samples
                .iter()
                .map(|s| metrics::normalize(s, &baseline))
                .collect::<elseg::Result<Vec<_>>>()?;
        }
    }
    if args.models != "none" {
        let catalogue = load_model_catalogue(&args.models)?;
        for record in &mut records {
            record.spec = catalogue.iter().find(|m| m.id == record.id).cloned();
        }
    }
    let selection = select::select(&records)?;
    std::fs::write(
        &args.out,
        serde_json::to_string_pretty(&selection).expect("selection serializes"),
    )
    .map_err(CliError::from)?;
    if let Some(plot) = &args.plot {
        select::plot_pareto_svg(&selection.models, &selection.frontier, &selection.best, plot)?;
    }
    log::info!(
        "frontier of {} models, best {}",
        selection.frontier.len(),
        selection.best
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// heatmap
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct HeatmapArgs {
    /// Directory of binary mask PNGs to accumulate.
    #[arg(long)]
    pub masks: PathBuf,
    /// Rendering scale: linear or log.
    #[arg(long, default_value = "log")]
    pub scale: String,
    /// Percentile of brightest observations rendered as full white.
    #[arg(long, default_value_t = 1.0)]
    pub clip: f64,
    /// Output heat-map PNG.
    #[arg(long)]
    pub out: PathBuf,
    /// Output legend JSON (pixel value -> probability mapping).
    #[arg(long)]
    pub legend: PathBuf,
    /// Also write the raw accumulator (counts JSON) here.
    #[arg(long)]
    pub counts: Option<PathBuf>,
}

pub fn run_heatmap(args: &HeatmapArgs) -> CliResult<()> {
    let scale = match args.scale.as_str() {
        "linear" => HeatScale::Linear,
        "log" => HeatScale::Log,
        other => {
            return Err(CliError::validation(format!(
                "unknown scale {other:?}; expected \"linear\" or \"log\""
            )))
        }
    };
    if !(0.0..100.0).contains(&args.clip) {
        return Err(CliError::validation("--clip must lie in [0, 100)"));
    }
    let files = sorted_pngs(&args.masks)?;
    let masks = files
        .par_iter()
        .map(|p| load_mask(p).map_err(CliError::from))
        .collect::<CliResult<Vec<_>>>()?;
    let map = aggregate::accumulate(masks)?;
    let (img, legend) = aggregate::render_heatmap(&map, scale, args.clip)?;
    elseg::core::save_image(&img, &args.out)?;
    std::fs::write(
        &args.legend,
        serde_json::to_string_pretty(&legend).expect("legend serializes"),
    )
    .map_err(CliError::from)?;
    if let Some(counts) = &args.counts {
        std::fs::write(
            counts,
            serde_json::to_string(&map).expect("heat map serializes"),
        )
        .map_err(CliError::from)?;
    }
    log::info!(
        "accumulated {} masks; white at probability >= {:.5}",
        map.n_images,
        legend.threshold_probability
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// correlate
// ---------------------------------------------------------------------------

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    /// Directory of binary mask PNGs; defect counts are connected
    /// components per mask.
    #[arg(long)]
    pub masks: PathBuf,
    /// Performance CSV with image_id and isc_slope columns.
    #[arg(long)]
    pub performance: PathBuf,
    /// Performance column to correlate against.
    #[arg(long, default_value = "isc_slope")]
    pub key: String,
    /// Output scatter CSV.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_correlate(args: &CorrelateArgs) -> CliResult<()> {
    let files = sorted_pngs(&args.masks)?;
    let counts = files
        .par_iter()
        .map(|path| -> CliResult<(String, f64)> {
            let mask = load_mask(path)?;
            let components =
                metrics::label_components(&mask, metrics::DEFAULT_CONNECTIVITY);
            Ok((file_stem(path), components.count as f64))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let perf = aggregate::read_performance_csv(&args.performance)?;
    let (r, rows) = aggregate::correlate(&counts, &perf, &args.key)?;
    aggregate::write_scatter_csv(&args.out, &rows)?;
    println!(
        "{}",
        serde_json::json!({ "pearson_r": r, "joined": rows.len(), "key": args.key })
    );
    Ok(())
}
