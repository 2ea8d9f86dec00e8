//! Single-command desk-scale reproduction of the whole workflow:
//! synth -> augment -> infer (reference segmenters) -> eval -> select ->
//! heatmap, with a JSON report collecting every stage's numbers.
//!
//! Candidate "models" are reference segmenters at several deviation
//! thresholds per defect kind; selection then runs exactly as it would over
//! trained networks. With a fixed seed the run is byte-identical, including
//! every artifact written below the output directory.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use elseg::aggregate::{self, HeatScale};
use elseg::augment::{self, AugmentConfig};
use elseg::core::{load_image, load_mask, save_mask, DefectKind, Split};
use elseg::metrics::{self, MetricRow};
use elseg::segmenter::{reference_segmenter, Segmenter};
use elseg::select::{self, ModelRecord};
use elseg::synth;
use elseg::tiling;

use crate::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct E2eConfig {
    pub seed: u64,
    /// Number of synthetic modules in the corpus.
    pub modules: usize,
    /// Noise level of the synthetic renders.
    pub noise_sigma: f64,
    /// Defects per module; prototype shapes cycle when more are asked for.
    pub shunts_per_image: usize,
    pub droplets_per_image: usize,
    /// One candidate reference model per threshold, per defect kind.
    pub threshold_sigmas: Vec<f64>,
    /// Tiling patch size for full-module inference.
    pub patch_size: usize,
    /// Augmentation configuration for the patch-count stage.
    pub augment: AugmentConfig,
    /// How many materialized sample patches to write per kind.
    pub sample_patches: usize,
}

impl Default for E2eConfig {
    fn default() -> Self {
        E2eConfig {
            seed: 7,
            modules: 50,
            noise_sigma: 250.0,
            shunts_per_image: 2,
            droplets_per_image: 2,
            threshold_sigmas: vec![3.0, 5.0, 8.0],
            patch_size: 256,
            augment: AugmentConfig::default(),
            sample_patches: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub modules: usize,
    pub train: usize,
    pub test: usize,
    pub r#final: usize,
    pub image_width: usize,
    pub image_height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentSummary {
    pub kind: String,
    pub patch_count: usize,
    pub min_defect_pixels_emitted: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapSummary {
    pub file: String,
    pub legend_file: String,
    pub n_images: u64,
    pub max_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KindReport {
    pub kind: String,
    /// Absent when every candidate had only undefined medians (for example a
    /// corpus rendered without defects).
    pub selection: Option<select::Selection>,
    /// Model whose predictions feed the heat map: the selected best, or the
    /// first candidate when selection was impossible.
    pub heatmap_model: String,
    pub heatmap: HeatmapSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E2eReport {
    pub config: E2eConfig,
    pub corpus: CorpusSummary,
    pub augment: Vec<AugmentSummary>,
    pub kinds: Vec<KindReport>,
}

fn stem(name: &str) -> String {
    Path::new(name)
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| name.to_string())
}

/// Run the whole pipeline under `out_dir` and return the report (also
/// written to `out_dir/report.json`).
pub fn run_e2e(config: &E2eConfig, out_dir: &Path) -> CliResult<E2eReport> {
    if config.modules == 0 {
        return Err(CliError::validation("modules must be >= 1"));
    }
    if config.threshold_sigmas.is_empty()
        || config.threshold_sigmas.iter().any(|&s| !(s.is_finite() && s > 0.0))
    {
        return Err(CliError::validation(
            "threshold_sigmas must be non-empty and positive",
        ));
    }
    config.augment.validate()?;
    std::fs::create_dir_all(out_dir).map_err(CliError::from)?;

    // Reference copy of the model catalogue; external inference runs key
    // their prediction directories by these ids.
    elseg::segmenter::write_models_json(
        out_dir.join("models.json"),
        &elseg::segmenter::table1_models(),
    )?;

    // Stage 1: synthetic corpus with exact ground truth.
    log::info!("stage 1/6: rendering {} synthetic modules", config.modules);
    let mut template = synth::demo_template(config.seed, config.noise_sigma);
    let shunt_prototypes = std::mem::take(&mut template.shunts);
    let droplet_prototypes = std::mem::take(&mut template.droplets);
    for i in 0..config.shunts_per_image {
        template
            .shunts
            .push(shunt_prototypes[i % shunt_prototypes.len()].clone());
    }
    for i in 0..config.droplets_per_image {
        template
            .droplets
            .push(droplet_prototypes[i % droplet_prototypes.len()].clone());
    }
    let corpus_dir = out_dir.join("corpus");
    let (_items, manifest) =
        synth::render_corpus(&template, config.modules, None, &corpus_dir)?;
    let corpus = CorpusSummary {
        modules: config.modules,
        train: manifest.count(Some(DefectKind::Shunt), Some(Split::Train)),
        test: manifest.count(Some(DefectKind::Shunt), Some(Split::Test)),
        r#final: manifest.count(Some(DefectKind::Shunt), Some(Split::Final)),
        image_width: template.geometry.image_width(),
        image_height: template.geometry.image_height(),
    };

    // Stage 2: augmentation plan over the train split, per kind.
    log::info!("stage 2/6: augmentation plan");
    let mut augment_summaries = Vec::new();
    let patches_dir = out_dir.join("patches");
    std::fs::create_dir_all(&patches_dir).map_err(CliError::from)?;
    for kind in [DefectKind::Shunt, DefectKind::Droplet] {
        let plan = augment::pipeline_plan(&manifest, &config.augment, Some(kind))?;
        let mut jsonl = String::new();
        for planned in &plan {
            jsonl.push_str(&serde_json::to_string(planned).expect("planned patch serializes"));
            jsonl.push('\n');
        }
        std::fs::write(patches_dir.join(format!("{kind}_provenance.jsonl")), jsonl)
            .map_err(CliError::from)?;
        // Materialize a few sample pairs as a sanity artifact.
        for (i, planned) in plan.iter().take(config.sample_patches).enumerate() {
            let entry = manifest
                .filter(Some(kind), Some(Split::Train))
                .find(|e| e.image == planned.provenance.source_id)
                .expect("plan references a train entry");
            let img = load_image(manifest.image_path(entry))?;
            let mask = load_mask(manifest.mask_path(entry).expect("train masks exist"))?;
            let patch = augment::reconstruct_patch(
                &img,
                &mask,
                &planned.provenance,
                config.augment.window_size,
            )?;
            elseg::core::save_image(
                &patch.image,
                patches_dir.join(format!("{kind}_sample_{i}.png")),
            )?;
            save_mask(
                &patch.mask,
                patches_dir.join(format!("{kind}_sample_{i}_mask.png")),
            )?;
        }
        augment_summaries.push(AugmentSummary {
            kind: kind.to_string(),
            patch_count: plan.len(),
            min_defect_pixels_emitted: plan.iter().map(|p| p.defect_pixels).min(),
        });
    }

    // Stage 3+4: tiled inference with the candidate segmenters, then metrics.
    log::info!("stage 3/6: tiled inference over the evaluation splits");
    let cell_pitch = template.geometry.cell_pitch;
    let predictions_dir = out_dir.join("predictions");
    let mut all_rows: Vec<MetricRow> = Vec::new();
    let mut kind_model_ids: BTreeMap<DefectKind, Vec<String>> = BTreeMap::new();
    for kind in [DefectKind::Shunt, DefectKind::Droplet] {
        let eval_entries: Vec<_> = manifest
            .filter(Some(kind), None)
            .filter(|e| matches!(e.split, Split::Test | Split::Final))
            .collect();
        for &sigma in &config.threshold_sigmas {
            let segmenter =
                reference_segmenter(kind, sigma)?.with_cell_pitch(cell_pitch);
            let model_dir = predictions_dir.join(segmenter.id());
            std::fs::create_dir_all(&model_dir).map_err(CliError::from)?;
            let rows: Vec<(String, elseg::core::BinaryMask, MetricRow)> = eval_entries
                .par_iter()
                .map(|entry| -> CliResult<(String, elseg::core::BinaryMask, MetricRow)> {
                    let image_id = stem(&entry.image);
                    let img = load_image(manifest.image_path(entry))?;
                    let truth =
                        load_mask(manifest.mask_path(entry).expect("eval entries are labelled"))?;
                    let plan = tiling::plan(img.width(), img.height(), config.patch_size)?;
                    let pred = tiling::segment_full(&img, &segmenter, &plan)?;
                    let sample = metrics::evaluate(&image_id, &pred, &truth)?;
                    let row = MetricRow::from_sample(segmenter.id(), &sample);
                    Ok((image_id, pred, row))
                })
                .collect::<CliResult<Vec<_>>>()?;
            for (image_id, pred, row) in rows {
                save_mask(&pred, model_dir.join(format!("{image_id}.png")))?;
                all_rows.push(row);
            }
            kind_model_ids
                .entry(kind)
                .or_default()
                .push(segmenter.id().to_string());
        }
    }
    log::info!("stage 4/6: metrics");
    metrics::write_metrics_csv(out_dir.join("metrics.csv"), &all_rows)?;

    // Stage 5: model selection per kind.
    log::info!("stage 5/6: model selection");
    let mut kind_reports = Vec::new();
    for kind in [DefectKind::Shunt, DefectKind::Droplet] {
        let ids = &kind_model_ids[&kind];
        let records: Vec<ModelRecord> = select::records_from_rows(&all_rows)
            .into_iter()
            .filter(|r| ids.contains(&r.id))
            .collect();
        let (scored, _excluded) = select::score_records(&records);
        let selection = if scored.is_empty() {
            None
        } else {
            Some(select::select(&records)?)
        };
        if let Some(selection) = &selection {
            std::fs::write(
                out_dir.join(format!("selection_{kind}.json")),
                serde_json::to_string_pretty(selection).expect("selection serializes"),
            )
            .map_err(CliError::from)?;
            select::plot_pareto_svg(
                &selection.models,
                &selection.frontier,
                &selection.best,
                out_dir.join(format!("pareto_{kind}.svg")),
            )?;
        }
        let heatmap_model = selection
            .as_ref()
            .map(|s| s.best.clone())
            .unwrap_or_else(|| ids[0].clone());

        // Stage 6: heat map over the chosen model's predictions.
        let best_dir = predictions_dir.join(&heatmap_model);
        let mut mask_files: Vec<_> = std::fs::read_dir(&best_dir)
            .map_err(CliError::from)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "png"))
            .collect();
        mask_files.sort();
        let masks = mask_files
            .iter()
            .map(load_mask)
            .collect::<elseg::Result<Vec<_>>>()?;
        let map = aggregate::accumulate(masks)?;
        let (hm_img, legend) = aggregate::render_heatmap(&map, HeatScale::Log, 1.0)?;
        let hm_file = format!("heatmap_{kind}.png");
        let legend_file = format!("heatmap_{kind}_legend.json");
        elseg::core::save_image(&hm_img, out_dir.join(&hm_file))?;
        std::fs::write(
            out_dir.join(&legend_file),
            serde_json::to_string_pretty(&legend).expect("legend serializes"),
        )
        .map_err(CliError::from)?;
        let max_probability = map
            .probability_map()
            .into_iter()
            .fold(0.0f64, f64::max);

        kind_reports.push(KindReport {
            kind: kind.to_string(),
            selection,
            heatmap_model,
            heatmap: HeatmapSummary {
                file: hm_file,
                legend_file,
                n_images: map.n_images,
                max_probability,
            },
        });
    }
    log::info!("stage 6/6: report");

    let report = E2eReport {
        config: config.clone(),
        corpus,
        augment: augment_summaries,
        kinds: kind_reports,
    };
    std::fs::write(
        out_dir.join("report.json"),
        serde_json::to_string_pretty(&report).expect("report serializes"),
    )
    .map_err(CliError::from)?;
    Ok(report)
}
