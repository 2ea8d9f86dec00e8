//! Segmentation quality metrics.
//!
//! Two families of metrics are computed on (prediction, ground truth) mask
//! pairs: the pixel-level Jaccard index |A∩B| / |A∪B|, and component-level
//! precision/recall derived from the component instance function
//!
//! ```text
//! I(A, B) = |{ x ∈ K(B) : ∃ y ∈ K(A∩B), y ∩ x ≠ ∅ }| / |K(B)|
//! ```
//!
//! where K(·) labels connected components. With prediction P and truth T,
//! `I(T, P)` is a precision index (fraction of predicted components that
//! touch the truth) and `I(P, T)` a recall index (fraction of truth
//! components that were found). A metric is undefined when its denominator
//! is empty; undefined values are carried as `None` and excluded from
//! medians rather than coerced.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::core::{BinaryMask, ComponentSet, Connectivity};
use crate::error::{Error, Result};

/// Connectivity used wherever the caller does not choose one; 8-connectivity
/// avoids splitting thin diagonal defect traces.
pub const DEFAULT_CONNECTIVITY: Connectivity = Connectivity::Eight;

/// Two-pass connected-component labelling with union-find.
///
/// Labels are contiguous `1..=count` in raster order of each component's
/// first pixel, which makes the output deterministic.
pub fn label_components(mask: &BinaryMask, connectivity: Connectivity) -> ComponentSet {
    let (w, h) = (mask.width(), mask.height());
    let data = mask.data();
    let mut provisional = vec![0u32; w * h];
    let mut parent: Vec<u32> = Vec::new();

    fn find(parent: &mut [u32], mut i: u32) -> u32 {
        while parent[i as usize] != i {
            parent[i as usize] = parent[parent[i as usize] as usize];
            i = parent[i as usize];
        }
        i
    }

    fn union(parent: &mut [u32], a: u32, b: u32) {
        let ra = find(parent, a);
        let rb = find(parent, b);
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            parent[hi as usize] = lo;
        }
    }

    // Pass 1: provisional labels, merging over already-visited neighbors.
    for y in 0..h {
        for x in 0..w {
            let idx = y * w + x;
            if !data[idx] {
                continue;
            }
            let mut neighbors = [0u32; 4];
            let mut n = 0;
            if x > 0 && data[idx - 1] {
                neighbors[n] = provisional[idx - 1];
                n += 1;
            }
            if y > 0 {
                let up = idx - w;
                if data[up] {
                    neighbors[n] = provisional[up];
                    n += 1;
                }
                if connectivity == Connectivity::Eight {
                    if x > 0 && data[up - 1] {
                        neighbors[n] = provisional[up - 1];
                        n += 1;
                    }
                    if x + 1 < w && data[up + 1] {
                        neighbors[n] = provisional[up + 1];
                        n += 1;
                    }
                }
            }
            if n == 0 {
                let label = parent.len() as u32;
                parent.push(label);
                provisional[idx] = label + 1;
            } else {
                let first = neighbors[0] - 1;
                for &other in &neighbors[1..n] {
                    union(&mut parent, first, other - 1);
                }
                provisional[idx] = find(&mut parent, first) + 1;
            }
        }
    }

    // Pass 2: map roots to contiguous labels in raster order of first pixel.
    let mut root_to_label = vec![0u32; parent.len()];
    let mut labels = vec![0u32; w * h];
    let mut count = 0u32;
    for idx in 0..w * h {
        if provisional[idx] == 0 {
            continue;
        }
        let root = find(&mut parent, provisional[idx] - 1) as usize;
        if root_to_label[root] == 0 {
            count += 1;
            root_to_label[root] = count;
        }
        labels[idx] = root_to_label[root];
    }

    ComponentSet {
        labels,
        count: count as usize,
        connectivity,
        width: w,
        height: h,
    }
}

fn check_dims(a: &BinaryMask, b: &BinaryMask) -> Result<()> {
    if !a.same_dims(b) {
        return Err(Error::DimensionMismatch {
            left_width: a.width(),
            left_height: a.height(),
            right_width: b.width(),
            right_height: b.height(),
        });
    }
    Ok(())
}

/// Jaccard index |A∩B| / |A∪B|; `None` when both masks are empty.
pub fn jaccard(a: &BinaryMask, b: &BinaryMask) -> Result<Option<f64>> {
    check_dims(a, b)?;
    let mut intersection = 0usize;
    let mut union = 0usize;
    for (&pa, &pb) in a.data().iter().zip(b.data()) {
        if pa && pb {
            intersection += 1;
        }
        if pa || pb {
            union += 1;
        }
    }
    if union == 0 {
        return Ok(None);
    }
    Ok(Some(intersection as f64 / union as f64))
}

/// Component instance function I(a, b): the fraction of connected components
/// of `b` intersected by some component of `a ∩ b`; `None` when `b` has no
/// components.
pub fn instance(a: &BinaryMask, b: &BinaryMask, connectivity: Connectivity) -> Result<Option<f64>> {
    check_dims(a, b)?;
    let components = label_components(b, connectivity);
    if components.count == 0 {
        return Ok(None);
    }
    // A component of b is hit exactly when it contains a pixel of a∩b: every
    // pixel of a∩b lies in exactly one component of b, so the component
    // structure of the intersection cannot add or remove hits.
    let mut hit = vec![false; components.count + 1];
    for (idx, (&pa, &pb)) in a.data().iter().zip(b.data()).enumerate() {
        if pa && pb {
            hit[components.labels[idx] as usize] = true;
        }
    }
    let hits = hit[1..].iter().filter(|&&h| h).count();
    Ok(Some(hits as f64 / components.count as f64))
}

/// Per-image metric record. `None` marks an undefined value (empty
/// denominator), kept distinct from zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSample {
    pub image_id: String,
    pub jaccard: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

/// Evaluate a prediction against ground truth with the default connectivity.
pub fn evaluate(image_id: &str, pred: &BinaryMask, truth: &BinaryMask) -> Result<MetricSample> {
    evaluate_with(image_id, pred, truth, DEFAULT_CONNECTIVITY)
}

pub fn evaluate_with(
    image_id: &str,
    pred: &BinaryMask,
    truth: &BinaryMask,
    connectivity: Connectivity,
) -> Result<MetricSample> {
    Ok(MetricSample {
        image_id: image_id.to_string(),
        jaccard: jaccard(pred, truth)?,
        precision: instance(truth, pred, connectivity)?,
        recall: instance(pred, truth, connectivity)?,
    })
}

/// Metric levels reached when the same annotator segments the same images
/// twice; the practical ceiling for any model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub precision: f64,
    pub recall: f64,
    pub jaccard: f64,
}

/// Lower median: the element at index (n-1)/2 of the sorted sample, so the
/// result is always a realized value.
pub fn lower_median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|x, y| x.partial_cmp(y).expect("metric values are finite"));
    Some(sorted[(sorted.len() - 1) / 2])
}

/// Estimate the double-annotation baseline: each pair is scored with the
/// first annotation as truth and the second as prediction, and the baseline
/// is the per-metric median over pairs (undefined samples excluded).
pub fn estimate_baseline(pairs: &[(BinaryMask, BinaryMask)]) -> Result<Baseline> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput {
            operation: "estimate_baseline",
        });
    }
    let mut jaccards = Vec::new();
    let mut precisions = Vec::new();
    let mut recalls = Vec::new();
    for (idx, (truth, pred)) in pairs.iter().enumerate() {
        let sample = evaluate(&format!("pair_{idx}"), pred, truth)?;
        if let Some(j) = sample.jaccard {
            jaccards.push(j);
        }
        if let Some(p) = sample.precision {
            precisions.push(p);
        }
        if let Some(r) = sample.recall {
            recalls.push(r);
        }
    }
    Ok(Baseline {
        precision: lower_median(&precisions).ok_or(Error::NoDefinedSamples {
            metric: "precision",
        })?,
        recall: lower_median(&recalls).ok_or(Error::NoDefinedSamples { metric: "recall" })?,
        jaccard: lower_median(&jaccards).ok_or(Error::NoDefinedSamples { metric: "jaccard" })?,
    })
}

/// Divide each defined metric by its baseline, clamped to [0, 1]; undefined
/// values stay undefined.
pub fn normalize(sample: &MetricSample, base: &Baseline) -> Result<MetricSample> {
    for (metric, value) in [
        ("precision", base.precision),
        ("recall", base.recall),
        ("jaccard", base.jaccard),
    ] {
        if value <= 0.0 {
            return Err(Error::ZeroBaseline { metric });
        }
    }
    let scale = |v: Option<f64>, b: f64| v.map(|v| (v / b).clamp(0.0, 1.0));
    Ok(MetricSample {
        image_id: sample.image_id.clone(),
        jaccard: scale(sample.jaccard, base.jaccard),
        precision: scale(sample.precision, base.precision),
        recall: scale(sample.recall, base.recall),
    })
}

/// One row of the metrics CSV: `image_id, model_id, jaccard, precision,
/// recall`, with empty cells for undefined values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub image_id: String,
    pub model_id: String,
    pub jaccard: Option<f64>,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

impl MetricRow {
    pub fn from_sample(model_id: &str, sample: &MetricSample) -> Self {
        MetricRow {
            image_id: sample.image_id.clone(),
            model_id: model_id.to_string(),
            jaccard: sample.jaccard,
            precision: sample.precision,
            recall: sample.recall,
        }
    }

    pub fn to_sample(&self) -> MetricSample {
        MetricSample {
            image_id: self.image_id.clone(),
            jaccard: self.jaccard,
            precision: self.precision,
            recall: self.recall,
        }
    }
}

pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[MetricRow]) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    for row in rows {
        writer.serialize(row).map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricRow>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let mut rows = Vec::new();
    for row in reader.deserialize() {
        rows.push(row.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?);
    }
    Ok(rows)
}


#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng as _, SeedableRng as _};
    use rand_chacha::ChaCha8Rng;

    fn mask_from_str(rows: &[&str]) -> BinaryMask {
        let h = rows.len();
        let w = rows[0].len();
        let data = rows
            .iter()
            .flat_map(|r| r.chars().map(|c| c == '#'))
            .collect();
        BinaryMask::new(w, h, data).unwrap()
    }

    fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, fill: f64) -> BinaryMask {
        BinaryMask::new(w, h, (0..w * h).map(|_| rng.gen_bool(fill)).collect()).unwrap()
    }

    #[test]
    fn empty_mask_has_no_components() {
        let mask = BinaryMask::empty(8, 8).unwrap();
        assert_eq!(label_components(&mask, Connectivity::Eight).count, 0);
        assert_eq!(label_components(&mask, Connectivity::Four).count, 0);
    }

    #[test]
    fn diagonal_pixels_depend_on_connectivity() {
        let mask = mask_from_str(&["#.", ".#"]);
        assert_eq!(label_components(&mask, Connectivity::Eight).count, 1);
        assert_eq!(label_components(&mask, Connectivity::Four).count, 2);
    }

    #[test]
    fn full_mask_is_one_component() {
        let mask = mask_from_str(&["###", "###"]);
        let c = label_components(&mask, Connectivity::Four);
        assert_eq!(c.count, 1);
        assert!(c.labels.iter().all(|&l| l == 1));
    }

    #[test]
    fn labels_are_raster_ordered() {
        let mask = mask_from_str(&["#.#", "...", "#.#"]);
        let c = label_components(&mask, Connectivity::Four);
        assert_eq!(c.count, 4);
        assert_eq!(c.label(0, 0), 1);
        assert_eq!(c.label(2, 0), 2);
        assert_eq!(c.label(0, 2), 3);
        assert_eq!(c.label(2, 2), 4);
    }

    #[test]
    fn u_shape_merges_into_one_component() {
        // The two arms meet only at the bottom; union-find must merge the
        // provisional labels.
        let mask = mask_from_str(&["#.#", "#.#", "###"]);
        assert_eq!(label_components(&mask, Connectivity::Four).count, 1);
    }

    #[test]
    fn labelling_matches_flood_fill_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for connectivity in [Connectivity::Four, Connectivity::Eight] {
            for _ in 0..200 {
                let mask = random_mask(&mut rng, 64, 64, 0.45);
                let ours = label_components(&mask, connectivity);
                let reference = oracle::flood_fill_components(&mask, connectivity);
                assert_eq!(ours.count, reference.count);
                assert_eq!(ours.labels, reference.labels);
            }
        }
    }

    #[test]
    fn jaccard_identity_and_disjoint() {
        let a = mask_from_str(&["##.", ".#."]);
        assert_eq!(jaccard(&a, &a).unwrap(), Some(1.0));
        let b = mask_from_str(&["..#", "..."]);
        assert_eq!(jaccard(&a, &b).unwrap(), Some(0.0));
        let empty = BinaryMask::empty(3, 2).unwrap();
        assert_eq!(jaccard(&empty, &empty).unwrap(), None);
    }

    #[test]
    fn jaccard_of_shifted_block_is_half() {
        // 3x3 block vs the same block shifted one column: 6 / 12.
        let a = BinaryMask::from_fn(5, 3, |x, _| x < 3).unwrap();
        let b = BinaryMask::from_fn(5, 3, |x, _| (1..4).contains(&x)).unwrap();
        assert_eq!(jaccard(&a, &b).unwrap(), Some(0.5));
    }

    #[test]
    fn jaccard_dimension_mismatch() {
        let a = BinaryMask::empty(2, 2).unwrap();
        let b = BinaryMask::empty(3, 2).unwrap();
        assert!(matches!(jaccard(&a, &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn instance_self_is_one() {
        let a = mask_from_str(&["#..#", "....", "#..#"]);
        assert_eq!(instance(&a, &a, Connectivity::Eight).unwrap(), Some(1.0));
    }

    #[test]
    fn instance_counts_hit_components() {
        let b = mask_from_str(&["#..#", "....", "...."]);
        let a = mask_from_str(&["#...", "....", "...."]);
        assert_eq!(instance(&a, &b, Connectivity::Eight).unwrap(), Some(0.5));
    }

    #[test]
    fn instance_undefined_on_empty_denominator() {
        let a = mask_from_str(&["##", ".."]);
        let empty = BinaryMask::empty(2, 2).unwrap();
        assert_eq!(instance(&a, &empty, Connectivity::Eight).unwrap(), None);
    }

    #[test]
    fn instance_is_not_symmetric() {
        // a: one blob covering both of b's blobs partially; I(a,b) = 1 while
        // I(b,a) = 1... use a witness where the values differ.
        let a = mask_from_str(&["##.##", ".....", "....."]);
        let b = mask_from_str(&["#....", ".....", "....."]);
        let ab = instance(&a, &b, Connectivity::Eight).unwrap().unwrap();
        let ba = instance(&b, &a, Connectivity::Eight).unwrap().unwrap();
        assert_eq!(ab, 1.0);
        assert_eq!(ba, 0.5);
        assert_ne!(ab, ba);
    }

    #[test]
    fn instance_matches_brute_force_on_random_masks() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for connectivity in [Connectivity::Four, Connectivity::Eight] {
            for _ in 0..100 {
                let a = random_mask(&mut rng, 32, 32, 0.3);
                let b = random_mask(&mut rng, 32, 32, 0.3);
                assert_eq!(
                    instance(&a, &b, connectivity).unwrap(),
                    oracle::instance_brute(&a, &b, connectivity)
                );
                assert_eq!(jaccard(&a, &b).unwrap(), oracle::jaccard_brute(&a, &b));
            }
        }
    }

    #[test]
    fn evaluate_perfect_prediction() {
        let truth = mask_from_str(&["#..", ".##"]);
        let s = evaluate("img", &truth, &truth).unwrap();
        assert_eq!(s.jaccard, Some(1.0));
        assert_eq!(s.precision, Some(1.0));
        assert_eq!(s.recall, Some(1.0));
    }

    #[test]
    fn evaluate_spurious_component_costs_precision() {
        // Truth: three components; prediction covers each plus one spurious
        // blob of its own: recall 1.0, precision 3/4.
        let truth = mask_from_str(&["#..#..#..", ".........", "........."]);
        let pred = mask_from_str(&["#..#..#..", ".........", "........#"]);
        let s = evaluate("img", &pred, &truth).unwrap();
        assert_eq!(s.recall, Some(1.0));
        assert_eq!(s.precision, Some(0.75));
    }

    #[test]
    fn evaluate_empty_prediction() {
        let truth = mask_from_str(&["#..", "..."]);
        let pred = BinaryMask::empty(3, 2).unwrap();
        let s = evaluate("img", &pred, &truth).unwrap();
        assert_eq!(s.jaccard, Some(0.0));
        assert_eq!(s.recall, Some(0.0));
        assert_eq!(s.precision, None);
    }

    #[test]
    fn recall_unchanged_by_padding_a_hit_component() {
        let truth = mask_from_str(&["###..", ".....", "...##"]);
        let pred = mask_from_str(&["#....", ".....", "....."]);
        let before = evaluate("img", &pred, &truth).unwrap().recall;
        // Add another pixel inside the already-hit truth component.
        let pred2 = mask_from_str(&["##...", ".....", "....."]);
        let after = evaluate("img", &pred2, &truth).unwrap().recall;
        assert_eq!(before, after);
    }

    #[test]
    fn baseline_of_identical_annotations_is_perfect() {
        let m = mask_from_str(&["#..", ".##"]);
        let base = estimate_baseline(&[(m.clone(), m.clone())]).unwrap();
        assert_eq!(
            base,
            Baseline {
                precision: 1.0,
                recall: 1.0,
                jaccard: 1.0
            }
        );
    }

    #[test]
    fn baseline_of_single_pair_is_that_pair() {
        let a = mask_from_str(&["##..", "....", "..##"]);
        let b = mask_from_str(&["#...", "....", "...."]);
        let base = estimate_baseline(&[(a.clone(), b.clone())]).unwrap();
        let sample = evaluate("x", &b, &a).unwrap();
        assert_eq!(base.precision, sample.precision.unwrap());
        assert_eq!(base.recall, sample.recall.unwrap());
        assert_eq!(base.jaccard, sample.jaccard.unwrap());
    }

    #[test]
    fn baseline_requires_input() {
        assert!(matches!(
            estimate_baseline(&[]),
            Err(Error::EmptyInput { .. })
        ));
    }

    #[test]
    fn normalize_divides_and_clamps() {
        let base = Baseline {
            precision: 0.8,
            recall: 0.8,
            jaccard: 0.24,
        };
        let sample = MetricSample {
            image_id: "img".into(),
            jaccard: Some(0.19),
            precision: Some(0.9),
            recall: None,
        };
        let out = normalize(&sample, &base).unwrap();
        assert!((out.jaccard.unwrap() - 0.19 / 0.24).abs() < 1e-12);
        assert_eq!(out.precision, Some(1.0)); // 0.9 / 0.8 clamps to 1
        assert_eq!(out.recall, None);
    }

    #[test]
    fn normalize_final_evaluation_fixture() {
        // Recorded final-evaluation medians for the two selected models,
        // normalized against the recorded double-annotation baselines.
        let shunt_base = Baseline {
            precision: 0.8,
            recall: 0.8,
            jaccard: 0.24,
        };
        let shunts = MetricSample {
            image_id: "shunts".into(),
            jaccard: Some(0.19),
            precision: Some(0.35),
            recall: Some(0.55),
        };
        let out = normalize(&shunts, &shunt_base).unwrap();
        assert!((out.precision.unwrap() - 0.35 / 0.8).abs() < 1e-12);
        assert!((out.recall.unwrap() - 0.55 / 0.8).abs() < 1e-12);
        assert!((out.jaccard.unwrap() - 0.19 / 0.24).abs() < 1e-12);

        let droplet_base = Baseline {
            precision: 0.8,
            recall: 0.8,
            jaccard: 0.34,
        };
        let droplets = MetricSample {
            image_id: "droplets".into(),
            jaccard: Some(0.27),
            precision: Some(0.61),
            recall: Some(0.68),
        };
        let out = normalize(&droplets, &droplet_base).unwrap();
        assert!((out.precision.unwrap() - 0.7625).abs() < 1e-12);
        assert!((out.recall.unwrap() - 0.85).abs() < 1e-12);
        assert!((out.jaccard.unwrap() - 0.27 / 0.34).abs() < 1e-12);
    }

    #[test]
    fn normalize_rejects_zero_baseline() {
        let base = Baseline {
            precision: 0.0,
            recall: 0.8,
            jaccard: 0.2,
        };
        let sample = MetricSample {
            image_id: "img".into(),
            jaccard: None,
            precision: None,
            recall: None,
        };
        assert!(matches!(
            normalize(&sample, &base),
            Err(Error::ZeroBaseline { .. })
        ));
    }

    #[test]
    fn lower_median_is_a_realized_value() {
        assert_eq!(lower_median(&[0.2, 0.8, 0.5]), Some(0.5));
        assert_eq!(lower_median(&[0.7]), Some(0.7));
        assert_eq!(lower_median(&[0.1, 0.2, 0.3, 0.4]), Some(0.2));
        assert_eq!(lower_median(&[]), None);
    }

    #[test]
    fn metrics_csv_round_trip_preserves_undefined() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.csv");
        let rows = vec![
            MetricRow {
                image_id: "a".into(),
                model_id: "m1".into(),
                jaccard: Some(0.5),
                precision: None,
                recall: Some(1.0),
            },
            MetricRow {
                image_id: "b".into(),
                model_id: "m1".into(),
                jaccard: None,
                precision: Some(0.25),
                recall: None,
            },
        ];
        write_metrics_csv(&path, &rows).unwrap();
        assert_eq!(read_metrics_csv(&path).unwrap(), rows);
        // Undefined cells are genuinely empty in the file.
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("a,m1,0.5,,1.0"));
    }

    proptest! {
        #[test]
        fn jaccard_is_symmetric_and_bounded(
            bits_a in prop::collection::vec(any::<bool>(), 64),
            bits_b in prop::collection::vec(any::<bool>(), 64),
        ) {
            let a = BinaryMask::new(8, 8, bits_a).unwrap();
            let b = BinaryMask::new(8, 8, bits_b).unwrap();
            let ab = jaccard(&a, &b).unwrap();
            let ba = jaccard(&b, &a).unwrap();
            prop_assert_eq!(ab, ba);
            if let Some(v) = ab {
                prop_assert!((0.0..=1.0).contains(&v));
                if v == 1.0 {
                    prop_assert_eq!(a.data(), b.data());
                }
            }
        }

        #[test]
        fn instance_bounded_when_defined(
            bits_a in prop::collection::vec(any::<bool>(), 64),
            bits_b in prop::collection::vec(any::<bool>(), 64),
        ) {
            let a = BinaryMask::new(8, 8, bits_a).unwrap();
            let b = BinaryMask::new(8, 8, bits_b).unwrap();
            if let Some(v) = instance(&a, &b, Connectivity::Eight).unwrap() {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
