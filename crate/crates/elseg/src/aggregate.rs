//! Population-level analysis: per-pixel defect-occurrence heat maps over many
//! segmented modules, and correlation of defect counts against module
//! performance data.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::core::{BinaryMask, BitDepth, GrayImage};
use crate::error::{Error, Result};

/// Per-pixel defect-occurrence counts over a population of masks.
///
/// `counts[p] / n_images` is exactly the fraction of input masks that were
/// true at pixel `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeatMap {
    pub width: usize,
    pub height: usize,
    pub counts: Vec<u64>,
    pub n_images: u64,
}

impl HeatMap {
    pub fn zero(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimension { width, height });
        }
        Ok(HeatMap {
            width,
            height,
            counts: vec![0; width * height],
            n_images: 0,
        })
    }

    /// Add one mask, resampling it to this map's grid if needed.
    pub fn add(&mut self, mask: &BinaryMask) -> Result<()> {
        let mask = if mask.width() == self.width && mask.height() == self.height {
            mask.clone()
        } else {
            mask.resample_nearest(self.width, self.height)?
        };
        for (count, &bit) in self.counts.iter_mut().zip(mask.data()) {
            *count += u64::from(bit);
        }
        self.n_images += 1;
        Ok(())
    }

    /// Combine two partial accumulations; an associative, commutative merge.
    pub fn merge(&self, other: &HeatMap) -> Result<HeatMap> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch {
                left_width: self.width,
                left_height: self.height,
                right_width: other.width,
                right_height: other.height,
            });
        }
        Ok(HeatMap {
            width: self.width,
            height: self.height,
            counts: self
                .counts
                .iter()
                .zip(&other.counts)
                .map(|(a, b)| a + b)
                .collect(),
            n_images: self.n_images + other.n_images,
        })
    }

    #[inline]
    pub fn probability(&self, x: usize, y: usize) -> f64 {
        if self.n_images == 0 {
            return 0.0;
        }
        self.counts[y * self.width + x] as f64 / self.n_images as f64
    }

    pub fn probability_map(&self) -> Vec<f64> {
        if self.n_images == 0 {
            return vec![0.0; self.counts.len()];
        }
        let n = self.n_images as f64;
        self.counts.iter().map(|&c| c as f64 / n).collect()
    }
}

/// Accumulate a stream of masks into a heat map. The first mask fixes the
/// registration grid; later masks are resampled to it by nearest neighbor.
pub fn accumulate<I>(masks: I) -> Result<HeatMap>
where
    I: IntoIterator<Item = BinaryMask>,
{
    let mut iter = masks.into_iter();
    let first = iter.next().ok_or(Error::EmptyInput {
        operation: "accumulate",
    })?;
    let mut map = HeatMap::zero(first.width(), first.height())?;
    map.add(&first)?;
    for mask in iter {
        map.add(&mask)?;
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeatScale {
    Linear,
    Log,
}

/// How rendered gray levels map back to occurrence probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatLegend {
    pub scale: HeatScale,
    pub clip_percentile: f64,
    pub n_images: u64,
    /// Value (count, or log1p(count) in log mode) rendered as full white.
    pub threshold_value: f64,
    /// Occurrence probability at the white threshold.
    pub threshold_probability: f64,
}

impl HeatLegend {
    /// Probability corresponding to a rendered gray level in [0, 255].
    pub fn probability_of_gray(&self, gray: f64) -> f64 {
        if self.n_images == 0 || self.threshold_value <= 0.0 {
            return 0.0;
        }
        let value = gray / 255.0 * self.threshold_value;
        let count = match self.scale {
            HeatScale::Linear => value,
            HeatScale::Log => value.exp_m1(),
        };
        count / self.n_images as f64
    }
}

/// Render a heat map to an 8-bit image.
///
/// Values at or above the (100 - clip)-th percentile map to full white; the
/// rest scale linearly against that threshold. Log mode transforms counts by
/// `ln(1 + c)` before normalizing. An all-zero map renders all black.
pub fn render_heatmap(
    map: &HeatMap,
    scale: HeatScale,
    clip_percentile: f64,
) -> Result<(GrayImage, HeatLegend)> {
    if !(0.0..100.0).contains(&clip_percentile) {
        return Err(Error::InvalidParam(format!(
            "clip percentile {clip_percentile} must lie in [0, 100)"
        )));
    }
    let values: Vec<f64> = map
        .counts
        .iter()
        .map(|&c| match scale {
            HeatScale::Linear => c as f64,
            HeatScale::Log => (c as f64).ln_1p(),
        })
        .collect();

    // Nearest-rank percentile over all pixels.
    let mut sorted = values.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let n = sorted.len();
    let rank = (((100.0 - clip_percentile) / 100.0) * n as f64).ceil() as usize;
    let threshold = sorted[rank.clamp(1, n) - 1];

    let rendered: Vec<f64> = values
        .iter()
        .map(|&v| {
            if v <= 0.0 {
                0.0
            } else if v >= threshold {
                255.0
            } else {
                255.0 * v / threshold
            }
        })
        .collect();
    let image = GrayImage::new(map.width, map.height, rendered, BitDepth::Eight)?;

    let threshold_count = match scale {
        HeatScale::Linear => threshold,
        HeatScale::Log => threshold.exp_m1(),
    };
    let legend = HeatLegend {
        scale,
        clip_percentile,
        n_images: map.n_images,
        threshold_value: threshold,
        threshold_probability: if map.n_images == 0 {
            0.0
        } else {
            threshold_count / map.n_images as f64
        },
    };
    Ok((image, legend))
}

/// One module's measured performance parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRecord {
    pub image_id: String,
    /// Slope of the IV curve near the short-circuit point, A/V.
    pub isc_slope: f64,
    /// Any further scalar parameters, keyed by column name.
    #[serde(default, flatten)]
    pub extra: BTreeMap<String, f64>,
}

impl PerformanceRecord {
    pub fn value(&self, key: &str) -> Option<f64> {
        if key == "isc_slope" {
            return Some(self.isc_slope);
        }
        self.extra.get(key).copied()
    }
}

/// One joined point of the defect-count vs. performance scatter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatterRow {
    pub image_id: String,
    pub component_count: f64,
    pub performance: f64,
}

/// Pearson correlation between per-image defect counts and a performance
/// parameter, over the inner join on image id. Returns the coefficient and
/// the joined scatter table.
pub fn correlate(
    counts: &[(String, f64)],
    perf: &[PerformanceRecord],
    key: &str,
) -> Result<(f64, Vec<ScatterRow>)> {
    let by_id: BTreeMap<&str, f64> = counts.iter().map(|(id, c)| (id.as_str(), *c)).collect();
    let mut rows = Vec::new();
    for record in perf {
        let (Some(&count), Some(value)) = (by_id.get(record.image_id.as_str()), record.value(key))
        else {
            continue;
        };
        rows.push(ScatterRow {
            image_id: record.image_id.clone(),
            component_count: count,
            performance: value,
        });
    }
    if rows.len() < 3 {
        return Err(Error::InsufficientJoin {
            needed: 3,
            found: rows.len(),
        });
    }
    let n = rows.len() as f64;
    let mean_x = rows.iter().map(|r| r.component_count).sum::<f64>() / n;
    let mean_y = rows.iter().map(|r| r.performance).sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for r in &rows {
        let dx = r.component_count - mean_x;
        let dy = r.performance - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance { side: "count" });
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance {
            side: "performance",
        });
    }
    Ok((sxy / (sxx * syy).sqrt(), rows))
}

/// Read a performance CSV: columns `image_id`, `isc_slope`, with any extra
/// numeric columns passed through.
pub fn read_performance_csv(path: impl AsRef<Path>) -> Result<Vec<PerformanceRecord>> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })?;
    let mut records = Vec::new();
    for row in reader.deserialize() {
        records.push(row.map_err(|source| Error::Csv {
            path: path.to_path_buf(),
            source,
        })?);
    }
    Ok(records)
}

pub fn write_scatter_csv(path: impl AsRef<Path>, rows: &[ScatterRow]) -> Result<()> {
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
