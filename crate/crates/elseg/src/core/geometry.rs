//! Thin-film module layout: cell stripes, interconnect and isolation lines,
//! and the stitch grid of the mosaicked EL exposure.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    Horizontal,
    Vertical,
}

/// Boundary between two camera exposures, at a fixed pixel position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StitchLine {
    pub orientation: Orientation,
    pub position: usize,
}

/// Geometry of one module image.
///
/// Cells are horizontal stripes of height `cell_pitch` stacked top to bottom;
/// the interconnect line separating cell `k` from `k+1` occupies the last
/// `interconnect_width` rows of cell `k`. Submodules are vertical bands of
/// width `submodule_width`; the isolation line separating band `j` from `j+1`
/// occupies the last `isolation_line_width` columns of band `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleGeometry {
    pub cell_count: usize,
    pub submodule_count: usize,
    pub cell_pitch: usize,
    pub submodule_width: usize,
    pub interconnect_width: usize,
    pub isolation_line_width: usize,
    #[serde(default)]
    pub stitch_lines: Vec<StitchLine>,
}

impl ModuleGeometry {
    /// Layout matching a typical module: 150 series cells, 5 submodules,
    /// one horizontal and three vertical stitch lines.
    pub fn default_module() -> Self {
        let width = 5 * 120;
        let height = 150 * 8;
        ModuleGeometry {
            cell_count: 150,
            submodule_count: 5,
            cell_pitch: 8,
            submodule_width: 120,
            interconnect_width: 2,
            isolation_line_width: 2,
            stitch_lines: vec![
                StitchLine {
                    orientation: Orientation::Horizontal,
                    position: height / 2,
                },
                StitchLine {
                    orientation: Orientation::Vertical,
                    position: width / 4,
                },
                StitchLine {
                    orientation: Orientation::Vertical,
                    position: width / 2,
                },
                StitchLine {
                    orientation: Orientation::Vertical,
                    position: 3 * width / 4,
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cell_count == 0 {
            return Err(Error::InvalidParam("cell_count must be >= 1".into()));
        }
        if self.submodule_count == 0 {
            return Err(Error::InvalidParam("submodule_count must be >= 1".into()));
        }
        for (name, v) in [
            ("cell_pitch", self.cell_pitch),
            ("submodule_width", self.submodule_width),
            ("interconnect_width", self.interconnect_width),
            ("isolation_line_width", self.isolation_line_width),
        ] {
            if v == 0 {
                return Err(Error::InvalidParam(format!("{name} must be >= 1 pixel")));
            }
        }
        if self.interconnect_width >= self.cell_pitch {
            return Err(Error::InvalidParam(
                "interconnect_width must be smaller than cell_pitch".into(),
            ));
        }
        if self.isolation_line_width >= self.submodule_width {
            return Err(Error::InvalidParam(
                "isolation_line_width must be smaller than submodule_width".into(),
            ));
        }
        let (w, h) = (self.image_width(), self.image_height());
        for line in &self.stitch_lines {
            let limit = match line.orientation {
                Orientation::Horizontal => h,
                Orientation::Vertical => w,
            };
            if line.position == 0 || line.position >= limit {
                return Err(Error::InvalidParam(format!(
                    "stitch line at {} is outside the {}x{} image",
                    line.position, w, h
                )));
            }
        }
        Ok(())
    }

    pub fn image_width(&self) -> usize {
        self.submodule_count * self.submodule_width
    }

    pub fn image_height(&self) -> usize {
        self.cell_count * self.cell_pitch
    }

    /// Index of the cell stripe containing row `y`.
    pub fn cell_of_row(&self, y: usize) -> usize {
        (y / self.cell_pitch).min(self.cell_count - 1)
    }

    /// Active rows of cell `k`: its stripe minus the trailing interconnect
    /// line (the last cell has no trailing line).
    pub fn cell_stripe_rows(&self, k: usize) -> std::ops::Range<usize> {
        let start = k * self.cell_pitch;
        let mut end = (k + 1) * self.cell_pitch;
        if k + 1 < self.cell_count {
            end -= self.interconnect_width;
        }
        start..end
    }

    pub fn is_interconnect_row(&self, y: usize) -> bool {
        let k = self.cell_of_row(y);
        k + 1 < self.cell_count && y >= self.cell_stripe_rows(k).end
    }

    pub fn is_isolation_col(&self, x: usize) -> bool {
        let j = (x / self.submodule_width).min(self.submodule_count - 1);
        let band_end = (j + 1) * self.submodule_width;
        j + 1 < self.submodule_count && x >= band_end - self.isolation_line_width
    }

    fn stitch_positions(&self, orientation: Orientation) -> Vec<usize> {
        let mut positions: Vec<usize> = self
            .stitch_lines
            .iter()
            .filter(|l| l.orientation == orientation)
            .map(|l| l.position)
            .collect();
        positions.sort_unstable();
        positions.dedup();
        positions
    }

    /// Number of stitch patches: (horizontal lines + 1) x (vertical lines + 1).
    pub fn stitch_patch_count(&self) -> usize {
        let h = self.stitch_positions(Orientation::Horizontal).len();
        let v = self.stitch_positions(Orientation::Vertical).len();
        (h + 1) * (v + 1)
    }

    /// Stitch patch containing pixel (x, y); row-major over (row band, column
    /// band) with bands ordered by position.
    pub fn stitch_patch_index(&self, x: usize, y: usize) -> usize {
        let hs = self.stitch_positions(Orientation::Horizontal);
        let vs = self.stitch_positions(Orientation::Vertical);
        let row_band = hs.iter().filter(|&&p| y >= p).count();
        let col_band = vs.iter().filter(|&&p| x >= p).count();
        row_band * (vs.len() + 1) + col_band
    }
}
