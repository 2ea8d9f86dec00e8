//! Raster types: intensity images, binary masks and labelled components.
//!
//! Intensities are kept as `f64` regardless of the source bit depth so that
//! photometric transforms need no clamping mid-pipeline; quantization happens
//! only when an image is written back to disk.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bit depth of the raster an image was decoded from (or will be encoded to).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    /// Largest representable intensity at this depth.
    pub fn max_value(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

/// Single-channel intensity raster, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
    bit_depth: BitDepth,
}

impl GrayImage {
    /// Build an image from raw row-major intensities, validating the type
    /// invariants: positive dimensions, matching buffer length, finite
    /// non-negative values.
    pub fn new(width: usize, height: usize, data: Vec<f64>, bit_depth: BitDepth) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimension { width, height });
        }
        if data.len() != width * height {
            return Err(Error::BufferLength {
                len: data.len(),
                width,
                height,
            });
        }
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidIntensity { index, value });
        }
        Ok(GrayImage {
            width,
            height,
            data,
            bit_depth,
        })
    }

    /// Constant-intensity image.
    pub fn constant(width: usize, height: usize, value: f64, bit_depth: BitDepth) -> Result<Self> {
        GrayImage::new(width, height, vec![value; width * height], bit_depth)
    }

    /// Build from a per-pixel function of (x, y).
    pub fn from_fn(
        width: usize,
        height: usize,
        bit_depth: BitDepth,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage::new(width, height, data, bit_depth)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bit_depth(&self) -> BitDepth {
        self.bit_depth
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    /// Intensity extremes (m, M). `m == M` only for constant images.
    pub fn min_max(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in &self.data {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }

    /// Crop a `w`x`h` window with origin (x, y). The window must lie inside
    /// the image.
    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<GrayImage> {
        if x + w > self.width || y + h > self.height || w == 0 || h == 0 {
            return Err(Error::WindowTooLarge {
                window: w.max(h),
                width: self.width,
                height: self.height,
            });
        }
        let mut data = Vec::with_capacity(w * h);
        for row in y..y + h {
            let start = row * self.width + x;
            data.extend_from_slice(&self.data[start..start + w]);
        }
        GrayImage::new(w, h, data, self.bit_depth)
    }

    /// Bilinear resample to `out_w` x `out_h` (pixel centers aligned).
    /// Identity when the output dimensions equal the input dimensions.
    pub fn resize_bilinear(&self, out_w: usize, out_h: usize) -> Result<GrayImage> {
        if out_w == 0 || out_h == 0 {
            return Err(Error::ZeroDimension {
                width: out_w,
                height: out_h,
            });
        }
        if out_w == self.width && out_h == self.height {
            return Ok(self.clone());
        }
        let sx = self.width as f64 / out_w as f64;
        let sy = self.height as f64 / out_h as f64;
        let mut data = Vec::with_capacity(out_w * out_h);
        for y in 0..out_h {
            let src_y = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (self.height - 1) as f64);
            let y0 = src_y.floor() as usize;
            let y1 = (y0 + 1).min(self.height - 1);
            let fy = src_y - y0 as f64;
            for x in 0..out_w {
                let src_x = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (self.width - 1) as f64);
                let x0 = src_x.floor() as usize;
                let x1 = (x0 + 1).min(self.width - 1);
                let fx = src_x - x0 as f64;
                let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
                let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
                data.push(top * (1.0 - fy) + bottom * fy);
            }
        }
        GrayImage::new(out_w, out_h, data, self.bit_depth)
    }
}

/// Per-pixel defect indicator on the same grid as its image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, data: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::ZeroDimension { width, height });
        }
        if data.len() != width * height {
            return Err(Error::BufferLength {
                len: data.len(),
                width,
                height,
            });
        }
        Ok(BinaryMask {
            width,
            height,
            data,
        })
    }

    pub fn empty(width: usize, height: usize) -> Result<Self> {
        BinaryMask::new(width, height, vec![false; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        BinaryMask::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[bool] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        debug_assert!(x < self.width && y < self.height);
        self.data[y * self.width + x]
    }

    /// |A|: number of set pixels.
    pub fn count_true(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.data.iter().any(|&b| b)
    }

    pub fn same_dims(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn crop(&self, x: usize, y: usize, w: usize, h: usize) -> Result<BinaryMask> {
        if x + w > self.width || y + h > self.height || w == 0 || h == 0 {
            return Err(Error::WindowTooLarge {
                window: w.max(h),
                width: self.width,
                height: self.height,
            });
        }
        let mut data = Vec::with_capacity(w * h);
        for row in y..y + h {
            let start = row * self.width + x;
            data.extend_from_slice(&self.data[start..start + w]);
        }
        BinaryMask::new(w, h, data)
    }

    /// Nearest-neighbor resample; keeps the mask binary.
    pub fn resample_nearest(&self, out_w: usize, out_h: usize) -> Result<BinaryMask> {
        if out_w == 0 || out_h == 0 {
            return Err(Error::ZeroDimension {
                width: out_w,
                height: out_h,
            });
        }
        if out_w == self.width && out_h == self.height {
            return Ok(self.clone());
        }
        let sx = self.width as f64 / out_w as f64;
        let sy = self.height as f64 / out_h as f64;
        let mut data = Vec::with_capacity(out_w * out_h);
        for y in 0..out_h {
            let src_y =
                (((y as f64 + 0.5) * sy - 0.5).round().max(0.0) as usize).min(self.height - 1);
            for x in 0..out_w {
                let src_x =
                    (((x as f64 + 0.5) * sx - 0.5).round().max(0.0) as usize).min(self.width - 1);
                data.push(self.get(src_x, src_y));
            }
        }
        BinaryMask::new(out_w, out_h, data)
    }
}

/// Pixel connectivity used when labelling components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[serde(rename = "8")]
    Eight,
}

/// Labelled connected components of a [`BinaryMask`].
///
/// Labels are contiguous `1..=count`, assigned in raster order of each
/// component's first pixel; `0` is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentSet {
    pub labels: Vec<u32>,
    pub count: usize,
    pub connectivity: Connectivity,
    pub width: usize,
    pub height: usize,
}

impl ComponentSet {
    #[inline]
    pub fn label(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }
}

fn decode_gray(path: &Path) -> Result<GrayImage> {
    let dynamic = image::open(path).map_err(|source| match source {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::ImageDecode {
            path: path.to_path_buf(),
            source: other,
        },
    })?;
    let (width, height) = (dynamic.width() as usize, dynamic.height() as usize);
    if width == 0 || height == 0 {
        return Err(Error::ZeroDimension { width, height });
    }
    match dynamic {
        image::DynamicImage::ImageLuma8(buf) => {
            let data = buf.into_raw().into_iter().map(f64::from).collect();
            GrayImage::new(width, height, data, BitDepth::Eight)
        }
        image::DynamicImage::ImageLuma16(buf) => {
            let data = buf.into_raw().into_iter().map(f64::from).collect();
            GrayImage::new(width, height, data, BitDepth::Sixteen)
        }
        other => Err(Error::MultiChannel {
            path: path.to_path_buf(),
            found: format!("{:?}", other.color()),
        }),
    }
}

/// Load a single-channel 8- or 16-bit PNG as a [`GrayImage`].
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    decode_gray(path.as_ref())
}

/// Load a raster as a [`BinaryMask`]: any nonzero pixel is a defect pixel.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let img = decode_gray(path.as_ref())?;
    BinaryMask::new(
        img.width(),
        img.height(),
        img.data().iter().map(|&v| v > 0.0).collect(),
    )
}

/// Write an image as PNG, quantizing to its recorded bit depth.
pub fn save_image(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let (w, h) = (img.width() as u32, img.height() as u32);
    let max = img.bit_depth().max_value();
    let result = match img.bit_depth() {
        BitDepth::Eight => {
            let raw: Vec<u8> = img
                .data()
                .iter()
                .map(|&v| v.clamp(0.0, max).round() as u8)
                .collect();
            image::GrayImage::from_raw(w, h, raw)
                .expect("buffer length checked by invariant")
                .save(path)
        }
        BitDepth::Sixteen => {
            let raw: Vec<u16> = img
                .data()
                .iter()
                .map(|&v| v.clamp(0.0, max).round() as u16)
                .collect();
            image::ImageBuffer::<image::Luma<u16>, _>::from_raw(w, h, raw)
                .expect("buffer length checked by invariant")
                .save(path)
        }
    };
    result.map_err(|source| match source {
        image::ImageError::IoError(io) => Error::io(path, io),
        other => Error::ImageEncode {
            path: path.to_path_buf(),
            source: other,
        },
    })
}

/// Write a mask as an 8-bit PNG (255 = defect, 0 = background).
pub fn save_mask(mask: &BinaryMask, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let raw: Vec<u8> = mask.data().iter().map(|&b| if b { 255 } else { 0 }).collect();
    image::GrayImage::from_raw(mask.width() as u32, mask.height() as u32, raw)
        .expect("buffer length checked by invariant")
        .save(path)
        .map_err(|source| match source {
            image::ImageError::IoError(io) => Error::io(path, io),
            other => Error::ImageEncode {
                path: path.to_path_buf(),
                source: other,
            },
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn load_preserves_8bit_intensities() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("tiny.png");
        let buf = image::GrayImage::from_raw(2, 2, vec![0, 255, 128, 7]).unwrap();
        buf.save(&path).unwrap();

        let img = load_image(&path).unwrap();
        assert_eq!(img.data(), &[0.0, 255.0, 128.0, 7.0]);
        assert_eq!(img.bit_depth(), BitDepth::Eight);
    }

    #[test]
    fn load_preserves_16bit_max() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("deep.png");
        let buf =
            image::ImageBuffer::<image::Luma<u16>, _>::from_raw(2, 1, vec![65535u16, 12]).unwrap();
        buf.save(&path).unwrap();

        let img = load_image(&path).unwrap();
        assert_eq!(img.data(), &[65535.0, 12.0]);
        assert_eq!(img.bit_depth(), BitDepth::Sixteen);
    }

    #[test]
    fn rgb_input_is_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rgb.png");
        let buf = image::RgbImage::from_raw(1, 1, vec![1, 2, 3]).unwrap();
        buf.save(&path).unwrap();

        match load_image(&path) {
            Err(Error::MultiChannel { .. }) => {}
            other => panic!("expected MultiChannel, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_io_error() {
        match load_image("/nonexistent/file.png") {
            Err(Error::Io { .. }) => {}
            other => panic!("expected Io, got {other:?}"),
        }
    }

    #[test]
    fn mask_thresholds_at_zero() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("m.png");
        let buf = image::GrayImage::from_raw(2, 2, vec![0, 0, 5, 255]).unwrap();
        buf.save(&path).unwrap();

        let mask = load_mask(&path).unwrap();
        assert_eq!(mask.data(), &[false, false, true, true]);
        assert_eq!(mask.count_true(), 2);
    }

    #[test]
    fn all_zero_raster_gives_empty_mask() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("z.png");
        image::GrayImage::from_raw(3, 2, vec![0; 6]).unwrap().save(&path).unwrap();
        let mask = load_mask(&path).unwrap();
        assert_eq!(mask.count_true(), 0);
    }

    #[test]
    fn one_pixel_mask() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("one.png");
        image::GrayImage::from_raw(1, 1, vec![1]).unwrap().save(&path).unwrap();
        let mask = load_mask(&path).unwrap();
        assert_eq!(mask.data(), &[true]);
    }

    #[test]
    fn mask_save_load_round_trip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("rt.png");
        let mask = BinaryMask::from_fn(13, 9, |x, y| (x * y) % 3 == 1).unwrap();
        save_mask(&mask, &path).unwrap();
        assert_eq!(load_mask(&path).unwrap(), mask);
    }

    #[test]
    fn invalid_buffers_rejected() {
        assert!(matches!(
            GrayImage::new(2, 2, vec![1.0; 3], BitDepth::Eight),
            Err(Error::BufferLength { .. })
        ));
        assert!(matches!(
            GrayImage::new(0, 2, vec![], BitDepth::Eight),
            Err(Error::ZeroDimension { .. })
        ));
        assert!(matches!(
            GrayImage::new(1, 2, vec![1.0, -0.5], BitDepth::Eight),
            Err(Error::InvalidIntensity { .. })
        ));
        assert!(matches!(
            GrayImage::new(1, 2, vec![1.0, f64::NAN], BitDepth::Eight),
            Err(Error::InvalidIntensity { .. })
        ));
    }

    #[test]
    fn min_max_ordering() {
        let img = GrayImage::new(2, 2, vec![4.0, 1.0, 9.0, 9.0], BitDepth::Eight).unwrap();
        assert_eq!(img.min_max(), (1.0, 9.0));
        let flat = GrayImage::constant(3, 3, 5.0, BitDepth::Eight).unwrap();
        assert_eq!(flat.min_max(), (5.0, 5.0));
    }

    #[test]
    fn crop_extracts_window() {
        let img = GrayImage::from_fn(4, 3, BitDepth::Eight, |x, y| (y * 4 + x) as f64).unwrap();
        let c = img.crop(1, 1, 2, 2).unwrap();
        assert_eq!(c.data(), &[5.0, 6.0, 9.0, 10.0]);
        assert!(img.crop(3, 0, 2, 1).is_err());
    }

    #[test]
    fn identity_resample_is_exact() {
        let img = GrayImage::from_fn(7, 5, BitDepth::Eight, |x, y| (x * 31 + y * 7) as f64).unwrap();
        assert_eq!(img.resize_bilinear(7, 5).unwrap(), img);
        let mask = BinaryMask::from_fn(7, 5, |x, y| (x + y) % 2 == 0).unwrap();
        assert_eq!(mask.resample_nearest(7, 5).unwrap(), mask);
    }
}
