//! Single-channel 2D rasters, binary masks and the on-disk image format.
//!
//! File layout: 8-byte magic `GLB2DIMG`, a little-endian `u32` header length,
//! a JSON header `{"width","height","pixel_spacing_mm","dtype":"f32le"}`, then
//! `width * height` little-endian `f32` values in row-major order. Masks are
//! stored in the same format as 0/1 values.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: &[u8; 8] = b"GLB2DIMG";

#[derive(Debug, Clone, PartialEq)]
pub struct Image2D {
    width: usize,
    height: usize,
    pixel_spacing: f64,
    pixels: Vec<f64>,
}

impl Image2D {
    pub fn new(width: usize, height: usize, pixel_spacing: f64, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("image dimensions must be positive"));
        }
        if pixels.len() != width * height {
            return Err(Error::invalid(format!(
                "pixel count {} does not match {width}x{height}",
                pixels.len()
            )));
        }
        if !(pixel_spacing.is_finite() && pixel_spacing > 0.0) {
            return Err(Error::invalid("pixel spacing must be positive"));
        }
        if pixels.iter().any(|p| !p.is_finite()) {
            return Err(Error::invalid("image contains non-finite values"));
        }
        Ok(Self { width, height, pixel_spacing, pixels })
    }

    pub fn filled(width: usize, height: usize, pixel_spacing: f64, value: f64) -> Result<Self> {
        Self::new(width, height, pixel_spacing, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        pixel_spacing: f64,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixel_spacing, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_spacing(&self) -> f64 {
        self.pixel_spacing
    }

    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[f64] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [f64] {
        &mut self.pixels
    }

    pub fn into_pixels(self) -> Vec<f64> {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.pixels[y * self.width + x] = value;
    }

    pub fn same_shape(&self, other: &Image2D) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn check_shape(&self, other: &Image2D, what: &str) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "{what}: shape {}x{} does not match {}x{}",
                other.width, other.height, self.width, self.height
            )))
        }
    }

    /// New image with the same geometry and the given pixel buffer.
    pub fn with_pixels(&self, pixels: Vec<f64>) -> Result<Image2D> {
        Image2D::new(self.width, self.height, self.pixel_spacing, pixels)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Image2D {
        Image2D {
            width: self.width,
            height: self.height,
            pixel_spacing: self.pixel_spacing,
            pixels: self.pixels.iter().map(|&p| f(p)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Image2D, f: impl Fn(f64, f64) -> f64) -> Result<Image2D> {
        self.check_shape(other, "zip_map")?;
        Ok(Image2D {
            width: self.width,
            height: self.height,
            pixel_spacing: self.pixel_spacing,
            pixels: self
                .pixels
                .iter()
                .zip(&other.pixels)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &Image2D) -> Result<f64> {
        self.check_shape(other, "max_abs_diff")?;
        Ok(self
            .pixels
            .iter()
            .zip(&other.pixels)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.pixels
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| (lo.min(p), hi.max(p)))
    }

    /// Min-max rescale into [0, 1]. A constant image maps to zeros.
    pub fn normalized_unit(&self) -> Image2D {
        let (lo, hi) = self.min_max();
        let span = hi - lo;
        if span <= 0.0 {
            return self.map(|_| 0.0);
        }
        self.map(|p| (p - lo) / span)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let header = ImageHeader {
            width: self.width,
            height: self.height,
            pixel_spacing_mm: self.pixel_spacing,
            dtype: "f32le".to_string(),
        };
        let json = serde_json::to_vec(&header)?;
        let mut buf = Vec::with_capacity(12 + json.len() + 4 * self.pixels.len());
        buf.extend_from_slice(IMAGE_MAGIC);
        buf.extend_from_slice(&(json.len() as u32).to_le_bytes());
        buf.extend_from_slice(&json);
        for &p in &self.pixels {
            buf.extend_from_slice(&(p as f32).to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Image2D> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != IMAGE_MAGIC {
            return Err(Error::invalid("not an image file (bad magic)"));
        }
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let mut json = vec![0u8; u32::from_le_bytes(len) as usize];
        r.read_exact(&mut json)?;
        let header: ImageHeader = serde_json::from_slice(&json)?;
        if header.dtype != "f32le" {
            return Err(Error::invalid(format!("unsupported dtype {:?}", header.dtype)));
        }
        let n = header
            .width
            .checked_mul(header.height)
            .ok_or_else(|| Error::invalid("image dimensions overflow"))?;
        let mut payload = vec![0u8; 4 * n];
        r.read_exact(&mut payload)?;
        let pixels = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Image2D::new(header.width, header.height, header.pixel_spacing_mm, pixels)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Image2D> {
        let bytes = std::fs::read(path)?;
        Image2D::read_from(bytes.as_slice())
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct ImageHeader {
    width: usize,
    height: usize,
    pixel_spacing_mm: f64,
    dtype: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::invalid(format!(
                "mask bit count {} does not match {width}x{height}",
                bits.len()
            )));
        }
        Ok(Self { width, height, bits })
    }

    pub fn empty(width: usize, height: usize) -> Self {
        Self { width, height, bits: vec![false; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self { width, height, bits }
    }

    /// Pixels strictly above `threshold`.
    pub fn from_threshold(img: &Image2D, threshold: f64) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            bits: img.pixels().iter().map(|&p| p > threshold).collect(),
        }
    }

    /// Mask read back from a 0/1 image (values ≥ 0.5 are set).
    pub fn from_image(img: &Image2D) -> Self {
        Self {
            width: img.width(),
            height: img.height(),
            bits: img.pixels().iter().map(|&p| p >= 0.5).collect(),
        }
    }

    pub fn to_image(&self, pixel_spacing: f64) -> Result<Image2D> {
        Image2D::new(
            self.width,
            self.height,
            pixel_spacing,
            self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn same_shape(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn matches_image(&self, img: &Image2D) -> bool {
        self.width == img.width() && self.height == img.height()
    }

    pub fn union(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.combine(other, |a, b| a || b)
    }

    pub fn intersection(&self, other: &BinaryMask) -> Result<BinaryMask> {
        self.combine(other, |a, b| a && b)
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|&b| !b).collect(),
        }
    }

    pub fn is_superset_of(&self, other: &BinaryMask) -> bool {
        self.same_shape(other) && self.bits.iter().zip(&other.bits).all(|(&a, &b)| a || !b)
    }

    /// Intersection-over-union; two empty masks give 1.
    pub fn iou(&self, other: &BinaryMask) -> Result<f64> {
        let inter = self.intersection(other)?.count();
        let union = self.union(other)?.count();
        Ok(if union == 0 { 1.0 } else { inter as f64 / union as f64 })
    }

    fn combine(&self, other: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> Result<BinaryMask> {
        if !self.same_shape(other) {
            return Err(Error::invalid("mask shapes differ"));
        }
        Ok(BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    /// Coordinates `(x, y)` of set pixels in row-major order.
    pub fn coords(&self) -> Vec<(usize, usize)> {
        self.bits
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| (i % self.width, i / self.width))
            .collect()
    }
}
