//! Pixel and mask containers shared by every visual stage.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Number of interleaved 8-bit samples per pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Channels {
    Rgb,
    Rgba,
}

impl Channels {
    pub const fn count(self) -> usize {
        match self {
            Channels::Rgb => 3,
            Channels::Rgba => 4,
        }
    }
}

/// Row-major 8-bit RGB or RGBA image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RasterImage {
    width: u32,
    height: u32,
    channels: Channels,
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, channels: Channels, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidBuffer(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize * channels.count();
        if pixels.len() != expected {
            return Err(Error::InvalidBuffer(format!(
                "expected {expected} samples for {width}x{height}x{}, got {}",
                channels.count(),
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            pixels,
        })
    }

    /// Image with every pixel set to `sample`, which must hold one value per channel.
    pub fn filled(width: u32, height: u32, sample: &[u8]) -> Result<Self> {
        let channels = match sample.len() {
            3 => Channels::Rgb,
            4 => Channels::Rgba,
            n => {
                return Err(Error::InvalidBuffer(format!(
                    "fill sample must have 3 or 4 channels, got {n}"
                )))
            }
        };
        let count = width as usize * height as usize;
        let mut pixels = Vec::with_capacity(count * sample.len());
        for _ in 0..count {
            pixels.extend_from_slice(sample);
        }
        Self::new(width, height, channels, pixels)
    }

    pub fn from_fn(
        width: u32,
        height: u32,
        channels: Channels,
        mut f: impl FnMut(u32, u32) -> [u8; 4],
    ) -> Result<Self> {
        let n = channels.count();
        let mut pixels = Vec::with_capacity(width as usize * height as usize * n);
        for y in 0..height {
            for x in 0..width {
                pixels.extend_from_slice(&f(x, y)[..n]);
            }
        }
        Self::new(width, height, channels, pixels)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn channels(&self) -> Channels {
        self.channels
    }

    pub fn has_alpha(&self) -> bool {
        self.channels == Channels::Rgba
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.pixels
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.pixels
    }

    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels.count()
    }

    /// Samples of the pixel at `(x, y)`; length equals the channel count.
    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let i = self.offset(x, y);
        &self.pixels[i..i + self.channels.count()]
    }

    pub fn pixel_mut(&mut self, x: u32, y: u32) -> &mut [u8] {
        let i = self.offset(x, y);
        let n = self.channels.count();
        &mut self.pixels[i..i + n]
    }

    /// Iterator over pixels in row-major order.
    pub fn pixels(&self) -> core::slice::ChunksExact<'_, u8> {
        self.pixels.chunks_exact(self.channels.count())
    }

    /// Drops the alpha channel without blending.
    pub fn to_rgb(&self) -> RasterImage {
        match self.channels {
            Channels::Rgb => self.clone(),
            Channels::Rgba => {
                let pixels = self.pixels().flat_map(|p| [p[0], p[1], p[2]]).collect();
                RasterImage {
                    width: self.width,
                    height: self.height,
                    channels: Channels::Rgb,
                    pixels,
                }
            }
        }
    }
}

/// Row-major boolean grid; `true` marks pixels inside the region.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidBuffer(format!(
                "mask dimensions must be positive, got {width}x{height}"
            )));
        }
        let expected = width as usize * height as usize;
        if bits.len() != expected {
            return Err(Error::InvalidBuffer(format!(
                "expected {expected} bits for {width}x{height}, got {}",
                bits.len()
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    /// All-false mask. Panics on a zero dimension.
    pub fn empty(width: u32, height: u32) -> Self {
        Self::new(width, height, vec![false; width as usize * height as usize])
            .expect("mask dimensions must be positive")
    }

    /// All-true mask. Panics on a zero dimension.
    pub fn full(width: u32, height: u32) -> Self {
        Self::new(width, height, vec![true; width as usize * height as usize])
            .expect("mask dimensions must be positive")
    }

    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Result<Self> {
        let mut bits = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Self::new(width, height, bits)
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let w = self.width as usize;
        self.bits[y as usize * w + x as usize] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Number of true bits.
    pub fn area(&self) -> u64 {
        self.bits.iter().filter(|&&b| b).count() as u64
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// One byte per pixel, 255 inside and 0 outside.
    pub fn to_luma(&self) -> Vec<u8> {
        self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect()
    }

    /// Inverse of [`BinaryMask::to_luma`]; any nonzero sample counts as inside.
    pub fn from_luma(width: u32, height: u32, samples: &[u8]) -> Result<Self> {
        Self::new(width, height, samples.iter().map(|&v| v != 0).collect())
    }
}

/// Binary edge raster produced by [`crate::canny::canny_edges`].
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct EdgeMap(BinaryMask);

impl EdgeMap {
    pub fn from_mask(mask: BinaryMask) -> Self {
        Self(mask)
    }

    pub fn as_mask(&self) -> &BinaryMask {
        &self.0
    }

    pub fn into_mask(self) -> BinaryMask {
        self.0
    }

    pub fn width(&self) -> u32 {
        self.0.width
    }

    pub fn height(&self) -> u32 {
        self.0.height
    }

    pub fn dimensions(&self) -> (u32, u32) {
        self.0.dimensions()
    }

    pub fn is_edge(&self, x: u32, y: u32) -> bool {
        self.0.get(x, y)
    }

    pub fn edge_count(&self) -> u64 {
        self.0.area()
    }

    /// White edges on black, one byte per pixel.
    pub fn to_luma(&self) -> Vec<u8> {
        self.0.to_luma()
    }
}
