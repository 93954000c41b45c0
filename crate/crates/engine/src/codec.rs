//! PNG encode/decode for rasters, masks and edge maps, plus letterboxing.

use std::io::Cursor;

use anywhere_core::composite::{letterbox_size, place_centered};
use anywhere_core::{BinaryMask, Channels, EdgeMap, RasterImage};
use image::codecs::png::{CompressionType, FilterType as PngFilter, PngEncoder};
use image::imageops::FilterType;
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageFormat, RgbaImage};

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    #[error("png decode failed: {0}")]
    Decode(String),
    #[error("png encode failed: {0}")]
    Encode(String),
    #[error(transparent)]
    Raster(#[from] anywhere_core::Error),
}

/// Decodes any PNG into 8-bit RGB, or RGBA when the file carries alpha.
pub fn decode_png(bytes: &[u8]) -> Result<RasterImage, CodecError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| CodecError::Decode(e.to_string()))?;
    Ok(from_dynamic(img)?)
}

pub(crate) fn from_dynamic(img: DynamicImage) -> Result<RasterImage, anywhere_core::Error> {
    let (w, h) = (img.width(), img.height());
    if img.color().has_alpha() {
        RasterImage::new(w, h, Channels::Rgba, img.into_rgba8().into_raw())
    } else {
        RasterImage::new(w, h, Channels::Rgb, img.into_rgb8().into_raw())
    }
}

fn encode_raw(width: u32, height: u32, color: ExtendedColorType, data: &[u8]) -> Result<Vec<u8>, CodecError> {
    let mut out = Vec::new();
    // Fixed settings so identical pixels always give identical bytes.
    PngEncoder::new_with_quality(Cursor::new(&mut out), CompressionType::Default, PngFilter::Adaptive)
        .write_image(data, width, height, color)
        .map_err(|e| CodecError::Encode(e.to_string()))?;
    Ok(out)
}

pub fn encode_png(image: &RasterImage) -> Result<Vec<u8>, CodecError> {
    let color = match image.channels() {
        Channels::Rgb => ExtendedColorType::Rgb8,
        Channels::Rgba => ExtendedColorType::Rgba8,
    };
    encode_raw(image.width(), image.height(), color, image.as_bytes())
}

/// Single-channel PNG with 0 outside and 255 inside.
pub fn encode_mask_png(mask: &BinaryMask) -> Result<Vec<u8>, CodecError> {
    encode_raw(mask.width(), mask.height(), ExtendedColorType::L8, &mask.to_luma())
}

/// White edges on black.
pub fn encode_edge_png(edges: &EdgeMap) -> Result<Vec<u8>, CodecError> {
    encode_raw(edges.width(), edges.height(), ExtendedColorType::L8, &edges.to_luma())
}

/// Any PNG to a mask: a pixel is inside when its luma is at least 128.
pub fn decode_mask_png(bytes: &[u8]) -> Result<BinaryMask, CodecError> {
    let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)
        .map_err(|e| CodecError::Decode(e.to_string()))?;
    let luma = img.into_luma8();
    let (w, h) = luma.dimensions();
    let bits = luma.into_raw().into_iter().map(|v| v >= 128).collect();
    Ok(BinaryMask::new(w, h, bits)?)
}

pub fn decode_edge_png(bytes: &[u8]) -> Result<EdgeMap, CodecError> {
    decode_mask_png(bytes).map(EdgeMap::from_mask)
}

/// Scales `image` to fit a `resolution` square without distortion and
/// centres it on a transparent RGBA canvas.
pub fn letterbox(image: &RasterImage, resolution: u32) -> Result<RasterImage, CodecError> {
    let (w, h) = letterbox_size(image.width(), image.height(), resolution);
    let rgba = match image.channels() {
        Channels::Rgba => image.clone(),
        Channels::Rgb => anywhere_core::composite::apply_mask_to_alpha(
            image,
            &BinaryMask::full(image.width(), image.height()),
        )?,
    };
    let scaled = if (w, h) == rgba.dimensions() {
        rgba
    } else {
        let buf = RgbaImage::from_raw(rgba.width(), rgba.height(), rgba.into_bytes())
            .expect("buffer length checked by RasterImage");
        let resized = image::imageops::resize(&buf, w, h, FilterType::Triangle);
        RasterImage::new(w, h, Channels::Rgba, resized.into_raw())?
    };
    Ok(place_centered(&scaled, resolution, resolution)?)
}
