//! Alpha compositing and canvas placement.

use alloc::vec::Vec;

use crate::error::{check_dims, Error, Result};
use crate::raster::{BinaryMask, Channels, RasterImage};

/// `round_half_up((fg * a + bg * (255 - a)) / 255)` in integer arithmetic.
#[inline]
pub fn blend_channel(fg: u8, bg: u8, alpha: u8) -> u8 {
    let a = alpha as u32;
    let num = fg as u32 * a + bg as u32 * (255 - a);
    ((2 * num + 255) / 510) as u8
}

/// Pastes an RGBA foreground over an RGB background of the same size.
pub fn composite_copy_paste(foreground: &RasterImage, background: &RasterImage) -> Result<RasterImage> {
    if !foreground.has_alpha() {
        return Err(Error::MissingAlpha);
    }
    check_dims(foreground.dimensions(), background.dimensions())?;
    let bg = background.to_rgb();
    let mut out = Vec::with_capacity(bg.as_bytes().len());
    for (f, b) in foreground.pixels().zip(bg.pixels()) {
        let a = f[3];
        out.extend((0..3).map(|c| blend_channel(f[c], b[c], a)));
    }
    RasterImage::new(bg.width(), bg.height(), Channels::Rgb, out)
}

/// Replaces the alpha channel of `image` with 0 outside `mask`, keeping the
/// original alpha inside. RGB inputs gain an opaque alpha first.
pub fn apply_mask_to_alpha(image: &RasterImage, mask: &BinaryMask) -> Result<RasterImage> {
    check_dims(image.dimensions(), mask.dimensions())?;
    let mut out = Vec::with_capacity(image.width() as usize * image.height() as usize * 4);
    for (p, &inside) in image.pixels().zip(mask.bits()) {
        let alpha = if p.len() == 4 { p[3] } else { 255 };
        out.extend_from_slice(&[p[0], p[1], p[2], if inside { alpha } else { 0 }]);
    }
    RasterImage::new(image.width(), image.height(), Channels::Rgba, out)
}

/// Centres `image` on a transparent RGBA canvas. The image must fit.
pub fn place_centered(image: &RasterImage, canvas_width: u32, canvas_height: u32) -> Result<RasterImage> {
    if image.width() > canvas_width || image.height() > canvas_height {
        return Err(Error::DimensionMismatch {
            left_width: image.width(),
            left_height: image.height(),
            right_width: canvas_width,
            right_height: canvas_height,
        });
    }
    let ox = (canvas_width - image.width()) / 2;
    let oy = (canvas_height - image.height()) / 2;
    RasterImage::from_fn(canvas_width, canvas_height, Channels::Rgba, |x, y| {
        if x < ox || y < oy || x >= ox + image.width() || y >= oy + image.height() {
            return [0, 0, 0, 0];
        }
        let p = image.pixel(x - ox, y - oy);
        [p[0], p[1], p[2], if p.len() == 4 { p[3] } else { 255 }]
    })
}

/// Size of `width x height` scaled to fit inside `target x target`,
/// preserving aspect ratio (each side at least one pixel).
pub fn letterbox_size(width: u32, height: u32, target: u32) -> (u32, u32) {
    if width >= height {
        let h = (height as u64 * target as u64 + width as u64 / 2) / width as u64;
        (target, (h as u32).max(1))
    } else {
        let w = (width as u64 * target as u64 + height as u64 / 2) / height as u64;
        ((w as u32).max(1), target)
    }
}
