//! Binary mask algebra, overlap measurement and square dilation.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{check_dims, Error, Result};
use crate::raster::{BinaryMask, RasterImage};

/// Default alpha cut used to turn an RGBA foreground into a mask.
pub const DEFAULT_ALPHA_THRESHOLD: u8 = 128;

/// Area bookkeeping for a foreground mask against the pseudo-foreground
/// segmented from a generated template.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OverlapStats {
    pub fg_area: u64,
    pub pseudo_area: u64,
    pub intersection_area: u64,
    /// Pseudo-foreground pixels outside the foreground.
    pub excess_area: u64,
    /// `excess_area / pseudo_area`, or 0 when the pseudo mask is empty.
    pub excess_ratio: f64,
}

/// `alpha >= threshold` per pixel.
pub fn binarize_alpha(image: &RasterImage, threshold: u8) -> Result<BinaryMask> {
    if !image.has_alpha() {
        return Err(Error::MissingAlpha);
    }
    let bits = image.pixels().map(|p| p[3] >= threshold).collect();
    BinaryMask::new(image.width(), image.height(), bits)
}

fn zip_with(a: &BinaryMask, b: &BinaryMask, f: impl Fn(bool, bool) -> bool) -> Result<BinaryMask> {
    check_dims(a.dimensions(), b.dimensions())?;
    let bits = a
        .bits()
        .iter()
        .zip(b.bits())
        .map(|(&x, &y)| f(x, y))
        .collect();
    BinaryMask::new(a.width(), a.height(), bits)
}

/// `a AND NOT b`.
pub fn mask_subtract(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    zip_with(a, b, |x, y| x && !y)
}

pub fn mask_intersect(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    zip_with(a, b, |x, y| x && y)
}

pub fn mask_union(a: &BinaryMask, b: &BinaryMask) -> Result<BinaryMask> {
    zip_with(a, b, |x, y| x || y)
}

pub fn overlap_stats(fg: &BinaryMask, pseudo: &BinaryMask) -> Result<OverlapStats> {
    check_dims(fg.dimensions(), pseudo.dimensions())?;
    let (mut fg_area, mut pseudo_area, mut intersection_area) = (0u64, 0u64, 0u64);
    for (&f, &p) in fg.bits().iter().zip(pseudo.bits()) {
        fg_area += f as u64;
        pseudo_area += p as u64;
        intersection_area += (f && p) as u64;
    }
    let excess_area = pseudo_area - intersection_area;
    let excess_ratio = if pseudo_area == 0 {
        0.0
    } else {
        excess_area as f64 / pseudo_area as f64
    };
    Ok(OverlapStats {
        fg_area,
        pseudo_area,
        intersection_area,
        excess_area,
        excess_ratio,
    })
}

/// Dilation by a `(2r+1)`-sided square: a pixel is set when any input bit
/// lies within Chebyshev distance `radius`.
///
/// The square element is separable, so this runs as a horizontal pass then
/// a vertical pass, each counting set bits in a sliding window.
pub fn dilate(mask: &BinaryMask, radius: u32) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let r = radius as usize;

    let mut horizontal = vec![false; w * h];
    for y in 0..h {
        let row = &mask.bits()[y * w..(y + 1) * w];
        sliding_any(row, r, &mut horizontal[y * w..(y + 1) * w]);
    }

    let mut out = vec![false; w * h];
    let mut column = Vec::with_capacity(h);
    let mut column_out = vec![false; h];
    for x in 0..w {
        column.clear();
        column.extend((0..h).map(|y| horizontal[y * w + x]));
        sliding_any(&column, r, &mut column_out);
        for (y, &b) in column_out.iter().enumerate() {
            out[y * w + x] = b;
        }
    }
    BinaryMask::new(mask.width(), mask.height(), out).expect("dimensions preserved")
}

fn sliding_any(input: &[bool], r: usize, out: &mut [bool]) {
    let n = input.len();
    // Running count of set bits in [i - r, i + r] clipped to the line.
    let mut count: usize = input.iter().take(r.min(n)).filter(|&&b| b).count();
    for i in 0..n {
        if i + r < n && input[i + r] {
            count += 1;
        }
        if i > r && input[i - r - 1] {
            count -= 1;
        }
        out[i] = count > 0;
    }
}
