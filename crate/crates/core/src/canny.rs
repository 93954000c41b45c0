//! Canny edge extraction.
//!
//! Stages: flatten RGBA over white, Rec.601 luma, 5x5 Gaussian (sigma 1.4),
//! 3x3 Sobel, non-maximum suppression along four quantized directions, and
//! double-threshold hysteresis over 8-connected neighbours.
//!
//! Gradient magnitudes are `sqrt(gx^2 + gy^2)` on 0..=255 intensities, so a
//! single Sobel component tops out at `4 * 255`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::raster::{BinaryMask, EdgeMap, RasterImage};

pub const GAUSSIAN_SIGMA: f32 = 1.4;
pub const DEFAULT_LOW_THRESHOLD: f32 = 100.0;
pub const DEFAULT_HIGH_THRESHOLD: f32 = 200.0;

const KERNEL_RADIUS: usize = 2;
// tan(22.5 deg) and tan(67.5 deg)
const TAN_22_5: f32 = 0.414_213_57;
const TAN_67_5: f32 = 2.414_213_6;
// Neighbours within this relative margin count as ties in suppression, so
// rounding noise cannot pick one side of a symmetric edge.
const TIE_TOLERANCE: f32 = 1e-4;

/// Luma plane after flattening any alpha over white.
pub fn grayscale(image: &RasterImage) -> Vec<f32> {
    image
        .pixels()
        .map(|p| {
            let (r, g, b) = if p.len() == 4 {
                let a = p[3] as f32 / 255.0;
                let over_white = |c: u8| c as f32 * a + 255.0 * (1.0 - a);
                (over_white(p[0]), over_white(p[1]), over_white(p[2]))
            } else {
                (p[0] as f32, p[1] as f32, p[2] as f32)
            };
            0.299 * r + 0.587 * g + 0.114 * b
        })
        .collect()
}

fn gaussian_kernel() -> [f32; 2 * KERNEL_RADIUS + 1] {
    let mut k = [0.0f32; 2 * KERNEL_RADIUS + 1];
    let two_sigma_sq = 2.0 * GAUSSIAN_SIGMA * GAUSSIAN_SIGMA;
    for (i, w) in k.iter_mut().enumerate() {
        let d = i as f32 - KERNEL_RADIUS as f32;
        *w = libm::expf(-(d * d) / two_sigma_sq);
    }
    let sum: f32 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

fn clamp_index(i: isize, len: usize) -> usize {
    i.clamp(0, len as isize - 1) as usize
}

/// Separable 5x5 Gaussian with replicated borders.
fn smooth(plane: &[f32], w: usize, h: usize) -> Vec<f32> {
    let k = gaussian_kernel();
    let r = KERNEL_RADIUS as isize;
    let mut tmp = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                let sx = clamp_index(x as isize + j as isize - r, w);
                acc += kv * plane[y * w + sx];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (j, kv) in k.iter().enumerate() {
                let sy = clamp_index(y as isize + j as isize - r, h);
                acc += kv * tmp[sy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

struct Gradients {
    gx: Vec<f32>,
    gy: Vec<f32>,
    magnitude: Vec<f32>,
}

fn sobel(plane: &[f32], w: usize, h: usize) -> Gradients {
    let mut gx = vec![0.0f32; w * h];
    let mut gy = vec![0.0f32; w * h];
    let mut magnitude = vec![0.0f32; w * h];
    let at = |x: isize, y: isize| plane[clamp_index(y, h) * w + clamp_index(x, w)];
    for y in 0..h {
        for x in 0..w {
            let (xi, yi) = (x as isize, y as isize);
            let dx = (at(xi + 1, yi - 1) + 2.0 * at(xi + 1, yi) + at(xi + 1, yi + 1))
                - (at(xi - 1, yi - 1) + 2.0 * at(xi - 1, yi) + at(xi - 1, yi + 1));
            let dy = (at(xi - 1, yi + 1) + 2.0 * at(xi, yi + 1) + at(xi + 1, yi + 1))
                - (at(xi - 1, yi - 1) + 2.0 * at(xi, yi - 1) + at(xi + 1, yi - 1));
            let i = y * w + x;
            gx[i] = dx;
            gy[i] = dy;
            magnitude[i] = libm::sqrtf(dx * dx + dy * dy);
        }
    }
    Gradients { gx, gy, magnitude }
}

/// Neighbour offset along the gradient, quantized to 0/45/90/135 degrees.
fn gradient_step(gx: f32, gy: f32) -> (isize, isize) {
    let (ax, ay) = (libm::fabsf(gx), libm::fabsf(gy));
    if ay <= ax * TAN_22_5 {
        (1, 0)
    } else if ay >= ax * TAN_67_5 {
        (0, 1)
    } else if (gx > 0.0) == (gy > 0.0) {
        (1, 1)
    } else {
        (1, -1)
    }
}

/// Thinned magnitudes; the outermost pixel ring is always suppressed.
fn non_maximum_suppression(g: &Gradients, w: usize, h: usize) -> Vec<f32> {
    let mut out = vec![0.0f32; w * h];
    if w < 3 || h < 3 {
        return out;
    }
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            let m = g.magnitude[i];
            if m <= 0.0 {
                continue;
            }
            let (sx, sy) = gradient_step(g.gx[i], g.gy[i]);
            let a = g.magnitude[(y as isize + sy) as usize * w + (x as isize + sx) as usize];
            let b = g.magnitude[(y as isize - sy) as usize * w + (x as isize - sx) as usize];
            let floor = 1.0 - TIE_TOLERANCE;
            if m >= a * floor && m >= b * floor {
                out[i] = m;
            }
        }
    }
    out
}

fn hysteresis(thin: &[f32], w: usize, h: usize, low: f32, high: f32) -> Vec<bool> {
    let mut edges = vec![false; w * h];
    let mut stack = Vec::new();
    for (i, &m) in thin.iter().enumerate() {
        if m > 0.0 && m >= high && !edges[i] {
            edges[i] = true;
            stack.push(i);
            while let Some(j) = stack.pop() {
                let (x, y) = ((j % w) as isize, (j / w) as isize);
                for ny in y - 1..=y + 1 {
                    for nx in x - 1..=x + 1 {
                        if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                            continue;
                        }
                        let k = ny as usize * w + nx as usize;
                        if !edges[k] && thin[k] > 0.0 && thin[k] >= low {
                            edges[k] = true;
                            stack.push(k);
                        }
                    }
                }
            }
        }
    }
    edges
}

/// Canny edges of `image` with hysteresis thresholds on the Sobel magnitude.
pub fn canny_edges(image: &RasterImage, low_threshold: f32, high_threshold: f32) -> Result<EdgeMap> {
    if low_threshold.is_nan() || high_threshold.is_nan() || low_threshold > high_threshold {
        return Err(Error::InvalidThresholds {
            low: low_threshold,
            high: high_threshold,
        });
    }
    let (w, h) = (image.width() as usize, image.height() as usize);
    let gray = grayscale(image);
    let blurred = smooth(&gray, w, h);
    let gradients = sobel(&blurred, w, h);
    let thin = non_maximum_suppression(&gradients, w, h);
    let bits = hysteresis(&thin, w, h, low_threshold, high_threshold);
    Ok(EdgeMap::from_mask(BinaryMask::new(
        image.width(),
        image.height(),
        bits,
    )?))
}
