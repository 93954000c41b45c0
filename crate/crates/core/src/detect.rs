//! Over-imagination detection: does the pseudo-foreground segmented from a
//! generated template spill outside the real foreground?

use crate::error::Result;
use crate::mask::{dilate, mask_subtract, overlap_stats, OverlapStats};
use crate::raster::BinaryMask;

/// Fraction of the pseudo-foreground allowed outside the foreground.
pub const DEFAULT_TAU: f64 = 0.01;
/// Repaint-mask margin at the reference resolution.
pub const DEFAULT_DILATE_RADIUS: u32 = 8;
pub const REFERENCE_RESOLUTION: u32 = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    pub stats: OverlapStats,
    pub triggered: bool,
    /// Dilated `pseudo \ fg`, present only when triggered.
    pub repaint_mask: Option<BinaryMask>,
}

impl DetectionResult {
    pub fn repaint_mask(&self) -> Option<&BinaryMask> {
        self.repaint_mask.as_ref()
    }
}

/// Scales a margin given at [`REFERENCE_RESOLUTION`] to `resolution`,
/// rounding to the nearest pixel.
pub fn scaled_radius(radius_at_reference: u32, resolution: u32) -> u32 {
    let num = radius_at_reference as u64 * resolution as u64;
    ((num + REFERENCE_RESOLUTION as u64 / 2) / REFERENCE_RESOLUTION as u64) as u32
}

/// Compares masks and, when `excess_ratio > tau`, builds the repaint mask as
/// `dilate(pseudo \ fg, margin_radius)`.
pub fn detect_over_imagination(
    fg_mask: &BinaryMask,
    pseudo_mask: &BinaryMask,
    tau: f64,
    margin_radius: u32,
) -> Result<DetectionResult> {
    let stats = overlap_stats(fg_mask, pseudo_mask)?;
    let triggered = stats.excess_ratio > tau;
    let repaint_mask = if triggered {
        Some(dilate(&mask_subtract(pseudo_mask, fg_mask)?, margin_radius))
    } else {
        None
    };
    Ok(DetectionResult {
        stats,
        triggered,
        repaint_mask,
    })
}
