use alloc::string::String;

/// Errors raised by the pure raster, mask and prompt routines.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("image has no alpha channel")]
    MissingAlpha,
    #[error("dimension mismatch: {left_width}x{left_height} vs {right_width}x{right_height}")]
    DimensionMismatch {
        left_width: u32,
        left_height: u32,
        right_width: u32,
        right_height: u32,
    },
    #[error("invalid canny thresholds: low {low} > high {high}")]
    InvalidThresholds { low: f32, high: f32 },
    #[error("invalid buffer: {0}")]
    InvalidBuffer(String),
    #[error("{0}")]
    Schema(#[from] crate::schema::SchemaError),
    #[error("invalid ranking: {0}")]
    InvalidRanking(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn check_dims(a: (u32, u32), b: (u32, u32)) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            left_width: a.0,
            left_height: a.1,
            right_width: b.0,
            right_height: b.1,
        })
    }
}
