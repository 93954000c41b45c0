//! Pure building blocks of the anywhere foreground-conditioned inpainting
//! engine.
//!
//! Everything here is deterministic and free of IO: raster and mask
//! containers, mask algebra and dilation, Canny edges, alpha compositing,
//! over-imagination detection, the language-agent prompt templates with
//! their reply schemas, and the analyzer verdict logic. The crate needs only
//! `alloc`.
#![no_std]

extern crate alloc;

pub mod analysis;
pub mod canny;
pub mod composite;
pub mod detect;
pub mod error;
pub mod mask;
pub mod prompt;
pub mod raster;
pub mod schema;

pub use error::{Error, Result};
pub use raster::{BinaryMask, Channels, EdgeMap, RasterImage};
