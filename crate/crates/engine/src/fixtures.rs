//! Synthetic background-removed foregrounds drawn in code, so tests and
//! `selftest` need no binary assets.

use anywhere_core::{Channels, RasterImage};

/// Object silhouettes available to [`foreground`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Chair,
    Cup,
    Lamp,
    Crate,
    Bottle,
}

impl Shape {
    pub const ALL: [Shape; 5] = [Shape::Chair, Shape::Cup, Shape::Lamp, Shape::Crate, Shape::Bottle];

    pub fn name(self) -> &'static str {
        match self {
            Shape::Chair => "chair",
            Shape::Cup => "cup",
            Shape::Lamp => "lamp",
            Shape::Crate => "crate",
            Shape::Bottle => "bottle",
        }
    }
}

const PALETTE: [[u8; 3]; 5] = [[139, 90, 43], [200, 40, 40], [40, 70, 200], [60, 150, 70], [215, 190, 60]];

fn rect(x: f64, y: f64, x0: f64, y0: f64, x1: f64, y1: f64) -> bool {
    x >= x0 && x <= x1 && y >= y0 && y <= y1
}

/// Whether normalised point (x, y) in [0,1]² lies on the object.
fn inside(shape: Shape, x: f64, y: f64) -> bool {
    match shape {
        Shape::Chair => {
            rect(x, y, 0.25, 0.10, 0.35, 0.60)
                || rect(x, y, 0.25, 0.50, 0.75, 0.60)
                || rect(x, y, 0.25, 0.60, 0.32, 0.92)
                || rect(x, y, 0.68, 0.60, 0.75, 0.92)
        }
        Shape::Cup => {
            let body = rect(x, y, 0.25, 0.30, 0.65, 0.85);
            let (dx, dy) = (x - 0.68, y - 0.55);
            let r = (dx * dx + dy * dy).sqrt();
            body || (x > 0.65 && (0.08..=0.15).contains(&r))
        }
        Shape::Lamp => {
            let shade = (0.12..=0.40).contains(&y) && (x - 0.5).abs() <= 0.12 + 0.5 * (y - 0.12);
            shade || rect(x, y, 0.47, 0.40, 0.53, 0.82) || rect(x, y, 0.32, 0.82, 0.68, 0.90)
        }
        Shape::Crate => rect(x, y, 0.18, 0.28, 0.82, 0.86),
        Shape::Bottle => {
            rect(x, y, 0.36, 0.42, 0.64, 0.92)
                || rect(x, y, 0.45, 0.12, 0.55, 0.42)
                || (y > 0.32 && y <= 0.42 && (x - 0.5).abs() <= 0.05 + 0.9 * (y - 0.32))
        }
    }
}

/// A `width x height` RGBA cut-out: opaque shaded object, transparent
/// elsewhere. Deterministic in its arguments.
pub fn foreground(shape: Shape, colour: [u8; 3], width: u32, height: u32) -> RasterImage {
    RasterImage::from_fn(width, height, Channels::Rgba, |x, y| {
        let (u, v) = ((x as f64 + 0.5) / width as f64, (y as f64 + 0.5) / height as f64);
        if !inside(shape, u, v) {
            return [0, 0, 0, 0];
        }
        // Mild vertical shading so the object is not flat.
        let shade = 1.0 - 0.25 * v;
        let c = colour.map(|c| (c as f64 * shade).round() as u8);
        [c[0], c[1], c[2], 255]
    })
    .expect("positive dimensions")
}

/// The standard brown chair.
pub fn chair(size: u32) -> RasterImage {
    foreground(Shape::Chair, PALETTE[0], size, size)
}

pub fn cup(size: u32) -> RasterImage {
    foreground(Shape::Cup, [235, 235, 225], size, size)
}

/// Twenty-five named foregrounds: every shape in five colours, with the
/// canvas aspect varying per colour.
pub fn fixture_set(size: u32) -> Vec<(String, RasterImage)> {
    let mut out = Vec::with_capacity(25);
    for shape in Shape::ALL {
        for (i, colour) in PALETTE.iter().enumerate() {
            let (w, h) = match i % 3 {
                0 => (size, size),
                1 => (size, size * 3 / 4),
                _ => (size * 3 / 4, size),
            };
            out.push((format!("{}-{i}", shape.name()), foreground(shape, *colour, w, h)));
        }
    }
    out
}
