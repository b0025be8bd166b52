//! Synthetic images with known geometry, used by tests, benchmarks and the
//! toy translation run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::imaging::{LabelMap, RasterImage};

/// Filled ellipse with center `(row, col)` and semi-axes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub row: f64,
    pub col: f64,
    pub radius_row: f64,
    pub radius_col: f64,
}

impl Ellipse {
    pub fn disc(row: f64, col: f64, radius: f64) -> Self {
        Self {
            row,
            col,
            radius_row: radius,
            radius_col: radius,
        }
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        let dr = (row as f64 - self.row) / self.radius_row;
        let dc = (col as f64 - self.col) / self.radius_col;
        dr * dr + dc * dc <= 1.0
    }
}

/// Paints shapes of one color over a uniform background.
pub fn paint(height: usize, width: usize, background: [u8; 3], shapes: &[(Ellipse, [u8; 3])]) -> RasterImage {
    let mut img = RasterImage::filled_rgb(height, width, background);
    for r in 0..height {
        for c in 0..width {
            if let Some((_, color)) = shapes.iter().rev().find(|(e, _)| e.contains(r, c)) {
                img.pixel_mut(r, c).copy_from_slice(color);
            }
        }
    }
    img
}

/// Label map with one instance per shape (later shapes win on overlap).
pub fn label_shapes(height: usize, width: usize, shapes: &[Ellipse]) -> LabelMap {
    let mut map = LabelMap::empty(height, width);
    for r in 0..height {
        for c in 0..width {
            if let Some(i) = shapes.iter().rposition(|e| e.contains(r, c)) {
                map.set(r, c, i as u32 + 1);
            }
        }
    }
    map
}

/// Hematoxylin-like dark nuclei on a light background.
pub const NUCLEUS_COLOR: [u8; 3] = [70, 50, 120];
pub const BACKGROUND_COLOR: [u8; 3] = [235, 225, 235];
/// DAB-brown and hematoxylin-blue colors for positivity tests.
pub const DAB_BROWN: [u8; 3] = [130, 80, 40];
pub const HEMATOXYLIN_BLUE: [u8; 3] = [60, 60, 150];

/// 128x128 image with five separated dark discs (radius 8) and their geometry.
pub fn five_discs() -> (RasterImage, Vec<Ellipse>) {
    let discs: Vec<Ellipse> = [(24.0, 24.0), (24.0, 100.0), (64.0, 64.0), (104.0, 24.0), (104.0, 100.0)]
        .iter()
        .map(|&(r, c)| Ellipse::disc(r, c, 8.0))
        .collect();
    let shapes: Vec<_> = discs.iter().map(|&d| (d, NUCLEUS_COLOR)).collect();
    (paint(128, 128, BACKGROUND_COLOR, &shapes), discs)
}

/// Two radius-10 discs whose centers are 16 px apart (4 px overlap).
pub fn touching_discs() -> (RasterImage, Vec<Ellipse>) {
    let discs = vec![Ellipse::disc(32.0, 24.0, 10.0), Ellipse::disc(32.0, 40.0, 10.0)];
    let shapes: Vec<_> = discs.iter().map(|&d| (d, NUCLEUS_COLOR)).collect();
    (paint(64, 64, BACKGROUND_COLOR, &shapes), discs)
}

/// Palette of one toy stain domain.
#[derive(Debug, Clone, Copy)]
pub struct Palette {
    pub background: [u8; 3],
    pub blob: [u8; 3],
}

/// IHC-like toy domain: dark blobs on pink.
pub const TOY_IHC: Palette = Palette {
    background: [236, 180, 200],
    blob: [95, 45, 60],
};

/// H&E-like toy domain: purple blobs on white.
pub const TOY_HE: Palette = Palette {
    background: [245, 242, 245],
    blob: [115, 60, 160],
};

/// Random layout of 2-4 well-separated ellipses on a `size x size` canvas.
pub fn blob_layout(size: usize, seed: u64) -> Vec<Ellipse> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let count = rng.gen_range(2..=4);
    let margin = 9.0;
    let mut blobs: Vec<Ellipse> = Vec::new();
    let mut attempts = 0;
    while blobs.len() < count && attempts < 1000 {
        attempts += 1;
        let row = rng.gen_range(margin..size as f64 - margin);
        let col = rng.gen_range(margin..size as f64 - margin);
        if blobs
            .iter()
            .any(|b| ((b.row - row).powi(2) + (b.col - col).powi(2)).sqrt() < 20.0)
        {
            continue;
        }
        blobs.push(Ellipse {
            row,
            col,
            radius_row: rng.gen_range(4.0..7.0),
            radius_col: rng.gen_range(4.0..7.0),
        });
    }
    blobs
}

/// Renders a layout in a palette with mild per-pixel noise.
pub fn render_blobs(size: usize, blobs: &[Ellipse], palette: Palette, seed: u64) -> RasterImage {
    let shapes: Vec<_> = blobs.iter().map(|&b| (b, palette.blob)).collect();
    let mut img = paint(size, size, palette.background, &shapes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for v in img.samples_mut() {
        *v = (*v as i32 + rng.gen_range(-6..=6)).clamp(0, 255) as u8;
    }
    img
}

/// Unpaired toy dataset: `count` IHC-like and `count` H&E-like patches drawn
/// from independent layouts.
pub fn toy_domains(size: usize, count: usize, seed: u64) -> (Vec<RasterImage>, Vec<RasterImage>) {
    let a = (0..count as u64)
        .map(|i| {
            let s = seed.wrapping_mul(1_000_003).wrapping_add(i);
            render_blobs(size, &blob_layout(size, s), TOY_IHC, s)
        })
        .collect();
    let b = (0..count as u64)
        .map(|i| {
            let s = seed.wrapping_mul(1_000_003).wrapping_add(1_000_000 + i);
            render_blobs(size, &blob_layout(size, s), TOY_HE, s)
        })
        .collect();
    (a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layouts_are_separated_and_inside() {
        for seed in 0..50 {
            let blobs = blob_layout(64, seed);
            assert!((2..=4).contains(&blobs.len()));
            for (i, a) in blobs.iter().enumerate() {
                assert!(a.row - a.radius_row >= 0.0 && a.row + a.radius_row < 64.0);
                for b in &blobs[i + 1..] {
                    assert!(((a.row - b.row).powi(2) + (a.col - b.col).powi(2)).sqrt() >= 20.0);
                }
            }
        }
    }

    #[test]
    fn label_shapes_counts_instances() {
        let (_, discs) = five_discs();
        assert_eq!(label_shapes(128, 128, &discs).instance_count(), 5);
    }
}
