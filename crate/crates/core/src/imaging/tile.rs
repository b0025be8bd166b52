use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{PatchSpec, RasterImage};

/// Equal-size square tiles covering a `height x width` source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TilePlan {
    pub tiles: Vec<PatchSpec>,
    pub overlap: usize,
    pub height: usize,
    pub width: usize,
}

impl TilePlan {
    pub fn tile_size(&self) -> usize {
        self.tiles.first().map_or(0, |t| t.size)
    }
}

/// Tile starts along one axis; the last tile is shifted inward to end at the border.
fn axis_starts(len: usize, tile: usize, overlap: usize) -> Vec<usize> {
    let stride = tile - overlap;
    let mut starts = vec![0];
    let mut next = 0;
    while next + tile < len {
        next = (next + stride).min(len - tile);
        starts.push(next);
    }
    starts
}

pub fn plan_tiles(height: usize, width: usize, tile_size: usize, overlap: usize) -> Result<TilePlan> {
    if tile_size == 0 || tile_size > height || tile_size > width {
        return Err(Error::invalid(format!(
            "tile size {tile_size} does not fit a {height}x{width} source"
        )));
    }
    if overlap >= tile_size {
        return Err(Error::invalid(format!(
            "overlap {overlap} must be smaller than tile size {tile_size}"
        )));
    }
    let rows = axis_starts(height, tile_size, overlap);
    let cols = axis_starts(width, tile_size, overlap);
    let tiles = rows
        .iter()
        .flat_map(|&r| cols.iter().map(move |&c| PatchSpec::new(r, c, tile_size)))
        .collect();
    Ok(TilePlan {
        tiles,
        overlap,
        height,
        width,
    })
}

/// Reassembles tiles; pixels covered more than once get the rounded mean.
pub fn stitch_tiles(plan: &TilePlan, tiles: &[RasterImage]) -> Result<RasterImage> {
    if tiles.len() != plan.tiles.len() {
        return Err(Error::invalid(format!(
            "plan has {} tiles but {} images were supplied",
            plan.tiles.len(),
            tiles.len()
        )));
    }
    let channels = tiles.first().map_or(3, |t| t.channels());
    let mut sums = vec![0u32; plan.height * plan.width * channels];
    let mut counts = vec![0u32; plan.height * plan.width];
    for (spec, tile) in plan.tiles.iter().zip(tiles) {
        if tile.height() != spec.size || tile.width() != spec.size || tile.channels() != channels {
            return Err(Error::invalid(format!(
                "tile is {}x{}x{}, plan expects {}x{}x{channels}",
                tile.height(),
                tile.width(),
                tile.channels(),
                spec.size,
                spec.size
            )));
        }
        for r in 0..spec.size {
            for c in 0..spec.size {
                let dst = (spec.row + r) * plan.width + spec.col + c;
                counts[dst] += 1;
                for (k, &v) in tile.pixel(r, c).iter().enumerate() {
                    sums[dst * channels + k] += v as u32;
                }
            }
        }
    }
    let samples = sums
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let n = counts[i / channels].max(1);
            ((s + n / 2) / n) as u8
        })
        .collect();
    RasterImage::new(plan.height, plan.width, channels, samples)
}
