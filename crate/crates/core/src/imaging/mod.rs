//! Rasters, label maps, HSI conversion, patch sampling and tile geometry.

mod hsi;
pub mod io;
mod patch;
mod raster;
mod tile;

pub use hsi::{rgb_to_hsi, HsiImage, HsiPixel};
pub use patch::{extract_patch, sample_patches, sample_patches_with_filter, PatchSpec};
pub use raster::{relabel_sequential, BinaryMask, LabelMap, RasterImage};
pub use tile::{plan_tiles, stitch_tiles, TilePlan};
