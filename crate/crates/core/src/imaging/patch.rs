use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{rgb_to_hsi, RasterImage};

/// Square crop location: top-left `(row, col)` and side length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatchSpec {
    pub row: usize,
    pub col: usize,
    pub size: usize,
}

impl PatchSpec {
    pub fn new(row: usize, col: usize, size: usize) -> Self {
        Self { row, col, size }
    }

    pub fn fits(&self, height: usize, width: usize) -> bool {
        self.size > 0 && self.row + self.size <= height && self.col + self.size <= width
    }
}

/// Draws `count` patch positions uniformly over all legal top-left corners.
pub fn sample_patches(
    image: &RasterImage,
    size: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<PatchSpec>> {
    sample_patches_with_filter(image, size, count, seed, None)
}

/// Like [`sample_patches`], optionally rejecting patches whose mean HSI
/// saturation is below `min_saturation` (a crude tissue detector).
pub fn sample_patches_with_filter(
    image: &RasterImage,
    size: usize,
    count: usize,
    seed: u64,
    min_saturation: Option<f64>,
) -> Result<Vec<PatchSpec>> {
    let (h, w) = (image.height(), image.width());
    if size == 0 || size > h || size > w {
        return Err(Error::invalid(format!(
            "patch size {size} does not fit a {h}x{w} image"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let Some(min_sat) = min_saturation else {
        return Ok((0..count)
            .map(|_| {
                PatchSpec::new(
                    rng.gen_range(0..=h - size),
                    rng.gen_range(0..=w - size),
                    size,
                )
            })
            .collect());
    };

    let hsi = rgb_to_hsi(&image.to_rgb())?;
    let mut out = Vec::with_capacity(count);
    let max_attempts = count.saturating_mul(100).max(100);
    let mut attempts = 0;
    while out.len() < count {
        if attempts == max_attempts {
            return Err(Error::Data(format!(
                "tissue filter accepted only {} of {count} patches after {attempts} draws",
                out.len()
            )));
        }
        attempts += 1;
        let spec = PatchSpec::new(
            rng.gen_range(0..=h - size),
            rng.gen_range(0..=w - size),
            size,
        );
        let mut sum = 0.0;
        for r in spec.row..spec.row + size {
            for c in spec.col..spec.col + size {
                sum += hsi.get(r, c).saturation;
            }
        }
        if sum / (size * size) as f64 >= min_sat {
            out.push(spec);
        }
    }
    Ok(out)
}

pub fn extract_patch(image: &RasterImage, spec: PatchSpec) -> Result<RasterImage> {
    if !spec.fits(image.height(), image.width()) {
        return Err(Error::invalid(format!(
            "patch {spec:?} lies outside a {}x{} image",
            image.height(),
            image.width()
        )));
    }
    let ch = image.channels();
    let row_len = spec.size * ch;
    let mut samples = Vec::with_capacity(spec.size * row_len);
    for r in spec.row..spec.row + spec.size {
        let start = (r * image.width() + spec.col) * ch;
        samples.extend_from_slice(&image.samples()[start..start + row_len]);
    }
    RasterImage::new(spec.size, spec.size, ch, samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    fn random_image(h: usize, w: usize, ch: usize, seed: u64) -> RasterImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut samples = vec![0u8; h * w * ch];
        rng.fill_bytes(&mut samples);
        RasterImage::new(h, w, ch, samples).unwrap()
    }

    #[test]
    fn sampling_is_repeatable_and_in_bounds() {
        let img = RasterImage::filled(512, 512, 3, 0).unwrap();
        let a = sample_patches(&img, 256, 4, 7).unwrap();
        let b = sample_patches(&img, 256, 4, 7).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(a, b);
        assert!(a.iter().all(|s| s.fits(512, 512)));
    }

    #[test]
    fn exact_fit_has_one_position() {
        let img = RasterImage::filled(256, 256, 3, 0).unwrap();
        assert_eq!(
            sample_patches(&img, 256, 1, 0).unwrap(),
            vec![PatchSpec::new(0, 0, 256)]
        );
    }

    #[test]
    fn offsets_stay_in_legal_range() {
        let img = RasterImage::filled(300, 300, 3, 0).unwrap();
        let specs = sample_patches(&img, 256, 1000, 11).unwrap();
        assert_eq!(specs.len(), 1000);
        assert!(specs.iter().all(|s| s.row <= 44 && s.col <= 44));
    }

    #[test]
    fn oversize_patch_is_rejected() {
        let img = RasterImage::filled(100, 300, 3, 0).unwrap();
        assert!(matches!(
            sample_patches(&img, 128, 1, 0),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn tissue_filter_rejects_blank_images() {
        let blank = RasterImage::filled(64, 64, 3, 255).unwrap();
        assert!(sample_patches_with_filter(&blank, 32, 2, 0, Some(0.1)).is_err());
        let brown = RasterImage::filled_rgb(64, 64, [130, 80, 40]);
        assert_eq!(
            sample_patches_with_filter(&brown, 32, 3, 0, Some(0.1))
                .unwrap()
                .len(),
            3
        );
    }

    #[test]
    fn whole_image_crop_is_identity() {
        let img = random_image(16, 16, 3, 1);
        assert_eq!(extract_patch(&img, PatchSpec::new(0, 0, 16)).unwrap(), img);
    }

    #[test]
    fn single_pixel_crop() {
        let img = RasterImage::new(2, 2, 1, vec![255, 0, 0, 255]).unwrap();
        let p = extract_patch(&img, PatchSpec::new(0, 0, 1)).unwrap();
        assert_eq!(p.samples(), &[255]);
    }

    #[test]
    fn crop_matches_naive_copy() {
        let img = random_image(8, 8, 3, 2);
        let spec = PatchSpec::new(2, 3, 4);
        let got = extract_patch(&img, spec).unwrap();
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(got.pixel(r, c), img.pixel(spec.row + r, spec.col + c));
            }
        }
    }

    #[test]
    fn out_of_bounds_crop_fails() {
        let img = random_image(8, 8, 1, 3);
        assert!(extract_patch(&img, PatchSpec::new(5, 0, 4)).is_err());
    }
}
