use crate::error::{Error, Result};
use crate::imaging::RasterImage;

/// Hue in degrees `[0, 360)`, saturation and intensity in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsiPixel {
    pub hue: f64,
    pub saturation: f64,
    pub intensity: f64,
}

impl HsiPixel {
    /// Standard HSI conversion. Achromatic pixels (including black) get `S = 0`
    /// and `H = 0`.
    pub fn from_rgb(r: u8, g: u8, b: u8) -> Self {
        let (rf, gf, bf) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
        let sum = rf + gf + bf;
        let intensity = sum / 3.0;
        if r == g && g == b {
            return Self {
                hue: 0.0,
                saturation: 0.0,
                intensity,
            };
        }
        let min = rf.min(gf).min(bf);
        let saturation = (1.0 - 3.0 * min / sum).clamp(0.0, 1.0);

        let num = 0.5 * ((rf - gf) + (rf - bf));
        let den = ((rf - gf) * (rf - gf) + (rf - bf) * (gf - bf)).sqrt();
        let theta = (num / den).clamp(-1.0, 1.0).acos().to_degrees();
        let mut hue = if bf <= gf { theta } else { 360.0 - theta };
        if hue >= 360.0 {
            hue -= 360.0;
        }
        Self {
            hue,
            saturation,
            intensity,
        }
    }
}

/// Per-pixel HSI values of an RGB image, row-major.
#[derive(Debug, Clone)]
pub struct HsiImage {
    pub height: usize,
    pub width: usize,
    pub pixels: Vec<HsiPixel>,
}

impl HsiImage {
    pub fn get(&self, row: usize, col: usize) -> HsiPixel {
        self.pixels[row * self.width + col]
    }
}

pub fn rgb_to_hsi(image: &RasterImage) -> Result<HsiImage> {
    if image.channels() != 3 {
        return Err(Error::invalid(format!(
            "HSI conversion needs 3 channels, got {}",
            image.channels()
        )));
    }
    let pixels = image
        .samples()
        .chunks_exact(3)
        .map(|p| HsiPixel::from_rgb(p[0], p[1], p[2]))
        .collect();
    Ok(HsiImage {
        height: image.height(),
        width: image.width(),
        pixels,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn gray_is_achromatic() {
        let p = HsiPixel::from_rgb(128, 128, 128);
        assert_eq!(p.hue, 0.0);
        assert_eq!(p.saturation, 0.0);
        assert!((p.intensity - 128.0 / 255.0).abs() < 1e-12);
        assert!((p.intensity - 0.502).abs() < 1e-3);
    }

    #[test]
    fn black_has_zero_saturation() {
        let p = HsiPixel::from_rgb(0, 0, 0);
        assert_eq!((p.hue, p.saturation, p.intensity), (0.0, 0.0, 0.0));
    }

    #[test]
    fn pure_red() {
        // num = 1, den = 1 -> theta = 0; min = 0 -> S = 1; I = 1/3
        let p = HsiPixel::from_rgb(255, 0, 0);
        assert!(p.hue.abs() < 1e-9);
        assert!((p.saturation - 1.0).abs() < 1e-12);
        assert!((p.intensity - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn primaries_sit_at_expected_hues() {
        let g = HsiPixel::from_rgb(0, 255, 0);
        let b = HsiPixel::from_rgb(0, 0, 255);
        assert!((g.hue - 120.0).abs() < 1e-9);
        assert!((b.hue - 240.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_grayscale_input() {
        let img = RasterImage::filled(2, 2, 1, 10).unwrap();
        assert!(matches!(rgb_to_hsi(&img), Err(Error::InvalidInput(_))));
    }

    proptest! {
        #[test]
        fn ranges_hold(r: u8, g: u8, b: u8) {
            let p = HsiPixel::from_rgb(r, g, b);
            prop_assert!((0.0..360.0).contains(&p.hue));
            prop_assert!((0.0..=1.0).contains(&p.saturation));
            prop_assert!((0.0..=1.0).contains(&p.intensity));
            prop_assert!((p.intensity - (r as f64 + g as f64 + b as f64) / 765.0).abs() < 1e-12);
            if r == g && g == b {
                prop_assert_eq!(p.saturation, 0.0);
            }
        }
    }
}
