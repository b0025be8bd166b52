use crate::error::{Error, Result};
use crate::imaging::RasterImage;
use crate::translation::checkpoint::TranslationCheckpoint;
use crate::translation::network::GENERATOR_STRIDE;
use crate::translation::tensor::{Scalar, Tensor};

/// Maps 8-bit samples to `[-1, 1]`, channels-first. Grayscale is expanded to RGB.
pub fn raster_to_tensor<T: Scalar>(image: &RasterImage) -> Tensor<T> {
    let rgb = image.to_rgb();
    let (h, w) = (rgb.height(), rgb.width());
    let plane = h * w;
    let mut data = vec![T::zero(); 3 * plane];
    for (i, px) in rgb.samples().chunks_exact(3).enumerate() {
        for c in 0..3 {
            data[c * plane + i] = T::lit(px[c] as f64 / 127.5 - 1.0);
        }
    }
    Tensor::from_vec(3, h, w, data)
}

/// Inverse of [`raster_to_tensor`] for 3-channel tensors, with rounding and
/// clamping to `[0, 255]`.
pub fn tensor_to_raster<T: Scalar>(tensor: &Tensor<T>) -> RasterImage {
    let plane = tensor.plane();
    let mut samples = vec![0u8; 3 * plane];
    for i in 0..plane {
        for c in 0..3 {
            let v = tensor.data[c * plane + i].to_f64().unwrap_or(0.0);
            let v = if v.is_finite() { v } else { 0.0 };
            samples[i * 3 + c] = ((v + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8;
        }
    }
    RasterImage::new(tensor.height, tensor.width, 3, samples).expect("consistent buffer")
}

/// Smallest side the generator accepts.
pub const MIN_SIDE: usize = 2 * GENERATOR_STRIDE;

pub fn check_translatable(height: usize, width: usize) -> Result<()> {
    if height % GENERATOR_STRIDE != 0
        || width % GENERATOR_STRIDE != 0
        || height < MIN_SIDE
        || width < MIN_SIDE
    {
        return Err(Error::invalid(format!(
            "generator needs sides that are multiples of {GENERATOR_STRIDE} and at least {MIN_SIDE}, got {height}x{width}"
        )));
    }
    Ok(())
}

/// IHC -> virtual H&E with the A->B generator. Output has the input's shape;
/// grayscale input yields a luminance image.
pub fn translate(checkpoint: &TranslationCheckpoint, image: &RasterImage) -> Result<RasterImage> {
    check_translatable(image.height(), image.width())?;
    let x: Tensor<f32> = raster_to_tensor(image);
    let y = checkpoint.models.gen_ab.predict(&x);
    let out = tensor_to_raster(&y);
    if image.channels() == 1 {
        let gray = out.luminance().iter().map(|&v| v.round() as u8).collect();
        return RasterImage::new(out.height(), out.width(), 1, gray);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::translation::config::TranslationConfig;

    fn untrained() -> TranslationCheckpoint {
        TranslationCheckpoint::untrained(TranslationConfig {
            patch_size: 16,
            generator_filters: 4,
            generator_blocks: 1,
            discriminator_filters: 2,
            discriminator_layers: 1,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn conversion_round_trips_exactly() {
        let img = RasterImage::new(1, 3, 3, vec![0, 1, 2, 127, 128, 129, 253, 254, 255]).unwrap();
        assert_eq!(tensor_to_raster(&raster_to_tensor::<f32>(&img)), img);
    }

    #[test]
    fn output_shape_matches_input() {
        let ckpt = untrained();
        let img = RasterImage::filled_rgb(256, 256, [200, 120, 90]);
        let out = translate(&ckpt, &img).unwrap();
        assert!(out.same_shape(&img));
        let gray = RasterImage::filled(32, 48, 1, 100).unwrap();
        assert!(translate(&ckpt, &gray).unwrap().same_shape(&gray));
    }

    #[test]
    fn untrained_output_is_finite() {
        let ckpt = untrained();
        let img = RasterImage::filled_rgb(32, 32, [10, 240, 30]);
        let y = ckpt.models.gen_ab.predict(&raster_to_tensor::<f32>(&img));
        assert!(y.all_finite());
    }

    #[test]
    fn incompatible_sizes_are_rejected() {
        let ckpt = untrained();
        let img = RasterImage::filled_rgb(30, 32, [0, 0, 0]);
        assert!(matches!(translate(&ckpt, &img), Err(Error::InvalidInput(_))));
    }
}
