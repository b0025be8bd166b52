use crate::error::{Error, Result};
use crate::imaging::RasterImage;
use crate::translation::tensor::{Scalar, Tensor};

/// Mean absolute difference of two rasters on a `[0, 1]` value scale.
pub fn cycle_loss(original: &RasterImage, reconstructed: &RasterImage) -> Result<f64> {
    if !original.same_shape(reconstructed) {
        return Err(Error::invalid(format!(
            "cycle loss needs equal shapes, got {}x{}x{} and {}x{}x{}",
            original.height(),
            original.width(),
            original.channels(),
            reconstructed.height(),
            reconstructed.width(),
            reconstructed.channels()
        )));
    }
    let n = original.samples().len();
    if n == 0 {
        return Ok(0.0);
    }
    let total: u64 = original
        .samples()
        .iter()
        .zip(reconstructed.samples())
        .map(|(&a, &b)| a.abs_diff(b) as u64)
        .sum();
    Ok(total as f64 / (255.0 * n as f64))
}

/// Least-squares adversarial loss: mean of `(score - target)^2` with target 1
/// for real and 0 for fake.
pub fn adversarial_loss(scores: &[f64], target_is_real: bool) -> Result<f64> {
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Numeric(format!(
            "discriminator produced a non-finite score ({bad})"
        )));
    }
    if scores.is_empty() {
        return Err(Error::invalid("adversarial loss of an empty score map"));
    }
    let target = if target_is_real { 1.0 } else { 0.0 };
    Ok(scores.iter().map(|s| (s - target) * (s - target)).sum::<f64>() / scores.len() as f64)
}

/// L1 loss between tensors and its gradient with respect to `pred`.
pub(crate) fn l1_with_grad<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> (T, Tensor<T>) {
    debug_assert!(pred.same_shape(target));
    let n = T::lit(pred.len() as f64);
    let mut loss = T::zero();
    let mut grad = Tensor::zeros(pred.channels, pred.height, pred.width);
    for ((g, &p), &t) in grad.data.iter_mut().zip(&pred.data).zip(&target.data) {
        let d = p - t;
        loss = loss + d.abs();
        *g = if d > T::zero() {
            T::one() / n
        } else if d < T::zero() {
            -T::one() / n
        } else {
            T::zero()
        };
    }
    (loss / n, grad)
}

pub(crate) fn l1<T: Scalar>(pred: &Tensor<T>, target: &Tensor<T>) -> T {
    let n = T::lit(pred.len() as f64);
    pred.data
        .iter()
        .zip(&target.data)
        .map(|(&p, &t)| (p - t).abs())
        .sum::<T>()
        / n
}

/// Least-squares loss against a constant target and its gradient.
pub(crate) fn lsgan_with_grad<T: Scalar>(scores: &Tensor<T>, real: bool) -> (T, Tensor<T>) {
    let target = if real { T::one() } else { T::zero() };
    let n = T::lit(scores.len() as f64);
    let two = T::lit(2.0);
    let mut loss = T::zero();
    let mut grad = scores.clone();
    for g in grad.data.iter_mut() {
        let d = *g - target;
        loss = loss + d * d;
        *g = two * d / n;
    }
    (loss / n, grad)
}

pub(crate) fn lsgan<T: Scalar>(scores: &Tensor<T>, real: bool) -> T {
    let target = if real { T::one() } else { T::zero() };
    let n = T::lit(scores.len() as f64);
    scores.data.iter().map(|&s| (s - target) * (s - target)).sum::<T>() / n
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn cycle_loss_examples() {
        let a = RasterImage::filled(4, 4, 3, 0).unwrap();
        let b = RasterImage::filled(4, 4, 3, 255).unwrap();
        assert_eq!(cycle_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(cycle_loss(&a, &b).unwrap(), 1.0);
        let c = RasterImage::filled(4, 4, 3, 100).unwrap();
        let d = RasterImage::filled(4, 4, 3, 151).unwrap();
        assert!((cycle_loss(&c, &d).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn cycle_loss_shape_mismatch() {
        let a = RasterImage::filled(4, 4, 3, 0).unwrap();
        let b = RasterImage::filled(4, 5, 3, 0).unwrap();
        assert!(matches!(cycle_loss(&a, &b), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn adversarial_examples() {
        assert_eq!(adversarial_loss(&[1.0, 1.0], true).unwrap(), 0.0);
        assert_eq!(adversarial_loss(&[0.0, 0.0], false).unwrap(), 0.0);
        assert_eq!(adversarial_loss(&[0.0; 3], true).unwrap(), 1.0);
        assert!((adversarial_loss(&[0.5, 1.0], true).unwrap() - 0.125).abs() < 1e-15);
        assert!(matches!(
            adversarial_loss(&[f64::NAN], true),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn tensor_losses_agree_with_raster_losses() {
        let a = Tensor::from_vec(1, 1, 2, vec![0.5f64, 1.0]);
        let (l, g) = lsgan_with_grad(&a, true);
        assert!((l - 0.125).abs() < 1e-15);
        assert_eq!(g.data, vec![-0.5, 0.0]);
        let (l1v, g1) = l1_with_grad(&a, &Tensor::from_vec(1, 1, 2, vec![0.0, 1.5]));
        assert!((l1v - 0.5).abs() < 1e-15);
        assert_eq!(g1.data, vec![0.5, -0.5]);
    }

    fn raster(v: Vec<u8>) -> RasterImage {
        RasterImage::new(1, v.len(), 1, v).unwrap()
    }

    proptest! {
        #[test]
        fn cycle_loss_is_a_pseudometric(
            a in proptest::collection::vec(any::<u8>(), 12),
            b in proptest::collection::vec(any::<u8>(), 12),
            c in proptest::collection::vec(any::<u8>(), 12),
        ) {
            let (a, b, c) = (raster(a), raster(b), raster(c));
            let ab = cycle_loss(&a, &b).unwrap();
            prop_assert_eq!(ab, cycle_loss(&b, &a).unwrap());
            prop_assert_eq!(cycle_loss(&a, &a).unwrap(), 0.0);
            prop_assert!(ab <= cycle_loss(&a, &c).unwrap() + cycle_loss(&c, &b).unwrap() + 1e-12);
            prop_assert!((0.0..=1.0).contains(&ab));
        }
    }
}
