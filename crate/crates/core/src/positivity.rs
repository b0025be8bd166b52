//! HSI thresholding of segmented cells on the original IHC image and
//! centroid detections for positively stained (DAB brown) cells.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{rgb_to_hsi, HsiPixel, LabelMap, RasterImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PositivityThresholds {
    /// Hue window in degrees; `hue_low > hue_high` wraps through 0.
    pub hue_low: f64,
    pub hue_high: f64,
    pub min_saturation: f64,
    pub max_intensity: f64,
    /// Fraction of an instance's pixels that must pass for it to be positive.
    pub min_fraction: f64,
}

impl Default for PositivityThresholds {
    fn default() -> Self {
        Self {
            hue_low: 20.0,
            hue_high: 50.0,
            min_saturation: 0.1,
            max_intensity: 0.85,
            min_fraction: 0.3,
        }
    }
}

impl PositivityThresholds {
    pub fn validate(&self) -> Result<()> {
        let hue_ok = |h: f64| (0.0..=360.0).contains(&h);
        let unit_ok = |v: f64| (0.0..=1.0).contains(&v);
        if !hue_ok(self.hue_low) || !hue_ok(self.hue_high) {
            return Err(Error::Config(format!(
                "hue window [{}, {}] must lie in [0, 360]",
                self.hue_low, self.hue_high
            )));
        }
        for (name, v) in [
            ("min_saturation", self.min_saturation),
            ("max_intensity", self.max_intensity),
            ("min_fraction", self.min_fraction),
        ] {
            if !unit_ok(v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        Ok(())
    }

    fn hue_in_window(&self, hue: f64) -> bool {
        if self.hue_low <= self.hue_high {
            (self.hue_low..=self.hue_high).contains(&hue)
        } else {
            hue >= self.hue_low || hue <= self.hue_high
        }
    }

    /// Pixel predicate; achromatic pixels have no hue and never pass.
    pub fn pixel_passes(&self, p: &HsiPixel) -> bool {
        p.saturation > 0.0
            && self.hue_in_window(p.hue)
            && p.saturation >= self.min_saturation
            && p.intensity <= self.max_intensity
    }
}

/// Per-instance statistics kept in the full report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceStats {
    pub label: u32,
    pub area: usize,
    pub x: f64,
    pub y: f64,
    pub positive_fraction: f64,
    /// Circular mean over chromatic pixels; `None` if all are achromatic.
    pub mean_hue: Option<f64>,
    pub mean_saturation: f64,
    pub mean_intensity: f64,
    pub positive: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: String,
    /// Column coordinate.
    pub x: f64,
    /// Row coordinate.
    pub y: f64,
    pub positive: bool,
}

/// `(label, x, y)` per instance in label order, with x the mean column and y
/// the mean row.
pub fn centroids(instances: &LabelMap) -> Vec<(u32, f64, f64)> {
    let w = instances.width();
    instances
        .instances()
        .into_iter()
        .map(|(label, pixels)| {
            let n = pixels.len() as f64;
            let (sr, sc) = pixels
                .iter()
                .fold((0usize, 0usize), |(r, c), &p| (r + p / w, c + p % w));
            (label, sc as f64 / n, sr as f64 / n)
        })
        .collect()
}

/// Full per-instance statistics under `thresholds`.
pub fn instance_stats(ihc: &RasterImage, instances: &LabelMap, thresholds: &PositivityThresholds) -> Result<Vec<InstanceStats>> {
    thresholds.validate()?;
    if ihc.height() != instances.height() || ihc.width() != instances.width() {
        return Err(Error::invalid(format!(
            "IHC image is {}x{} but the label map is {}x{}",
            ihc.height(),
            ihc.width(),
            instances.height(),
            instances.width()
        )));
    }
    let hsi = rgb_to_hsi(ihc)?;
    let cents = centroids(instances);
    Ok(instances
        .instances()
        .into_iter()
        .zip(cents)
        .map(|((label, pixels), (_, x, y))| {
            let n = pixels.len() as f64;
            let (mut pass, mut sat, mut int, mut hs, mut hc) = (0usize, 0.0, 0.0, 0.0, 0.0);
            for &p in &pixels {
                let px = hsi.pixels[p];
                pass += thresholds.pixel_passes(&px) as usize;
                sat += px.saturation;
                int += px.intensity;
                if px.saturation > 0.0 {
                    hs += px.hue.to_radians().sin();
                    hc += px.hue.to_radians().cos();
                }
            }
            let fraction = pass as f64 / n;
            let mean_hue = (hs != 0.0 || hc != 0.0).then(|| hs.atan2(hc).to_degrees().rem_euclid(360.0));
            InstanceStats {
                label,
                area: pixels.len(),
                x,
                y,
                positive_fraction: fraction,
                mean_hue,
                mean_saturation: sat / n,
                mean_intensity: int / n,
                positive: fraction >= thresholds.min_fraction,
            }
        })
        .collect())
}

/// `(label, positive)` for every instance in label order.
pub fn classify_positive(ihc: &RasterImage, instances: &LabelMap, thresholds: &PositivityThresholds) -> Result<Vec<(u32, bool)>> {
    Ok(instance_stats(ihc, instances, thresholds)?
        .into_iter()
        .map(|s| (s.label, s.positive))
        .collect())
}

/// Centroid detections of the positive instances only.
pub fn detect_positive_cells(
    image_id: &str,
    ihc: &RasterImage,
    instances: &LabelMap,
    thresholds: &PositivityThresholds,
) -> Result<Vec<Detection>> {
    Ok(instance_stats(ihc, instances, thresholds)?
        .into_iter()
        .filter(|s| s.positive)
        .map(|s| Detection {
            image_id: image_id.to_string(),
            x: s.x,
            y: s.y,
            positive: true,
        })
        .collect())
}

/// Submission CSV text: header `image_id,x,y`, positive detections sorted by
/// image id, then y, then x, coordinates with one decimal.
pub fn submission_csv(detections: &[Detection]) -> String {
    let mut rows: Vec<&Detection> = detections.iter().filter(|d| d.positive).collect();
    rows.sort_by(|a, b| {
        a.image_id
            .cmp(&b.image_id)
            .then(a.y.total_cmp(&b.y))
            .then(a.x.total_cmp(&b.x))
    });
    let mut out = String::from("image_id,x,y\n");
    for d in rows {
        let _ = writeln!(out, "{},{:.1},{:.1}", d.image_id, d.x, d.y);
    }
    out
}

pub fn write_submission(detections: &[Detection], path: &Path) -> Result<()> {
    std::fs::write(path, submission_csv(detections)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{label_shapes, paint, Ellipse, DAB_BROWN, HEMATOXYLIN_BLUE};
    use proptest::prelude::*;

    #[test]
    fn synthetic_colors_fall_where_expected() {
        let t = PositivityThresholds::default();
        let b = HsiPixel::from_rgb(DAB_BROWN[0], DAB_BROWN[1], DAB_BROWN[2]);
        assert!(t.pixel_passes(&b), "{b:?}");
        let h = HsiPixel::from_rgb(HEMATOXYLIN_BLUE[0], HEMATOXYLIN_BLUE[1], HEMATOXYLIN_BLUE[2]);
        assert!(!t.pixel_passes(&h), "{h:?}");
        assert!(!t.pixel_passes(&HsiPixel::from_rgb(30, 30, 30)));
    }

    #[test]
    fn hue_window_wraps() {
        let t = PositivityThresholds {
            hue_low: 340.0,
            hue_high: 10.0,
            ..Default::default()
        };
        assert!(t.hue_in_window(350.0) && t.hue_in_window(5.0) && !t.hue_in_window(180.0));
    }

    #[test]
    fn centroid_examples() {
        let mut m = LabelMap::empty(5, 7);
        m.set(3, 5, 1);
        assert_eq!(centroids(&m), vec![(1, 5.0, 3.0)]);
        let m = LabelMap::new(2, 2, vec![1, 0, 1, 1]).unwrap();
        let (_, x, y) = centroids(&m)[0];
        assert!((x - 1.0 / 3.0).abs() < 1e-12 && (y - 2.0 / 3.0).abs() < 1e-12);
        let m = LabelMap::new(2, 2, vec![4, 4, 4, 4]).unwrap();
        assert_eq!(centroids(&m), vec![(4, 0.5, 0.5)]);
    }

    fn mixed_scene() -> (RasterImage, LabelMap, Vec<Ellipse>) {
        let brown = Ellipse::disc(15.0, 15.0, 6.0);
        let blue = Ellipse::disc(15.0, 45.0, 6.0);
        let img = paint(32, 64, [240, 240, 240], &[(brown, DAB_BROWN), (blue, HEMATOXYLIN_BLUE)]);
        (img, label_shapes(32, 64, &[brown, blue]), vec![brown, blue])
    }

    #[test]
    fn detects_only_brown() {
        let (img, labels, shapes) = mixed_scene();
        let t = PositivityThresholds::default();
        assert_eq!(classify_positive(&img, &labels, &t).unwrap(), vec![(1, true), (2, false)]);
        let d = detect_positive_cells("roi", &img, &labels, &t).unwrap();
        assert_eq!(d.len(), 1);
        assert!((d[0].x - shapes[0].col).abs() <= 0.5 && (d[0].y - shapes[0].row).abs() <= 0.5);
        assert!(classify_positive(&img, &LabelMap::empty(32, 64), &t).unwrap().is_empty());
        assert!(classify_positive(&img, &LabelMap::empty(3, 3), &t).is_err());
    }

    #[test]
    fn submission_format() {
        assert_eq!(submission_csv(&[]), "image_id,x,y\n");
        let one = Detection {
            image_id: "roi_1".into(),
            x: 10.0,
            y: 20.0,
            positive: true,
        };
        assert_eq!(submission_csv(&[one]), "image_id,x,y\nroi_1,10.0,20.0\n");
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_submission(&[], &p).unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "image_id,x,y\n");
    }

    #[test]
    fn invalid_thresholds() {
        let t = PositivityThresholds {
            min_fraction: 1.5,
            ..Default::default()
        };
        assert!(matches!(t.validate(), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn raising_fraction_only_removes_positives(seed in any::<u64>(), lo in 0.0f64..1.0, hi in 0.0f64..1.0) {
            let (lo, hi) = (lo.min(hi), lo.max(hi));
            let mut state = seed;
            let mut samples = Vec::new();
            for _ in 0..16 * 16 * 3 {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                samples.push((state >> 56) as u8);
            }
            let img = RasterImage::new(16, 16, 3, samples).unwrap();
            let labels = LabelMap::new(16, 16, (0..256).map(|i| (i / 32) as u32).collect()).unwrap();
            let t = |f| PositivityThresholds { min_fraction: f, hue_low: 0.0, hue_high: 120.0, ..Default::default() };
            let a = classify_positive(&img, &labels, &t(lo)).unwrap();
            let b = classify_positive(&img, &labels, &t(hi)).unwrap();
            for ((_, pa), (_, pb)) in a.iter().zip(&b) {
                prop_assert!(!pb || *pa);
            }
        }

        #[test]
        fn centroids_shift_with_the_map(dr in 0usize..5, dc in 0usize..5, cells in proptest::collection::vec(0u32..4, 36)) {
            let base = LabelMap::new(6, 6, cells.clone()).unwrap();
            let mut shifted = LabelMap::empty(6 + dr, 6 + dc);
            for r in 0..6 {
                for c in 0..6 {
                    shifted.set(r + dr, c + dc, cells[r * 6 + c]);
                }
            }
            for ((la, xa, ya), (lb, xb, yb)) in centroids(&base).into_iter().zip(centroids(&shifted)) {
                prop_assert_eq!(la, lb);
                prop_assert!((xb - xa - dc as f64).abs() < 1e-9);
                prop_assert!((yb - ya - dr as f64).abs() < 1e-9);
            }
        }
    }
}
