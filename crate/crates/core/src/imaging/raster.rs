use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// 8-bit raster with 1 or 3 interleaved channels, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    height: usize,
    width: usize,
    channels: usize,
    samples: Vec<u8>,
}

impl RasterImage {
    pub fn new(height: usize, width: usize, channels: usize, samples: Vec<u8>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::invalid(format!(
                "raster must have 1 or 3 channels, got {channels}"
            )));
        }
        if samples.len() != height * width * channels {
            return Err(Error::invalid(format!(
                "sample buffer has {} values, expected {height}x{width}x{channels}",
                samples.len()
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
            samples,
        })
    }

    /// Image filled with a constant value in every channel.
    pub fn filled(height: usize, width: usize, channels: usize, value: u8) -> Result<Self> {
        Self::new(height, width, channels, vec![value; height * width * channels])
    }

    /// Three-channel image filled with one color.
    pub fn filled_rgb(height: usize, width: usize, rgb: [u8; 3]) -> Self {
        let samples = rgb.iter().copied().cycle().take(height * width * 3).collect();
        Self {
            height,
            width,
            channels: 3,
            samples,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &[u8] {
        &self.samples
    }

    pub fn samples_mut(&mut self) -> &mut [u8] {
        &mut self.samples
    }

    pub fn into_samples(self) -> Vec<u8> {
        self.samples
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[u8] {
        let start = (row * self.width + col) * self.channels;
        &self.samples[start..start + self.channels]
    }

    pub fn pixel_mut(&mut self, row: usize, col: usize) -> &mut [u8] {
        let start = (row * self.width + col) * self.channels;
        &mut self.samples[start..start + self.channels]
    }

    pub fn same_shape(&self, other: &RasterImage) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    /// Expands grayscale to three identical channels; RGB is returned as is.
    pub fn to_rgb(&self) -> RasterImage {
        if self.channels == 3 {
            return self.clone();
        }
        let samples = self.samples.iter().flat_map(|&v| [v, v, v]).collect();
        RasterImage {
            height: self.height,
            width: self.width,
            channels: 3,
            samples,
        }
    }

    /// Luminance (0.299R + 0.587G + 0.114B) as floating point in [0, 255].
    pub fn luminance(&self) -> Vec<f64> {
        match self.channels {
            1 => self.samples.iter().map(|&v| v as f64).collect(),
            _ => self
                .samples
                .chunks_exact(3)
                .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
                .collect(),
        }
    }
}

/// Binary foreground mask.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryMask {
    pub height: usize,
    pub width: usize,
    pub data: Vec<bool>,
}

impl BinaryMask {
    pub fn new(height: usize, width: usize, data: Vec<bool>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::invalid(format!(
                "mask buffer has {} values, expected {height}x{width}",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![false; height * width],
        }
    }

    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&v| v).count()
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.data[row * self.width + col]
    }
}

/// Instance label map; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    height: usize,
    width: usize,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(height: usize, width: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != height * width {
            return Err(Error::invalid(format!(
                "label buffer has {} values, expected {height}x{width}",
                labels.len()
            )));
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn empty(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            labels: vec![0; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn labels_mut(&mut self) -> &mut [u32] {
        &mut self.labels
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.labels[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, label: u32) {
        self.labels[row * self.width + col] = label;
    }

    /// Linear pixel indices of every instance, keyed by label.
    pub fn instances(&self) -> BTreeMap<u32, Vec<usize>> {
        let mut out: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for (idx, &label) in self.labels.iter().enumerate() {
            if label != 0 {
                out.entry(label).or_default().push(idx);
            }
        }
        out
    }

    pub fn instance_count(&self) -> usize {
        let mut seen: Vec<u32> = self.labels.iter().copied().filter(|&l| l != 0).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    pub fn foreground(&self) -> BinaryMask {
        BinaryMask {
            height: self.height,
            width: self.width,
            data: self.labels.iter().map(|&l| l != 0).collect(),
        }
    }
}

/// Renumbers nonzero labels to `1..=K` in ascending order of the original ids.
pub fn relabel_sequential(map: &LabelMap) -> LabelMap {
    let mut ids: Vec<u32> = map.labels.iter().copied().filter(|&l| l != 0).collect();
    ids.sort_unstable();
    ids.dedup();
    let lookup: BTreeMap<u32, u32> = ids
        .iter()
        .enumerate()
        .map(|(i, &old)| (old, i as u32 + 1))
        .collect();
    let labels = map
        .labels
        .iter()
        .map(|&l| if l == 0 { 0 } else { lookup[&l] })
        .collect();
    LabelMap {
        height: map.height,
        width: map.width,
        labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_channel_count_and_length() {
        assert!(RasterImage::new(2, 2, 2, vec![0; 8]).is_err());
        assert!(RasterImage::new(2, 2, 3, vec![0; 11]).is_err());
        assert!(RasterImage::new(2, 2, 1, vec![0; 4]).is_ok());
    }

    #[test]
    fn relabel_compacts_ids() {
        let map = LabelMap::new(1, 4, vec![0, 5, 9, 5]).unwrap();
        let out = relabel_sequential(&map);
        assert_eq!(out.labels(), &[0, 1, 2, 1]);
    }

    #[test]
    fn relabel_is_idempotent_on_sequential_maps() {
        let map = LabelMap::new(2, 2, vec![1, 2, 0, 3]).unwrap();
        assert_eq!(relabel_sequential(&map), map);
    }

    proptest! {
        #[test]
        fn relabel_preserves_partition(labels in proptest::collection::vec(0u32..20, 36)) {
            let map = LabelMap::new(6, 6, labels).unwrap();
            let out = relabel_sequential(&map);
            let k = out.instance_count() as u32;
            let mut present: Vec<u32> = out.labels().iter().copied().filter(|&l| l != 0).collect();
            present.sort_unstable();
            present.dedup();
            prop_assert_eq!(present, (1..=k).collect::<Vec<_>>());
            // same-label before <=> same-label after, and background stays background
            for i in 0..36 {
                prop_assert_eq!(map.labels()[i] == 0, out.labels()[i] == 0);
                for j in 0..36 {
                    prop_assert_eq!(
                        map.labels()[i] == map.labels()[j],
                        out.labels()[i] == out.labels()[j]
                    );
                }
            }
        }
    }
}
