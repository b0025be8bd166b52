//! Grayscale -> smoothing -> Otsu -> distance-transform watershed.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{relabel_sequential, BinaryMask, LabelMap, RasterImage};

/// Parameters of the built-in nuclei segmenter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassicalParams {
    /// Gaussian sigma applied to the grayscale image and the distance map.
    pub sigma: f64,
    /// Instances smaller than this many pixels are dropped.
    pub min_area: usize,
    /// Side of the square window in which a watershed seed must be maximal.
    pub footprint: usize,
    /// Segment dark objects (nuclei in H&E) rather than bright ones.
    pub invert: bool,
}

impl Default for ClassicalParams {
    fn default() -> Self {
        Self {
            sigma: 1.0,
            min_area: 15,
            footprint: 7,
            invert: true,
        }
    }
}

impl ClassicalParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be >= 0, got {}", self.sigma)));
        }
        if self.min_area == 0 {
            return Err(Error::Config("min_area must be >= 1".into()));
        }
        if self.footprint == 0 {
            return Err(Error::Config("footprint must be >= 1".into()));
        }
        Ok(())
    }
}

/// Otsu's threshold: the level `t` maximizing the between-class variance of
/// `{<= t}` vs `{> t}`. Ties go to the lowest level; a single populated level
/// is returned as is.
pub fn otsu_threshold(histogram: &[u64; 256]) -> Result<u8> {
    let total: u64 = histogram.iter().sum();
    if total == 0 {
        return Err(Error::invalid("Otsu threshold of an empty histogram"));
    }
    let sum_all: u128 = histogram
        .iter()
        .enumerate()
        .map(|(i, &h)| i as u128 * h as u128)
        .sum();
    // Between-class variance times total^2 is (s0*W - S*w0)^2 / (w0*w1);
    // candidates are compared exactly as fractions.
    let mut best: Option<(u8, u128, u128)> = None;
    let (mut w0, mut s0) = (0u128, 0u128);
    for (t, &h) in histogram.iter().enumerate() {
        w0 += h as u128;
        s0 += t as u128 * h as u128;
        let w1 = total as u128 - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let diff = (s0 * total as u128).abs_diff(sum_all * w0);
        let num = diff * diff;
        let den = w0 * w1;
        let better = match best {
            None => true,
            Some((_, bn, bd)) => compare_fractions(num, den, bn, bd) == Ordering::Greater,
        };
        if better {
            best = Some((t as u8, num, den));
        }
    }
    Ok(match best {
        Some((t, _, _)) => t,
        // single populated level
        None => histogram.iter().position(|&h| h > 0).unwrap_or(0) as u8,
    })
}

/// Compares `a/b` with `c/d`, exactly when the cross products fit in `u128`.
fn compare_fractions(a: u128, b: u128, c: u128, d: u128) -> Ordering {
    match (a.checked_mul(d), c.checked_mul(b)) {
        (Some(l), Some(r)) => l.cmp(&r),
        _ => {
            let l = a as f64 / b as f64;
            let r = c as f64 / d as f64;
            l.partial_cmp(&r).unwrap_or(Ordering::Equal)
        }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let x = i as f64 - radius as f64;
            (-x * x / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

fn mirror(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - 1 - m;
    }
    m as usize
}

/// Separable Gaussian blur with mirrored borders; `sigma == 0` is the identity.
pub fn gaussian_blur(values: &[f64], height: usize, width: usize, sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 || values.is_empty() {
        return values.to_vec();
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let mut tmp = vec![0.0; values.len()];
    for row in 0..height {
        for col in 0..width {
            let mut acc = 0.0;
            for (i, &kv) in k.iter().enumerate() {
                let c = mirror(col as isize + i as isize - r, width);
                acc += kv * values[row * width + c];
            }
            tmp[row * width + col] = acc;
        }
    }
    let mut out = vec![0.0; values.len()];
    for row in 0..height {
        for col in 0..width {
            let mut acc = 0.0;
            for (i, &kv) in k.iter().enumerate() {
                let rr = mirror(row as isize + i as isize - r, height);
                acc += kv * tmp[rr * width + col];
            }
            out[row * width + col] = acc;
        }
    }
    out
}

const FAR: f64 = 1e20;

/// Squared distances of the lower envelope of parabolas (1-D exact EDT).
fn edt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates everywhere
                v[0] = q;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        *o = d * d + f[p];
    }
}

/// Exact Euclidean distance from each foreground pixel to the nearest
/// background pixel (0 on background).
pub fn distance_transform(mask: &BinaryMask) -> Vec<f64> {
    let (h, w) = (mask.height, mask.width);
    let mut grid: Vec<f64> = mask.data.iter().map(|&fg| if fg { FAR } else { 0.0 }).collect();
    let mut col_buf = vec![0.0; h];
    let mut col_out = vec![0.0; h];
    for c in 0..w {
        for r in 0..h {
            col_buf[r] = grid[r * w + c];
        }
        edt_1d(&col_buf, &mut col_out);
        for r in 0..h {
            grid[r * w + c] = col_out[r];
        }
    }
    let mut row_out = vec![0.0; w];
    for r in 0..h {
        edt_1d(&grid[r * w..(r + 1) * w], &mut row_out);
        grid[r * w..(r + 1) * w].copy_from_slice(&row_out);
    }
    grid.iter().map(|&d| if d >= FAR { FAR } else { d.sqrt() }).collect()
}

const NEIGHBORS: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

fn neighbors(idx: usize, h: usize, w: usize) -> impl Iterator<Item = usize> {
    let (r, c) = ((idx / w) as isize, (idx % w) as isize);
    NEIGHBORS.iter().filter_map(move |&(dr, dc)| {
        let (nr, nc) = (r + dr, c + dc);
        (nr >= 0 && nc >= 0 && (nr as usize) < h && (nc as usize) < w)
            .then(|| nr as usize * w + nc as usize)
    })
}

/// Labels 8-connected components of `keep`, starting at `first_label`.
fn label_components(keep: &[bool], labels: &mut [u32], h: usize, w: usize, first_label: u32) -> u32 {
    let mut next = first_label;
    let mut stack = Vec::new();
    for start in 0..keep.len() {
        if !keep[start] || labels[start] != 0 {
            continue;
        }
        labels[start] = next;
        stack.push(start);
        while let Some(p) = stack.pop() {
            for q in neighbors(p, h, w) {
                if keep[q] && labels[q] == 0 {
                    labels[q] = next;
                    stack.push(q);
                }
            }
        }
        next += 1;
    }
    next
}

/// Splits a foreground mask into instances by marker-based watershed on the
/// negated (optionally smoothed) distance transform. Seeds are foreground
/// pixels that are maximal within a `footprint x footprint` window.
pub fn watershed_split(foreground: &BinaryMask, sigma: f64, footprint: usize) -> LabelMap {
    let (h, w) = (foreground.height, foreground.width);
    let fg = &foreground.data;
    if !fg.iter().any(|&v| v) {
        return LabelMap::empty(h, w);
    }
    let mut dist = distance_transform(foreground);
    // whole image foreground: no distance information, one instance per component
    if dist.iter().any(|&d| d >= FAR) {
        dist.iter_mut().for_each(|d| *d = 1.0);
    }
    let dist = gaussian_blur(&dist, h, w, sigma);

    let half = footprint.max(1) / 2;
    let mut is_peak = vec![false; h * w];
    for r in 0..h {
        for c in 0..w {
            let idx = r * w + c;
            if !fg[idx] {
                continue;
            }
            let v = dist[idx];
            let mut peak = true;
            'win: for rr in r.saturating_sub(half)..(r + half + 1).min(h) {
                for cc in c.saturating_sub(half)..(c + half + 1).min(w) {
                    let q = rr * w + cc;
                    if fg[q] && dist[q] > v {
                        peak = false;
                        break 'win;
                    }
                }
            }
            is_peak[idx] = peak;
        }
    }
    let mut labels = vec![0u32; h * w];
    let next = label_components(&is_peak, &mut labels, h, w, 1);

    // Flood from the markers in order of decreasing distance; the insertion
    // counter makes ties resolve deterministically.
    let mut heap: BinaryHeap<(Reverse<OrderedDist>, Reverse<u64>, usize)> = BinaryHeap::new();
    let mut counter = 0u64;
    for idx in 0..h * w {
        if labels[idx] != 0 {
            heap.push((Reverse(OrderedDist(-dist[idx])), Reverse(counter), idx));
            counter += 1;
        }
    }
    while let Some((_, _, p)) = heap.pop() {
        for q in neighbors(p, h, w) {
            if fg[q] && labels[q] == 0 {
                labels[q] = labels[p];
                heap.push((Reverse(OrderedDist(-dist[q])), Reverse(counter), q));
                counter += 1;
            }
        }
    }
    // components without any seed (possible after smoothing) become instances
    let unlabeled: Vec<bool> = (0..h * w).map(|i| fg[i] && labels[i] == 0).collect();
    label_components(&unlabeled, &mut labels, h, w, next);

    relabel_sequential(&LabelMap::new(h, w, labels).expect("consistent size"))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrderedDist(f64);

impl Eq for OrderedDist {}

impl PartialOrd for OrderedDist {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedDist {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Histogram of rounded intensities.
pub fn histogram(values: &[f64]) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for &v in values {
        hist[v.round().clamp(0.0, 255.0) as usize] += 1;
    }
    hist
}

/// Full classical pipeline: luminance, optional inversion, Gaussian
/// smoothing, Otsu foreground, watershed split, area filter, relabeling.
pub fn segment_classical(image: &RasterImage, params: &ClassicalParams) -> Result<LabelMap> {
    params.validate()?;
    if image.channels() != 3 {
        return Err(Error::invalid(format!(
            "classical segmenter expects RGB input, got {} channels",
            image.channels()
        )));
    }
    let (h, w) = (image.height(), image.width());
    if h == 0 || w == 0 {
        return Ok(LabelMap::empty(h, w));
    }
    let mut gray = image.luminance();
    if params.invert {
        gray.iter_mut().for_each(|v| *v = 255.0 - *v);
    }
    let smooth = gaussian_blur(&gray, h, w, params.sigma);
    let quantized: Vec<f64> = smooth.iter().map(|v| v.round().clamp(0.0, 255.0)).collect();
    let t = otsu_threshold(&histogram(&quantized))? as f64;
    let mask = BinaryMask::new(h, w, quantized.iter().map(|&v| v > t).collect())?;
    let mut labels = watershed_split(&mask, params.sigma, params.footprint);

    let instances = labels.instances();
    for pixels in instances.values() {
        if pixels.len() < params.min_area {
            for &p in pixels {
                labels.labels_mut()[p] = 0;
            }
        }
    }
    Ok(relabel_sequential(&labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{five_discs, paint, touching_discs, Ellipse};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Direct between-class variance for every level, in floating point.
    fn brute_force_otsu(hist: &[u64; 256]) -> u8 {
        let total: f64 = hist.iter().map(|&h| h as f64).sum();
        let mut best_t = None;
        let mut best_v = f64::NEG_INFINITY;
        for t in 0..256 {
            let w0: f64 = hist[..=t].iter().map(|&h| h as f64).sum();
            let w1 = total - w0;
            if w0 == 0.0 || w1 == 0.0 {
                continue;
            }
            let m0 = hist[..=t].iter().enumerate().map(|(i, &h)| i as f64 * h as f64).sum::<f64>() / w0;
            let m1 = hist[t + 1..]
                .iter()
                .enumerate()
                .map(|(i, &h)| (i + t + 1) as f64 * h as f64)
                .sum::<f64>()
                / w1;
            let v = (w0 / total) * (w1 / total) * (m0 - m1) * (m0 - m1);
            if v > best_v {
                best_v = v;
                best_t = Some(t as u8);
            }
        }
        best_t.unwrap_or_else(|| hist.iter().position(|&h| h > 0).unwrap() as u8)
    }

    #[test]
    fn otsu_separates_two_peaks() {
        let mut hist = [0u64; 256];
        hist[50] = 100;
        hist[200] = 100;
        let t = otsu_threshold(&hist).unwrap();
        assert!((50..200).contains(&t));
        assert_eq!(t, brute_force_otsu(&hist));
        assert_eq!(t, 50, "lowest maximizer wins ties");
    }

    #[test]
    fn otsu_constant_and_empty() {
        let mut hist = [0u64; 256];
        assert!(matches!(otsu_threshold(&hist), Err(Error::InvalidInput(_))));
        hist[77] = 10;
        assert_eq!(otsu_threshold(&hist).unwrap(), 77);
    }

    #[test]
    fn otsu_matches_brute_force_on_random_histograms() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..300 {
            let mut hist = [0u64; 256];
            let sparse = rng.gen_bool(0.5);
            for h in hist.iter_mut() {
                if !sparse || rng.gen_bool(0.1) {
                    *h = rng.gen_range(0..1000);
                }
            }
            if hist.iter().sum::<u64>() == 0 {
                hist[3] = 1;
            }
            assert_eq!(otsu_threshold(&hist).unwrap(), brute_force_otsu(&hist));
        }
    }

    #[test]
    fn distance_transform_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (h, w) = (13, 17);
        let data: Vec<bool> = (0..h * w).map(|_| rng.gen_bool(0.8)).collect();
        let mask = BinaryMask::new(h, w, data.clone()).unwrap();
        let dt = distance_transform(&mask);
        for r in 0..h {
            for c in 0..w {
                let mut best = f64::INFINITY;
                for rr in 0..h {
                    for cc in 0..w {
                        if !data[rr * w + cc] {
                            let d = ((r as f64 - rr as f64).powi(2) + (c as f64 - cc as f64).powi(2)).sqrt();
                            best = best.min(d);
                        }
                    }
                }
                if !data[r * w + c] {
                    best = 0.0;
                }
                assert!((dt[r * w + c] - best).abs() < 1e-9, "({r},{c})");
            }
        }
    }

    #[test]
    fn blur_preserves_constants() {
        let v = vec![5.0; 30];
        assert!(gaussian_blur(&v, 5, 6, 1.5).iter().all(|x| (x - 5.0).abs() < 1e-12));
        assert_eq!(gaussian_blur(&v, 5, 6, 0.0), v);
    }

    fn disc_mask(discs: &[Ellipse], h: usize, w: usize) -> BinaryMask {
        let mut m = BinaryMask::empty(h, w);
        for r in 0..h {
            for c in 0..w {
                m.data[r * w + c] = discs.iter().any(|d| d.contains(r, c));
            }
        }
        m
    }

    #[test]
    fn watershed_single_disc_and_empty() {
        let m = disc_mask(&[Ellipse::disc(20.0, 20.0, 9.0)], 40, 40);
        assert_eq!(watershed_split(&m, 1.0, 7).instance_count(), 1);
        assert_eq!(watershed_split(&BinaryMask::empty(8, 8), 1.0, 7).instance_count(), 0);
    }

    #[test]
    fn watershed_splits_touching_discs() {
        let (_, discs) = touching_discs();
        let m = disc_mask(&discs, 64, 64);
        let labels = watershed_split(&m, 1.0, 7);
        assert_eq!(labels.instance_count(), 2);
        let a = labels.get(32, 24);
        let b = labels.get(32, 40);
        assert!(a != 0 && b != 0 && a != b);
    }

    #[test]
    fn watershed_partitions_foreground() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let data: Vec<bool> = (0..400).map(|_| rng.gen_bool(0.6)).collect();
            let m = BinaryMask::new(20, 20, data).unwrap();
            let l = watershed_split(&m, rng.gen_range(0.0..2.0), rng.gen_range(1..8));
            for i in 0..400 {
                assert_eq!(l.labels()[i] > 0, m.data[i]);
            }
        }
    }

    #[test]
    fn full_foreground_is_one_instance() {
        let m = BinaryMask::new(6, 6, vec![true; 36]).unwrap();
        assert_eq!(watershed_split(&m, 0.0, 3).instance_count(), 1);
    }

    #[test]
    fn classical_finds_five_discs() {
        let (img, discs) = five_discs();
        let labels = segment_classical(&img, &ClassicalParams::default()).unwrap();
        assert_eq!(labels.instance_count(), 5);
        for d in &discs {
            assert_ne!(labels.get(d.row as usize, d.col as usize), 0);
        }
    }

    #[test]
    fn classical_blank_and_area_filter() {
        let white = RasterImage::filled_rgb(32, 32, [255, 255, 255]);
        assert_eq!(segment_classical(&white, &ClassicalParams::default()).unwrap().instance_count(), 0);
        let (img, _) = five_discs();
        let params = ClassicalParams {
            min_area: 10_000,
            ..Default::default()
        };
        assert_eq!(segment_classical(&img, &params).unwrap().instance_count(), 0);
    }

    #[test]
    fn classical_is_deterministic() {
        let img = paint(
            48,
            48,
            [240, 240, 240],
            &[(Ellipse::disc(20.0, 20.0, 7.0), [40, 40, 90]), (Ellipse::disc(30.0, 30.0, 6.0), [60, 40, 90])],
        );
        let p = ClassicalParams::default();
        assert_eq!(segment_classical(&img, &p).unwrap(), segment_classical(&img, &p).unwrap());
    }

    #[test]
    fn invalid_params_are_config_errors() {
        let img = RasterImage::filled_rgb(8, 8, [0, 0, 0]);
        let p = ClassicalParams {
            footprint: 0,
            ..Default::default()
        };
        assert!(matches!(segment_classical(&img, &p), Err(Error::Config(_))));
    }
}
