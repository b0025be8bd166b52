//! One-to-one instance matching at an IoU threshold.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::LabelMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchedPair {
    pub pred: u32,
    pub gt: u32,
    pub iou: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchResult {
    pub pairs: Vec<MatchedPair>,
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub threshold: f64,
}

/// Every overlapping (pred, gt) pair with its IoU, plus the instance ids of
/// both maps.
#[derive(Debug, Clone)]
pub struct OverlapTable {
    pub pred_ids: Vec<u32>,
    pub gt_ids: Vec<u32>,
    pub overlaps: Vec<MatchedPair>,
}

impl OverlapTable {
    pub fn new(pred: &LabelMap, gt: &LabelMap) -> Result<Self> {
        if pred.height() != gt.height() || pred.width() != gt.width() {
            return Err(Error::invalid(format!(
                "label maps differ in size: {}x{} vs {}x{}",
                pred.height(),
                pred.width(),
                gt.height(),
                gt.width()
            )));
        }
        let mut pred_area: BTreeMap<u32, u64> = BTreeMap::new();
        let mut gt_area: BTreeMap<u32, u64> = BTreeMap::new();
        let mut inter: HashMap<(u32, u32), u64> = HashMap::new();
        for (&p, &g) in pred.labels().iter().zip(gt.labels()) {
            if p != 0 {
                *pred_area.entry(p).or_default() += 1;
            }
            if g != 0 {
                *gt_area.entry(g).or_default() += 1;
            }
            if p != 0 && g != 0 {
                *inter.entry((p, g)).or_default() += 1;
            }
        }
        let mut overlaps: Vec<MatchedPair> = inter
            .into_iter()
            .map(|((p, g), i)| MatchedPair {
                pred: p,
                gt: g,
                iou: i as f64 / (pred_area[&p] + gt_area[&g] - i) as f64,
            })
            .collect();
        overlaps.sort_by_key(|m| (m.pred, m.gt));
        Ok(Self {
            pred_ids: pred_area.into_keys().collect(),
            gt_ids: gt_area.into_keys().collect(),
            overlaps,
        })
    }

    /// Optimal one-to-one matching among pairs with IoU >= `threshold`.
    pub fn matching(&self, threshold: f64) -> MatchResult {
        let candidates: Vec<MatchedPair> = self
            .overlaps
            .iter()
            .copied()
            .filter(|m| m.iou >= threshold)
            .collect();
        let mut pairs = Vec::new();
        for component in components(&candidates) {
            pairs.extend(assign(&component));
        }
        pairs.sort_by_key(|m| (m.pred, m.gt));
        let tp = pairs.len();
        MatchResult {
            pairs,
            true_positives: tp,
            false_positives: self.pred_ids.len() - tp,
            false_negatives: self.gt_ids.len() - tp,
            threshold,
        }
    }
}

/// Connected components of the bipartite candidate graph.
fn components(candidates: &[MatchedPair]) -> Vec<Vec<MatchedPair>> {
    // union-find over pred ids (even slots) and gt ids (odd slots)
    let mut index: HashMap<(bool, u32), usize> = HashMap::new();
    let mut parent: Vec<usize> = Vec::new();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut node = |key: (bool, u32), parent: &mut Vec<usize>| -> usize {
        *index.entry(key).or_insert_with(|| {
            parent.push(parent.len());
            parent.len() - 1
        })
    };
    let mut ends = Vec::with_capacity(candidates.len());
    for m in candidates {
        let a = node((false, m.pred), &mut parent);
        let b = node((true, m.gt), &mut parent);
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
        ends.push(a);
    }
    let mut groups: BTreeMap<usize, Vec<MatchedPair>> = BTreeMap::new();
    for (m, a) in candidates.iter().zip(ends) {
        let root = find(&mut parent, a);
        groups.entry(root).or_default().push(*m);
    }
    groups.into_values().collect()
}

/// Maximum-cardinality matching with the largest total IoU among those.
fn assign(edges: &[MatchedPair]) -> Vec<MatchedPair> {
    if edges.len() == 1 {
        return edges.to_vec();
    }
    let mut preds: Vec<u32> = edges.iter().map(|m| m.pred).collect();
    let mut gts: Vec<u32> = edges.iter().map(|m| m.gt).collect();
    preds.sort_unstable();
    preds.dedup();
    gts.sort_unstable();
    gts.dedup();
    let transpose = preds.len() > gts.len();
    let (rows, cols) = if transpose { (&gts, &preds) } else { (&preds, &gts) };
    // An extra match always outweighs any IoU total.
    let bonus = rows.len() as f64 + 1.0;
    let mut weight = vec![vec![0.0; cols.len()]; rows.len()];
    let mut lookup: HashMap<(usize, usize), MatchedPair> = HashMap::new();
    for m in edges {
        let (r, c) = if transpose { (m.gt, m.pred) } else { (m.pred, m.gt) };
        let r = rows.binary_search(&r).unwrap();
        let c = cols.binary_search(&c).unwrap();
        weight[r][c] = bonus + m.iou;
        lookup.insert((r, c), *m);
    }
    hungarian_max(&weight)
        .into_iter()
        .enumerate()
        .filter_map(|(r, c)| lookup.get(&(r, c)).copied())
        .collect()
}

/// Maximum-weight assignment of every row (rows <= cols); returns the column
/// chosen for each row.
fn hungarian_max(weight: &[Vec<f64>]) -> Vec<usize> {
    let n = weight.len();
    let m = weight[0].len();
    let cost = |i: usize, j: usize| -weight[i - 1][j - 1];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = cost(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut row_to_col = vec![0usize; n];
    for j in 1..=m {
        if p[j] != 0 {
            row_to_col[p[j] - 1] = j - 1;
        }
    }
    row_to_col
}

/// Matches predicted to ground-truth instances at `threshold`.
pub fn match_instances(pred: &LabelMap, gt: &LabelMap, threshold: f64) -> Result<MatchResult> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::invalid(format!("IoU threshold must be in (0, 1], got {threshold}")));
    }
    Ok(OverlapTable::new(pred, gt)?.matching(threshold))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn hungarian_picks_heaviest() {
        let w = vec![vec![1.0, 5.0, 0.0], vec![4.0, 4.5, 0.0]];
        assert_eq!(hungarian_max(&w), vec![1, 0]);
    }

    #[test]
    fn cardinality_beats_iou() {
        // p1 overlaps g1 strongly and g2 weakly; p2 only overlaps g1.
        let edges = [
            MatchedPair { pred: 1, gt: 1, iou: 0.9 },
            MatchedPair { pred: 1, gt: 2, iou: 0.3 },
            MatchedPair { pred: 2, gt: 1, iou: 0.3 },
        ];
        let mut got = assign(&edges);
        got.sort_by_key(|m| m.pred);
        assert_eq!(got.len(), 2);
        assert_eq!((got[0].gt, got[1].gt), (2, 1));
    }

    #[test]
    fn identity_matches_everything() {
        let map = LabelMap::new(2, 3, vec![1, 1, 2, 0, 3, 3]).unwrap();
        let r = match_instances(&map, &map, 1.0).unwrap();
        assert_eq!((r.true_positives, r.false_positives, r.false_negatives), (3, 0, 0));
    }

    #[test]
    fn bad_threshold_and_size() {
        let a = LabelMap::empty(2, 2);
        assert!(match_instances(&a, &a, 0.0).is_err());
        assert!(match_instances(&a, &LabelMap::empty(3, 2), 0.5).is_err());
    }

    fn brute_force_max(edges: &[MatchedPair], gts: &[u32], used: &mut Vec<u32>, i: usize) -> usize {
        if i == gts.len() {
            return 0;
        }
        let mut best = brute_force_max(edges, gts, used, i + 1);
        for e in edges.iter().filter(|e| e.gt == gts[i]) {
            if used.contains(&e.pred) {
                continue;
            }
            used.push(e.pred);
            best = best.max(1 + brute_force_max(edges, gts, used, i + 1));
            used.pop();
        }
        best
    }

    #[test]
    fn matches_brute_force_on_overlapping_blocks() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let mut pred = LabelMap::empty(16, 16);
            let mut gt = LabelMap::empty(16, 16);
            for (map, k) in [(&mut pred, rng.gen_range(0..6)), (&mut gt, rng.gen_range(0..6))] {
                for label in 1..=k {
                    let (r, c) = (rng.gen_range(0..12), rng.gen_range(0..12));
                    for rr in r..r + rng.gen_range(2..5) {
                        for cc in c..c + rng.gen_range(2..5) {
                            map.set(rr, cc, label);
                        }
                    }
                }
            }
            let t = rng.gen_range(0.05..0.6);
            let table = OverlapTable::new(&pred, &gt).unwrap();
            let r = table.matching(t);
            let edges: Vec<_> = table.overlaps.iter().copied().filter(|m| m.iou >= t).collect();
            assert_eq!(r.true_positives, brute_force_max(&edges, &table.gt_ids, &mut Vec::new(), 0));
        }
    }
}
