//! Bagged CART regression forest over a small dense feature matrix.
//!
//! Rows are presorted once per feature; each tree keeps its in-bag rows in
//! per-feature sorted order and stably partitions them at every split, so a
//! node's split search is a single linear scan per candidate feature.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

#[derive(Copy, Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    pub mtry: usize,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: 12,
            min_leaf: 5,
            mtry: 2,
        }
    }
}

/// Serialized form of one tree node.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Node {
    /// Split feature; `None` for leaves.
    pub feature: Option<usize>,
    /// Rows with `x[feature] <= threshold` go left.
    pub threshold: Option<f64>,
    pub left: Option<usize>,
    pub right: Option<usize>,
    /// Weighted mean of the training targets reaching this node.
    pub value: f64,
}

const LEAF: u32 = u32::MAX;

#[derive(Copy, Clone, Debug, PartialEq)]
struct Flat {
    threshold: f64,
    value: f64,
    feature: u32,
    left: u32,
    right: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TreeRepr", into = "TreeRepr")]
pub struct Tree {
    nodes: Vec<Flat>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TreeRepr {
    nodes: Vec<Node>,
}

impl From<Tree> for TreeRepr {
    fn from(t: Tree) -> Self {
        TreeRepr { nodes: t.nodes() }
    }
}

impl TryFrom<TreeRepr> for Tree {
    type Error = String;

    fn try_from(r: TreeRepr) -> std::result::Result<Self, String> {
        let n = r.nodes.len();
        let nodes = r
            .nodes
            .into_iter()
            .enumerate()
            .map(|(i, node)| match (node.feature, node.threshold, node.left, node.right) {
                (Some(f), Some(t), Some(l), Some(rt)) if l < n && rt < n && l > i && rt > i => Ok(Flat {
                    threshold: t,
                    value: node.value,
                    feature: f as u32,
                    left: l as u32,
                    right: rt as u32,
                }),
                (None, None, None, None) => Ok(Flat { threshold: 0.0, value: node.value, feature: LEAF, left: 0, right: 0 }),
                _ => Err(format!("malformed node {i}")),
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        if nodes.is_empty() {
            return Err("empty tree".into());
        }
        Ok(Tree { nodes })
    }
}

impl Tree {
    pub fn nodes(&self) -> Vec<Node> {
        self.nodes
            .iter()
            .map(|f| {
                if f.feature == LEAF {
                    Node { feature: None, threshold: None, left: None, right: None, value: f.value }
                } else {
                    Node {
                        feature: Some(f.feature as usize),
                        threshold: Some(f.threshold),
                        left: Some(f.left as usize),
                        right: Some(f.right as usize),
                        value: f.value,
                    }
                }
            })
            .collect()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    #[inline]
    fn predict_row(&self, row: &[f64]) -> f64 {
        let mut n = &self.nodes[0];
        while n.feature != LEAF {
            let next = if row[n.feature as usize] <= n.threshold { n.left } else { n.right };
            n = &self.nodes[next as usize];
        }
        n.value
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Flat], i: usize) -> usize {
            let n = &nodes[i];
            if n.feature == LEAF {
                0
            } else {
                1 + walk(nodes, n.left as usize).max(walk(nodes, n.right as usize))
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub config: ForestConfig,
    pub seed: u64,
    pub n_features: usize,
    pub target_min: f64,
    pub target_max: f64,
    pub trees: Vec<Tree>,
}

/// One in-bag row as seen from a particular feature's sort order.
#[derive(Copy, Clone, Debug)]
struct Entry {
    x: f64,
    y: f64,
    row: u32,
    /// Bootstrap multiplicity.
    w: u32,
}

struct Workspace {
    counts: Vec<u32>,
    /// Per feature, in-bag rows sorted by that feature; a node owns the same
    /// `lo..hi` range in every array.
    sorted: Vec<Vec<Entry>>,
    goes_left: Vec<bool>,
    scratch: Vec<Entry>,
    features: Vec<usize>,
    /// Leaf reached by each in-bag row of the tree just built.
    leaf_of: Vec<u32>,
}

fn mark_leaf(leaf_of: &mut [u32], entries: &[Entry], id: usize) {
    for e in entries {
        leaf_of[e.row as usize] = id as u32;
    }
}

struct Split {
    score: f64,
    feature: usize,
    threshold: f64,
    n_left: usize,
    w_left: f64,
    s_left: f64,
}

/// Best split of a node on one feature, maximizing S_l²/W_l + S_r²/W_r.
fn scan(entries: &[Entry], feature: usize, min_leaf: f64, w: f64, s: f64) -> Option<Split> {
    let mut wl = 0.0;
    let mut sl = 0.0;
    let mut best: Option<Split> = None;
    for i in 0..entries.len() - 1 {
        let e = entries[i];
        let w_e = e.w as f64;
        wl += w_e;
        sl += w_e * e.y;
        let b = entries[i + 1].x;
        if e.x >= b || wl < min_leaf {
            continue;
        }
        let wr = w - wl;
        if wr < min_leaf {
            break;
        }
        let sr = s - sl;
        let score = sl * sl / wl + sr * sr / wr;
        if best.as_ref().is_none_or(|b| score > b.score) {
            let mid = 0.5 * (e.x + b);
            best = Some(Split {
                score,
                feature,
                threshold: if mid < b { mid } else { e.x },
                n_left: i + 1,
                w_left: wl,
                s_left: sl,
            });
        }
    }
    best
}

fn row_major(cols: &[Vec<f64>], n: usize) -> Vec<f64> {
    let nf = cols.len();
    let mut rows = vec![0.0; n * nf];
    for (f, c) in cols.iter().enumerate() {
        for (i, &v) in c.iter().enumerate() {
            rows[i * nf + f] = v;
        }
    }
    rows
}

struct Trainer<'a> {
    cols: &'a [Vec<f64>],
    target: &'a [f64],
    orders: Vec<Vec<u32>>,
}

impl<'a> Trainer<'a> {
    fn new(cols: &'a [Vec<f64>], target: &'a [f64]) -> Self {
        let orders = cols
            .iter()
            .map(|c| {
                let mut o: Vec<u32> = (0..c.len() as u32).collect();
                o.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]));
                o
            })
            .collect();
        Trainer { cols, target, orders }
    }

    fn terminal(cfg: &ForestConfig, depth: usize, w: f64, rows: usize) -> bool {
        depth >= cfg.max_depth || w < 2.0 * cfg.min_leaf as f64 || rows < 2
    }

    fn build_tree(&self, cfg: &ForestConfig, tree_seed: u64, ws: &mut Workspace) -> Tree {
        let n = self.target.len();
        let nf = self.cols.len();
        let mut rng = seed::rng(tree_seed);
        ws.counts.iter_mut().for_each(|c| *c = 0);
        for _ in 0..n {
            ws.counts[rng.random_range(0..n)] += 1;
        }
        let (mut w0, mut s0) = (0.0, 0.0);
        for f in 0..nf {
            let col = &self.cols[f];
            let counts = &ws.counts;
            let target = self.target;
            ws.sorted[f].clear();
            ws.sorted[f].extend(self.orders[f].iter().filter(|&&r| counts[r as usize] > 0).map(|&r| Entry {
                x: col[r as usize],
                y: target[r as usize],
                row: r,
                w: counts[r as usize],
            }));
        }
        for e in &ws.sorted[0] {
            w0 += e.w as f64;
            s0 += e.w as f64 * e.y;
        }
        let in_bag = ws.sorted[0].len();
        let min_leaf = cfg.min_leaf as f64;

        let leaf = |value: f64| Flat { threshold: 0.0, value, feature: LEAF, left: 0, right: 0 };
        let mut nodes = vec![leaf(s0 / w0)];
        // (node, lo, hi, depth, weight, weighted sum)
        let mut stack = vec![(0usize, 0usize, in_bag, 0usize, w0, s0)];

        while let Some((id, lo, hi, depth, w, s)) = stack.pop() {
            if Self::terminal(cfg, depth, w, hi - lo) {
                mark_leaf(&mut ws.leaf_of, &ws.sorted[0][lo..hi], id);
                continue;
            }
            // Partial Fisher–Yates: the first `mtry` entries are the sampled
            // features; the rest are a fallback if none of them can split.
            for i in 0..nf {
                let j = rng.random_range(i..nf);
                ws.features.swap(i, j);
            }
            let mut best: Option<Split> = None;
            for (rank, &f) in ws.features.iter().enumerate() {
                if rank >= cfg.mtry && best.is_some() {
                    break;
                }
                if let Some(split) = scan(&ws.sorted[f][lo..hi], f, min_leaf, w, s) {
                    if best.as_ref().is_none_or(|b| split.score > b.score) {
                        best = Some(split);
                    }
                }
            }
            let parent = s * s / w;
            let Some(split) = best.filter(|b| b.score - parent > 1e-12 * parent.abs()) else {
                mark_leaf(&mut ws.leaf_of, &ws.sorted[0][lo..hi], id);
                continue;
            };

            let mid = lo + split.n_left;
            let (wl, sl) = (split.w_left, split.s_left);
            let (wr, sr) = (w - wl, s - sl);
            let left_open = !Self::terminal(cfg, depth + 1, wl, split.n_left);
            let right_open = !Self::terminal(cfg, depth + 1, wr, hi - mid);
            if left_open || right_open {
                for (i, e) in ws.sorted[split.feature][lo..hi].iter().enumerate() {
                    ws.goes_left[e.row as usize] = i < split.n_left;
                }
                for f in (0..nf).filter(|&f| f != split.feature) {
                    // Branch-free stable partition: every entry is written to
                    // both sides and only the matching cursor advances.
                    let range = &mut ws.sorted[f][lo..hi];
                    let scratch = &mut ws.scratch[..range.len()];
                    let (mut l, mut r) = (0usize, 0usize);
                    for i in 0..range.len() {
                        let e = range[i];
                        let go = ws.goes_left[e.row as usize] as usize;
                        range[l] = e;
                        scratch[r] = e;
                        l += go;
                        r += 1 - go;
                    }
                    range[l..].copy_from_slice(&scratch[..r]);
                }
            }

            let left = nodes.len();
            if !left_open {
                mark_leaf(&mut ws.leaf_of, &ws.sorted[split.feature][lo..mid], left);
            }
            if !right_open {
                mark_leaf(&mut ws.leaf_of, &ws.sorted[split.feature][mid..hi], left + 1);
            }
            nodes.push(leaf(sl / wl));
            nodes.push(leaf(sr / wr));
            let node = &mut nodes[id];
            node.feature = split.feature as u32;
            node.threshold = split.threshold;
            node.left = left as u32;
            node.right = left as u32 + 1;
            if right_open {
                stack.push((left + 1, mid, hi, depth + 1, wr, sr));
            }
            if left_open {
                stack.push((left, lo, mid, depth + 1, wl, sl));
            }
        }
        Tree { nodes }
    }
}

impl Forest {
    /// Fits `n_trees` bootstrap trees on column-major features.
    pub fn fit(cols: &[Vec<f64>], target: &[f64], seed: u64, cfg: &ForestConfig) -> Result<Forest> {
        Ok(Self::fit_impl(cols, target, seed, cfg, false)?.0)
    }

    /// Fits and returns the in-sample predictions, identical to calling
    /// [`Forest::predict`] on the training features but cheaper: in-bag rows
    /// take their leaf from the build itself.
    pub fn fit_predict(cols: &[Vec<f64>], target: &[f64], seed: u64, cfg: &ForestConfig) -> Result<(Forest, Vec<f64>)> {
        let (forest, pred) = Self::fit_impl(cols, target, seed, cfg, true)?;
        Ok((forest, pred.expect("requested")))
    }

    fn fit_impl(cols: &[Vec<f64>], target: &[f64], seed: u64, cfg: &ForestConfig, in_sample: bool) -> Result<(Forest, Option<Vec<f64>>)> {
        let n = target.len();
        for c in cols {
            if c.len() != n {
                return Err(Error::DimensionMismatch { expected: n, actual: c.len() });
            }
        }
        if cols.is_empty() || cfg.mtry == 0 || cfg.n_trees == 0 || cfg.min_leaf == 0 {
            return Err(Error::Config(format!("invalid forest configuration {cfg:?}")));
        }
        if n < cfg.min_leaf {
            return Err(Error::TooFewRows { rows: n, min: cfg.min_leaf });
        }
        if let Some(i) = target.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index: i });
        }
        let trainer = Trainer::new(cols, target);
        let mut ws = Workspace {
            counts: vec![0; n],
            sorted: vec![Vec::with_capacity(n); cols.len()],
            goes_left: vec![false; n],
            scratch: vec![Entry { x: 0.0, y: 0.0, row: 0, w: 0 }; n],
            features: (0..cols.len()).collect(),
            leaf_of: vec![0; n],
        };
        let rows = if in_sample { row_major(cols, n) } else { Vec::new() };
        let mut sums = vec![0.0; if in_sample { n } else { 0 }];
        let nf = cols.len();
        let mut trees = Vec::with_capacity(cfg.n_trees);
        for t in 0..cfg.n_trees {
            let tree = trainer.build_tree(cfg, seed::derive(seed, t as u64), &mut ws);
            if in_sample {
                for (i, sum) in sums.iter_mut().enumerate() {
                    *sum += if ws.counts[i] > 0 {
                        tree.nodes[ws.leaf_of[i] as usize].value
                    } else {
                        tree.predict_row(&rows[i * nf..(i + 1) * nf])
                    };
                }
            }
            trees.push(tree);
        }
        let forest = Forest {
            config: *cfg,
            seed,
            n_features: cols.len(),
            target_min: target.iter().copied().fold(f64::INFINITY, f64::min),
            target_max: target.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            trees,
        };
        let pred = in_sample.then(|| forest.finish(sums));
        Ok((forest, pred))
    }

    fn finish(&self, sums: Vec<f64>) -> Vec<f64> {
        let inv = 1.0 / self.trees.len() as f64;
        // Averaging can drift by an ulp past the leaf-mean envelope.
        sums.into_iter().map(|s| (s * inv).clamp(self.target_min, self.target_max)).collect()
    }

    /// Mean of per-tree predictions for each row.
    pub fn predict(&self, cols: &[Vec<f64>]) -> Result<Vec<f64>> {
        let nf = self.n_features;
        if cols.len() != nf {
            return Err(Error::DimensionMismatch { expected: nf, actual: cols.len() });
        }
        let n = cols.first().map_or(0, |c| c.len());
        if let Some(c) = cols.iter().find(|c| c.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, actual: c.len() });
        }
        let rows = row_major(cols, n);
        let mut sums = vec![0.0; n];
        for tree in &self.trees {
            for (sum, row) in sums.iter_mut().zip(rows.chunks_exact(nf)) {
                *sum += tree.predict_row(row);
            }
        }
        Ok(self.finish(sums))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Forest> {
        Ok(serde_json::from_str(s)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{any, prop, prop_assert, proptest};

    fn grid(n: usize) -> Vec<Vec<f64>> {
        vec![
            (0..n).map(|i| (i % 24) as f64).collect(),
            (0..n).map(|i| ((i * 7919) % 101) as f64 / 10.0).collect(),
            (0..n).map(|i| (i / 24 % 7 < 5) as u8 as f64).collect(),
            (0..n).map(|i| (i as f64 * 0.37).sin()).collect(),
        ]
    }

    #[test]
    fn constant_target_predicts_constant() {
        let x = grid(200);
        let f = Forest::fit(&x, &vec![2.5; 200], 1, &ForestConfig::default()).unwrap();
        assert!(f.predict(&x).unwrap().iter().all(|&p| p == 2.5));
        assert!(f.trees.iter().all(|t| t.len() == 1));
    }

    #[test]
    fn single_row_predicts_its_target() {
        let x = vec![vec![3.0], vec![1.0]];
        let cfg = ForestConfig { min_leaf: 1, ..ForestConfig::default() };
        let f = Forest::fit(&x, &[4.2], 9, &cfg).unwrap();
        assert_eq!(f.predict(&[vec![17.0, -3.0], vec![0.0, 9.0]]).unwrap(), vec![4.2, 4.2]);
        assert!(matches!(
            Forest::fit(&x, &[4.2], 9, &ForestConfig::default()),
            Err(Error::TooFewRows { rows: 1, min: 5 })
        ));
    }

    #[test]
    fn beats_the_mean_predictor_in_sample() {
        let x = grid(480);
        let y: Vec<f64> = (0..480).map(|i| x[0][i] * 0.1 + x[3][i] + if x[2][i] > 0.0 { 1.0 } else { 0.0 }).collect();
        let f = Forest::fit(&x, &y, 3, &ForestConfig::default()).unwrap();
        let p = f.predict(&x).unwrap();
        let mean = y.iter().sum::<f64>() / y.len() as f64;
        let rmse = |pred: &dyn Fn(usize) -> f64| (y.iter().enumerate().map(|(i, v)| (v - pred(i)).powi(2)).sum::<f64>() / y.len() as f64).sqrt();
        assert!(rmse(&|i| p[i]) <= rmse(&|_| mean));
    }

    #[test]
    fn step_function_generalizes() {
        // 30 days of half-hourly rows: hour feature plus a noise feature.
        let n = 30 * 48;
        let hour: Vec<f64> = (0..n).map(|i| ((i % 48) / 2) as f64).collect();
        let noise: Vec<f64> = (0..n).map(|i| ((i as u64 * 2_654_435_761) % 1000) as f64 / 1000.0).collect();
        let y: Vec<f64> = hour.iter().map(|&h| if h < 12.0 { 1.0 } else { 3.0 }).collect();
        let train = 25 * 48;
        let cols: Vec<Vec<f64>> = vec![hour[..train].to_vec(), noise[..train].to_vec()];
        let f = Forest::fit(&cols, &y[..train], 5, &ForestConfig::default()).unwrap();
        let test: Vec<Vec<f64>> = vec![hour[train..].to_vec(), noise[train..].to_vec()];
        let p = f.predict(&test).unwrap();
        let rmse = (p.iter().zip(&y[train..]).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / p.len() as f64).sqrt();
        assert!(rmse < 0.1, "holdout rmse {rmse}");
    }

    #[test]
    fn deterministic_and_structurally_valid() {
        let x = grid(300);
        let y: Vec<f64> = (0..300).map(|i| (i as f64 * 0.05).cos() + x[1][i]).collect();
        let cfg = ForestConfig { n_trees: 20, ..ForestConfig::default() };
        let a = Forest::fit(&x, &y, 11, &cfg).unwrap();
        let b = Forest::fit(&x, &y, 11, &cfg).unwrap();
        assert_eq!(a, b);
        let pa = a.predict(&x).unwrap();
        let pb = b.predict(&x).unwrap();
        assert!(pa.iter().zip(&pb).all(|(p, q)| p.to_bits() == q.to_bits()));
        assert_ne!(a, Forest::fit(&x, &y, 12, &cfg).unwrap());
        let (c, pc) = Forest::fit_predict(&x, &y, 11, &cfg).unwrap();
        assert_eq!(a, c);
        assert!(pa.iter().zip(&pc).all(|(p, q)| p.to_bits() == q.to_bits()));
        for t in &a.trees {
            assert!(t.depth() <= cfg.max_depth);
        }
    }

    #[test]
    fn leaves_hold_min_leaf_bootstrap_rows() {
        let x = grid(200);
        let y: Vec<f64> = (0..200).map(|i| (i as f64).sqrt()).collect();
        let cfg = ForestConfig { n_trees: 5, ..ForestConfig::default() };
        let forest = Forest::fit(&x, &y, 2, &cfg).unwrap();
        for (t, tree) in forest.trees.iter().enumerate() {
            let nodes = tree.nodes();
            // Replay the bootstrap and route every in-bag draw to its leaf.
            let mut rng = seed::rng(seed::derive(2, t as u64));
            let mut counts = vec![0usize; 200];
            for _ in 0..200 {
                counts[rng.random_range(0..200)] += 1;
            }
            let mut per_leaf = vec![0usize; nodes.len()];
            for (r, &c) in counts.iter().enumerate() {
                let mut i = 0;
                while let (Some(f), Some(th)) = (nodes[i].feature, nodes[i].threshold) {
                    i = if x[f][r] <= th { nodes[i].left.unwrap() } else { nodes[i].right.unwrap() };
                }
                per_leaf[i] += c;
            }
            for (i, n) in nodes.iter().enumerate() {
                if n.feature.is_none() {
                    assert!(per_leaf[i] >= cfg.min_leaf, "leaf {i} holds {}", per_leaf[i]);
                }
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let x = grid(100);
        let y: Vec<f64> = (0..100).map(|i| i as f64 % 7.0).collect();
        let cfg = ForestConfig { n_trees: 3, ..ForestConfig::default() };
        let f = Forest::fit(&x, &y, 4, &cfg).unwrap();
        let json = f.to_json().unwrap();
        assert!(json.contains("\"threshold\"") && json.contains("\"left\"") && json.contains("\"value\""));
        let g = Forest::from_json(&json).unwrap();
        assert_eq!(f.predict(&x).unwrap(), g.predict(&x).unwrap());
    }

    proptest! {
        #[test]
        fn predictions_within_target_range(
            y in prop::collection::vec(-50.0f64..50.0, 12..80),
            q in prop::collection::vec(-100.0f64..100.0, 4),
            seed in any::<u64>(),
        ) {
            let n = y.len();
            let x: Vec<Vec<f64>> = (0..4).map(|f| (0..n).map(|i| ((i * (f + 3)) % 17) as f64).collect()).collect();
            let cfg = ForestConfig { n_trees: 10, ..ForestConfig::default() };
            let forest = Forest::fit(&x, &y, seed, &cfg).unwrap();
            let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let query: Vec<Vec<f64>> = q.iter().map(|&v| vec![v]).collect();
            for p in forest.predict(&query).unwrap().into_iter().chain(forest.predict(&x).unwrap()) {
                prop_assert!(p >= lo && p <= hi);
            }
        }
    }
}
