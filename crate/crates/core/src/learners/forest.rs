//! Random forest of CART trees.
//!
//! Trees are grown on bootstrap samples with `mtry` candidate features per
//! node. Splits maximize `S_L^2 / n_L + S_R^2 / n_R` (sums of the response),
//! which is variance reduction for regression and Gini reduction for 0/1
//! targets. Categorical features are split by ordering the levels present in
//! the node by their mean response and scanning that order; levels absent
//! from the node go right.
//!
//! A node is split only while it holds more than `min_node_size` samples.

use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::seed::{derive_seed, rng_from_seed};
use crate::tabular::{Column, Frame};

/// Features with at most this many distinct codes are scanned by histogram.
const HISTOGRAM_MAX_CODES: usize = 256;
const MAX_LEVELS: usize = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Candidate features per node; task default when unset.
    pub mtry: Option<usize>,
    pub min_node_size: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 500,
            mtry: None,
            min_node_size: None,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn resolved_mtry(&self, n_features: usize, classification: bool) -> usize {
        let default = if classification {
            (n_features as f64).sqrt().floor() as usize
        } else {
            n_features / 3
        };
        self.mtry.unwrap_or(default).clamp(1, n_features.max(1))
    }

    pub fn resolved_min_node_size(&self, classification: bool) -> usize {
        self.min_node_size
            .unwrap_or(if classification { 1 } else { 5 })
            .max(1)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(f64),
    Numeric {
        feature: u32,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Categorical {
        feature: u32,
        left_levels: u128,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    /// Prediction for one row of feature values; categorical codes are
    /// stored as exact small integers.
    fn predict(&self, row: &[f64]) -> f64 {
        let mut at = 0usize;
        loop {
            match &self.nodes[at] {
                Node::Leaf(v) => return *v,
                Node::Numeric {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    at = if row[*feature as usize] <= *threshold { *left } else { *right } as usize;
                }
                Node::Categorical {
                    feature,
                    left_levels,
                    left,
                    right,
                } => {
                    let l = row[*feature as usize] as u32;
                    let goes_left = l < 128 && (left_levels >> l) & 1 == 1;
                    at = if goes_left { *left } else { *right } as usize;
                }
            }
        }
    }
}

const PREDICT_BLOCK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    trees: Vec<Tree>,
    n_features: usize,
}

/// Feature recoded to small integer codes.
struct Coded {
    codes: Vec<u32>,
    n_codes: usize,
    /// Sorted distinct values for continuous features.
    values: Option<Vec<f64>>,
}

fn code_features(frame: &Frame) -> Result<Vec<Coded>> {
    frame
        .schema()
        .iter()
        .zip(frame.columns())
        .map(|(s, c)| match c {
            Column::Continuous(v) => {
                let mut uniq = v.clone();
                uniq.sort_by(f64::total_cmp);
                uniq.dedup();
                let codes = v
                    .iter()
                    .map(|x| uniq.partition_point(|u| u < x) as u32)
                    .collect();
                Ok(Coded {
                    codes,
                    n_codes: uniq.len(),
                    values: Some(uniq),
                })
            }
            Column::Categorical(v) => {
                let n_codes = s.width();
                if n_codes > MAX_LEVELS {
                    return Err(Error::Config(format!(
                        "random forest supports at most {MAX_LEVELS} levels, `{}` has {n_codes}",
                        s.name
                    )));
                }
                Ok(Coded {
                    codes: v.clone(),
                    n_codes,
                    values: None,
                })
            }
        })
        .collect()
}

struct Grower<'a> {
    features: &'a [Coded],
    y: &'a [f64],
    mtry: usize,
    min_node_size: usize,
    // scratch
    sums: Vec<f64>,
    counts: Vec<u32>,
    pairs: Vec<(u32, f64)>,
    order: Vec<usize>,
}

struct Candidate {
    score: f64,
    node: Node,
}

impl<'a> Grower<'a> {
    fn new(features: &'a [Coded], y: &'a [f64], mtry: usize, min_node_size: usize) -> Self {
        let max_codes = features
            .iter()
            .map(|f| f.n_codes.min(HISTOGRAM_MAX_CODES))
            .max()
            .unwrap_or(0);
        Grower {
            features,
            y,
            mtry,
            min_node_size,
            sums: vec![0.0; max_codes],
            counts: vec![0; max_codes],
            pairs: Vec::new(),
            order: Vec::new(),
        }
    }

    fn grow<R: Rng>(&mut self, mut samples: Vec<u32>, rng: &mut R) -> Tree {
        let mut nodes = vec![Node::Leaf(0.0)];
        let mut stack = vec![(0usize, 0usize, samples.len())];
        while let Some((id, lo, hi)) = stack.pop() {
            let part = &samples[lo..hi];
            let n = part.len();
            let sum: f64 = part.iter().map(|&i| self.y[i as usize]).sum();
            let mean = sum / n as f64;
            let pure = part.iter().all(|&i| self.y[i as usize] == self.y[part[0] as usize]);
            if n <= self.min_node_size || pure {
                nodes[id] = Node::Leaf(mean);
                continue;
            }
            let parent_score = sum * sum / n as f64;
            let mut best: Option<Candidate> = None;
            for f in sample_indices(rng, self.features.len(), self.mtry) {
                if let Some(c) = self.best_split(f, part, sum) {
                    if c.score > parent_score + 1e-12 * parent_score.abs().max(1e-12)
                        && best.as_ref().is_none_or(|b| c.score > b.score)
                    {
                        best = Some(c);
                    }
                }
            }
            let Some(best) = best else {
                nodes[id] = Node::Leaf(mean);
                continue;
            };
            // partition samples in place
            let goes_left = |i: u32| -> bool {
                match &best.node {
                    Node::Numeric {
                        feature, threshold, ..
                    } => {
                        let f = &self.features[*feature as usize];
                        let code = f.codes[i as usize] as usize;
                        f.values.as_ref().expect("numeric")[code] <= *threshold
                    }
                    Node::Categorical {
                        feature,
                        left_levels,
                        ..
                    } => {
                        let code = self.features[*feature as usize].codes[i as usize];
                        (left_levels >> code) & 1 == 1
                    }
                    Node::Leaf(_) => unreachable!(),
                }
            };
            let slice = &mut samples[lo..hi];
            let mut split_at = 0;
            for k in 0..slice.len() {
                if goes_left(slice[k]) {
                    slice.swap(k, split_at);
                    split_at += 1;
                }
            }
            let left = nodes.len() as u32;
            let right = left + 1;
            nodes.push(Node::Leaf(0.0));
            nodes.push(Node::Leaf(0.0));
            nodes[id] = match best.node {
                Node::Numeric {
                    feature, threshold, ..
                } => Node::Numeric {
                    feature,
                    threshold,
                    left,
                    right,
                },
                Node::Categorical {
                    feature,
                    left_levels,
                    ..
                } => Node::Categorical {
                    feature,
                    left_levels,
                    left,
                    right,
                },
                Node::Leaf(_) => unreachable!(),
            };
            stack.push((right as usize, lo + split_at, hi));
            stack.push((left as usize, lo, lo + split_at));
        }
        Tree { nodes }
    }

    /// Best split of `part` on feature `f`, scanning groups of equal code in
    /// the feature's order (value order, or mean-response order for levels).
    fn best_split(&mut self, f: usize, part: &[u32], total: f64) -> Option<Candidate> {
        let feat = &self.features[f];
        let n = part.len() as f64;
        // (code, count, sum) groups in scan order
        let mut groups: Vec<(u32, u32, f64)> = Vec::new();
        if feat.n_codes <= HISTOGRAM_MAX_CODES {
            let k = feat.n_codes;
            self.sums[..k].fill(0.0);
            self.counts[..k].fill(0);
            for &i in part {
                let c = feat.codes[i as usize] as usize;
                self.sums[c] += self.y[i as usize];
                self.counts[c] += 1;
            }
            for c in 0..k {
                if self.counts[c] > 0 {
                    groups.push((c as u32, self.counts[c], self.sums[c]));
                }
            }
        } else {
            self.pairs.clear();
            self.pairs
                .extend(part.iter().map(|&i| (feat.codes[i as usize], self.y[i as usize])));
            self.pairs.sort_unstable_by_key(|p| p.0);
            for &(c, y) in &self.pairs {
                match groups.last_mut() {
                    Some(g) if g.0 == c => {
                        g.1 += 1;
                        g.2 += y;
                    }
                    _ => groups.push((c, 1, y)),
                }
            }
        }
        if groups.len() < 2 {
            return None;
        }
        if feat.values.is_none() {
            self.order.clear();
            self.order.extend(0..groups.len());
            self.order.sort_by(|&a, &b| {
                let ma = groups[a].2 / groups[a].1 as f64;
                let mb = groups[b].2 / groups[b].1 as f64;
                ma.total_cmp(&mb).then(groups[a].0.cmp(&groups[b].0))
            });
            groups = self.order.iter().map(|&k| groups[k]).collect();
        }

        let mut best: Option<(usize, f64)> = None;
        let mut n_left = 0.0;
        let mut s_left = 0.0;
        for t in 0..groups.len() - 1 {
            n_left += groups[t].1 as f64;
            s_left += groups[t].2;
            let n_right = n - n_left;
            let s_right = total - s_left;
            let score = s_left * s_left / n_left + s_right * s_right / n_right;
            if best.is_none_or(|b| score > b.1) {
                best = Some((t, score));
            }
        }
        let (t, score) = best?;
        let node = match &feat.values {
            Some(values) => {
                let lo = values[groups[t].0 as usize];
                let hi = values[groups[t + 1].0 as usize];
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                Node::Numeric {
                    feature: f as u32,
                    threshold,
                    left: 0,
                    right: 0,
                }
            }
            None => {
                let mask = groups[..=t]
                    .iter()
                    .fold(0u128, |m, g| m | (1u128 << g.0));
                Node::Categorical {
                    feature: f as u32,
                    left_levels: mask,
                    left: 0,
                    right: 0,
                }
            }
        };
        Some(Candidate { score, node })
    }
}

impl Forest {
    pub fn fit(frame: &Frame, y: &[f64], params: &ForestParams, classification: bool, seed: u64) -> Result<Forest> {
        if params.n_trees == 0 {
            return Err(Error::Config("random forest needs at least one tree".into()));
        }
        let n = frame.n_rows();
        if n == 0 || y.len() != n {
            return Err(Error::Dimension(format!(
                "forest got {n} rows and {} responses",
                y.len()
            )));
        }
        let p = frame.n_cols();
        let features = code_features(frame)?;
        let mtry = params.resolved_mtry(p, classification);
        let min_node_size = params.resolved_min_node_size(classification);
        let trees = par::map_range(params.n_trees, |t| {
            let mut rng = rng_from_seed(derive_seed(seed, t as u64));
            let samples: Vec<u32> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n) as u32).collect()
            } else {
                (0..n as u32).collect()
            };
            if p == 0 {
                let mean = samples.iter().map(|&i| y[i as usize]).sum::<f64>() / n as f64;
                return Tree {
                    nodes: vec![Node::Leaf(mean)],
                };
            }
            Grower::new(&features, y, mtry, min_node_size).grow(samples, &mut rng)
        });
        Ok(Forest {
            trees,
            n_features: p,
        })
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Mean of the tree predictions; the tree order of summation is fixed.
    pub fn predict(&self, frame: &Frame) -> Vec<f64> {
        let cols = frame.columns();
        let p = cols.len();
        let n_trees = self.trees.len() as f64;
        let n = frame.n_rows();
        // dense row-major blocks, trees outer, keep each tree hot in cache
        let blocks = par::map_range(n.div_ceil(PREDICT_BLOCK), |b| {
            let rows = b * PREDICT_BLOCK..((b + 1) * PREDICT_BLOCK).min(n);
            let mut dense = Vec::with_capacity(rows.len() * p);
            for i in rows.clone() {
                dense.extend(cols.iter().map(|c| match c {
                    Column::Continuous(v) => v[i],
                    Column::Categorical(v) => f64::from(v[i]),
                }));
            }
            let mut sums = vec![0.0; rows.len()];
            for t in &self.trees {
                for (s, row) in sums.iter_mut().zip(dense.chunks_exact(p.max(1))) {
                    *s += t.predict(row);
                }
            }
            sums
        });
        blocks.into_iter().flatten().map(|s| s / n_trees).collect()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }
}
