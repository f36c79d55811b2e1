//! Random forest of Gini decision trees.
//!
//! Each tree is grown on a bootstrap sample until its leaves are pure (or the
//! remaining rows cannot be separated). At every split a random subset of the
//! features is examined; if none of them varies, further features are drawn.
//! Thresholds are midpoints between adjacent distinct values and rows with
//! `x <= threshold` go left. Ties in a leaf and ties in the forest vote both
//! resolve to class 0.

use std::io::{Read, Write};

use ndarray::{Array2, ArrayView1};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graphfeat::FEATURE_NAMES;
use crate::seeds::derive_seed;

pub const DEFAULT_TREES: usize = 100;
/// Graph features plus GNN embedding dimensions.
pub const N_AUGMENTED_FEATURES: usize = 13;

/// Column names of the augmented matrix `[X, Z]` with an embedding of width `dim`.
pub fn augmented_feature_names(base: &[&str], dim: usize) -> Vec<String> {
    base.iter()
        .map(|s| s.to_string())
        .chain((1..=dim).map(|i| format!("z{i}")))
        .collect()
}

/// Default 13 names: the five graph features then `z1..z8`.
pub fn default_feature_names() -> Vec<String> {
    augmented_feature_names(&FEATURE_NAMES, N_AUGMENTED_FEATURES - FEATURE_NAMES.len())
}

/// Concatenates columns of `x` and `z`.
pub fn augment(x: &Array2<f64>, z: &Array2<f64>) -> Result<Array2<f64>> {
    if x.nrows() != z.nrows() {
        return Err(Error::Shape(format!(
            "cannot join {} feature rows with {} embedding rows",
            x.nrows(),
            z.nrows()
        )));
    }
    Ok(ndarray::concatenate![ndarray::Axis(1), *x, *z])
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub seed: u64,
    /// Features examined per split; `None` means `ceil(sqrt(n_features))`.
    pub mtry: Option<usize>,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: DEFAULT_TREES,
            seed: 0,
            mtry: None,
        }
    }
}

/// Tree node in arena form; the root is node 0.
#[derive(Clone, Debug, PartialEq)]
pub enum Node {
    Leaf {
        counts: [u32; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

fn gini(c: [u32; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let p0 = c[0] as f64 / n;
    let p1 = c[1] as f64 / n;
    1.0 - p0 * p0 - p1 * p1
}

fn majority(c: [u32; 2]) -> u8 {
    u8::from(c[1] > c[0])
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    /// Builds a tree from arena nodes, checking that every child index points
    /// forward and every node is reachable exactly once.
    pub fn from_nodes(nodes: Vec<Node>, n_features: usize) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::Shape("tree has no nodes".into()));
        }
        let mut seen = vec![false; nodes.len()];
        seen[0] = true;
        for (i, node) in nodes.iter().enumerate() {
            match *node {
                Node::Leaf { counts } => {
                    if counts[0] + counts[1] == 0 {
                        return Err(Error::Shape("leaf with no training rows".into()));
                    }
                }
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if feature >= n_features || !threshold.is_finite() {
                        return Err(Error::Shape(format!("invalid split at node {i}")));
                    }
                    for c in [left, right] {
                        if c <= i || c >= nodes.len() || std::mem::replace(&mut seen[c], true) {
                            return Err(Error::Shape(format!("invalid child link at node {i}")));
                        }
                    }
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Shape("tree has unreachable nodes".into()));
        }
        Ok(DecisionTree { nodes })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn leaf_counts(&self, row: ArrayView1<f64>) -> [u32; 2] {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { counts } => return counts,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn predict_row(&self, row: ArrayView1<f64>) -> u8 {
        majority(self.leaf_counts(row))
    }

    /// Class counts of the training rows that reached each node.
    fn node_counts(&self) -> Vec<[u32; 2]> {
        let mut counts = vec![[0u32; 2]; self.nodes.len()];
        // children always follow their parent, so a reverse sweep sees them first
        for i in (0..self.nodes.len()).rev() {
            counts[i] = match self.nodes[i] {
                Node::Leaf { counts } => counts,
                Node::Split { left, right, .. } => {
                    [counts[left][0] + counts[right][0], counts[left][1] + counts[right][1]]
                }
            };
        }
        counts
    }

    /// Weighted impurity decrease per feature: `sum (n_t/n) * (g_t - n_l/n_t g_l - n_r/n_t g_r)`.
    pub fn impurity_decrease(&self, n_features: usize) -> Vec<f64> {
        let counts = self.node_counts();
        let total = (counts[0][0] + counts[0][1]) as f64;
        let mut out = vec![0.0; n_features];
        for (i, node) in self.nodes.iter().enumerate() {
            if let Node::Split {
                feature, left, right, ..
            } = *node
            {
                let size = |c: [u32; 2]| (c[0] + c[1]) as f64;
                let dec = size(counts[i]) * gini(counts[i])
                    - size(counts[left]) * gini(counts[left])
                    - size(counts[right]) * gini(counts[right]);
                out[feature] += dec / total;
            }
        }
        out
    }

    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        let mut max = 0;
        for (i, node) in self.nodes.iter().enumerate() {
            max = max.max(depth[i]);
            if let Node::Split { left, right, .. } = *node {
                depth[left] = depth[i] + 1;
                depth[right] = depth[i] + 1;
            }
        }
        max
    }
}

/// Best split found for one feature.
struct Candidate {
    feature: usize,
    threshold: f64,
    /// Weighted child impurity `n_l g_l + n_r g_r`; smaller is better.
    child_impurity: f64,
}

fn best_split_on(x: &Array2<f64>, y: &[u8], rows: &[usize], feature: usize) -> Option<Candidate> {
    let mut order: Vec<(f64, u8)> = rows.iter().map(|&r| (x[[r, feature]], y[r])).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = {
        let mut c = [0u32; 2];
        for &(_, l) in &order {
            c[l as usize] += 1;
        }
        c
    };
    let mut left = [0u32; 2];
    let mut best: Option<Candidate> = None;
    for i in 0..order.len() - 1 {
        left[order[i].1 as usize] += 1;
        let (a, b) = (order[i].0, order[i + 1].0);
        if a == b {
            continue;
        }
        let right = [total[0] - left[0], total[1] - left[1]];
        let nl = (left[0] + left[1]) as f64;
        let nr = (right[0] + right[1]) as f64;
        let child_impurity = nl * gini(left) + nr * gini(right);
        if best.as_ref().is_none_or(|c| child_impurity < c.child_impurity) {
            let mut threshold = a + (b - a) / 2.0;
            if threshold >= b {
                threshold = a;
            }
            best = Some(Candidate {
                feature,
                threshold,
                child_impurity,
            });
        }
    }
    best
}

fn grow_tree(x: &Array2<f64>, y: &[u8], sample: Vec<usize>, mtry: usize, rng: &mut ChaCha8Rng) -> DecisionTree {
    let n_features = x.ncols();
    let mut nodes: Vec<Node> = Vec::new();
    // (parent slot and side, rows); nodes are numbered in preorder
    let mut stack: Vec<(Option<(usize, bool)>, Vec<usize>)> = vec![(None, sample)];
    let mut features: Vec<usize> = (0..n_features).collect();
    while let Some((parent, rows)) = stack.pop() {
        let slot = nodes.len();
        if let Some((p, is_left)) = parent {
            if let Node::Split { left, right, .. } = &mut nodes[p] {
                *(if is_left { left } else { right }) = slot;
            }
        }
        let mut counts = [0u32; 2];
        for &r in &rows {
            counts[y[r] as usize] += 1;
        }
        nodes.push(Node::Leaf { counts });
        if counts[0] == 0 || counts[1] == 0 {
            continue;
        }
        features.shuffle(rng);
        let mut best: Option<Candidate> = None;
        for (tried, &f) in features.iter().enumerate() {
            if tried >= mtry && best.is_some() {
                break;
            }
            if let Some(c) = best_split_on(x, y, &rows, f) {
                if best.as_ref().is_none_or(|b| c.child_impurity < b.child_impurity) {
                    best = Some(c);
                }
            }
        }
        let Some(split) = best else {
            // every feature is constant on these rows
            continue;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows
            .iter()
            .partition(|&&row| x[[row, split.feature]] <= split.threshold);
        nodes[slot] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: 0,
            right: 0,
        };
        stack.push((Some((slot, false)), r));
        stack.push((Some((slot, true)), l));
    }
    DecisionTree { nodes }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ForestModel {
    pub feature_names: Vec<String>,
    pub seed: u64,
    pub tree_seeds: Vec<u64>,
    pub trees: Vec<DecisionTree>,
}

fn check_training(n_rows: usize, training: &[(usize, usize)]) -> Result<Vec<u8>> {
    if training.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    let mut y = vec![0u8; n_rows];
    let mut seen = [false; 2];
    for &(i, t) in training {
        if i >= n_rows || t > 1 {
            return Err(Error::Shape(format!("training entry ({i}, {t}) out of range")));
        }
        y[i] = t as u8;
        seen[t] = true;
    }
    if !(seen[0] && seen[1]) {
        return Err(Error::SingleClass);
    }
    Ok(y)
}

/// Trains on the rows listed in `training` (`(row, class)` pairs).
pub fn train_rf(
    x: &Array2<f64>,
    training: &[(usize, usize)],
    feature_names: Vec<String>,
    cfg: &ForestConfig,
) -> Result<ForestModel> {
    let n_features = x.ncols();
    if feature_names.len() != n_features || n_features == 0 {
        return Err(Error::Shape(format!(
            "{} feature names for {} columns",
            feature_names.len(),
            n_features
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("forest input contains non-finite values"));
    }
    if cfg.n_trees == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    let y = check_training(x.nrows(), training)?;
    let rows: Vec<usize> = training.iter().map(|&(i, _)| i).collect();
    let mtry = cfg
        .mtry
        .unwrap_or_else(|| (n_features as f64).sqrt().ceil() as usize)
        .clamp(1, n_features);
    let tree_seeds: Vec<u64> = (0..cfg.n_trees as u64).map(|t| derive_seed(cfg.seed, t)).collect();
    let trees = tree_seeds
        .par_iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let sample: Vec<usize> = (0..rows.len()).map(|_| rows[rng.gen_range(0..rows.len())]).collect();
            grow_tree(x, &y, sample, mtry, &mut rng)
        })
        .collect();
    Ok(ForestModel {
        feature_names,
        seed: cfg.seed,
        tree_seeds,
        trees,
    })
}

impl ForestModel {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Number of trees voting for class 1 on each row.
    pub fn votes(&self, x: &Array2<f64>) -> Result<Vec<usize>> {
        if x.ncols() != self.n_features() {
            return Err(Error::Shape(format!(
                "forest expects {} columns, got {}",
                self.n_features(),
                x.ncols()
            )));
        }
        Ok((0..x.nrows())
            .into_par_iter()
            .map(|i| self.trees.iter().filter(|t| t.predict_row(x.row(i)) == 1).count())
            .collect())
    }

    /// Majority vote; an even split goes to class 0.
    pub fn predict(&self, x: &Array2<f64>) -> Result<Vec<u8>> {
        let n = self.trees.len();
        Ok(self.votes(x)?.into_iter().map(|v| u8::from(2 * v > n)).collect())
    }

    /// Mean impurity decrease per feature across trees, normalized to sum 1
    /// (all zeros when no tree ever split).
    pub fn feature_importance(&self) -> Vec<f64> {
        let nf = self.n_features();
        let mut total = vec![0.0; nf];
        for t in &self.trees {
            for (acc, d) in total.iter_mut().zip(t.impurity_decrease(nf)) {
                *acc += d;
            }
        }
        let n = self.trees.len().max(1) as f64;
        total.iter_mut().for_each(|v| *v /= n);
        let sum: f64 = total.iter().sum();
        if sum > 0.0 {
            total.iter_mut().for_each(|v| *v /= sum);
        }
        total
    }

    pub fn write_json<W: Write>(&self, w: W) -> Result<()> {
        let json = ForestJson {
            feature_names: self.feature_names.clone(),
            seed: self.seed,
            tree_seeds: self.tree_seeds.clone(),
            trees: self.trees.iter().map(|t| nest(&t.nodes, 0)).collect(),
        };
        serde_json::to_writer(w, &json)?;
        Ok(())
    }

    pub fn read_json<R: Read>(r: R) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_reader(r);
        de.disable_recursion_limit();
        let de = serde_stacker::Deserializer::new(&mut de);
        let json = ForestJson::deserialize(de)?;
        let nf = json.feature_names.len();
        if json.tree_seeds.len() != json.trees.len() {
            return Err(Error::Shape("tree_seeds and trees differ in length".into()));
        }
        let trees = json
            .trees
            .iter()
            .map(|t| DecisionTree::from_nodes(flatten(t)?, nf))
            .collect::<Result<Vec<_>>>()?;
        if trees.is_empty() {
            return Err(Error::Shape("forest has no trees".into()));
        }
        Ok(ForestModel {
            feature_names: json.feature_names,
            seed: json.seed,
            tree_seeds: json.tree_seeds,
            trees,
        })
    }
}

/// Nested tree node as stored on disk: a leaf carries `counts`, a split
/// carries `feature`, `threshold`, `left` and `right`.
#[derive(Serialize, Deserialize)]
struct NestedNode {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    counts: Option<[u32; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    feature: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    left: Option<Box<NestedNode>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    right: Option<Box<NestedNode>>,
}

#[derive(Serialize, Deserialize)]
struct ForestJson {
    feature_names: Vec<String>,
    seed: u64,
    tree_seeds: Vec<u64>,
    trees: Vec<NestedNode>,
}

fn nest(nodes: &[Node], i: usize) -> NestedNode {
    match nodes[i] {
        Node::Leaf { counts } => NestedNode {
            counts: Some(counts),
            feature: None,
            threshold: None,
            left: None,
            right: None,
        },
        Node::Split {
            feature,
            threshold,
            left,
            right,
        } => NestedNode {
            counts: None,
            feature: Some(feature),
            threshold: Some(threshold),
            left: Some(Box::new(nest(nodes, left))),
            right: Some(Box::new(nest(nodes, right))),
        },
    }
}

/// Converts the nested form to an arena in pre-order without recursion.
fn flatten(root: &NestedNode) -> Result<Vec<Node>> {
    let mut nodes = Vec::new();
    let mut stack: Vec<(&NestedNode, Option<(usize, bool)>)> = vec![(root, None)];
    while let Some((n, parent)) = stack.pop() {
        let slot = nodes.len();
        if let Some((p, is_left)) = parent {
            if let Node::Split { left, right, .. } = &mut nodes[p] {
                *(if is_left { left } else { right }) = slot;
            }
        }
        match (n.counts, n.feature, n.threshold, &n.left, &n.right) {
            (Some(counts), None, None, None, None) => nodes.push(Node::Leaf { counts }),
            (None, Some(feature), Some(threshold), Some(l), Some(r)) => {
                nodes.push(Node::Split {
                    feature,
                    threshold,
                    left: 0,
                    right: 0,
                });
                stack.push((r, Some((slot, false))));
                stack.push((l, Some((slot, true))));
            }
            _ => return Err(Error::Shape("tree node is neither a leaf nor a split".into())),
        }
    }
    Ok(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn stump(feature: usize, threshold: f64, left: u8, right: u8) -> DecisionTree {
        let leaf = |c: u8| Node::Leaf {
            counts: if c == 1 { [0, 1] } else { [1, 0] },
        };
        DecisionTree::from_nodes(
            vec![
                Node::Split {
                    feature,
                    threshold,
                    left: 1,
                    right: 2,
                },
                leaf(left),
                leaf(right),
            ],
            2,
        )
        .unwrap()
    }

    fn hand_forest(trees: Vec<DecisionTree>) -> ForestModel {
        ForestModel {
            feature_names: vec!["a".into(), "b".into()],
            seed: 0,
            tree_seeds: vec![0; trees.len()],
            trees,
        }
    }

    #[test]
    fn separable_one_feature() {
        let x = Array2::from_shape_fn((40, 3), |(i, j)| if j == 0 { i as f64 } else { ((i * 7 + j) % 5) as f64 });
        let training: Vec<(usize, usize)> = (0..40).map(|i| (i, usize::from(i >= 20))).collect();
        let names = vec!["a".into(), "b".into(), "c".into()];
        let m = train_rf(&x, &training, names, &ForestConfig::default()).unwrap();
        let y = m.predict(&x).unwrap();
        assert!(training.iter().all(|&(i, t)| y[i] as usize == t));
    }

    #[test]
    fn conflicting_duplicates_vote_majority() {
        let x = Array2::from_elem((5, 2), 1.0);
        let training = vec![(0, 1), (1, 1), (2, 0), (3, 1), (4, 0)];
        let cfg = ForestConfig {
            n_trees: 1,
            ..Default::default()
        };
        let m = train_rf(&x, &training, vec!["a".into(), "b".into()], &cfg).unwrap();
        assert_eq!(m.trees[0].nodes().len(), 1);
        assert_eq!(m.feature_importance(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_class_rejected() {
        let x = Array2::zeros((3, 2));
        let r = train_rf(&x, &[(0, 1), (1, 1)], vec!["a".into(), "b".into()], &ForestConfig::default());
        assert!(matches!(r, Err(Error::SingleClass)));
    }

    #[test]
    fn hand_built_votes() {
        let f = hand_forest(vec![stump(0, 0.5, 0, 1), stump(1, 0.5, 0, 1), stump(0, 1.5, 0, 1)]);
        let x = array![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [2.0, 1.0]];
        assert_eq!(f.votes(&x).unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(f.predict(&x).unwrap(), vec![0, 0, 1, 1]);
        let tie = hand_forest(vec![stump(0, 0.5, 0, 1), stump(0, 0.5, 1, 0)]);
        assert_eq!(tie.predict(&x).unwrap(), vec![0, 0, 0, 0]);
    }

    #[test]
    fn importance_single_feature() {
        let f = hand_forest(vec![stump(1, 0.5, 0, 1), stump(1, 2.0, 0, 1)]);
        assert_eq!(f.feature_importance(), vec![0.0, 1.0]);
    }

    #[test]
    fn json_roundtrip() {
        let x = Array2::from_shape_fn((30, 2), |(i, j)| ((i * (j + 3)) % 11) as f64 + 0.25 * j as f64);
        let training: Vec<(usize, usize)> = (0..30).map(|i| (i, (i * 13 % 7 > 3) as usize)).collect();
        let cfg = ForestConfig {
            n_trees: 7,
            seed: 5,
            mtry: None,
        };
        let m = train_rf(&x, &training, vec!["a".into(), "b".into()], &cfg).unwrap();
        let mut buf = Vec::new();
        m.write_json(&mut buf).unwrap();
        assert_eq!(ForestModel::read_json(&buf[..]).unwrap(), m);
        assert!(ForestModel::read_json(&br#"{"feature_names":[],"seed":0,"tree_seeds":[0],"trees":[{"counts":[1,0],"feature":0}]}"#[..]).is_err());
    }

    #[test]
    fn arena_validation() {
        let bad = vec![
            Node::Split {
                feature: 0,
                threshold: 0.0,
                left: 1,
                right: 1,
            },
            Node::Leaf { counts: [1, 0] },
        ];
        assert!(DecisionTree::from_nodes(bad, 1).is_err());
        assert!(DecisionTree::from_nodes(vec![Node::Leaf { counts: [0, 0] }], 1).is_err());
    }

    #[test]
    fn midpoint_never_reaches_upper_value() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let x = array![[a], [b]];
        let c = best_split_on(&x, &[0, 1], &[0, 1], 0).unwrap();
        assert!(c.threshold >= a && c.threshold < b);
    }
}
