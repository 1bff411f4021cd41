//! CART trees and random forests for regression and classification.
//!
//! Trees may carry several outputs at once: a regression leaf stores one
//! mean per output and a classification leaf one class histogram per
//! output. Split quality is the impurity decrease summed over outputs, so
//! the single-output case is the textbook algorithm.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training targets for a tree or forest.
#[derive(Debug, Clone, Copy)]
pub enum TreeTask<'a> {
    Regression(&'a [f64]),
    MultiRegression(&'a [Vec<f64>]),
    Classification { labels: &'a [u8], n_classes: usize },
    MultiClassification { labels: &'a [Vec<u8>], n_classes: &'a [usize] },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    Regression { outputs: usize },
    Classification { classes: Vec<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum LeafValue {
    /// Mean target per output.
    Regression(Vec<f64>),
    /// Class counts per output.
    Classification(Vec<Vec<u32>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        /// Impurity decrease achieved by this split.
        gain: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf(LeafValue),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// `⌈√F⌉` candidates per split.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, n_features: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (n_features as f64).sqrt().ceil() as usize,
            MaxFeatures::All => n_features,
            MaxFeatures::Count(k) => k,
        };
        m.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CartConfig {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
}

impl Default for CartConfig {
    fn default() -> Self {
        CartConfig {
            max_depth: None,
            min_samples_leaf: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: Some(12),
            min_samples_leaf: 2,
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::InvalidConfig("n_trees must be >= 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidConfig("min_samples_leaf must be >= 1".into()));
        }
        if matches!(self.max_features, MaxFeatures::Count(0)) {
            return Err(Error::InvalidConfig("max_features must be >= 1".into()));
        }
        Ok(())
    }
}

/// Targets flattened to `n × k`.
enum Targets {
    Regression { y: Vec<f64>, k: usize },
    Classification { labels: Vec<u8>, classes: Vec<usize> },
}

impl Targets {
    fn from_task(task: TreeTask<'_>, n: usize) -> Result<Self> {
        let targets = match task {
            TreeTask::Regression(y) => Targets::Regression { y: y.to_vec(), k: 1 },
            TreeTask::MultiRegression(y) => {
                let k = y.first().map(Vec::len).unwrap_or(0);
                if y.iter().any(|r| r.len() != k) || k == 0 {
                    return Err(Error::Data("ragged or empty regression targets".into()));
                }
                Targets::Regression { y: y.concat(), k }
            }
            TreeTask::Classification { labels, n_classes } => Targets::Classification {
                labels: labels.to_vec(),
                classes: vec![n_classes],
            },
            TreeTask::MultiClassification { labels, n_classes } => {
                if labels.iter().any(|r| r.len() != n_classes.len()) || n_classes.is_empty() {
                    return Err(Error::Data("ragged or empty class targets".into()));
                }
                Targets::Classification {
                    labels: labels.concat(),
                    classes: n_classes.to_vec(),
                }
            }
        };
        if targets.len() != n {
            return Err(Error::Data(format!(
                "{} feature rows but {} target rows",
                n,
                targets.len()
            )));
        }
        match &targets {
            Targets::Regression { y, .. } if y.iter().any(|v| !v.is_finite()) => {
                return Err(Error::NonFinite("regression target".into()))
            }
            Targets::Classification { labels, classes } => {
                let k = classes.len();
                if labels.iter().enumerate().any(|(i, &c)| c as usize >= classes[i % k]) {
                    return Err(Error::Data("class label out of range".into()));
                }
            }
            _ => {}
        }
        Ok(targets)
    }

    fn len(&self) -> usize {
        match self {
            Targets::Regression { y, k } => y.len() / k,
            Targets::Classification { labels, classes } => labels.len() / classes.len(),
        }
    }

    fn kind(&self) -> OutputKind {
        match self {
            Targets::Regression { k, .. } => OutputKind::Regression { outputs: *k },
            Targets::Classification { classes, .. } => OutputKind::Classification {
                classes: classes.clone(),
            },
        }
    }
}

/// Running sufficient statistics for one side of a split.
#[derive(Clone)]
enum Stats {
    Regression { n: f64, sum: Vec<f64>, sum_sq: Vec<f64> },
    Classification { n: f64, counts: Vec<Vec<u32>> },
}

impl Stats {
    fn empty(targets: &Targets) -> Self {
        match targets {
            Targets::Regression { k, .. } => Stats::Regression {
                n: 0.0,
                sum: vec![0.0; *k],
                sum_sq: vec![0.0; *k],
            },
            Targets::Classification { classes, .. } => Stats::Classification {
                n: 0.0,
                counts: classes.iter().map(|&c| vec![0; c]).collect(),
            },
        }
    }

    fn add(&mut self, targets: &Targets, i: usize, sign: f64) {
        match (self, targets) {
            (Stats::Regression { n, sum, sum_sq }, Targets::Regression { y, k }) => {
                *n += sign;
                for j in 0..*k {
                    let v = y[i * k + j];
                    sum[j] += sign * v;
                    sum_sq[j] += sign * v * v;
                }
            }
            (Stats::Classification { n, counts }, Targets::Classification { labels, classes }) => {
                *n += sign;
                let k = classes.len();
                for (j, hist) in counts.iter_mut().enumerate() {
                    let c = labels[i * k + j] as usize;
                    if sign > 0.0 {
                        hist[c] += 1;
                    } else {
                        hist[c] -= 1;
                    }
                }
            }
            _ => unreachable!("stats and targets share a task"),
        }
    }

    /// Sample-weighted impurity: SSE for regression, `n · Gini` for classes.
    fn impurity(&self) -> f64 {
        match self {
            Stats::Regression { n, sum, sum_sq } => {
                if *n == 0.0 {
                    return 0.0;
                }
                sum.iter()
                    .zip(sum_sq)
                    .map(|(s, sq)| (sq - s * s / n).max(0.0))
                    .sum()
            }
            Stats::Classification { n, counts } => {
                if *n == 0.0 {
                    return 0.0;
                }
                counts
                    .iter()
                    .map(|hist| n - hist.iter().map(|&c| (c as f64) * (c as f64)).sum::<f64>() / n)
                    .sum()
            }
        }
    }

    fn is_pure(&self) -> bool {
        match self {
            Stats::Regression { .. } => self.impurity() <= 0.0,
            Stats::Classification { counts, .. } => {
                counts.iter().all(|h| h.iter().filter(|&&c| c > 0).count() <= 1)
            }
        }
    }

    fn leaf(&self) -> LeafValue {
        match self {
            Stats::Regression { n, sum, .. } => LeafValue::Regression(sum.iter().map(|s| s / n).collect()),
            Stats::Classification { counts, .. } => LeafValue::Classification(counts.clone()),
        }
    }
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    targets: &'a Targets,
    config: CartConfig,
    max_features: usize,
    n_features: usize,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn stats(&self, idx: &[usize]) -> Stats {
        let mut s = Stats::empty(self.targets);
        for &i in idx {
            s.add(self.targets, i, 1.0);
        }
        s
    }

    fn build<R: Rng>(&self, idx: &mut [usize], depth: usize, rng: &mut R) -> TreeNode {
        let stats = self.stats(idx);
        let depth_reached = self.config.max_depth.is_some_and(|d| depth >= d);
        if depth_reached || stats.is_pure() || idx.len() < 2 * self.config.min_samples_leaf {
            return TreeNode::Leaf(stats.leaf());
        }
        let features: Vec<usize> = if self.max_features >= self.n_features {
            (0..self.n_features).collect()
        } else {
            let mut f = sample(rng, self.n_features, self.max_features).into_vec();
            f.sort_unstable();
            f
        };
        let Some(best) = self.best_split(idx, &stats, &features) else {
            return TreeNode::Leaf(stats.leaf());
        };
        let mut left: Vec<usize> = Vec::with_capacity(idx.len());
        let mut right: Vec<usize> = Vec::with_capacity(idx.len());
        for &i in idx.iter() {
            if self.x[i][best.feature] <= best.threshold {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        let left_node = self.build(&mut left, depth + 1, rng);
        let right_node = self.build(&mut right, depth + 1, rng);
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            gain: best.gain,
            left: Box::new(left_node),
            right: Box::new(right_node),
        }
    }

    /// Exhaustive search over midpoints; features and thresholds are visited
    /// in ascending order and only a larger gain (beyond rounding) replaces
    /// the best.
    fn best_split(&self, idx: &mut [usize], parent: &Stats, features: &[usize]) -> Option<BestSplit> {
        let n = idx.len();
        let msl = self.config.min_samples_leaf;
        let parent_impurity = parent.impurity();
        let tolerance = 1e-12 * parent_impurity.max(1e-300);
        let mut best: Option<BestSplit> = None;
        for &f in features {
            idx.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let mut left = Stats::empty(self.targets);
            let mut right = parent.clone();
            for pos in 0..n - 1 {
                let i = idx[pos];
                left.add(self.targets, i, 1.0);
                right.add(self.targets, i, -1.0);
                let (a, b) = (self.x[i][f], self.x[idx[pos + 1]][f]);
                if a == b || pos + 1 < msl || n - pos - 1 < msl {
                    continue;
                }
                let gain = parent_impurity - left.impurity() - right.impurity();
                if gain <= tolerance {
                    continue;
                }
                if best.as_ref().is_none_or(|bs| gain > bs.gain + tolerance) {
                    let mut threshold = a + (b - a) / 2.0;
                    if threshold >= b {
                        threshold = a;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        gain,
                    });
                }
            }
        }
        best
    }
}

/// A fitted tree together with its input width and output layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub root: TreeNode,
    pub n_features: usize,
    pub kind: OutputKind,
}

fn check_design(x: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = x.first() else {
        return Err(Error::TooFewSamples { required: 1, actual: 0 });
    };
    let f = first.len();
    if f == 0 || x.iter().any(|r| r.len() != f) {
        return Err(Error::Data("feature rows must be non-empty and equally long".into()));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("tree feature".into()));
    }
    Ok(f)
}

fn fit_tree_on<R: Rng>(
    x: &[Vec<f64>],
    targets: &Targets,
    config: CartConfig,
    max_features: usize,
    idx: &mut [usize],
    rng: &mut R,
) -> DecisionTree {
    let n_features = x[0].len();
    let builder = Builder {
        x,
        targets,
        config,
        max_features,
        n_features,
    };
    DecisionTree {
        root: builder.build(idx, 0, rng),
        n_features,
        kind: targets.kind(),
    }
}

/// Greedy CART over all features.
pub fn fit_cart(x: &[Vec<f64>], task: TreeTask<'_>, config: &CartConfig) -> Result<DecisionTree> {
    let f = check_design(x)?;
    if config.min_samples_leaf == 0 {
        return Err(Error::InvalidConfig("min_samples_leaf must be >= 1".into()));
    }
    let targets = Targets::from_task(task, x.len())?;
    let mut idx: Vec<usize> = (0..x.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    Ok(fit_tree_on(x, &targets, *config, f, &mut idx, &mut rng))
}

fn argmax_lowest(counts: impl IntoIterator<Item = u32>) -> u8 {
    let mut best = (0u8, 0u32);
    for (c, n) in counts.into_iter().enumerate() {
        if n > best.1 {
            best = (c as u8, n);
        }
    }
    best.0
}

impl TreeNode {
    pub fn leaf_for(&self, x: &[f64]) -> &LeafValue {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf(v) => return v,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn split_count(&self) -> usize {
        match self {
            TreeNode::Leaf(_) => 0,
            TreeNode::Split { left, right, .. } => 1 + left.split_count() + right.split_count(),
        }
    }

    fn add_importance(&self, totals: &mut [f64]) {
        if let TreeNode::Split {
            feature,
            gain,
            left,
            right,
            ..
        } = self
        {
            totals[*feature] += gain;
            left.add_importance(totals);
            right.add_importance(totals);
        }
    }
}

impl DecisionTree {
    /// Regression outputs of the leaf reached by `x`.
    pub fn predict_outputs(&self, x: &[f64]) -> Vec<f64> {
        match self.root.leaf_for(x) {
            LeafValue::Regression(v) => v.clone(),
            LeafValue::Classification(h) => h.iter().map(|c| argmax_lowest(c.iter().copied()) as f64).collect(),
        }
    }

    /// Most frequent class per output, lowest index on ties.
    pub fn predict_classes(&self, x: &[f64]) -> Vec<u8> {
        match self.root.leaf_for(x) {
            LeafValue::Classification(h) => h.iter().map(|c| argmax_lowest(c.iter().copied())).collect(),
            LeafValue::Regression(v) => v.iter().map(|&p| p.round().max(0.0) as u8).collect(),
        }
    }

    pub fn predict_value(&self, x: &[f64]) -> f64 {
        self.predict_outputs(x)[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<DecisionTree>,
    pub n_features: usize,
    pub kind: OutputKind,
}

/// Bagged CART ensemble. Tree `i` draws from its own ChaCha stream `i`
/// under `seed`, so results do not depend on scheduling and a larger forest
/// extends a smaller one.
pub fn fit_random_forest(x: &[Vec<f64>], task: TreeTask<'_>, config: &ForestConfig) -> Result<RandomForest> {
    config.validate()?;
    let f = check_design(x)?;
    let targets = Targets::from_task(task, x.len())?;
    let cart = CartConfig {
        max_depth: config.max_depth,
        min_samples_leaf: config.min_samples_leaf,
    };
    let max_features = config.max_features.resolve(f);
    let n = x.len();
    let trees: Vec<DecisionTree> = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64);
            let mut idx: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            fit_tree_on(x, &targets, cart, max_features, &mut idx, &mut rng)
        })
        .collect();
    Ok(RandomForest {
        trees,
        n_features: f,
        kind: targets.kind(),
    })
}

impl RandomForest {
    pub fn outputs(&self) -> usize {
        match &self.kind {
            OutputKind::Regression { outputs } => *outputs,
            OutputKind::Classification { classes } => classes.len(),
        }
    }

    /// Mean of tree outputs.
    pub fn predict_outputs(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.outputs()];
        for tree in &self.trees {
            for (o, v) in out.iter_mut().zip(tree.predict_outputs(x)) {
                *o += v;
            }
        }
        let n = self.trees.len() as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }

    pub fn predict_value(&self, x: &[f64]) -> f64 {
        self.predict_outputs(x)[0]
    }

    /// Majority vote of tree classes per output, lowest index on ties.
    pub fn predict_classes(&self, x: &[f64]) -> Vec<u8> {
        let classes: Vec<usize> = match &self.kind {
            OutputKind::Classification { classes } => classes.clone(),
            OutputKind::Regression { outputs } => vec![256; *outputs],
        };
        let mut votes: Vec<Vec<u32>> = classes.iter().map(|&c| vec![0; c]).collect();
        for tree in &self.trees {
            for (v, c) in votes.iter_mut().zip(tree.predict_classes(x)) {
                v[c as usize] += 1;
            }
        }
        votes.into_iter().map(argmax_lowest).collect()
    }

    /// Impurity decrease per feature, normalised to sum to one. A forest
    /// without splits gets uniform scores.
    pub fn feature_importance(&self) -> Vec<f64> {
        let mut totals = vec![0.0; self.n_features];
        for tree in &self.trees {
            tree.root.add_importance(&mut totals);
        }
        let sum: f64 = totals.iter().sum();
        if sum <= 0.0 {
            log::warn!("forest has no splits; feature importance is uniform");
            return vec![1.0 / self.n_features as f64; self.n_features];
        }
        totals.iter().map(|t| t / sum).collect()
    }

    /// Preorder encoding of every tree: `0, leaf values…` for a leaf and
    /// `1, feature, threshold, gain, left…, right…` for a split.
    pub fn to_preorder(&self) -> Vec<f64> {
        fn walk(node: &TreeNode, out: &mut Vec<f64>) {
            match node {
                TreeNode::Leaf(LeafValue::Regression(v)) => {
                    out.push(0.0);
                    out.extend_from_slice(v);
                }
                TreeNode::Leaf(LeafValue::Classification(h)) => {
                    out.push(0.0);
                    out.extend(h.iter().flatten().map(|&c| c as f64));
                }
                TreeNode::Split {
                    feature,
                    threshold,
                    gain,
                    left,
                    right,
                } => {
                    out.extend_from_slice(&[1.0, *feature as f64, *threshold, *gain]);
                    walk(left, out);
                    walk(right, out);
                }
            }
        }
        let mut out = Vec::new();
        for tree in &self.trees {
            walk(&tree.root, &mut out);
        }
        out
    }

    pub fn from_preorder(payload: &[f64], n_trees: usize, n_features: usize, kind: OutputKind) -> Result<Self> {
        fn take(payload: &[f64], pos: &mut usize) -> Result<f64> {
            let v = *payload
                .get(*pos)
                .ok_or_else(|| Error::CorruptCheckpoint("tree payload truncated".into()))?;
            *pos += 1;
            Ok(v)
        }
        fn read(payload: &[f64], pos: &mut usize, n_features: usize, kind: &OutputKind, depth: usize) -> Result<TreeNode> {
            if depth > 10_000 {
                return Err(Error::CorruptCheckpoint("tree too deep".into()));
            }
            let tag = take(payload, pos)?;
            if tag == 0.0 {
                let leaf = match kind {
                    OutputKind::Regression { outputs } => LeafValue::Regression(
                        (0..*outputs).map(|_| take(payload, pos)).collect::<Result<_>>()?,
                    ),
                    OutputKind::Classification { classes } => LeafValue::Classification(
                        classes
                            .iter()
                            .map(|&c| {
                                (0..c)
                                    .map(|_| {
                                        let v = take(payload, pos)?;
                                        if v < 0.0 || v.fract() != 0.0 || v > u32::MAX as f64 {
                                            return Err(Error::CorruptCheckpoint("bad class count".into()));
                                        }
                                        Ok(v as u32)
                                    })
                                    .collect::<Result<Vec<u32>>>()
                            })
                            .collect::<Result<_>>()?,
                    ),
                };
                Ok(TreeNode::Leaf(leaf))
            } else if tag == 1.0 {
                let feature = take(payload, pos)?;
                if feature < 0.0 || feature.fract() != 0.0 || feature as usize >= n_features {
                    return Err(Error::CorruptCheckpoint("bad split feature".into()));
                }
                let threshold = take(payload, pos)?;
                let gain = take(payload, pos)?;
                if !threshold.is_finite() {
                    return Err(Error::CorruptCheckpoint("non-finite threshold".into()));
                }
                let left = read(payload, pos, n_features, kind, depth + 1)?;
                let right = read(payload, pos, n_features, kind, depth + 1)?;
                Ok(TreeNode::Split {
                    feature: feature as usize,
                    threshold,
                    gain,
                    left: Box::new(left),
                    right: Box::new(right),
                })
            } else {
                Err(Error::CorruptCheckpoint(format!("bad node tag {tag}")))
            }
        }
        let mut pos = 0;
        let mut trees = Vec::with_capacity(n_trees);
        for _ in 0..n_trees {
            trees.push(DecisionTree {
                root: read(payload, &mut pos, n_features, &kind, 0)?,
                n_features,
                kind: kind.clone(),
            });
        }
        if pos != payload.len() {
            return Err(Error::CorruptCheckpoint("trailing tree payload".into()));
        }
        Ok(RandomForest {
            trees,
            n_features,
            kind,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn column(v: &[f64]) -> Vec<Vec<f64>> {
        v.iter().map(|&x| vec![x]).collect()
    }

    #[test]
    fn constant_target_is_one_leaf() {
        let x = column(&[1.0, 2.0, 3.0]);
        let t = fit_cart(&x, TreeTask::Regression(&[4.0; 3]), &CartConfig::default()).unwrap();
        assert_eq!(t.root, TreeNode::Leaf(LeafValue::Regression(vec![4.0])));
    }

    #[test]
    fn separable_split_at_midpoint() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let labels: Vec<u8> = xs.iter().map(|&v| (v >= 5.0) as u8).collect();
        let t = fit_cart(
            &column(&xs),
            TreeTask::Classification { labels: &labels, n_classes: 2 },
            &CartConfig::default(),
        )
        .unwrap();
        match t.root {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 4.5);
            }
            _ => panic!("expected a split"),
        }
        assert_eq!(t.root.depth(), 1);
    }

    #[test]
    fn depth_zero_is_mean() {
        let x = column(&[1.0, 2.0, 3.0, 4.0]);
        let cfg = CartConfig {
            max_depth: Some(0),
            min_samples_leaf: 1,
        };
        let t = fit_cart(&x, TreeTask::Regression(&[1.0, 2.0, 3.0, 6.0]), &cfg).unwrap();
        assert_eq!(t.predict_value(&[0.0]), 3.0);
    }

    #[test]
    fn empty_data_is_an_error() {
        assert!(fit_cart(&[], TreeTask::Regression(&[]), &CartConfig::default()).is_err());
        assert!(fit_random_forest(&[], TreeTask::Regression(&[]), &ForestConfig::default()).is_err());
    }

    /// Brute-force best split over every feature and midpoint.
    fn oracle_split(x: &[Vec<f64>], y: &[f64]) -> Option<(usize, f64)> {
        let sse = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|a| (a - m) * (a - m)).sum::<f64>()
        };
        let parent = sse(y);
        let mut best: Option<(f64, usize, f64)> = None;
        for f in 0..x[0].len() {
            let mut vals: Vec<f64> = x.iter().map(|r| r[f]).collect();
            vals.sort_by(f64::total_cmp);
            vals.dedup();
            for w in vals.windows(2) {
                let thr = w[0] + (w[1] - w[0]) / 2.0;
                let (l, r): (Vec<f64>, Vec<f64>) = (
                    x.iter().zip(y).filter(|(xr, _)| xr[f] <= thr).map(|(_, v)| *v).collect(),
                    x.iter().zip(y).filter(|(xr, _)| xr[f] > thr).map(|(_, v)| *v).collect(),
                );
                let gain = parent - sse(&l) - sse(&r);
                let tol = 1e-12 * parent;
                if gain > tol && best.is_none_or(|b| gain > b.0 + tol) {
                    best = Some((gain, f, thr));
                }
            }
        }
        best.map(|b| (b.1, b.2))
    }

    proptest! {
        #[test]
        fn root_split_matches_brute_force(
            rows in proptest::collection::vec(proptest::collection::vec(0u8..20, 3), 4..25),
            ys in proptest::collection::vec(0u8..50, 25),
        ) {
            let x: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|&v| v as f64).collect()).collect();
            let y: Vec<f64> = ys[..x.len()].iter().map(|&v| v as f64).collect();
            let cfg = CartConfig { max_depth: Some(1), min_samples_leaf: 1 };
            let t = fit_cart(&x, TreeTask::Regression(&y), &cfg).unwrap();
            let oracle = oracle_split(&x, &y);
            match (&t.root, oracle) {
                (TreeNode::Split { feature, threshold, .. }, Some((f, thr))) => {
                    prop_assert_eq!(*feature, f);
                    prop_assert_eq!(*threshold, thr);
                }
                (TreeNode::Leaf(_), None) => {}
                (node, o) => prop_assert!(false, "tree {:?} vs oracle {:?}", node, o),
            }
        }

        #[test]
        fn forest_prediction_within_target_range(seed in 0u64..50) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x: Vec<Vec<f64>> = (0..40).map(|_| vec![rng.random(), rng.random()]).collect();
            let y: Vec<f64> = (0..40).map(|_| rng.random_range(-3.0..7.0)).collect();
            let cfg = ForestConfig { n_trees: 5, seed, ..ForestConfig::default() };
            let forest = fit_random_forest(&x, TreeTask::Regression(&y), &cfg).unwrap();
            let (lo, hi) = y.iter().fold((f64::MAX, f64::MIN), |(a, b), &v| (a.min(v), b.max(v)));
            for _ in 0..20 {
                let p = forest.predict_value(&[rng.random_range(-1.0..2.0), rng.random_range(-1.0..2.0)]);
                prop_assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn single_tree_forest_equals_cart() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x: Vec<Vec<f64>> = (0..60).map(|_| (0..4).map(|_| rng.random()).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * 2.0 + r[2].sin()).collect();
        let cfg = ForestConfig {
            n_trees: 1,
            max_depth: Some(5),
            min_samples_leaf: 2,
            max_features: MaxFeatures::All,
            bootstrap: false,
            seed: 3,
        };
        let forest = fit_random_forest(&x, TreeTask::Regression(&y), &cfg).unwrap();
        let cart = fit_cart(
            &x,
            TreeTask::Regression(&y),
            &CartConfig {
                max_depth: Some(5),
                min_samples_leaf: 2,
            },
        )
        .unwrap();
        assert_eq!(forest.trees[0], cart);
    }

    #[test]
    fn memorises_separable_classes() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random(), rng.random()]).collect();
        let labels: Vec<u8> = x.iter().map(|r| (r[0] > 0.3) as u8 + (r[1] > 0.6) as u8).collect();
        let cfg = ForestConfig {
            n_trees: 10,
            max_depth: None,
            min_samples_leaf: 1,
            bootstrap: false,
            max_features: MaxFeatures::All,
            seed: 1,
        };
        let forest =
            fit_random_forest(&x, TreeTask::Classification { labels: &labels, n_classes: 3 }, &cfg).unwrap();
        for (r, &l) in x.iter().zip(&labels) {
            assert_eq!(forest.predict_classes(r)[0], l);
        }
    }

    #[test]
    fn deterministic_and_prefix_stable() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x: Vec<Vec<f64>> = (0..80).map(|_| (0..5).map(|_| rng.random()).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| r[1] + r[3]).collect();
        let small = ForestConfig {
            n_trees: 4,
            seed: 11,
            ..ForestConfig::default()
        };
        let a = fit_random_forest(&x, TreeTask::Regression(&y), &small).unwrap();
        let b = fit_random_forest(&x, TreeTask::Regression(&y), &small).unwrap();
        assert_eq!(a, b);
        let big = fit_random_forest(&x, TreeTask::Regression(&y), &ForestConfig { n_trees: 9, ..small }).unwrap();
        assert_eq!(&big.trees[..4], &a.trees[..]);
    }

    #[test]
    fn importance_finds_the_driver() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x: Vec<Vec<f64>> = (0..500).map(|_| (0..4).map(|_| rng.random()).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| (4.0 * r[2]).sin()).collect();
        let forest = fit_random_forest(
            &x,
            TreeTask::Regression(&y),
            &ForestConfig {
                n_trees: 30,
                seed: 1,
                ..ForestConfig::default()
            },
        )
        .unwrap();
        let imp = forest.feature_importance();
        assert!((imp.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(imp[2] > 0.9, "{imp:?}");
        for f in [0, 1, 3] {
            assert!(imp[f] < 0.05, "{imp:?}");
        }
    }

    #[test]
    fn no_splits_gives_uniform_importance() {
        let x = column(&[1.0, 2.0]);
        let forest = fit_random_forest(&x, TreeTask::Regression(&[1.0, 1.0]), &ForestConfig::default()).unwrap();
        assert_eq!(forest.feature_importance(), vec![1.0]);
    }

    #[test]
    fn every_sample_reaches_one_leaf() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<Vec<f64>> = (0..100).map(|_| (0..3).map(|_| rng.random()).collect()).collect();
        let y: Vec<f64> = x.iter().map(|r| r[0] * r[1]).collect();
        let t = fit_cart(&x, TreeTask::Regression(&y), &CartConfig::default()).unwrap();
        fn count(node: &TreeNode, x: &[f64]) -> usize {
            match node {
                TreeNode::Leaf(_) => 1,
                TreeNode::Split { feature, threshold, left, right, .. } => {
                    if x[*feature] <= *threshold {
                        count(left, x)
                    } else {
                        count(right, x)
                    }
                }
            }
        }
        assert!(x.iter().all(|r| count(&t.root, r) == 1));
        assert!(x.iter().zip(&y).all(|(r, v)| (t.predict_value(r) - v).abs() < 1e-12));
    }

    #[test]
    fn multi_output_matches_layout() {
        let x = column(&[0.0, 1.0, 2.0, 3.0]);
        let y = vec![vec![0.0, 10.0], vec![0.0, 10.0], vec![1.0, 20.0], vec![1.0, 20.0]];
        let t = fit_cart(&x, TreeTask::MultiRegression(&y), &CartConfig::default()).unwrap();
        assert_eq!(t.predict_outputs(&[0.5]), vec![0.0, 10.0]);
        assert_eq!(t.predict_outputs(&[2.5]), vec![1.0, 20.0]);
    }

    #[test]
    fn preorder_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x: Vec<Vec<f64>> = (0..50).map(|_| (0..3).map(|_| rng.random()).collect()).collect();
        let labels: Vec<Vec<u8>> = x.iter().map(|r| vec![(r[0] > 0.5) as u8, (r[1] * 2.99) as u8]).collect();
        let classes = [2usize, 3];
        let forest = fit_random_forest(
            &x,
            TreeTask::MultiClassification {
                labels: &labels,
                n_classes: &classes,
            },
            &ForestConfig {
                n_trees: 3,
                ..ForestConfig::default()
            },
        )
        .unwrap();
        let payload = forest.to_preorder();
        let back = RandomForest::from_preorder(&payload, 3, 3, forest.kind.clone()).unwrap();
        assert_eq!(back, forest);
        assert!(RandomForest::from_preorder(&payload[..payload.len() - 1], 3, 3, forest.kind.clone()).is_err());
    }
}
