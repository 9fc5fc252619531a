//! CART trees with Gini impurity, bagged into a random forest.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{check_training_set, Classifier, ModelError};
use crate::rng;

const TREE_STREAM: u64 = 0x7733;

/// Number of features tried at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mtry {
    /// ⌈√d⌉.
    Auto,
    Fixed(usize),
}

impl Mtry {
    pub fn resolve(self, n_features: usize) -> usize {
        match self {
            Mtry::Auto => (n_features as f64).sqrt().ceil() as usize,
            Mtry::Fixed(m) => m,
        }
        .clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub mtry: Mtry,
    pub seed: u64,
    pub min_samples_split: usize,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 5,
            max_depth: 15,
            mtry: Mtry::Auto,
            seed: 0,
            min_samples_split: 2,
            bootstrap: true,
        }
    }
}

impl ForestParams {
    pub fn validate(&self, n_features: usize) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidParams(m));
        if self.n_trees == 0 {
            return bad("n_trees must be at least 1".into());
        }
        if self.max_depth == 0 {
            return bad("max_depth must be at least 1".into());
        }
        if self.min_samples_split < 2 {
            return bad("min_samples_split must be at least 2".into());
        }
        if let Mtry::Fixed(m) = self.mtry {
            if m == 0 || m > n_features {
                return bad(format!("mtry {m} not in 1..={n_features}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        feature: usize,
        threshold: f64,
        depth: usize,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        #[serde(with = "count_pairs")]
        class_counts: BTreeMap<u32, u32>,
    },
}

/// Class counts as `[[class, count], ...]`; JSON object keys would be strings.
mod count_pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(m: &BTreeMap<u32, u32>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.iter().map(|(k, v)| [*k, *v]))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BTreeMap<u32, u32>, D::Error> {
        Ok(Vec::<[u32; 2]>::deserialize(d)?
            .into_iter()
            .map(|[k, v]| (k, v))
            .collect())
    }
}

impl TreeNode {
    /// Majority class of the leaf reached by `x`; ties go to the smallest code.
    /// Values `<= threshold` go left.
    pub fn predict(&self, x: &[f64]) -> u32 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => node = if x[*feature] <= *threshold { left } else { right },
                TreeNode::Leaf { class_counts } => return majority(class_counts),
            }
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, TreeNode::Leaf { .. })
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    /// Calls `f(depth, feature)` for every internal node, pre-order.
    pub fn visit_splits(&self, f: &mut impl FnMut(usize, usize)) {
        if let TreeNode::Internal {
            feature,
            depth,
            left,
            right,
            ..
        } = self
        {
            f(*depth, *feature);
            left.visit_splits(f);
            right.visit_splits(f);
        }
    }
}

fn majority(counts: &BTreeMap<u32, u32>) -> u32 {
    // BTreeMap iterates by ascending code, so the first maximum wins ties.
    let mut best = (0, 0);
    for (&class, &n) in counts {
        if n > best.1 {
            best = (class, n);
        }
    }
    best.0
}

struct Split {
    feature: usize,
    threshold: f64,
    /// Σ_left c²/n_left + Σ_right c²/n_right; larger is purer.
    score: f64,
}

struct Builder<'a> {
    x: &'a [&'a [f64]],
    y: &'a [u32],
    n_classes: usize,
    mtry: usize,
    max_depth: usize,
    min_samples_split: usize,
    n_features: usize,
}

impl Builder<'_> {
    fn leaf(&self, idx: &[usize]) -> TreeNode {
        let mut class_counts = BTreeMap::new();
        for &i in idx {
            *class_counts.entry(self.y[i]).or_insert(0) += 1;
        }
        TreeNode::Leaf { class_counts }
    }

    fn grow(&self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> TreeNode {
        let first = self.y[idx[0]];
        let pure = idx.iter().all(|&i| self.y[i] == first);
        if pure || depth >= self.max_depth || idx.len() < self.min_samples_split {
            return self.leaf(idx);
        }
        let Some(split) = self.best_split(idx, rng) else {
            return self.leaf(idx);
        };
        let (f, t) = (split.feature, split.threshold);
        let mut k = 0;
        for j in 0..idx.len() {
            if self.x[idx[j]][f] <= t {
                idx.swap(j, k);
                k += 1;
            }
        }
        let (l, r) = idx.split_at_mut(k);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        TreeNode::Internal {
            feature: f,
            threshold: t,
            depth,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn best_split(&self, idx: &mut [usize], rng: &mut ChaCha8Rng) -> Option<Split> {
        let mut order: Vec<usize> = (0..self.n_features).collect();
        order.shuffle(rng);
        let mut best: Option<Split> = None;
        for (tried, &f) in order.iter().enumerate() {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            if let Some(s) = self.best_threshold(idx, f) {
                if best.as_ref().is_none_or(|b| s.score > b.score) {
                    best = Some(s);
                }
            }
        }
        best
    }

    fn best_threshold(&self, idx: &mut [usize], f: usize) -> Option<Split> {
        idx.sort_unstable_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
        let n = idx.len();
        let mut left = vec![0u64; self.n_classes];
        let mut right = vec![0u64; self.n_classes];
        for &i in idx.iter() {
            right[self.y[i] as usize] += 1;
        }
        let mut sq_left: u64 = 0;
        let mut sq_right: u64 = right.iter().map(|c| c * c).sum();
        let mut best: Option<Split> = None;
        for j in 0..n - 1 {
            let c = self.y[idx[j]] as usize;
            sq_left += 2 * left[c] + 1;
            sq_right -= 2 * right[c] - 1;
            left[c] += 1;
            right[c] -= 1;
            let (a, b) = (self.x[idx[j]][f], self.x[idx[j + 1]][f]);
            if a == b {
                continue;
            }
            let nl = (j + 1) as f64;
            let score = sq_left as f64 / nl + sq_right as f64 / (n as f64 - nl);
            if best.as_ref().is_none_or(|s| score > s.score) {
                let mut threshold = a + (b - a) / 2.0;
                if threshold >= b {
                    threshold = a;
                }
                best = Some(Split {
                    feature: f,
                    threshold,
                    score,
                });
            }
        }
        best
    }
}

/// Grows one CART tree on all rows of `x`.
pub fn train_tree(
    x: &[&[f64]],
    y: &[u32],
    n_classes: usize,
    params: &ForestParams,
    rng: &mut ChaCha8Rng,
) -> Result<TreeNode, ModelError> {
    let idx: Vec<usize> = (0..x.len()).collect();
    train_tree_on(x, y, n_classes, params, idx, rng)
}

fn train_tree_on(
    x: &[&[f64]],
    y: &[u32],
    n_classes: usize,
    params: &ForestParams,
    mut idx: Vec<usize>,
    rng: &mut ChaCha8Rng,
) -> Result<TreeNode, ModelError> {
    let n_features = check_training_set(x, y, n_classes)?;
    params.validate(n_features)?;
    let b = Builder {
        x,
        y,
        n_classes,
        mtry: params.mtry.resolve(n_features),
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        n_features,
    };
    Ok(b.grow(&mut idx, 0, rng))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub params: ForestParams,
    pub n_features: usize,
    pub n_classes: usize,
    pub trees: Vec<TreeNode>,
}

/// Trains `n_trees` trees in parallel; tree `t` draws everything from the
/// stream `(seed, t)`, so the result does not depend on scheduling.
pub fn rf_train(
    x: &[&[f64]],
    y: &[u32],
    n_classes: usize,
    params: &ForestParams,
) -> Result<RandomForestModel, ModelError> {
    let n_features = check_training_set(x, y, n_classes)?;
    params.validate(n_features)?;
    let n = x.len();
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng::stream(params.seed, &[TREE_STREAM, t as u64]);
            let idx: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            train_tree_on(x, y, n_classes, params, idx, &mut rng)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RandomForestModel {
        params: *params,
        n_features,
        n_classes,
        trees,
    })
}

impl RandomForestModel {
    /// Votes per class code, ascending.
    pub fn votes(&self, x: &[f64]) -> Result<BTreeMap<u32, usize>, ModelError> {
        self.check_len(x)?;
        let mut votes = BTreeMap::new();
        for t in &self.trees {
            *votes.entry(t.predict(x)).or_insert(0) += 1;
        }
        Ok(votes)
    }

    fn check_len(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.n_features {
            return Err(ModelError::FeatureLength {
                expected: self.n_features,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn internal_nodes(&self) -> usize {
        let mut n = 0;
        for t in &self.trees {
            t.visit_splits(&mut |_, _| n += 1);
        }
        n
    }
}

impl Classifier for RandomForestModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict(&self, x: &[f64]) -> Result<u32, ModelError> {
        let votes = self.votes(x)?;
        let mut best = (0, 0);
        for (class, n) in votes {
            if n > best.1 {
                best = (class, n);
            }
        }
        Ok(best.0)
    }
}

/// Split count per feature summed over all trees.
pub fn feature_importance_fscore(model: &RandomForestModel) -> Vec<usize> {
    let mut counts = vec![0; model.n_features];
    for t in &model.trees {
        t.visit_splits(&mut |_, f| counts[f] += 1);
    }
    counts
}

/// Per tree, the features split on at depth `< levels`, in pre-order.
pub fn top_nodes(model: &RandomForestModel, levels: usize) -> Vec<Vec<usize>> {
    model
        .trees
        .iter()
        .map(|t| {
            let mut used = Vec::new();
            t.visit_splits(&mut |d, f| {
                if d < levels {
                    used.push(f)
                }
            });
            used
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn rows(x: &[Vec<f64>]) -> Vec<&[f64]> {
        x.iter().map(Vec::as_slice).collect()
    }

    fn full_tree() -> ForestParams {
        ForestParams {
            n_trees: 1,
            max_depth: 30,
            mtry: Mtry::Auto,
            bootstrap: false,
            ..Default::default()
        }
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(1)
    }

    #[test]
    fn pure_data_is_a_single_leaf() {
        let x = vec![vec![1.0], vec![2.0], vec![3.0]];
        let t = train_tree(&rows(&x), &[4, 4, 4], 5, &full_tree(), &mut rng()).unwrap();
        assert!(t.is_leaf());
        assert_eq!(t.predict(&[100.0]), 4);
    }

    #[test]
    fn one_feature_step_needs_one_split() {
        let x: Vec<Vec<f64>> = (0..10).map(|v| vec![v as f64]).collect();
        let y: Vec<u32> = (0..10).map(|v| u32::from(v >= 5)).collect();
        let t = train_tree(&rows(&x), &y, 2, &full_tree(), &mut rng()).unwrap();
        assert_eq!(t.depth(), 1);
        match &t {
            TreeNode::Internal { threshold, .. } => assert_eq!(*threshold, 4.5),
            _ => unreachable!(),
        }
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(t.predict(xi), *yi);
        }
    }

    /// Every depth-1 split of XOR leaves both children mixed.
    #[test]
    fn xor_needs_depth_two() {
        let x = vec![vec![0.0, 0.0], vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]];
        let y = [0, 1, 1, 0];
        for f in 0..2 {
            let left: Vec<u32> = (0..4).filter(|&i| x[i][f] <= 0.5).map(|i| y[i]).collect();
            assert!(left.contains(&0) && left.contains(&1));
        }
        let params = ForestParams {
            mtry: Mtry::Fixed(2),
            ..full_tree()
        };
        let t = train_tree(&rows(&x), &y, 2, &params, &mut rng()).unwrap();
        assert_eq!(t.depth(), 2);
        for (xi, yi) in x.iter().zip(&y) {
            assert_eq!(t.predict(xi), *yi);
        }
    }

    #[test]
    fn unbootstrapped_single_tree_equals_train_tree() {
        let x: Vec<Vec<f64>> = (0..40).map(|v| vec![(v % 7) as f64, (v % 3) as f64]).collect();
        let y: Vec<u32> = (0..40).map(|v| ((v % 7) / 3) as u32).collect();
        let params = ForestParams { seed: 9, ..full_tree() };
        let forest = rf_train(&rows(&x), &y, 3, &params).unwrap();
        let mut r = rng::stream(9, &[TREE_STREAM, 0]);
        let tree = train_tree(&rows(&x), &y, 3, &params, &mut r).unwrap();
        assert_eq!(forest.trees, vec![tree]);
    }

    #[test]
    fn leaf_and_vote_ties_go_to_smallest_code() {
        let leaf = TreeNode::Leaf {
            class_counts: BTreeMap::from([(3, 2), (1, 2), (7, 1)]),
        };
        assert_eq!(leaf.predict(&[0.0]), 1);
        let mk = |c| TreeNode::Leaf {
            class_counts: BTreeMap::from([(c, 1)]),
        };
        // votes {A,A,B,B,C} with A=2 < B=5
        let model = RandomForestModel {
            params: ForestParams::default(),
            n_features: 1,
            n_classes: 9,
            trees: vec![mk(5), mk(2), mk(8), mk(5), mk(2)],
        };
        assert_eq!(model.predict(&[0.0]).unwrap(), 2);
        assert!(matches!(
            model.predict(&[0.0, 1.0]),
            Err(ModelError::FeatureLength { expected: 1, found: 2 })
        ));
    }

    #[test]
    fn constant_feature_is_never_split() {
        let x: Vec<Vec<f64>> = (0..60).map(|v| vec![3.0, (v % 6) as f64]).collect();
        let y: Vec<u32> = (0..60).map(|v| (v % 6 % 3) as u32).collect();
        let params = ForestParams {
            n_trees: 7,
            mtry: Mtry::Fixed(1),
            ..Default::default()
        };
        let m = rf_train(&rows(&x), &y, 3, &params).unwrap();
        let f = feature_importance_fscore(&m);
        assert_eq!(f[0], 0);
        assert!(f[1] > 0);
        assert_eq!(f.iter().sum::<usize>(), m.internal_nodes());
    }

    #[test]
    fn top_nodes_bounds() {
        let x: Vec<Vec<f64>> = (0..200).map(|v| vec![(v % 11) as f64, (v % 5) as f64]).collect();
        let y: Vec<u32> = (0..200).map(|v| ((v % 11 + v % 5) % 4) as u32).collect();
        let m = rf_train(&rows(&x), &y, 4, &ForestParams::default()).unwrap();
        let top = top_nodes(&m, 2);
        assert_eq!(top.len(), 5);
        assert!(top.iter().all(|t| !t.is_empty() && t.len() <= 3));

        let leaf_only = RandomForestModel {
            trees: vec![TreeNode::Leaf { class_counts: BTreeMap::from([(0, 1)]) }],
            ..m
        };
        assert_eq!(top_nodes(&leaf_only, 2), vec![Vec::<usize>::new()]);
        assert_eq!(feature_importance_fscore(&leaf_only), vec![0, 0]);
    }

    #[test]
    fn deterministic_across_runs() {
        let x: Vec<Vec<f64>> = (0..300).map(|v| vec![(v % 13) as f64, (v * 7 % 17) as f64]).collect();
        let y: Vec<u32> = (0..300).map(|v| ((v % 13) % 5) as u32).collect();
        let p = ForestParams { n_trees: 9, seed: 42, ..Default::default() };
        let a = rf_train(&rows(&x), &y, 5, &p).unwrap();
        let b = rf_train(&rows(&x), &y, 5, &p).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn invalid_inputs() {
        let x = vec![vec![1.0]];
        assert!(matches!(rf_train(&[], &[], 2, &ForestParams::default()), Err(ModelError::EmptyDataset)));
        let p = ForestParams { mtry: Mtry::Fixed(2), ..Default::default() };
        assert!(matches!(rf_train(&rows(&x), &[0], 2, &p), Err(ModelError::InvalidParams(_))));
        let p = ForestParams { n_trees: 0, ..Default::default() };
        assert!(rf_train(&rows(&x), &[0], 2, &p).is_err());
        assert!(matches!(
            rf_train(&rows(&x), &[5], 2, &ForestParams::default()),
            Err(ModelError::TargetOutOfRange { .. })
        ));
    }

    /// Weighted child impurity of a split never exceeds the parent's.
    fn check_gini(node: &TreeNode, x: &[Vec<f64>], y: &[u32], idx: Vec<usize>) -> Result<(), TestCaseError> {
        let gini = |ids: &[usize]| {
            let mut c = BTreeMap::new();
            for &i in ids {
                *c.entry(y[i]).or_insert(0usize) += 1;
            }
            let n = ids.len() as f64;
            1.0 - c.values().map(|&k| (k as f64 / n).powi(2)).sum::<f64>()
        };
        if let TreeNode::Internal { feature, threshold, left, right, .. } = node {
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| x[i][*feature] <= *threshold);
            prop_assert!(!l.is_empty() && !r.is_empty());
            let n = idx.len() as f64;
            let weighted = (l.len() as f64 * gini(&l) + r.len() as f64 * gini(&r)) / n;
            prop_assert!(weighted <= gini(&idx) + 1e-12);
            check_gini(left, x, y, l)?;
            check_gini(right, x, y, r)?;
        }
        Ok(())
    }

    proptest! {
        #[test]
        fn splits_never_increase_impurity(
            data in prop::collection::vec((0u8..6, 0u8..4, 0u32..4), 1..80),
            seed in any::<u64>(),
        ) {
            let x: Vec<Vec<f64>> = data.iter().map(|&(a, b, _)| vec![a as f64, b as f64]).collect();
            let y: Vec<u32> = data.iter().map(|d| d.2).collect();
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            let t = train_tree(&rows(&x), &y, 4, &full_tree(), &mut r).unwrap();
            check_gini(&t, &x, &y, (0..x.len()).collect())?;
            prop_assert!(t.depth() <= 30);
        }

        /// A fully grown tree fits consistent data perfectly under any relabeling of feature codes.
        #[test]
        fn full_tree_fits_any_code_permutation(
            perm in Just((0..8).collect::<Vec<u32>>()).prop_shuffle(),
            targets in prop::collection::vec(0u32..3, 8),
        ) {
            let x: Vec<Vec<f64>> = (0..8).map(|v| vec![perm[v] as f64]).collect();
            let params = ForestParams { mtry: Mtry::Fixed(1), ..full_tree() };
            let t = train_tree(&rows(&x), &targets, 3, &params, &mut rng()).unwrap();
            for (xi, yi) in x.iter().zip(&targets) {
                prop_assert_eq!(t.predict(xi), *yi);
            }
        }

        #[test]
        fn winner_has_enough_votes(
            data in prop::collection::vec((0u8..8, 0u32..5), 5..60),
            n_trees in 1usize..12,
            probe in 0u8..8,
        ) {
            let x: Vec<Vec<f64>> = data.iter().map(|&(a, _)| vec![a as f64]).collect();
            let y: Vec<u32> = data.iter().map(|d| d.1).collect();
            let m = rf_train(&rows(&x), &y, 5, &ForestParams { n_trees, ..Default::default() }).unwrap();
            let votes = m.votes(&[probe as f64]).unwrap();
            let winner = m.predict(&[probe as f64]).unwrap();
            let k = votes.len();
            prop_assert!(votes[&winner] >= n_trees.div_ceil(k));
        }
    }
}
