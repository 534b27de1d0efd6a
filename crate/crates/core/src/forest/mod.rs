//! Random-forest classifier over feature vectors.
//!
//! Trees use axis-aligned `x[f] <= t` splits chosen by Gini impurity
//! decrease over bootstrap samples. The forest probability is the fraction
//! of trees whose leaf majority is the confusion class.

mod cv;
mod metrics;

pub use cv::{
    cross_validate, fit_fold_models, predict_folds, stratified_folds, threshold_search, train_with_cv, CvOutcome, OofResult,
    ThresholdResult, TrainOutcome, FOLDS,
};
pub use metrics::{auc, evaluate, f1_at, ClassMetrics, Metrics, RocPoint};

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ForestError;
use crate::features::{pc_absent, FeatureTable, N_FEATURES};

const MAGIC: &[u8; 8] = b"TGFOREST";
const FORMAT_VERSION: u32 = 1;
pub const MIN_ROWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeParams {
    pub n_trees: usize,
    /// `None` grows until purity or `min_leaf`.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    /// `None` uses `round(sqrt(|feature_subset|))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams { n_trees: 100, max_depth: None, min_leaf: 1, features_per_split: None, bootstrap: true }
    }
}

impl TreeParams {
    /// n_trees ∈ {100, 300} × max_depth ∈ {unbounded, 8} × min_leaf ∈ {1, 3}.
    pub fn default_grid() -> Vec<TreeParams> {
        let mut grid = Vec::new();
        for n_trees in [100, 300] {
            for max_depth in [None, Some(8)] {
                for min_leaf in [1, 3] {
                    grid.push(TreeParams { n_trees, max_depth, min_leaf, ..TreeParams::default() });
                }
            }
        }
        grid
    }

    fn validate(&self) -> Result<(), ForestError> {
        if self.n_trees == 0 || self.min_leaf == 0 || self.max_depth == Some(0) || self.features_per_split == Some(0) {
            return Err(ForestError::InvalidHyperparams(format!("{self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split { feature: u16, threshold: f64, left: u32, right: u32 },
    Leaf { benign: u32, confusion: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn votes_confusion(&self, x: &[f64; N_FEATURES]) -> bool {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                Node::Split { feature, threshold, left, right } => {
                    i = if x[feature as usize] <= threshold { left as usize } else { right as usize };
                }
                Node::Leaf { benign, confusion } => return confusion > benign,
            }
        }
    }

    pub fn split_features(&self) -> impl Iterator<Item = usize> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            Node::Split { feature, .. } => Some(*feature as usize),
            Node::Leaf { .. } => None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelRoute {
    Full,
    MetadataFull,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probability: f64,
    pub threshold: f64,
    pub route: ModelRoute,
}

impl Prediction {
    pub fn is_confusion(&self) -> bool {
        self.probability > self.threshold
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedForest {
    pub trees: Vec<Tree>,
    pub feature_subset: Vec<usize>,
    pub threshold: f64,
    pub params: TreeParams,
    pub seed: u64,
    pub companion: Option<Box<TrainedForest>>,
}

/// SplitMix64 step; derives independent per-tree and per-fold seeds.
pub(crate) fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gini(benign: usize, confusion: usize) -> f64 {
    let n = (benign + confusion) as f64;
    if n == 0.0 {
        return 0.0;
    }
    let (p0, p1) = (benign as f64 / n, confusion as f64 / n);
    1.0 - p0 * p0 - p1 * p1
}

/// Weighted Gini decrease of splitting `parent` counts into `left` and the
/// remainder.
pub fn gini_decrease(parent: (usize, usize), left: (usize, usize)) -> f64 {
    let right = (parent.0 - left.0, parent.1 - left.1);
    let n = (parent.0 + parent.1) as f64;
    let nl = (left.0 + left.1) as f64;
    let nr = (right.0 + right.1) as f64;
    gini(parent.0, parent.1) - (nl / n) * gini(left.0, left.1) - (nr / n) * gini(right.0, right.1)
}

#[derive(Debug, Clone, Copy)]
struct Split {
    feature: usize,
    threshold: f64,
    decrease: f64,
}

const MIN_DECREASE: f64 = 1e-12;

/// Best `x[feature] <= t` split for one feature; thresholds are midpoints
/// between consecutive distinct values, earliest wins ties.
fn best_split_on(rows: &[[f64; N_FEATURES]], labels: &[u8], sample: &[u32], feature: usize, min_leaf: usize) -> Option<Split> {
    let mut pairs: Vec<(f64, u8)> = sample.iter().map(|&i| (rows[i as usize][feature], labels[i as usize])).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let parent = pairs.iter().fold((0, 0), |(b, c), (_, l)| if *l == 1 { (b, c + 1) } else { (b + 1, c) });
    let n = pairs.len();
    let mut left = (0usize, 0usize);
    let mut best: Option<Split> = None;
    for i in 0..n.saturating_sub(1) {
        if pairs[i].1 == 1 {
            left.1 += 1;
        } else {
            left.0 += 1;
        }
        let (lo, hi) = (pairs[i].0, pairs[i + 1].0);
        if lo >= hi || i + 1 < min_leaf || n - i - 1 < min_leaf {
            continue;
        }
        let decrease = gini_decrease(parent, left);
        if decrease > MIN_DECREASE && best.map_or(true, |b| decrease > b.decrease) {
            let mid = lo + (hi - lo) / 2.0;
            let threshold = if mid < hi { mid } else { lo };
            best = Some(Split { feature, threshold, decrease });
        }
    }
    best
}

struct TreeBuilder<'a> {
    rows: &'a [[f64; N_FEATURES]],
    labels: &'a [u8],
    subset: &'a [usize],
    params: &'a TreeParams,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn counts(&self, sample: &[u32]) -> (usize, usize) {
        let confusion = sample.iter().filter(|&&i| self.labels[i as usize] == 1).count();
        (sample.len() - confusion, confusion)
    }

    /// Examines a random `mtry` features (ascending index order); if none
    /// splits, keeps drawing the remaining features until one does.
    fn choose_split(&mut self, sample: &[u32]) -> Option<Split> {
        let mut order = self.subset.to_vec();
        order.shuffle(&mut self.rng);
        let (first, rest) = order.split_at(self.mtry.min(order.len()));
        let mut first = first.to_vec();
        first.sort_unstable();
        let mut best: Option<Split> = None;
        for &f in &first {
            if let Some(s) = best_split_on(self.rows, self.labels, sample, f, self.params.min_leaf) {
                if best.map_or(true, |b| s.decrease > b.decrease) {
                    best = Some(s);
                }
            }
        }
        if best.is_some() {
            return best;
        }
        rest.iter().find_map(|&f| best_split_on(self.rows, self.labels, sample, f, self.params.min_leaf))
    }

    fn build(mut self, sample: Vec<u32>) -> Tree {
        // (node slot, sample, depth)
        let mut stack = vec![(0usize, sample, 0usize)];
        self.nodes.push(Node::Leaf { benign: 0, confusion: 0 });
        while let Some((slot, sample, depth)) = stack.pop() {
            let (benign, confusion) = self.counts(&sample);
            let leaf = Node::Leaf { benign: benign as u32, confusion: confusion as u32 };
            let stop = benign == 0
                || confusion == 0
                || self.params.max_depth.is_some_and(|d| depth >= d)
                || sample.len() < 2 * self.params.min_leaf;
            let split = if stop { None } else { self.choose_split(&sample) };
            let Some(split) = split else {
                self.nodes[slot] = leaf;
                continue;
            };
            let (l, r): (Vec<u32>, Vec<u32>) =
                sample.iter().partition(|&&i| self.rows[i as usize][split.feature] <= split.threshold);
            let left = self.nodes.len();
            self.nodes.push(Node::Leaf { benign: 0, confusion: 0 });
            self.nodes.push(Node::Leaf { benign: 0, confusion: 0 });
            self.nodes[slot] = Node::Split {
                feature: split.feature as u16,
                threshold: split.threshold,
                left: left as u32,
                right: left as u32 + 1,
            };
            stack.push((left + 1, r, depth + 1));
            stack.push((left, l, depth + 1));
        }
        Tree { nodes: self.nodes }
    }
}

pub(crate) fn check_dataset(table: &FeatureTable) -> Result<(), ForestError> {
    if table.len() < MIN_ROWS {
        return Err(ForestError::TooFewRows(table.len()));
    }
    let positives = table.labels.iter().filter(|&&l| l == 1).count();
    if positives == 0 || positives == table.len() {
        return Err(ForestError::DegenerateModel);
    }
    Ok(())
}

fn check_subset(subset: &[usize]) -> Result<(), ForestError> {
    if subset.is_empty() || subset.iter().any(|&f| f >= N_FEATURES) {
        return Err(ForestError::InvalidHyperparams(format!("feature subset {subset:?}")));
    }
    Ok(())
}

/// Trains on the given rows (indices into `table`) without dataset-size
/// checks; used for fold models.
pub(crate) fn train_rows(
    table: &FeatureTable,
    rows: &[u32],
    feature_subset: &[usize],
    params: &TreeParams,
    seed: u64,
) -> Result<TrainedForest, ForestError> {
    params.validate()?;
    check_subset(feature_subset)?;
    let confusion = rows.iter().filter(|&&i| table.labels[i as usize] == 1).count();
    if confusion == 0 || confusion == rows.len() {
        return Err(ForestError::DegenerateModel);
    }
    let mut subset = feature_subset.to_vec();
    subset.sort_unstable();
    subset.dedup();
    let mtry = params
        .features_per_split
        .unwrap_or_else(|| (subset.len() as f64).sqrt().round() as usize)
        .clamp(1, subset.len());
    let trees = (0..params.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, t as u64));
            let sample: Vec<u32> = if params.bootstrap {
                (0..rows.len()).map(|_| rows[rng.gen_range(0..rows.len())]).collect()
            } else {
                rows.to_vec()
            };
            TreeBuilder {
                rows: &table.rows,
                labels: &table.labels,
                subset: &subset,
                params,
                mtry,
                rng,
                nodes: Vec::new(),
            }
            .build(sample)
        })
        .collect();
    Ok(TrainedForest { trees, feature_subset: subset, threshold: 0.5, params: *params, seed, companion: None })
}

/// Fits a forest on every row. The threshold defaults to 0.5 until set from
/// a threshold search.
pub fn train(table: &FeatureTable, feature_subset: &[usize], params: &TreeParams, seed: u64) -> Result<TrainedForest, ForestError> {
    check_dataset(table)?;
    let rows: Vec<u32> = (0..table.len() as u32).collect();
    train_rows(table, &rows, feature_subset, params, seed)
}

impl TrainedForest {
    /// Vote fraction of this forest alone, never routed.
    pub fn predict_proba(&self, x: &[f64; N_FEATURES]) -> f64 {
        let votes = self.trees.iter().filter(|t| t.votes_confusion(x)).count();
        votes as f64 / self.trees.len() as f64
    }

    /// Routes to the metadata-only companion when any content feature is
    /// the absence sentinel.
    pub fn predict(&self, x: &[f64; N_FEATURES]) -> Prediction {
        match &self.companion {
            Some(c) if pc_absent(x) => Prediction {
                probability: c.predict_proba(x),
                threshold: c.threshold,
                route: ModelRoute::MetadataFull,
            },
            _ => Prediction {
                probability: self.predict_proba(x),
                threshold: self.threshold,
                route: if pc_absent(x) { ModelRoute::MetadataFull } else { ModelRoute::Full },
            },
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend(bincode::serialize(self).expect("forest serializes"));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ForestError> {
        if bytes.len() < 8 || &bytes[..8] != MAGIC {
            return Err(ForestError::BadMagic);
        }
        if bytes.len() < 12 {
            return Err(ForestError::Corrupt("truncated header".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != FORMAT_VERSION {
            return Err(ForestError::Version { found: version, expected: FORMAT_VERSION });
        }
        let model: TrainedForest = bincode::deserialize(&bytes[12..]).map_err(|e| ForestError::Corrupt(e.to_string()))?;
        model.check_structure()?;
        Ok(model)
    }

    fn check_structure(&self) -> Result<(), ForestError> {
        if self.trees.is_empty() {
            return Err(ForestError::Corrupt("model has no trees".into()));
        }
        for tree in &self.trees {
            let n = tree.nodes.len() as u32;
            for node in &tree.nodes {
                if let Node::Split { feature, left, right, .. } = node {
                    if *left >= n || *right >= n || !self.feature_subset.contains(&(*feature as usize)) {
                        return Err(ForestError::Corrupt("tree references an invalid node or feature".into()));
                    }
                }
            }
        }
        if let Some(c) = &self.companion {
            c.check_structure()?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), ForestError> {
        let tmp = path.with_extension("tmp");
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(&self.to_bytes())?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, ForestError> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        TrainedForest::from_bytes(&bytes)
    }
}
