//! Classifier group: Naive Bayes, multinomial logistic regression and a
//! best-first Gini tree, all producing class-probability estimates.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError, FeatureKind, FeatureSchema, FoldPlan, Instance, Value};
use crate::metrics::{self, ClassifierScore, MetricsError};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("cannot fit on an empty training set")]
    EmptyTraining,
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("hyperparameter out of range: {0}")]
    Hyperparameter(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

pub type Result<T> = std::result::Result<T, ClassifierError>;

/// Class distribution plus its argmax (lowest index on ties).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbPrediction {
    pub distribution: Vec<f64>,
    pub predicted: usize,
}

impl ProbPrediction {
    pub fn from_distribution(distribution: Vec<f64>) -> Self {
        let mut predicted = 0;
        for (i, &p) in distribution.iter().enumerate() {
            if p > distribution[predicted] {
                predicted = i;
            }
        }
        ProbPrediction {
            distribution,
            predicted,
        }
    }

    /// Normalizes log-scores with log-sum-exp. `-inf` entries become 0.
    fn from_log_scores(scores: &[f64]) -> Self {
        let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = scores
            .iter()
            .map(|&s| if s == f64::NEG_INFINITY { 0.0 } else { (s - max).exp() })
            .collect();
        let z: f64 = exps.iter().sum();
        ProbPrediction::from_distribution(exps.into_iter().map(|e| e / z).collect())
    }
}

pub trait Classifier: Send + Sync {
    fn predict(&self, x: &Instance) -> Result<ProbPrediction>;
}

fn check_instance(features: &[FeatureKind], x: &Instance) -> Result<()> {
    if x.values.len() != features.len() {
        return Err(ClassifierError::SchemaMismatch(format!(
            "instance has {} values, model expects {}",
            x.values.len(),
            features.len()
        )));
    }
    for (j, (v, k)) in x.values.iter().zip(features).enumerate() {
        let ok = match (v, k) {
            (Value::Missing, _) => true,
            (Value::Numeric(_), FeatureKind::Numeric) => true,
            (Value::Nominal(i), FeatureKind::Nominal(vals)) => *i < vals.len(),
            _ => false,
        };
        if !ok {
            return Err(ClassifierError::SchemaMismatch(format!("feature {j}: {v:?} does not fit {k:?}")));
        }
    }
    Ok(())
}

fn same_schema(a: &FeatureSchema, b: &FeatureSchema) -> Result<()> {
    if a.features() != b.features() || a.class_values() != b.class_values() {
        return Err(ClassifierError::SchemaMismatch("train and test schemas differ".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Naive Bayes

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Likelihood {
    /// `probs[class][value]`, add-one smoothed.
    Nominal(Vec<Vec<f64>>),
    /// Per-class Gaussian parameters.
    Numeric { mean: Vec<f64>, var: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NbModel {
    kinds: Vec<FeatureKind>,
    pub class_priors: Vec<f64>,
    pub likelihoods: Vec<Likelihood>,
}

pub const NB_VARIANCE_FLOOR_SCALE: f64 = 1e-9;

/// Fits Naive Bayes. Priors and nominal likelihoods use add-one smoothing
/// over the observed classes; classes absent from `d` get prior 0. Numeric
/// features get per-class Gaussians with variance floored at
/// `1e-9 * (global variance + 1)`. Missing values are skipped.
pub fn fit_naive_bayes(d: &Dataset) -> Result<NbModel> {
    if d.is_empty() {
        return Err(ClassifierError::EmptyTraining);
    }
    let n_classes = d.n_classes();
    let counts = d.class_counts();
    let observed = counts.iter().filter(|&&c| c > 0).count() as f64;
    let n = d.len() as f64;
    let class_priors = counts
        .iter()
        .map(|&c| if c == 0 { 0.0 } else { (c as f64 + 1.0) / (n + observed) })
        .collect();

    let mut likelihoods = Vec::with_capacity(d.n_features());
    for (j, f) in d.schema().features().iter().enumerate() {
        match &f.kind {
            FeatureKind::Nominal(vals) => {
                let mut table = vec![vec![0.0; vals.len()]; n_classes];
                let mut totals = vec![0.0; n_classes];
                for inst in d.instances() {
                    if let Value::Nominal(v) = inst.values[j] {
                        table[inst.class_label][v] += 1.0;
                        totals[inst.class_label] += 1.0;
                    }
                }
                let arity = vals.len() as f64;
                for (row, total) in table.iter_mut().zip(&totals) {
                    for cell in row.iter_mut() {
                        *cell = (*cell + 1.0) / (total + arity);
                    }
                }
                likelihoods.push(Likelihood::Nominal(table));
            }
            FeatureKind::Numeric => {
                let mut sum = vec![0.0; n_classes];
                let mut cnt = vec![0.0; n_classes];
                let (mut gsum, mut gcnt) = (0.0, 0.0);
                for inst in d.instances() {
                    if let Value::Numeric(x) = inst.values[j] {
                        sum[inst.class_label] += x;
                        cnt[inst.class_label] += 1.0;
                        gsum += x;
                        gcnt += 1.0;
                    }
                }
                let mean: Vec<f64> = sum
                    .iter()
                    .zip(&cnt)
                    .map(|(s, c)| if *c > 0.0 { s / c } else { 0.0 })
                    .collect();
                let gmean = if gcnt > 0.0 { gsum / gcnt } else { 0.0 };
                let mut sq = vec![0.0; n_classes];
                let mut gsq = 0.0;
                for inst in d.instances() {
                    if let Value::Numeric(x) = inst.values[j] {
                        sq[inst.class_label] += (x - mean[inst.class_label]).powi(2);
                        gsq += (x - gmean).powi(2);
                    }
                }
                let gvar = if gcnt > 0.0 { gsq / gcnt } else { 0.0 };
                let floor = NB_VARIANCE_FLOOR_SCALE * (gvar + 1.0);
                let var = sq
                    .iter()
                    .zip(&cnt)
                    .map(|(s, c)| if *c > 0.0 { (s / c).max(floor) } else { floor })
                    .collect();
                likelihoods.push(Likelihood::Numeric { mean, var });
            }
        }
    }
    Ok(NbModel {
        kinds: d.schema().features().iter().map(|f| f.kind.clone()).collect(),
        class_priors,
        likelihoods,
    })
}

/// Posterior over classes, accumulated in log space.
pub fn nb_posterior(m: &NbModel, x: &Instance) -> Result<ProbPrediction> {
    check_instance(&m.kinds, x)?;
    let mut scores: Vec<f64> = m.class_priors.iter().map(|p| p.ln()).collect();
    for (v, lik) in x.values.iter().zip(&m.likelihoods) {
        match (v, lik) {
            (Value::Nominal(i), Likelihood::Nominal(table)) => {
                for (s, row) in scores.iter_mut().zip(table) {
                    *s += row[*i].ln();
                }
            }
            (Value::Numeric(x), Likelihood::Numeric { mean, var }) => {
                for c in 0..scores.len() {
                    scores[c] += -0.5 * (2.0 * std::f64::consts::PI * var[c]).ln()
                        - (x - mean[c]).powi(2) / (2.0 * var[c]);
                }
            }
            _ => {}
        }
    }
    Ok(ProbPrediction::from_log_scores(&scores))
}

impl Classifier for NbModel {
    fn predict(&self, x: &Instance) -> Result<ProbPrediction> {
        nb_posterior(self, x)
    }
}

// ---------------------------------------------------------------------------
// Logistic regression

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticParams {
    pub l2: f64,
    pub iterations: usize,
    pub step: f64,
}

impl Default for LogisticParams {
    fn default() -> Self {
        LogisticParams {
            l2: 1e-8,
            iterations: 500,
            step: 0.1,
        }
    }
}

/// Standardized one-hot design matrix encoder.
#[derive(Debug, Clone, PartialEq)]
struct Encoder {
    kinds: Vec<FeatureKind>,
    offsets: Vec<usize>,
    width: usize,
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Encoder {
    fn fit(d: &Dataset) -> Encoder {
        let kinds: Vec<FeatureKind> = d.schema().features().iter().map(|f| f.kind.clone()).collect();
        let mut offsets = Vec::with_capacity(kinds.len());
        let mut width = 0;
        for k in &kinds {
            offsets.push(width);
            width += k.arity().unwrap_or(1);
        }
        let mut enc = Encoder {
            kinds,
            offsets,
            width,
            mean: vec![0.0; width],
            scale: vec![1.0; width],
        };
        let raw: Vec<Vec<f64>> = d.instances().iter().map(|x| enc.raw(x)).collect();
        let n = raw.len().max(1) as f64;
        for c in 0..width {
            let m = raw.iter().map(|r| r[c]).sum::<f64>() / n;
            let v = raw.iter().map(|r| (r[c] - m).powi(2)).sum::<f64>() / n;
            enc.mean[c] = m;
            enc.scale[c] = if v > 1e-12 { v.sqrt() } else { 1.0 };
        }
        enc
    }

    fn raw(&self, x: &Instance) -> Vec<f64> {
        let mut out = vec![0.0; self.width];
        for (j, v) in x.values.iter().enumerate() {
            let o = self.offsets[j];
            match *v {
                Value::Numeric(z) => out[o] = z,
                Value::Nominal(i) => out[o + i] = 1.0,
                // standardized value becomes 0 (the column mean)
                Value::Missing => match self.kinds[j] {
                    FeatureKind::Numeric => out[o] = self.mean[o],
                    FeatureKind::Nominal(ref v) => {
                        for k in 0..v.len() {
                            out[o + k] = self.mean[o + k];
                        }
                    }
                },
            }
        }
        out
    }

    fn encode(&self, x: &Instance) -> Vec<f64> {
        let mut r = self.raw(x);
        for c in 0..self.width {
            r[c] = (r[c] - self.mean[c]) / self.scale[c];
        }
        r
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    encoder: Encoder,
    /// `weights[class]`: bias first, then one weight per encoded column.
    weights: Vec<Vec<f64>>,
    /// Objective value after each iteration (accepted steps only change it).
    pub loss_history: Vec<f64>,
}

fn softmax_scores(weights: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    weights
        .iter()
        .map(|w| w[0] + w[1..].iter().zip(x).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

fn log_softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    scores.iter().map(|s| s - lse).collect()
}

fn logistic_loss(weights: &[Vec<f64>], xs: &[Vec<f64>], ys: &[usize], l2: f64) -> f64 {
    let nll: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, &y)| -log_softmax(&softmax_scores(weights, x))[y])
        .sum::<f64>()
        / xs.len() as f64;
    let reg: f64 = weights.iter().map(|w| w[1..].iter().map(|v| v * v).sum::<f64>()).sum();
    nll + 0.5 * l2 * reg
}

/// Full-batch gradient descent on the L2-regularized softmax loss. A step
/// that would increase the loss is rejected and the step size halved.
pub fn fit_logistic(d: &Dataset, params: &LogisticParams) -> Result<LogisticModel> {
    if d.is_empty() {
        return Err(ClassifierError::EmptyTraining);
    }
    let encoder = Encoder::fit(d);
    let xs: Vec<Vec<f64>> = d.instances().iter().map(|x| encoder.encode(x)).collect();
    let ys = d.labels();
    let n_classes = d.n_classes();
    let dim = encoder.width + 1;
    let n = xs.len() as f64;

    let mut weights = vec![vec![0.0; dim]; n_classes];
    let mut loss = logistic_loss(&weights, &xs, &ys, params.l2);
    let mut step = params.step;
    let mut loss_history = Vec::with_capacity(params.iterations);

    for _ in 0..params.iterations {
        let mut grad = vec![vec![0.0; dim]; n_classes];
        for (x, &y) in xs.iter().zip(&ys) {
            let lp = log_softmax(&softmax_scores(&weights, x));
            for c in 0..n_classes {
                let err = lp[c].exp() - if c == y { 1.0 } else { 0.0 };
                grad[c][0] += err;
                for (g, xv) in grad[c][1..].iter_mut().zip(x) {
                    *g += err * xv;
                }
            }
        }
        for c in 0..n_classes {
            grad[c][0] /= n;
            for k in 1..dim {
                grad[c][k] = grad[c][k] / n + params.l2 * weights[c][k];
            }
        }
        let candidate: Vec<Vec<f64>> = weights
            .iter()
            .zip(&grad)
            .map(|(w, g)| w.iter().zip(g).map(|(a, b)| a - step * b).collect())
            .collect();
        let cand_loss = logistic_loss(&candidate, &xs, &ys, params.l2);
        if cand_loss <= loss {
            weights = candidate;
            loss = cand_loss;
        } else {
            step *= 0.5;
        }
        loss_history.push(loss);
    }
    Ok(LogisticModel {
        encoder,
        weights,
        loss_history,
    })
}

impl Classifier for LogisticModel {
    fn predict(&self, x: &Instance) -> Result<ProbPrediction> {
        check_instance(&self.encoder.kinds, x)?;
        let scores = softmax_scores(&self.weights, &self.encoder.encode(x));
        Ok(ProbPrediction::from_log_scores(&log_softmax(&scores)))
    }
}

// ---------------------------------------------------------------------------
// Best-first decision tree

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub min_leaf: usize,
    /// Stop expanding once this many leaves exist; `None` grows until no
    /// split has positive gain.
    pub max_leaves: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            min_leaf: 2,
            max_leaves: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SplitTest {
    /// `x <= threshold` goes left.
    Threshold { feature: usize, threshold: f64 },
    /// `x == value` goes left.
    Equals { feature: usize, value: usize },
}

impl SplitTest {
    fn goes_left(&self, x: &Instance) -> Option<bool> {
        match *self {
            SplitTest::Threshold { feature, threshold } => x.values[feature].as_f64().map(|v| v <= threshold),
            SplitTest::Equals { feature, value } => match x.values[feature] {
                Value::Nominal(v) => Some(v == value),
                Value::Numeric(v) => Some(v == value as f64),
                Value::Missing => None,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum TreeNode {
    Leaf {
        distribution: Vec<f64>,
    },
    Split {
        test: SplitTest,
        left: usize,
        right: usize,
        larger_left: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    kinds: Vec<FeatureKind>,
    nodes: Vec<TreeNode>,
}

impl TreeModel {
    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, TreeNode::Leaf { .. })).count()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

fn gini(counts: &[f64], total: f64) -> f64 {
    if total == 0.0 {
        return 0.0;
    }
    1.0 - counts.iter().map(|c| (c / total).powi(2)).sum::<f64>()
}

struct Candidate {
    gain: f64,
    test: SplitTest,
}

/// Best split of the rows `idx` by size-weighted Gini decrease.
fn best_split(d: &Dataset, idx: &[usize], min_leaf: usize, n_total: f64) -> Option<Candidate> {
    let n_classes = d.n_classes();
    let n = idx.len() as f64;
    let mut parent = vec![0.0; n_classes];
    for &i in idx {
        parent[d.instances()[i].class_label] += 1.0;
    }
    let parent_gini = gini(&parent, n);
    if parent_gini <= 0.0 || idx.len() < 2 * min_leaf {
        return None;
    }
    let weight = n / n_total;
    let mut best: Option<Candidate> = None;
    let mut consider = |gain: f64, test: SplitTest| {
        if gain > 1e-12 && best.as_ref().map_or(true, |b| gain > b.gain) {
            best = Some(Candidate { gain, test });
        }
    };

    for (j, f) in d.schema().features().iter().enumerate() {
        match &f.kind {
            FeatureKind::Numeric => {
                let mut pairs: Vec<(f64, usize)> = idx
                    .iter()
                    .filter_map(|&i| {
                        let inst = &d.instances()[i];
                        inst.values[j].as_f64().map(|v| (v, inst.class_label))
                    })
                    .collect();
                if pairs.len() < 2 * min_leaf {
                    continue;
                }
                pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let m = pairs.len() as f64;
                let mut all = vec![0.0; n_classes];
                for &(_, c) in &pairs {
                    all[c] += 1.0;
                }
                let base = gini(&all, m);
                let mut left = vec![0.0; n_classes];
                let mut k = 0;
                while k < pairs.len() {
                    // consume one group of equal values
                    let v = pairs[k].0;
                    let start = k;
                    while k < pairs.len() && pairs[k].0 == v {
                        left[pairs[k].1] += 1.0;
                        k += 1;
                    }
                    if k == pairs.len() {
                        break;
                    }
                    let nl = k as f64;
                    let nr = m - nl;
                    if k < min_leaf || pairs.len() - k < min_leaf {
                        continue;
                    }
                    // only cut where the class mix changes between adjacent value groups
                    let next_v = pairs[k].0;
                    let mut end = k;
                    while end < pairs.len() && pairs[end].0 == next_v {
                        end += 1;
                    }
                    let pure = |s: &[(f64, usize)]| s.iter().all(|p| p.1 == s[0].1);
                    let here = &pairs[start..k];
                    let there = &pairs[k..end];
                    if pure(here) && pure(there) && here[0].1 == there[0].1 {
                        continue;
                    }
                    let right: Vec<f64> = all.iter().zip(&left).map(|(a, l)| a - l).collect();
                    let child = (nl / m) * gini(&left, nl) + (nr / m) * gini(&right, nr);
                    consider(
                        weight * (base - child),
                        SplitTest::Threshold {
                            feature: j,
                            threshold: 0.5 * (v + next_v),
                        },
                    );
                }
            }
            FeatureKind::Nominal(vals) => {
                let mut per_value = vec![vec![0.0; n_classes]; vals.len()];
                let mut all = vec![0.0; n_classes];
                let mut m = 0.0;
                for &i in idx {
                    let inst = &d.instances()[i];
                    if let Value::Nominal(v) = inst.values[j] {
                        per_value[v][inst.class_label] += 1.0;
                        all[inst.class_label] += 1.0;
                        m += 1.0;
                    }
                }
                let base = gini(&all, m);
                for (v, counts) in per_value.iter().enumerate() {
                    let nl: f64 = counts.iter().sum();
                    let nr = m - nl;
                    if nl < min_leaf as f64 || nr < min_leaf as f64 {
                        continue;
                    }
                    let right: Vec<f64> = all.iter().zip(counts).map(|(a, l)| a - l).collect();
                    let child = (nl / m) * gini(counts, nl) + (nr / m) * gini(&right, nr);
                    consider(weight * (base - child), SplitTest::Equals { feature: j, value: v });
                }
            }
        }
    }
    best
}

struct Frontier {
    gain: f64,
    node: usize,
    rows: Vec<usize>,
    test: SplitTest,
}

impl PartialEq for Frontier {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Frontier {}
impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Frontier {
    fn cmp(&self, other: &Self) -> Ordering {
        // max-heap on gain; earlier nodes first on ties
        self.gain.total_cmp(&other.gain).then(other.node.cmp(&self.node))
    }
}

fn leaf_distribution(d: &Dataset, rows: &[usize]) -> Vec<f64> {
    let c = d.n_classes();
    let mut counts = vec![1.0; c];
    for &i in rows {
        counts[d.instances()[i].class_label] += 1.0;
    }
    let total = rows.len() as f64 + c as f64;
    counts.into_iter().map(|x| x / total).collect()
}

/// Grows a binary tree by always expanding the leaf with the largest
/// size-weighted Gini decrease.
pub fn fit_bf_tree(d: &Dataset, params: &TreeParams) -> Result<TreeModel> {
    if d.is_empty() {
        return Err(ClassifierError::EmptyTraining);
    }
    let n_total = d.len() as f64;
    let all: Vec<usize> = (0..d.len()).collect();
    let mut nodes = vec![TreeNode::Leaf {
        distribution: leaf_distribution(d, &all),
    }];
    let mut heap = BinaryHeap::new();
    if let Some(c) = best_split(d, &all, params.min_leaf, n_total) {
        heap.push(Frontier {
            gain: c.gain,
            node: 0,
            rows: all,
            test: c.test,
        });
    }
    let mut leaves = 1;
    while let Some(f) = heap.pop() {
        if params.max_leaves.is_some_and(|m| leaves >= m) {
            break;
        }
        let (mut lrows, mut rrows) = (Vec::new(), Vec::new());
        for &i in &f.rows {
            match f.test.goes_left(&d.instances()[i]) {
                Some(true) => lrows.push(i),
                Some(false) => rrows.push(i),
                None => {}
            }
        }
        let larger_left = lrows.len() >= rrows.len();
        let li = nodes.len();
        nodes.push(TreeNode::Leaf {
            distribution: leaf_distribution(d, &lrows),
        });
        let ri = nodes.len();
        nodes.push(TreeNode::Leaf {
            distribution: leaf_distribution(d, &rrows),
        });
        nodes[f.node] = TreeNode::Split {
            test: f.test,
            left: li,
            right: ri,
            larger_left,
        };
        leaves += 1;
        for (node, rows) in [(li, lrows), (ri, rrows)] {
            if let Some(c) = best_split(d, &rows, params.min_leaf, n_total) {
                heap.push(Frontier {
                    gain: c.gain,
                    node,
                    rows,
                    test: c.test,
                });
            }
        }
    }
    Ok(TreeModel {
        kinds: d.schema().features().iter().map(|f| f.kind.clone()).collect(),
        nodes,
    })
}

impl Classifier for TreeModel {
    fn predict(&self, x: &Instance) -> Result<ProbPrediction> {
        check_instance(&self.kinds, x)?;
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { distribution } => {
                    return Ok(ProbPrediction::from_distribution(distribution.clone()))
                }
                TreeNode::Split {
                    test,
                    left,
                    right,
                    larger_left,
                } => {
                    i = if test.goes_left(x).unwrap_or(*larger_left) {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Uniform driver

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClassifierSpec {
    NaiveBayes,
    Logistic(LogisticParams),
    BfTree(TreeParams),
}

impl ClassifierSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::NaiveBayes => "naive-bayes",
            ClassifierSpec::Logistic(_) => "logistic",
            ClassifierSpec::BfTree(_) => "bf-tree",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ClassifierSpec::NaiveBayes => Ok(()),
            ClassifierSpec::Logistic(p) => {
                if !(p.l2 >= 0.0 && p.l2.is_finite()) {
                    return Err(ClassifierError::Hyperparameter(format!("l2 = {}", p.l2)));
                }
                if !(p.step > 0.0 && p.step.is_finite()) {
                    return Err(ClassifierError::Hyperparameter(format!("step = {}", p.step)));
                }
                if p.iterations == 0 {
                    return Err(ClassifierError::Hyperparameter("iterations = 0".into()));
                }
                Ok(())
            }
            ClassifierSpec::BfTree(p) => {
                if p.min_leaf == 0 {
                    return Err(ClassifierError::Hyperparameter("min_leaf = 0".into()));
                }
                if p.max_leaves == Some(0) {
                    return Err(ClassifierError::Hyperparameter("max_leaves = 0".into()));
                }
                Ok(())
            }
        }
    }

    pub fn fit(&self, train: &Dataset) -> Result<Box<dyn Classifier>> {
        self.validate()?;
        Ok(match self {
            ClassifierSpec::NaiveBayes => Box::new(fit_naive_bayes(train)?),
            ClassifierSpec::Logistic(p) => Box::new(fit_logistic(train, p)?),
            ClassifierSpec::BfTree(p) => Box::new(fit_bf_tree(train, p)?),
        })
    }
}

/// The three-member evaluation group with default hyperparameters.
pub fn default_group() -> Vec<ClassifierSpec> {
    vec![
        ClassifierSpec::NaiveBayes,
        ClassifierSpec::Logistic(LogisticParams::default()),
        ClassifierSpec::BfTree(TreeParams::default()),
    ]
}

pub fn fit_predict(spec: &ClassifierSpec, train: &Dataset, test: &Dataset) -> Result<Vec<ProbPrediction>> {
    same_schema(train.schema(), test.schema())?;
    let model = spec.fit(train)?;
    test.instances().iter().map(|x| model.predict(x)).collect()
}

/// Pooled out-of-fold predictions in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub predictions: Vec<ProbPrediction>,
    pub actuals: Vec<usize>,
    pub n_classes: usize,
}

impl CvResult {
    pub fn predicted_labels(&self) -> Vec<usize> {
        self.predictions.iter().map(|p| p.predicted).collect()
    }

    pub fn accuracy(&self) -> f64 {
        let hits = self
            .predictions
            .iter()
            .zip(&self.actuals)
            .filter(|(p, a)| p.predicted == **a)
            .count();
        hits as f64 / self.actuals.len().max(1) as f64
    }

    /// Class frequencies of the evaluated rows; the RAE baseline.
    pub fn class_frequencies(&self) -> Vec<f64> {
        let mut q = vec![0.0; self.n_classes];
        for &a in &self.actuals {
            q[a] += 1.0;
        }
        let n = self.actuals.len().max(1) as f64;
        q.into_iter().map(|c| c / n).collect()
    }

    pub fn score(&self, classifier: &str) -> Result<ClassifierScore> {
        let cm = metrics::confusion(&self.predicted_labels(), &self.actuals, self.n_classes)?;
        let probs: Vec<Vec<f64>> = self.predictions.iter().map(|p| p.distribution.clone()).collect();
        let rae = metrics::relative_absolute_error(&probs, &self.actuals, &self.class_frequencies())?;
        Ok(ClassifierScore::new(classifier, cm, rae))
    }
}

/// Cross-validated predictions: each instance is predicted once by a model
/// fitted on the other folds. Folds are fitted in parallel.
pub fn cv_evaluate(spec: &ClassifierSpec, d: &Dataset, folds: &FoldPlan) -> Result<CvResult> {
    if folds.assignments().len() != d.len() {
        return Err(ClassifierError::SchemaMismatch(format!(
            "fold plan covers {} instances, dataset has {}",
            folds.assignments().len(),
            d.len()
        )));
    }
    spec.validate()?;
    let per_fold: Vec<(Vec<usize>, Vec<ProbPrediction>)> = (0..folds.k())
        .into_par_iter()
        .map(|f| {
            let (train, test) = folds.split(f);
            if test.is_empty() {
                return Ok((test, Vec::new()));
            }
            let model = spec.fit(&d.subset_rows(&train))?;
            let preds = test
                .iter()
                .map(|&i| model.predict(&d.instances()[i]))
                .collect::<Result<Vec<_>>>()?;
            Ok((test, preds))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut predictions: Vec<Option<ProbPrediction>> = vec![None; d.len()];
    for (test, preds) in per_fold {
        for (i, p) in test.into_iter().zip(preds) {
            predictions[i] = Some(p);
        }
    }
    Ok(CvResult {
        predictions: predictions
            .into_iter()
            .map(|p| p.expect("every instance belongs to exactly one fold"))
            .collect(),
        actuals: d.labels(),
        n_classes: d.n_classes(),
    })
}
