//! Information-theoretic feature scoring: entropy, conditional entropy,
//! information gain, symmetrical uncertainty, supervised discretization of
//! numeric features and threshold-based ranking.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, FeatureKind, FeatureSubset, Value};

#[derive(Debug, Error, PartialEq)]
pub enum ScoringError {
    #[error("entropy of an empty distribution")]
    EmptyDistribution,
    #[error("column lengths differ: {0} vs {1}")]
    Length(usize, usize),
    #[error("dataset has no features to rank")]
    NoFeatures,
    #[error("dataset has missing values; impute before scoring")]
    MissingValues,
    #[error("invalid threshold policy: {0}")]
    Policy(String),
}

pub type Result<T> = std::result::Result<T, ScoringError>;

/// Shannon entropy in bits of a frequency vector.
pub fn entropy(counts: &[usize]) -> Result<f64> {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return Err(ScoringError::EmptyDistribution);
    }
    let n = total as f64;
    Ok(counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum())
}

fn value_counts(col: &[usize]) -> Vec<usize> {
    let width = col.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0; width];
    for &v in col {
        counts[v] += 1;
    }
    counts
}

/// H(Y | X) for discrete columns.
pub fn conditional_entropy(x: &[usize], y: &[usize]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(ScoringError::Length(x.len(), y.len()));
    }
    if x.is_empty() {
        return Err(ScoringError::EmptyDistribution);
    }
    let mut groups: HashMap<usize, HashMap<usize, usize>> = HashMap::new();
    for (&xv, &yv) in x.iter().zip(y) {
        *groups.entry(xv).or_default().entry(yv).or_default() += 1;
    }
    let n = x.len() as f64;
    let mut h = 0.0;
    // iterate in key order so the floating-point sum is reproducible
    let mut keys: Vec<_> = groups.keys().copied().collect();
    keys.sort_unstable();
    for k in keys {
        let g = &groups[&k];
        let mut ys: Vec<_> = g.iter().map(|(&a, &b)| (a, b)).collect();
        ys.sort_unstable();
        let counts: Vec<usize> = ys.into_iter().map(|(_, c)| c).collect();
        let size: usize = counts.iter().sum();
        h += size as f64 / n * entropy(&counts)?;
    }
    Ok(h)
}

/// IG(X; Y) = H(Y) - H(Y | X), clamped at 0 against rounding.
pub fn information_gain(x: &[usize], y: &[usize]) -> Result<f64> {
    let hy = entropy(&value_counts(y))?;
    let hyx = conditional_entropy(x, y)?;
    Ok((hy - hyx).max(0.0))
}

/// 2 IG / (H(X) + H(Y)), in [0, 1]; 0 when both entropies vanish.
pub fn symmetrical_uncertainty(x: &[usize], y: &[usize]) -> Result<f64> {
    let ig = information_gain(x, y)?;
    let hx = entropy(&value_counts(x))?;
    let hy = entropy(&value_counts(y))?;
    if hx + hy <= 0.0 {
        return Ok(0.0);
    }
    Ok((2.0 * ig / (hx + hy)).clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------
// Discretization

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum DiscretizationMethod {
    /// Recursive entropy splitting with the Fayyad–Irani MDL stopping rule.
    Mdl,
    EqualWidth { bins: usize },
}

impl Default for DiscretizationMethod {
    fn default() -> Self {
        DiscretizationMethod::Mdl
    }
}

/// Cut points per feature; `None` for nominal features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub cuts: Vec<Option<Vec<f64>>>,
}

impl Discretization {
    /// Discrete code of `v` for feature `j`: nominal index, or the number of
    /// cut points strictly below a numeric value.
    pub fn code(&self, j: usize, v: &Value) -> usize {
        match (v, &self.cuts[j]) {
            (Value::Nominal(i), _) => *i,
            (Value::Numeric(x), Some(cuts)) => cuts.partition_point(|c| c < x),
            (Value::Numeric(_), None) => 0,
            (Value::Missing, _) => 0,
        }
    }

    pub fn column(&self, d: &Dataset, j: usize) -> Vec<usize> {
        d.column(j).map(|v| self.code(j, v)).collect()
    }
}

pub fn discretize(d: &Dataset, method: DiscretizationMethod) -> Result<Discretization> {
    if d.has_missing() {
        return Err(ScoringError::MissingValues);
    }
    let labels = d.labels();
    let cuts = d
        .schema()
        .features()
        .iter()
        .enumerate()
        .map(|(j, f)| match f.kind {
            FeatureKind::Nominal(_) => None,
            FeatureKind::Numeric => {
                let xs: Vec<f64> = d.column(j).filter_map(Value::as_f64).collect();
                Some(match method {
                    DiscretizationMethod::Mdl => mdl_cuts(&xs, &labels, d.n_classes()),
                    DiscretizationMethod::EqualWidth { bins } => equal_width_cuts(&xs, bins),
                })
            }
        })
        .collect();
    Ok(Discretization { cuts })
}

pub fn equal_width_cuts(xs: &[f64], bins: usize) -> Vec<f64> {
    let (lo, hi) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if xs.is_empty() || bins < 2 || hi <= lo {
        return Vec::new();
    }
    let w = (hi - lo) / bins as f64;
    (1..bins).map(|i| lo + w * i as f64).collect()
}

fn class_entropy(counts: &[usize]) -> f64 {
    entropy(counts).unwrap_or(0.0)
}

fn distinct_classes(counts: &[usize]) -> f64 {
    counts.iter().filter(|&&c| c > 0).count() as f64
}

/// Fayyad–Irani recursive minimal-entropy partitioning.
pub fn mdl_cuts(xs: &[f64], labels: &[usize], n_classes: usize) -> Vec<f64> {
    let mut pairs: Vec<(f64, usize)> = xs.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut cuts = Vec::new();
    mdl_split(&pairs, n_classes, &mut cuts);
    cuts.sort_by(f64::total_cmp);
    cuts
}

fn mdl_split(pairs: &[(f64, usize)], n_classes: usize, cuts: &mut Vec<f64>) {
    let n = pairs.len();
    if n < 2 {
        return;
    }
    let mut total = vec![0usize; n_classes];
    for &(_, c) in pairs {
        total[c] += 1;
    }
    let ent = class_entropy(&total);
    if ent == 0.0 {
        return;
    }

    let mut left = vec![0usize; n_classes];
    // (weighted child entropy, split position, left counts)
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    for i in 0..n - 1 {
        left[pairs[i].1] += 1;
        if pairs[i].0 == pairs[i + 1].0 {
            continue;
        }
        let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();
        let nl = (i + 1) as f64;
        let nr = (n - i - 1) as f64;
        let e = (nl * class_entropy(&left) + nr * class_entropy(&right)) / n as f64;
        if best.as_ref().map_or(true, |b| e < b.0) {
            best = Some((e, i + 1, left.clone()));
        }
    }
    let Some((child_ent, pos, left)) = best else { return };
    let right: Vec<usize> = total.iter().zip(&left).map(|(t, l)| t - l).collect();

    let nf = n as f64;
    let gain = ent - child_ent;
    let k = distinct_classes(&total);
    let k1 = distinct_classes(&left);
    let k2 = distinct_classes(&right);
    let delta = (3f64.powf(k) - 2.0).log2() - (k * ent - k1 * class_entropy(&left) - k2 * class_entropy(&right));
    let threshold = ((nf - 1.0).log2() + delta) / nf;
    if gain <= threshold {
        return;
    }
    cuts.push(0.5 * (pairs[pos - 1].0 + pairs[pos].0));
    mdl_split(&pairs[..pos], n_classes, cuts);
    mdl_split(&pairs[pos..], n_classes, cuts);
}

// ---------------------------------------------------------------------------
// Ranking

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreKind {
    #[default]
    InfoGain,
    SymmetricalUncertainty,
}

/// Which ranked features survive the filter step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "kebab-case")]
pub enum ThresholdPolicy {
    /// score > 1e-12
    Positive,
    /// score > mean score
    Mean,
    /// the ceil(f * N) best
    TopFraction(f64),
    /// score > t
    Absolute(f64),
    /// score >= f * best score
    RelativeToMax(f64),
}

/// Relative cut used by the default policy.
pub const DEFAULT_RELATIVE_THRESHOLD: f64 = 0.24;

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy::RelativeToMax(DEFAULT_RELATIVE_THRESHOLD)
    }
}

impl ThresholdPolicy {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ThresholdPolicy::TopFraction(f) if !(f > 0.0 && f <= 1.0) => {
                Err(ScoringError::Policy(format!("top fraction {f} outside (0, 1]")))
            }
            ThresholdPolicy::Absolute(t) if !t.is_finite() => Err(ScoringError::Policy(format!("threshold {t}"))),
            ThresholdPolicy::RelativeToMax(f) if !(0.0..=1.0).contains(&f) => {
                Err(ScoringError::Policy(format!("relative threshold {f} outside [0, 1]")))
            }
            _ => Ok(()),
        }
    }
}

impl std::str::FromStr for ThresholdPolicy {
    type Err = ScoringError;

    /// `positive`, `mean`, `top:<f>`, `abs:<t>`, `rel:<f>`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || ScoringError::Policy(s.to_string());
        let p = match s.split_once(':') {
            None if s == "positive" => ThresholdPolicy::Positive,
            None if s == "mean" => ThresholdPolicy::Mean,
            Some(("top", f)) => ThresholdPolicy::TopFraction(f.parse().map_err(|_| bad())?),
            Some(("abs", t)) => ThresholdPolicy::Absolute(t.parse().map_err(|_| bad())?),
            Some(("rel", f)) => ThresholdPolicy::RelativeToMax(f.parse().map_err(|_| bad())?),
            _ => return Err(bad()),
        };
        p.validate()?;
        Ok(p)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRanking {
    pub score_kind: ScoreKind,
    /// Score per feature, indexed like the schema.
    pub scores: Vec<f64>,
    /// Feature indices by descending score, ties by ascending index.
    pub order: Vec<usize>,
}

impl FeatureRanking {
    pub fn from_scores(score_kind: ScoreKind, scores: Vec<f64>) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        FeatureRanking {
            score_kind,
            scores,
            order,
        }
    }

    /// Rank position of each feature (0 = best).
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (r, &f) in self.order.iter().enumerate() {
            pos[f] = r;
        }
        pos
    }
}

pub fn score_features(d: &Dataset, kind: ScoreKind, disc: &Discretization) -> Result<FeatureRanking> {
    if d.n_features() == 0 {
        return Err(ScoringError::NoFeatures);
    }
    let y = d.labels();
    if y.is_empty() {
        return Ok(FeatureRanking::from_scores(kind, vec![0.0; d.n_features()]));
    }
    let scores = (0..d.n_features())
        .map(|j| {
            let x = disc.column(d, j);
            match kind {
                ScoreKind::InfoGain => information_gain(&x, &y),
                ScoreKind::SymmetricalUncertainty => symmetrical_uncertainty(&x, &y),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureRanking::from_scores(kind, scores))
}

/// Applies `policy` to a ranking. Never returns an empty subset: if nothing
/// passes, the top-ranked feature is kept alone.
pub fn apply_threshold(ranking: &FeatureRanking, policy: ThresholdPolicy) -> Result<FeatureSubset> {
    policy.validate()?;
    let n = ranking.scores.len();
    if n == 0 {
        return Err(ScoringError::NoFeatures);
    }
    let keep: Vec<usize> = match policy {
        ThresholdPolicy::Positive => (0..n).filter(|&j| ranking.scores[j] > 1e-12).collect(),
        ThresholdPolicy::Mean => {
            let mean = ranking.scores.iter().sum::<f64>() / n as f64;
            (0..n).filter(|&j| ranking.scores[j] > mean).collect()
        }
        ThresholdPolicy::TopFraction(f) => {
            let m = ((f * n as f64).ceil() as usize).clamp(1, n);
            ranking.order[..m].to_vec()
        }
        ThresholdPolicy::Absolute(t) => (0..n).filter(|&j| ranking.scores[j] > t).collect(),
        ThresholdPolicy::RelativeToMax(f) => {
            let cut = f * ranking.scores[ranking.order[0]];
            (0..n).filter(|&j| ranking.scores[j] >= cut && ranking.scores[j] > 1e-12).collect()
        }
    };
    let keep = if keep.is_empty() { vec![ranking.order[0]] } else { keep };
    Ok(FeatureSubset::from_indices(n, &keep))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RankingConfig {
    pub score: ScoreKind,
    pub policy: ThresholdPolicy,
    pub discretization: DiscretizationMethod,
}

/// Scores every feature against the class and keeps those passing the policy.
pub fn rank_and_threshold(d: &Dataset, cfg: &RankingConfig) -> Result<(FeatureRanking, FeatureSubset)> {
    if d.n_features() == 0 {
        return Err(ScoringError::NoFeatures);
    }
    let disc = discretize(d, cfg.discretization)?;
    let ranking = score_features(d, cfg.score, &disc)?;
    let subset = apply_threshold(&ranking, cfg.policy)?;
    Ok((ranking, subset))
}
