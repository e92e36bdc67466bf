//! Synthetic minority oversampling over mixed numeric/nominal data.
//!
//! Neighbors are found with the heterogeneous Euclidean-overlap metric
//! (range-normalized numeric differences, 0/1 nominal mismatch). Synthetic
//! points interpolate numeric coordinates along the seed-neighbor segment and
//! copy nominal values from whichever endpoint the same uniform draw favors.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, FeatureKind, Instance, Provenance, Value};

#[derive(Debug, Error, PartialEq)]
pub enum SmoteError {
    #[error("neighbor pool is empty")]
    EmptyPool,
    #[error("seed and neighbor belong to different classes ({0} vs {1})")]
    ClassMismatch(usize, usize),
    #[error("class '{class}' has {count} instance(s); at least 2 are needed to oversample")]
    TooFewInstances { class: String, count: usize },
    #[error("oversampling rate {0} is not a multiple of 100")]
    BadRate(u32),
    #[error("k_neighbors must be at least 1")]
    BadK,
    #[error("dataset has missing values; impute before oversampling")]
    MissingValues,
    #[error("class index {0} out of range")]
    UnknownClass(usize),
}

pub type Result<T> = std::result::Result<T, SmoteError>;

/// Per-feature scales for the mixed distance.
#[derive(Debug, Clone, PartialEq)]
pub struct Heom {
    /// `Some(range)` for numeric features, `None` for nominal ones.
    ranges: Vec<Option<f64>>,
}

impl Heom {
    /// Ranges computed once from `d`.
    pub fn fit(d: &Dataset) -> Heom {
        let ranges = d
            .schema()
            .features()
            .iter()
            .enumerate()
            .map(|(j, f)| match f.kind {
                FeatureKind::Nominal(_) => None,
                FeatureKind::Numeric => {
                    let (lo, hi) = d
                        .column(j)
                        .filter_map(Value::as_f64)
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), x| (l.min(x), h.max(x)));
                    Some(if hi > lo { hi - lo } else { 0.0 })
                }
            })
            .collect();
        Heom { ranges }
    }

    pub fn from_ranges(ranges: Vec<Option<f64>>) -> Heom {
        Heom { ranges }
    }

    pub fn distance(&self, a: &Instance, b: &Instance) -> f64 {
        let mut sum = 0.0;
        for ((x, y), r) in a.values.iter().zip(&b.values).zip(&self.ranges) {
            let d = match (x, y, r) {
                (Value::Missing, _, _) | (_, Value::Missing, _) => 1.0,
                (_, _, None) => {
                    if x == y {
                        0.0
                    } else {
                        1.0
                    }
                }
                (_, _, Some(range)) => {
                    let diff = (x.as_f64().unwrap_or(0.0) - y.as_f64().unwrap_or(0.0)).abs();
                    if *range > 0.0 {
                        diff / range
                    } else {
                        diff
                    }
                }
            };
            sum += d * d;
        }
        sum.sqrt()
    }
}

/// The `min(k, |pool|)` nearest pool members, nearest first, ties by index.
pub fn nearest_neighbors(x: &Instance, pool: &[&Instance], k: usize, metric: &Heom) -> Result<Vec<usize>> {
    if pool.is_empty() {
        return Err(SmoteError::EmptyPool);
    }
    let mut dist: Vec<(f64, usize)> = pool.iter().enumerate().map(|(i, p)| (metric.distance(x, p), i)).collect();
    dist.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(dist.into_iter().take(k.min(pool.len())).map(|(_, i)| i).collect())
}

/// Point at fraction `u` along the segment from `x` to `neighbor`.
pub fn synthesize(x: &Instance, neighbor: &Instance, u: f64) -> Result<Instance> {
    if x.class_label != neighbor.class_label {
        return Err(SmoteError::ClassMismatch(x.class_label, neighbor.class_label));
    }
    let values = x
        .values
        .iter()
        .zip(&neighbor.values)
        .map(|(a, b)| match (a, b) {
            (Value::Numeric(p), Value::Numeric(q)) => Value::Numeric(p + u * (q - p)),
            _ => {
                if u < 0.5 {
                    *a
                } else {
                    *b
                }
            }
        })
        .collect();
    Ok(Instance {
        values,
        class_label: x.class_label,
        provenance: Provenance::Synthetic,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmotePlan {
    /// Oversampling percentage per class index; absent classes get 0.
    pub per_class_rate: BTreeMap<usize, u32>,
    pub k_neighbors: usize,
    pub seed: u64,
}

impl SmotePlan {
    pub fn rate(&self, class: usize) -> u32 {
        self.per_class_rate.get(&class).copied().unwrap_or(0)
    }

    pub fn validate(&self, d: &Dataset) -> Result<()> {
        if self.k_neighbors == 0 {
            return Err(SmoteError::BadK);
        }
        let counts = d.class_counts();
        for (&c, &r) in &self.per_class_rate {
            if r % 100 != 0 {
                return Err(SmoteError::BadRate(r));
            }
            if c >= counts.len() {
                return Err(SmoteError::UnknownClass(c));
            }
            if r > 0 && counts[c] < 2 {
                return Err(SmoteError::TooFewInstances {
                    class: d.schema().class_values()[c].clone(),
                    count: counts[c],
                });
            }
        }
        Ok(())
    }
}

/// How the default per-class rates are derived from class counts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RatePolicy {
    /// Grow every class toward twice the majority count:
    /// `100 * round(2 * majority / count - 1)`.
    DoubleMajority,
    /// Oversample non-majority classes toward balance:
    /// `100 * round(max(0, majority / count - 1))`, capped at `cap`.
    Balance { cap: u32 },
    /// The same rate for every class.
    Uniform { rate: u32 },
}

impl Default for RatePolicy {
    fn default() -> Self {
        RatePolicy::DoubleMajority
    }
}

impl RatePolicy {
    pub fn rates(&self, counts: &[usize]) -> BTreeMap<usize, u32> {
        let majority = counts.iter().copied().max().unwrap_or(0) as f64;
        let mut out = BTreeMap::new();
        for (c, &n) in counts.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let rate = match *self {
                RatePolicy::DoubleMajority => {
                    if n < 2 {
                        0
                    } else {
                        100 * (2.0 * majority / n as f64 - 1.0).round().max(0.0) as u32
                    }
                }
                RatePolicy::Balance { cap } => {
                    if n < 2 || n as f64 == majority {
                        0
                    } else {
                        (100 * (majority / n as f64 - 1.0).round().max(0.0) as u32).min(cap / 100 * 100)
                    }
                }
                RatePolicy::Uniform { rate } => {
                    if n < 2 {
                        0
                    } else {
                        rate
                    }
                }
            };
            out.insert(c, rate);
        }
        out
    }
}

pub const DEFAULT_K_NEIGHBORS: usize = 5;

/// Builds a plan from a rate policy plus explicit per-class overrides.
pub fn default_plan(d: &Dataset, policy: RatePolicy, overrides: &BTreeMap<usize, u32>, k: usize, seed: u64) -> SmotePlan {
    let mut per_class_rate = policy.rates(&d.class_counts());
    for (&c, &r) in overrides {
        per_class_rate.insert(c, r);
    }
    SmotePlan {
        per_class_rate,
        k_neighbors: k,
        seed,
    }
}

fn instance_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    rng
}

/// Appends `(rate / 100) * count(c)` synthetic instances per class `c`.
/// Originals come first and untouched; synthetic rows follow in the order of
/// their seed instances. Each seed draws from its own RNG stream, so the
/// output does not depend on how the neighbor searches are scheduled.
pub fn smote(d: &Dataset, plan: &SmotePlan) -> Result<Dataset> {
    plan.validate(d)?;
    if d.has_missing() {
        return Err(SmoteError::MissingValues);
    }
    let metric = Heom::fit(d);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); d.n_classes()];
    for (i, inst) in d.instances().iter().enumerate() {
        members[inst.class_label].push(i);
    }

    let synthetic: Vec<Vec<Instance>> = (0..d.len())
        .into_par_iter()
        .map(|i| {
            let x = &d.instances()[i];
            let reps = (plan.rate(x.class_label) / 100) as usize;
            if reps == 0 {
                return Ok(Vec::new());
            }
            let pool_idx: Vec<usize> = members[x.class_label].iter().copied().filter(|&j| j != i).collect();
            let pool: Vec<&Instance> = pool_idx.iter().map(|&j| &d.instances()[j]).collect();
            let nn = nearest_neighbors(x, &pool, plan.k_neighbors, &metric)?;
            let mut rng = instance_rng(plan.seed, i);
            (0..reps)
                .map(|_| {
                    let pick = nn[rng.gen_range(0..nn.len())];
                    let u: f64 = rng.gen();
                    synthesize(x, pool[pick], u)
                })
                .collect()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut instances = d.instances().to_vec();
    instances.extend(synthetic.into_iter().flatten());
    Ok(d.with_instances(instances).expect("synthetic rows conform to the source schema"))
}
