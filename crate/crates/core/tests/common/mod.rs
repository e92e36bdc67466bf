#![allow(dead_code)]

use std::collections::HashMap;
use std::path::PathBuf;

use hybridfs::dataset::{Dataset, Feature, FeatureSchema, Instance, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DATASETS: [&str; 5] = ["wine", "wdbc", "hepatitis", "lung-cancer", "dermatology-6"];

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(format!("{name}.arff"))
}

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn load(name: &str) -> Dataset {
    hybridfs::dataset::load_dataset(
        data_path(name),
        hybridfs::dataset::DataFormat::Arff,
        &Default::default(),
    )
    .unwrap_or_else(|e| panic!("loading {name}: {e}"))
}

/// Shape of a randomly generated dataset.
#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub rows: usize,
    pub numeric: usize,
    pub nominal: usize,
    pub classes: usize,
    pub missing: f64,
}

/// Mixed numeric/nominal data. Every class occurs at least twice when
/// `rows >= 2 * classes`.
pub fn random_dataset(seed: u64, shape: Shape) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features: Vec<Feature> = (0..shape.numeric).map(|j| Feature::numeric(format!("x{j}"))).collect();
    let arities: Vec<usize> = (0..shape.nominal).map(|_| rng.gen_range(2..5)).collect();
    for (j, &a) in arities.iter().enumerate() {
        features.push(Feature::nominal(format!("n{j}"), (0..a).map(|v| format!("v{v}"))));
    }
    let classes: Vec<String> = (0..shape.classes).map(|c| format!("c{c}")).collect();
    let schema = FeatureSchema::new("random", features, "class", classes).unwrap();
    let rows = (0..shape.rows)
        .map(|i| {
            let label = if i < 2 * shape.classes { i % shape.classes } else { rng.gen_range(0..shape.classes) };
            let mut values: Vec<Value> = (0..shape.numeric)
                .map(|_| Value::Numeric((rng.gen_range(-50.0..50.0f64) + label as f64 * 10.0).round() / 4.0))
                .collect();
            values.extend(arities.iter().map(|&a| Value::Nominal(rng.gen_range(0..a))));
            for v in values.iter_mut() {
                if rng.gen_bool(shape.missing) {
                    *v = Value::Missing;
                }
            }
            Instance::new(values, label)
        })
        .collect();
    Dataset::new(schema, rows).unwrap()
}

/// `informative` noisy copies of a two-class label plus `noise` pure-noise
/// numeric columns.
pub fn signal_and_noise(seed: u64, rows: usize, informative: usize, noise: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features = (0..informative)
        .map(|j| Feature::numeric(format!("s{j}")))
        .chain((0..noise).map(|j| Feature::numeric(format!("z{j}"))))
        .collect();
    let schema = FeatureSchema::new("signal", features, "class", ["neg", "pos"]).unwrap();
    let strengths: Vec<f64> = (0..informative).map(|_| rng.gen_range(0.3..2.0)).collect();
    let instances = (0..rows)
        .map(|i| {
            let label = i % 2;
            let mut values: Vec<Value> = strengths
                .iter()
                .map(|&s| Value::Numeric(label as f64 * s + rng.gen_range(-1.0..1.0)))
                .collect();
            values.extend((0..noise).map(|_| Value::Numeric(rng.gen_range(-1.0..1.0))));
            Instance::new(values, label)
        })
        .collect();
    Dataset::new(schema, instances).unwrap()
}

/// H(X), H(Y) and H(Y|X) from an explicit joint contingency table.
pub fn brute_entropies(x: &[usize], y: &[usize]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    let mut cx: HashMap<usize, usize> = HashMap::new();
    let mut cy: HashMap<usize, usize> = HashMap::new();
    for (&a, &b) in x.iter().zip(y) {
        *joint.entry((a, b)).or_default() += 1;
        *cx.entry(a).or_default() += 1;
        *cy.entry(b).or_default() += 1;
    }
    let h = |m: &HashMap<usize, usize>| {
        -m.values()
            .map(|&c| {
                let p = c as f64 / n;
                p * p.log2()
            })
            .sum::<f64>()
    };
    let h_y_given_x = -joint
        .iter()
        .map(|(&(a, _), &c)| c as f64 / n * (c as f64 / cx[&a] as f64).log2())
        .sum::<f64>();
    (h(&cx), h(&cy), h_y_given_x)
}

pub fn mean(v: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in v.iter().rev() {
        s += x;
    }
    s / v.len() as f64
}
