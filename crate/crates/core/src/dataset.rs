//! Tabular data model: schema, instances, ARFF/CSV ingestion, imputation,
//! stratified fold planning and feature-subset projection.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: expected {expected} values, found {found}")]
    Arity {
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: unknown nominal value '{value}' for attribute '{attribute}'")]
    UnknownNominal {
        line: usize,
        attribute: String,
        value: String,
    },
    #[error("line {line}: cannot parse '{value}' as a number for attribute '{attribute}'")]
    NumericParse {
        line: usize,
        attribute: String,
        value: String,
    },
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("feature '{0}' has no observed values; cannot impute")]
    AllMissing(String),
    #[error("fold count {k} exceeds sample count {n}")]
    TooManyFolds { k: usize, n: usize },
    #[error("fold count must be at least 2, got {0}")]
    TooFewFolds(usize),
    #[error("subset width {subset} does not match schema width {schema}")]
    SubsetWidth { subset: usize, schema: usize },
    #[error("class column '{0}' not found")]
    MissingClass(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "type", content = "values")]
pub enum FeatureKind {
    Numeric,
    Nominal(Vec<String>),
}

impl FeatureKind {
    pub fn is_numeric(&self) -> bool {
        matches!(self, FeatureKind::Numeric)
    }

    /// Number of nominal values, or `None` for numeric features.
    pub fn arity(&self) -> Option<usize> {
        match self {
            FeatureKind::Numeric => None,
            FeatureKind::Nominal(v) => Some(v.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    pub kind: FeatureKind,
}

impl Feature {
    pub fn numeric(name: impl Into<String>) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Numeric,
        }
    }

    pub fn nominal<S: Into<String>>(name: impl Into<String>, values: impl IntoIterator<Item = S>) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Nominal(values.into_iter().map(Into::into).collect()),
        }
    }
}

/// Feature list plus the nominal class attribute.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSchema {
    relation: String,
    features: Vec<Feature>,
    class_name: String,
    class_values: Vec<String>,
}

impl FeatureSchema {
    pub fn new<S: Into<String>>(
        relation: impl Into<String>,
        features: Vec<Feature>,
        class_name: impl Into<String>,
        class_values: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let schema = FeatureSchema {
            relation: relation.into(),
            features,
            class_name: class_name.into(),
            class_values: class_values.into_iter().map(Into::into).collect(),
        };
        schema.validate()?;
        Ok(schema)
    }

    fn validate(&self) -> Result<()> {
        if self.class_values.is_empty() {
            return Err(DatasetError::Schema("class value list is empty".into()));
        }
        let mut seen = HashMap::new();
        for f in &self.features {
            if seen.insert(f.name.as_str(), ()).is_some() || f.name == self.class_name {
                return Err(DatasetError::Schema(format!("duplicate attribute name '{}'", f.name)));
            }
            if let FeatureKind::Nominal(v) = &f.kind {
                if v.is_empty() {
                    return Err(DatasetError::Schema(format!(
                        "nominal attribute '{}' has no values",
                        f.name
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn relation(&self) -> &str {
        &self.relation
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn feature(&self, i: usize) -> &Feature {
        &self.features[i]
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    pub fn class_name(&self) -> &str {
        &self.class_name
    }

    pub fn class_values(&self) -> &[String] {
        &self.class_values
    }

    pub fn n_classes(&self) -> usize {
        self.class_values.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Value {
    Numeric(f64),
    Nominal(usize),
    Missing,
}

impl Value {
    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }

    /// Numeric payload; nominal indices are widened to `f64`.
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Value::Numeric(x) => Some(x),
            Value::Nominal(i) => Some(i as f64),
            Value::Missing => None,
        }
    }

    pub fn as_nominal(&self) -> Option<usize> {
        match *self {
            Value::Nominal(i) => Some(i),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Original,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub values: Vec<Value>,
    pub class_label: usize,
    pub provenance: Provenance,
}

impl Instance {
    pub fn new(values: Vec<Value>, class_label: usize) -> Self {
        Instance {
            values,
            class_label,
            provenance: Provenance::Original,
        }
    }

    pub fn has_missing(&self) -> bool {
        self.values.iter().any(Value::is_missing)
    }
}

/// Immutable table of instances under a schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: FeatureSchema,
    instances: Vec<Instance>,
}

impl Dataset {
    /// Builds a dataset, checking every instance against the schema.
    pub fn new(schema: FeatureSchema, instances: Vec<Instance>) -> Result<Self> {
        for (row, inst) in instances.iter().enumerate() {
            check_conforms(&schema, inst).map_err(|msg| DatasetError::Schema(format!("instance {row}: {msg}")))?;
        }
        Ok(Dataset { schema, instances })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }

    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.schema.n_features()
    }

    pub fn n_classes(&self) -> usize {
        self.schema.n_classes()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.instances.iter().map(|i| i.class_label).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for inst in &self.instances {
            counts[inst.class_label] += 1;
        }
        counts
    }

    pub fn has_missing(&self) -> bool {
        self.instances.iter().any(Instance::has_missing)
    }

    /// New dataset sharing this schema, holding the given rows.
    pub fn with_instances(&self, instances: Vec<Instance>) -> Result<Dataset> {
        Dataset::new(self.schema.clone(), instances)
    }

    /// Rows at `indices`, in that order.
    pub fn subset_rows(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            instances: indices.iter().map(|&i| self.instances[i].clone()).collect(),
        }
    }

    pub fn column(&self, feature: usize) -> impl Iterator<Item = &Value> + '_ {
        self.instances.iter().map(move |i| &i.values[feature])
    }
}

fn check_conforms(schema: &FeatureSchema, inst: &Instance) -> std::result::Result<(), String> {
    if inst.values.len() != schema.n_features() {
        return Err(format!(
            "has {} values, schema has {} features",
            inst.values.len(),
            schema.n_features()
        ));
    }
    if inst.class_label >= schema.n_classes() {
        return Err(format!("class label {} out of range", inst.class_label));
    }
    for (v, f) in inst.values.iter().zip(schema.features()) {
        match (v, &f.kind) {
            (Value::Missing, _) => {}
            (Value::Numeric(_), FeatureKind::Numeric) => {}
            (Value::Nominal(i), FeatureKind::Nominal(vals)) if *i < vals.len() => {}
            _ => return Err(format!("value {v:?} does not fit attribute '{}'", f.name)),
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Feature subsets

/// Bitmask over a schema's feature indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureSubset {
    mask: Vec<bool>,
}

impl FeatureSubset {
    pub fn full(width: usize) -> Self {
        FeatureSubset { mask: vec![true; width] }
    }

    pub fn empty(width: usize) -> Self {
        FeatureSubset { mask: vec![false; width] }
    }

    pub fn from_mask(mask: Vec<bool>) -> Self {
        FeatureSubset { mask }
    }

    /// Panics if any index is out of range.
    pub fn from_indices(width: usize, indices: &[usize]) -> Self {
        let mut mask = vec![false; width];
        for &i in indices {
            mask[i] = true;
        }
        FeatureSubset { mask }
    }

    pub fn width(&self) -> usize {
        self.mask.len()
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }

    pub fn contains(&self, i: usize) -> bool {
        self.mask.get(i).copied().unwrap_or(false)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn indices(&self) -> Vec<usize> {
        self.mask
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    pub fn intersect(&self, other: &FeatureSubset) -> FeatureSubset {
        FeatureSubset {
            mask: self.mask.iter().zip(&other.mask).map(|(a, b)| *a && *b).collect(),
        }
    }
}

impl Serialize for FeatureSubset {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            width: usize,
            indices: Vec<usize>,
        }
        Repr {
            width: self.width(),
            indices: self.indices(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for FeatureSubset {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            width: usize,
            indices: Vec<usize>,
        }
        let r = Repr::deserialize(d)?;
        if let Some(&bad) = r.indices.iter().find(|&&i| i >= r.width) {
            return Err(serde::de::Error::custom(format!("index {bad} outside width {}", r.width)));
        }
        Ok(FeatureSubset::from_indices(r.width, &r.indices))
    }
}

/// Restricts `d` to the features selected by `s`, keeping original order.
pub fn project(d: &Dataset, s: &FeatureSubset) -> Result<Dataset> {
    if s.width() != d.n_features() {
        return Err(DatasetError::SubsetWidth {
            subset: s.width(),
            schema: d.n_features(),
        });
    }
    let keep = s.indices();
    let features = keep.iter().map(|&i| d.schema.features[i].clone()).collect();
    let schema = FeatureSchema {
        relation: d.schema.relation.clone(),
        features,
        class_name: d.schema.class_name.clone(),
        class_values: d.schema.class_values.clone(),
    };
    let instances = d
        .instances
        .iter()
        .map(|inst| Instance {
            values: keep.iter().map(|&i| inst.values[i]).collect(),
            class_label: inst.class_label,
            provenance: inst.provenance,
        })
        .collect();
    Ok(Dataset { schema, instances })
}

// ---------------------------------------------------------------------------
// Imputation

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ImputePolicy {
    #[default]
    MeanMode,
    DropRow,
}

pub fn impute_missing(d: &Dataset, policy: ImputePolicy) -> Result<Dataset> {
    match policy {
        ImputePolicy::DropRow => Ok(Dataset {
            schema: d.schema.clone(),
            instances: d.instances.iter().filter(|i| !i.has_missing()).cloned().collect(),
        }),
        ImputePolicy::MeanMode => {
            let mut fill = Vec::with_capacity(d.n_features());
            for (j, f) in d.schema.features.iter().enumerate() {
                let any_missing = d.column(j).any(Value::is_missing);
                if !any_missing {
                    fill.push(None);
                    continue;
                }
                let v = match &f.kind {
                    FeatureKind::Numeric => {
                        let (sum, n) = d
                            .column(j)
                            .filter_map(|v| match v {
                                Value::Numeric(x) => Some(*x),
                                _ => None,
                            })
                            .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
                        if n == 0 {
                            return Err(DatasetError::AllMissing(f.name.clone()));
                        }
                        Value::Numeric(sum / n as f64)
                    }
                    FeatureKind::Nominal(vals) => {
                        let mut counts = vec![0usize; vals.len()];
                        for v in d.column(j) {
                            if let Value::Nominal(i) = v {
                                counts[*i] += 1;
                            }
                        }
                        if counts.iter().all(|&c| c == 0) {
                            return Err(DatasetError::AllMissing(f.name.clone()));
                        }
                        // max_by_key keeps the last maximum; scan manually for the lowest index
                        let mut best = 0;
                        for (i, &c) in counts.iter().enumerate() {
                            if c > counts[best] {
                                best = i;
                            }
                        }
                        Value::Nominal(best)
                    }
                };
                fill.push(Some(v));
            }
            let instances = d
                .instances
                .iter()
                .map(|inst| {
                    let mut inst = inst.clone();
                    for (v, f) in inst.values.iter_mut().zip(&fill) {
                        if v.is_missing() {
                            *v = f.expect("fill value exists for every column with missing entries");
                        }
                    }
                    inst
                })
                .collect();
            Ok(Dataset {
                schema: d.schema.clone(),
                instances,
            })
        }
    }
}

// ---------------------------------------------------------------------------
// Fold planning

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    k: usize,
    assignments: Vec<usize>,
    seed: u64,
}

impl FoldPlan {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn assignments(&self) -> &[usize] {
        &self.assignments
    }

    pub fn fold_of(&self, instance: usize) -> usize {
        self.assignments[instance]
    }

    /// (train, test) instance indices for fold `f`, each ascending.
    pub fn split(&self, f: usize) -> (Vec<usize>, Vec<usize>) {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (i, &a) in self.assignments.iter().enumerate() {
            if a == f {
                test.push(i);
            } else {
                train.push(i);
            }
        }
        (train, test)
    }

    /// Plan with one instance per fold; used for leave-one-out.
    pub fn leave_one_out(n: usize) -> FoldPlan {
        FoldPlan {
            k: n,
            assignments: (0..n).collect(),
            seed: 0,
        }
    }
}

/// Assigns instances to `k` folds so that each class is spread round-robin
/// over shuffled members. The round-robin cursor carries over between
/// classes so overall fold sizes also differ by at most one.
pub fn stratified_folds(d: &Dataset, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(DatasetError::TooFewFolds(k));
    }
    if k > d.len() {
        return Err(DatasetError::TooManyFolds { k, n: d.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); d.n_classes()];
    for (i, inst) in d.instances.iter().enumerate() {
        by_class[inst.class_label].push(i);
    }
    let mut assignments = vec![0; d.len()];
    let mut cursor = 0;
    for members in &mut by_class {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignments[i] = cursor % k;
            cursor += 1;
        }
    }
    Ok(FoldPlan { k, assignments, seed })
}

// ---------------------------------------------------------------------------
// Ingestion

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Arff,
    Csv,
}

impl DataFormat {
    /// Guesses from the file extension; defaults to ARFF.
    pub fn from_path(path: &Path) -> DataFormat {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => DataFormat::Csv,
            _ => DataFormat::Arff,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassColumn {
    #[default]
    Last,
    Named(String),
}

pub fn load_dataset(path: impl AsRef<Path>, format: DataFormat, class: &ClassColumn) -> Result<Dataset> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let stem = path
        .as_ref()
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string();
    match format {
        DataFormat::Arff => parse_arff(&text, class),
        DataFormat::Csv => parse_csv(&text, &stem, class),
    }
}

struct RawAttribute {
    name: String,
    kind: FeatureKind,
}

/// Parses the flat ARFF subset: `@relation`, numeric/nominal `@attribute`,
/// dense `@data` rows and `?` for missing values.
pub fn parse_arff(text: &str, class: &ClassColumn) -> Result<Dataset> {
    let mut relation = String::from("dataset");
    let mut attrs: Vec<RawAttribute> = Vec::new();
    let mut lines = text.lines().enumerate();
    let mut in_data = false;

    for (no, raw) in lines.by_ref() {
        let line_no = no + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        let lower = line.to_ascii_lowercase();
        if lower.starts_with("@relation") {
            relation = unquote(line[9..].trim()).to_string();
        } else if lower.starts_with("@attribute") {
            attrs.push(parse_attribute(line[10..].trim(), line_no)?);
        } else if lower.starts_with("@data") {
            in_data = true;
            break;
        } else {
            return Err(DatasetError::Parse {
                line: line_no,
                msg: format!("unexpected header line '{line}'"),
            });
        }
    }
    if !in_data {
        return Err(DatasetError::Parse {
            line: text.lines().count(),
            msg: "missing @data section".into(),
        });
    }
    if attrs.len() < 1 {
        return Err(DatasetError::Parse {
            line: 1,
            msg: "no attributes declared".into(),
        });
    }

    let class_idx = resolve_class(&attrs.iter().map(|a| a.name.as_str()).collect::<Vec<_>>(), class)?;
    let schema = schema_from_raw(relation, attrs, class_idx)?;
    let width = schema.n_features() + 1;

    let mut instances = Vec::new();
    for (no, raw) in lines {
        let line_no = no + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if line.starts_with('{') {
            return Err(DatasetError::Parse {
                line: line_no,
                msg: "sparse ARFF rows are not supported".into(),
            });
        }
        let fields = split_arff_row(line);
        if fields.len() != width {
            return Err(DatasetError::Arity {
                line: line_no,
                expected: width,
                found: fields.len(),
            });
        }
        instances.push(build_instance(&schema, class_idx, &fields, line_no, "?")?);
    }
    Dataset::new(schema, instances)
}

fn parse_attribute(rest: &str, line: usize) -> Result<RawAttribute> {
    let (name, ty) = split_name(rest).ok_or_else(|| DatasetError::Parse {
        line,
        msg: format!("malformed @attribute declaration '{rest}'"),
    })?;
    let ty = ty.trim();
    let kind = if ty.starts_with('{') {
        let close = ty.rfind('}').ok_or_else(|| DatasetError::Parse {
            line,
            msg: "unterminated nominal value list".into(),
        })?;
        let values: Vec<String> = split_arff_row(&ty[1..close])
            .into_iter()
            .filter(|v| !v.is_empty())
            .collect();
        if values.is_empty() {
            return Err(DatasetError::Parse {
                line,
                msg: format!("nominal attribute '{name}' declares no values"),
            });
        }
        FeatureKind::Nominal(values)
    } else {
        match ty.to_ascii_lowercase().split_whitespace().next() {
            Some("numeric") | Some("real") | Some("integer") => FeatureKind::Numeric,
            other => {
                return Err(DatasetError::Parse {
                    line,
                    msg: format!("unsupported attribute type '{}'", other.unwrap_or("")),
                })
            }
        }
    };
    Ok(RawAttribute { name, kind })
}

fn split_name(rest: &str) -> Option<(String, &str)> {
    let rest = rest.trim_start();
    if let Some(q) = rest.chars().next().filter(|c| *c == '\'' || *c == '"') {
        let end = rest[1..].find(q)? + 1;
        Some((rest[1..end].to_string(), &rest[end + 1..]))
    } else {
        let end = rest.find(|c: char| c.is_whitespace() || c == '{')?;
        Some((rest[..end].to_string(), &rest[end..]))
    }
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    if s.len() >= 2 && ((s.starts_with('\'') && s.ends_with('\'')) || (s.starts_with('"') && s.ends_with('"'))) {
        &s[1..s.len() - 1]
    } else {
        s
    }
}

/// Comma split honoring single/double quotes.
fn split_arff_row(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quote: Option<char> = None;
    for c in line.chars() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => cur.push(c),
            None if c == '\'' || c == '"' => quote = Some(c),
            None if c == ',' => {
                out.push(cur.trim().to_string());
                cur.clear();
            }
            None => cur.push(c),
        }
    }
    out.push(cur.trim().to_string());
    out
}

fn resolve_class(names: &[&str], class: &ClassColumn) -> Result<usize> {
    match class {
        ClassColumn::Last => Ok(names.len() - 1),
        ClassColumn::Named(n) => names
            .iter()
            .position(|a| a == n)
            .ok_or_else(|| DatasetError::MissingClass(n.clone())),
    }
}

fn schema_from_raw(relation: String, mut attrs: Vec<RawAttribute>, class_idx: usize) -> Result<FeatureSchema> {
    let class_attr = attrs.remove(class_idx);
    let class_values = match class_attr.kind {
        FeatureKind::Nominal(v) => v,
        FeatureKind::Numeric => {
            return Err(DatasetError::Schema(format!(
                "class attribute '{}' must be nominal",
                class_attr.name
            )))
        }
    };
    let features = attrs
        .into_iter()
        .map(|a| Feature {
            name: a.name,
            kind: a.kind,
        })
        .collect();
    FeatureSchema::new(relation, features, class_attr.name, class_values)
}

fn build_instance(
    schema: &FeatureSchema,
    class_idx: usize,
    fields: &[String],
    line: usize,
    missing: &str,
) -> Result<Instance> {
    let mut values = Vec::with_capacity(schema.n_features());
    let mut class_label = None;
    let mut feat = 0;
    for (col, field) in fields.iter().enumerate() {
        if col == class_idx {
            let idx = schema
                .class_values()
                .iter()
                .position(|v| v == field)
                .ok_or_else(|| DatasetError::UnknownNominal {
                    line,
                    attribute: schema.class_name().to_string(),
                    value: field.clone(),
                })?;
            class_label = Some(idx);
            continue;
        }
        let f = schema.feature(feat);
        feat += 1;
        if field == missing {
            values.push(Value::Missing);
            continue;
        }
        values.push(match &f.kind {
            FeatureKind::Numeric => Value::Numeric(field.parse::<f64>().map_err(|_| DatasetError::NumericParse {
                line,
                attribute: f.name.clone(),
                value: field.clone(),
            })?),
            FeatureKind::Nominal(vals) => {
                Value::Nominal(vals.iter().position(|v| v == field).ok_or_else(|| {
                    DatasetError::UnknownNominal {
                        line,
                        attribute: f.name.clone(),
                        value: field.clone(),
                    }
                })?)
            }
        });
    }
    let class_label = class_label.ok_or_else(|| DatasetError::Parse {
        line,
        msg: "missing class value".into(),
    })?;
    Ok(Instance::new(values, class_label))
}

/// CSV with a header row. Columns whose non-empty cells all parse as numbers
/// are numeric; anything else is nominal with sorted distinct values. The
/// class column is always nominal.
pub fn parse_csv(text: &str, relation: &str, class: &ClassColumn) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(DatasetError::Parse {
            line: 1,
            msg: "empty header row".into(),
        });
    }
    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() == 1 && rec[0].trim().is_empty() {
            continue;
        }
        if rec.len() != header.len() {
            return Err(DatasetError::Arity {
                line,
                expected: header.len(),
                found: rec.len(),
            });
        }
        rows.push((line, rec.iter().map(|f| f.trim().to_string()).collect()));
    }

    let class_idx = resolve_class(&header.iter().map(String::as_str).collect::<Vec<_>>(), class)?;
    let mut attrs = Vec::with_capacity(header.len());
    for (col, name) in header.iter().enumerate() {
        let cells = rows.iter().map(|(_, r)| r[col].as_str()).filter(|c| !c.is_empty());
        let numeric = col != class_idx && cells.clone().all(|c| c.parse::<f64>().is_ok());
        let kind = if numeric {
            FeatureKind::Numeric
        } else {
            let mut distinct: Vec<&str> = cells.collect();
            distinct.sort_by(|a, b| match (a.parse::<f64>(), b.parse::<f64>()) {
                (Ok(x), Ok(y)) => x.total_cmp(&y),
                _ => a.cmp(b),
            });
            distinct.dedup();
            if distinct.is_empty() {
                distinct.push("?");
            }
            FeatureKind::Nominal(distinct.into_iter().map(String::from).collect())
        };
        attrs.push(RawAttribute {
            name: name.clone(),
            kind,
        });
    }
    let schema = schema_from_raw(relation.to_string(), attrs, class_idx)?;
    let instances = rows
        .iter()
        .map(|(line, r)| build_instance(&schema, class_idx, r, *line, ""))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(schema, instances)
}

fn quote_arff(s: &str) -> String {
    if s.contains(|c: char| c == ',' || c == ' ' || c == '\'' || c == '{' || c == '}' || c == '%') {
        format!("'{}'", s.replace('\'', "\\'"))
    } else {
        s.to_string()
    }
}

/// Serializes to ARFF with the class attribute last. Numbers use the
/// shortest round-trip representation, so reloading is lossless.
pub fn to_arff(d: &Dataset) -> String {
    let mut out = String::new();
    let s = &d.schema;
    let _ = writeln!(out, "@relation {}\n", quote_arff(&s.relation));
    for f in &s.features {
        match &f.kind {
            FeatureKind::Numeric => {
                let _ = writeln!(out, "@attribute {} numeric", quote_arff(&f.name));
            }
            FeatureKind::Nominal(v) => {
                let vals: Vec<String> = v.iter().map(|x| quote_arff(x)).collect();
                let _ = writeln!(out, "@attribute {} {{{}}}", quote_arff(&f.name), vals.join(","));
            }
        }
    }
    let vals: Vec<String> = s.class_values.iter().map(|x| quote_arff(x)).collect();
    let _ = writeln!(out, "@attribute {} {{{}}}\n\n@data", quote_arff(&s.class_name), vals.join(","));
    for inst in &d.instances {
        let mut fields: Vec<String> = inst
            .values
            .iter()
            .zip(&s.features)
            .map(|(v, f)| match (v, &f.kind) {
                (Value::Missing, _) => "?".to_string(),
                (Value::Numeric(x), _) => format!("{x:?}"),
                (Value::Nominal(i), FeatureKind::Nominal(vals)) => quote_arff(&vals[*i]),
                (Value::Nominal(i), FeatureKind::Numeric) => i.to_string(),
            })
            .collect();
        fields.push(quote_arff(&s.class_values[inst.class_label]));
        let _ = writeln!(out, "{}", fields.join(","));
    }
    out
}
