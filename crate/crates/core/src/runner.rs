//! Pipeline orchestration: run one selection method on one dataset, score the
//! classifier group on the result, and render reports and comparison tables.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{default_group, fit_predict, ClassifierSpec, CvResult, ProbPrediction};
use crate::classifier::cv_evaluate;
use crate::dataset::{
    impute_missing, load_dataset, project, stratified_folds, ClassColumn, DataFormat, Dataset, FeatureSubset,
    ImputePolicy,
};
use crate::metrics::{aggregate, ClassifierScore, DatasetScore};
use crate::refine::{run_phase1, Phase1Report};
use crate::scoring::{rank_and_threshold, DiscretizationMethod, FeatureRanking, RankingConfig, ScoreKind, ThresholdPolicy};
use crate::search::{ga_search, GaParams, SearchSpace, SearchTrace, Seeding};
use crate::smote::{default_plan, RatePolicy, DEFAULT_K_NEIGHBORS};

pub const SCHEMA_VERSION: u32 = 1;
/// Environment variable read for the default run seed.
pub const SEED_ENV: &str = "HYBRIDFS_SEED";
pub const DEFAULT_SEED: u64 = 1;

pub const STAGE_LABELS: [&str; 4] = ["Initial State", "1st Phase", "2nd Phase(1)", "2nd Phase(2)"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    Config,
    Load,
    Impute,
    Phase1,
    Ranking,
    Search,
    Evaluation,
    Report,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Impute => "impute",
            Stage::Phase1 => "phase1",
            Stage::Ranking => "ranking",
            Stage::Search => "search",
            Stage::Evaluation => "evaluation",
            Stage::Report => "report",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {source}")]
pub struct RunError {
    pub stage: Stage,
    #[source]
    pub source: Box<dyn std::error::Error + Send + Sync>,
}

impl RunError {
    pub fn new(stage: Stage, source: impl Into<Box<dyn std::error::Error + Send + Sync>>) -> Self {
        RunError {
            stage,
            source: source.into(),
        }
    }
}

trait AtStage<T> {
    fn at(self, stage: Stage) -> Result<T>;
}

impl<T, E: std::error::Error + Send + Sync + 'static> AtStage<T> for std::result::Result<T, E> {
    fn at(self, stage: Stage) -> Result<T> {
        self.map_err(|e| RunError::new(stage, e))
    }
}

pub type Result<T> = std::result::Result<T, RunError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    Proposed,
    AllFeatures,
    InfoGain,
    GaWrapper,
    SuGaWrapper,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Proposed,
        Method::AllFeatures,
        Method::InfoGain,
        Method::GaWrapper,
        Method::SuGaWrapper,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::AllFeatures => "all-features",
            Method::InfoGain => "info-gain",
            Method::GaWrapper => "ga-wrapper",
            Method::SuGaWrapper => "su-ga-wrapper",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?}; expected one of proposed, all-features, info-gain, ga-wrapper, su-ga-wrapper"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoteConfig {
    pub policy: RatePolicy,
    /// Per-class rate overrides keyed by class label.
    pub overrides: BTreeMap<String, u32>,
    pub k_neighbors: usize,
}

impl Default for SmoteConfig {
    fn default() -> Self {
        SmoteConfig {
            policy: RatePolicy::default(),
            overrides: BTreeMap::new(),
            k_neighbors: DEFAULT_K_NEIGHBORS,
        }
    }
}

pub fn default_seed() -> u64 {
    std::env::var(SEED_ENV)
        .ok()
        .and_then(|s| s.trim().parse().ok())
        .unwrap_or(DEFAULT_SEED)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub dataset: PathBuf,
    /// Inferred from the file extension when absent.
    pub format: Option<DataFormat>,
    pub class_column: ClassColumn,
    pub method: Method,
    /// Drives SMOTE, fold assignment and the GA; `ga.seed` is overwritten by it.
    pub seed: u64,
    pub smote: SmoteConfig,
    pub impute: ImputePolicy,
    pub threshold: ThresholdPolicy,
    pub discretization: DiscretizationMethod,
    pub ga: GaParams,
    pub eval_folds: usize,
    /// Repeat selection inside every evaluation fold instead of once up front.
    pub honest: bool,
    pub classifiers: Vec<ClassifierSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let seed = default_seed();
        RunConfig {
            dataset: PathBuf::new(),
            format: None,
            class_column: ClassColumn::default(),
            method: Method::default(),
            seed,
            smote: SmoteConfig::default(),
            impute: ImputePolicy::default(),
            threshold: ThresholdPolicy::default(),
            discretization: DiscretizationMethod::default(),
            ga: GaParams { seed, ..GaParams::default() },
            eval_folds: 10,
            honest: false,
            classifiers: default_group(),
        }
    }
}

impl RunConfig {
    pub fn for_dataset(path: impl Into<PathBuf>, method: Method) -> Self {
        RunConfig {
            dataset: path.into(),
            method,
            ..Default::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).at(Stage::Config)
    }

    /// Copy with derived fields filled in, as echoed in the report.
    pub fn normalized(&self) -> RunConfig {
        let mut c = self.clone();
        c.ga.seed = c.seed;
        if c.format.is_none() {
            c.format = Some(DataFormat::from_path(&c.dataset));
        }
        c
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(RunError::new(Stage::Config, m));
        if self.eval_folds < 2 {
            return bad(format!("eval_folds {} < 2", self.eval_folds));
        }
        if self.classifiers.is_empty() {
            return bad("classifier group is empty".into());
        }
        if self.smote.k_neighbors == 0 {
            return bad("smote.k_neighbors must be positive".into());
        }
        for c in &self.classifiers {
            c.validate().at(Stage::Config)?;
        }
        self.threshold.validate().at(Stage::Config)?;
        self.ga.validate().at(Stage::Config)?;
        Ok(())
    }

    /// Short dataset name: the file stem.
    pub fn dataset_name(&self) -> String {
        self.dataset
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRow {
    pub stage: String,
    pub instances: usize,
    pub attributes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub index: usize,
    pub name: String,
    pub score: f64,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingReport {
    pub score_kind: ScoreKind,
    /// Best first.
    pub features: Vec<RankedFeature>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub dataset: String,
    pub method: Method,
    pub protocol: String,
    pub config: RunConfig,
    pub stages: Vec<StageRow>,
    pub phase1: Option<Phase1Report>,
    pub ranking: Option<RankingReport>,
    pub search: Option<SearchTrace>,
    pub selected: FeatureSubset,
    pub selected_names: Vec<String>,
    pub scores: Vec<ClassifierScore>,
    pub summary: DatasetScore,
    /// Subsets chosen inside each outer fold; honest mode only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fold_subsets: Option<Vec<FeatureSubset>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timings_ms: Option<BTreeMap<String, u64>>,
}

impl RunReport {
    pub fn without_timings(mut self) -> Self {
        self.timings_ms = None;
        self
    }

    pub fn stage(&self, label: &str) -> Option<&StageRow> {
        self.stages.iter().find(|s| s.stage == label)
    }
}

struct Selection {
    data: Dataset,
    phase1: Option<Phase1Report>,
    ranking: Option<(FeatureRanking, FeatureSubset)>,
    trace: Option<SearchTrace>,
    subset: FeatureSubset,
}

struct Timer(BTreeMap<String, u64>, Instant);

impl Timer {
    fn new() -> Self {
        Timer(BTreeMap::new(), Instant::now())
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        *self.0.entry(name.to_string()).or_default() += now.duration_since(self.1).as_millis() as u64;
        self.1 = now;
    }
}

fn class_overrides(cfg: &RunConfig, d: &Dataset) -> Result<BTreeMap<usize, u32>> {
    cfg.smote
        .overrides
        .iter()
        .map(|(label, &rate)| {
            d.schema()
                .class_values()
                .iter()
                .position(|v| v == label)
                .map(|c| (c, rate))
                .ok_or_else(|| RunError::new(Stage::Config, format!("unknown class label {label:?} in smote.overrides")))
        })
        .collect()
}

fn search(d: &Dataset, space: &SearchSpace, params: &GaParams) -> Result<(FeatureSubset, SearchTrace)> {
    ga_search(d, space, params).at(Stage::Search)
}

fn select(cfg: &RunConfig, d: &Dataset, timer: &mut Timer) -> Result<Selection> {
    let ga = GaParams {
        seed: cfg.seed,
        ..cfg.ga
    };
    let ranking_cfg = |score| RankingConfig {
        score,
        policy: cfg.threshold,
        discretization: cfg.discretization,
    };
    let n = d.n_features();
    let mut sel = Selection {
        data: d.clone(),
        phase1: None,
        ranking: None,
        trace: None,
        subset: FeatureSubset::full(n),
    };
    match cfg.method {
        Method::AllFeatures => {}
        Method::InfoGain => {
            let (r, kept) = rank_and_threshold(d, &ranking_cfg(ScoreKind::InfoGain)).at(Stage::Ranking)?;
            timer.lap("ranking");
            sel.subset = kept.clone();
            sel.ranking = Some((r, kept));
        }
        Method::GaWrapper => {
            let space = SearchSpace::unranked(n).at(Stage::Search)?;
            let params = GaParams {
                seeding: Seeding::Random,
                ..ga
            };
            let (s, t) = search(d, &space, &params)?;
            timer.lap("search");
            sel.subset = s;
            sel.trace = Some(t);
        }
        Method::SuGaWrapper | Method::Proposed => {
            if cfg.method == Method::Proposed {
                let overrides = class_overrides(cfg, d)?;
                let plan = default_plan(d, cfg.smote.policy, &overrides, cfg.smote.k_neighbors, cfg.seed);
                let (merged, report) = run_phase1(d, &plan).at(Stage::Phase1)?;
                timer.lap("phase1");
                sel.data = merged;
                sel.phase1 = Some(report);
            }
            let kind = if cfg.method == Method::Proposed {
                ScoreKind::InfoGain
            } else {
                ScoreKind::SymmetricalUncertainty
            };
            let (r, kept) = rank_and_threshold(&sel.data, &ranking_cfg(kind)).at(Stage::Ranking)?;
            timer.lap("ranking");
            let space = SearchSpace::new(&r, &kept).at(Stage::Search)?;
            let (s, t) = search(&sel.data, &space, &ga)?;
            timer.lap("search");
            sel.subset = s;
            sel.trace = Some(t);
            sel.ranking = Some((r, kept));
        }
    }
    Ok(sel)
}

fn stage_rows(initial: &Dataset, sel: &Selection) -> Vec<StageRow> {
    let n = initial.n_features();
    let after1 = sel.data.len();
    let filtered = sel.ranking.as_ref().map_or(n, |(_, kept)| kept.count());
    let sizes = [
        (initial.len(), n),
        (after1, n),
        (after1, filtered),
        (after1, sel.subset.count()),
    ];
    STAGE_LABELS
        .iter()
        .zip(sizes)
        .map(|(label, (instances, attributes))| StageRow {
            stage: label.to_string(),
            instances,
            attributes,
        })
        .collect()
}

fn ranking_report(d: &Dataset, ranking: &FeatureRanking, kept: &FeatureSubset) -> RankingReport {
    RankingReport {
        score_kind: ranking.score_kind,
        features: ranking
            .order
            .iter()
            .map(|&j| RankedFeature {
                index: j,
                name: d.schema().feature(j).name.clone(),
                score: ranking.scores[j],
                kept: kept.contains(j),
            })
            .collect(),
    }
}

fn protocol(cfg: &RunConfig) -> String {
    if cfg.honest {
        format!(
            "{}-fold stratified cross-validation; feature selection repeated inside each training fold",
            cfg.eval_folds
        )
    } else {
        format!(
            "{}-fold stratified cross-validation on the selected projection; selection run once on the full working dataset",
            cfg.eval_folds
        )
    }
}

fn evaluate(cfg: &RunConfig, d: &Dataset, subset: &FeatureSubset) -> Result<Vec<ClassifierScore>> {
    let projected = project(d, subset).at(Stage::Evaluation)?;
    let folds = stratified_folds(&projected, cfg.eval_folds, cfg.seed).at(Stage::Evaluation)?;
    cfg.classifiers
        .iter()
        .map(|spec| {
            cv_evaluate(spec, &projected, &folds)
                .and_then(|r| r.score(spec.name()))
                .at(Stage::Evaluation)
        })
        .collect()
}

/// Selection inside each outer fold; test rows always come from the working
/// dataset, never from synthetic data.
fn evaluate_honest(cfg: &RunConfig, d: &Dataset) -> Result<(Vec<ClassifierScore>, Vec<FeatureSubset>)> {
    let folds = stratified_folds(d, cfg.eval_folds, cfg.seed).at(Stage::Evaluation)?;
    let per_fold = (0..folds.k())
        .into_par_iter()
        .map(|f| {
            let (train_idx, test_idx) = folds.split(f);
            let train = d.subset_rows(&train_idx);
            let test = d.subset_rows(&test_idx);
            let sel = select(cfg, &train, &mut Timer::new())?;
            let fit_on = project(&sel.data, &sel.subset).at(Stage::Evaluation)?;
            let test = project(&test, &sel.subset).at(Stage::Evaluation)?;
            let preds = cfg
                .classifiers
                .iter()
                .map(|spec| fit_predict(spec, &fit_on, &test).at(Stage::Evaluation))
                .collect::<Result<Vec<_>>>()?;
            Ok((test_idx, preds, sel.subset))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut pooled: Vec<Vec<Option<ProbPrediction>>> = vec![vec![None; d.len()]; cfg.classifiers.len()];
    let mut subsets = Vec::with_capacity(per_fold.len());
    for (test_idx, preds, subset) in per_fold {
        for (c, p) in preds.into_iter().enumerate() {
            for (&i, pi) in test_idx.iter().zip(p) {
                pooled[c][i] = Some(pi);
            }
        }
        subsets.push(subset);
    }
    let scores = cfg
        .classifiers
        .iter()
        .zip(pooled)
        .map(|(spec, preds)| {
            let result = CvResult {
                predictions: preds.into_iter().map(|p| p.expect("each row is tested once")).collect(),
                actuals: d.labels(),
                n_classes: d.n_classes(),
            };
            result.score(spec.name()).at(Stage::Evaluation)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((scores, subsets))
}

/// Runs `cfg.method` end to end. Deterministic for a fixed config.
pub fn run_method(cfg: &RunConfig) -> Result<RunReport> {
    cfg.validate()?;
    let cfg = cfg.normalized();
    let mut timer = Timer::new();
    let format = cfg.format.unwrap_or(DataFormat::Arff);
    let loaded = load_dataset(&cfg.dataset, format, &cfg.class_column).at(Stage::Load)?;
    timer.lap("load");
    run_on_dataset(&cfg, &loaded, timer)
}

/// As [`run_method`] on an already-loaded dataset.
pub fn run_loaded(cfg: &RunConfig, loaded: &Dataset) -> Result<RunReport> {
    cfg.validate()?;
    run_on_dataset(&cfg.normalized(), loaded, Timer::new())
}

fn run_on_dataset(cfg: &RunConfig, loaded: &Dataset, mut timer: Timer) -> Result<RunReport> {
    let working = impute_missing(loaded, cfg.impute).at(Stage::Impute)?;
    timer.lap("impute");
    let sel = select(cfg, &working, &mut timer)?;

    let (scores, fold_subsets) = if cfg.honest {
        let (s, f) = evaluate_honest(cfg, &working)?;
        (s, Some(f))
    } else {
        (evaluate(cfg, &sel.data, &sel.subset)?, None)
    };
    timer.lap("evaluation");
    let summary = DatasetScore::from_scores(&scores).at(Stage::Evaluation)?;

    let dataset = if cfg.dataset.as_os_str().is_empty() {
        loaded.schema().relation().to_string()
    } else {
        cfg.dataset_name()
    };
    Ok(RunReport {
        schema_version: SCHEMA_VERSION,
        dataset,
        method: cfg.method,
        protocol: protocol(cfg),
        config: cfg.clone(),
        stages: stage_rows(&working, &sel),
        phase1: sel.phase1.clone(),
        ranking: sel.ranking.as_ref().map(|(r, k)| ranking_report(&working, r, k)),
        search: sel.trace.clone(),
        selected_names: sel
            .subset
            .indices()
            .into_iter()
            .map(|j| working.schema().feature(j).name.clone())
            .collect(),
        selected: sel.subset,
        scores,
        summary,
        fold_subsets,
        timings_ms: Some(timer.0),
    })
}

/// Runs every config concurrently; results keep input order.
pub fn run_grid(cfgs: &[RunConfig]) -> Vec<Result<RunReport>> {
    cfgs.par_iter().map(run_method).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grouping {
    PerDataset,
    Overall,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub dataset: String,
    pub method: String,
    pub ams: f64,
    pub arae: f64,
    pub atp_rate: f64,
}

impl ComparisonRow {
    pub fn from_report(r: &RunReport) -> Self {
        ComparisonRow {
            dataset: r.dataset.clone(),
            method: r.method.to_string(),
            ams: r.summary.ams,
            arae: r.summary.arae,
            atp_rate: r.summary.atp_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverallRow {
    pub method: String,
    pub oams: f64,
    pub oarae: f64,
    pub oatp_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub grouping: Grouping,
    pub rows: Vec<ComparisonRow>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub overall: Vec<OverallRow>,
}

impl ComparisonTable {
    /// Datasets in first-seen order.
    pub fn datasets(&self) -> Vec<&str> {
        first_seen(self.rows.iter().map(|r| r.dataset.as_str()))
    }

    /// Methods in first-seen order.
    pub fn methods(&self) -> Vec<&str> {
        first_seen(self.rows.iter().map(|r| r.method.as_str()))
    }

    pub fn cell(&self, dataset: &str, method: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.dataset == dataset && r.method == method)
    }
}

fn first_seen<'a>(it: impl Iterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = BTreeSet::new();
    it.filter(|s| seen.insert(*s)).collect()
}

/// Builds a comparison table from run reports plus externally supplied rows
/// (for example published baseline numbers).
pub fn compare(reports: &[RunReport], external: &[ComparisonRow], grouping: Grouping) -> Result<ComparisonTable> {
    let rows: Vec<ComparisonRow> = reports
        .iter()
        .map(ComparisonRow::from_report)
        .chain(external.iter().cloned())
        .collect();
    if rows.len() < 2 {
        return Err(RunError::new(Stage::Report, "comparison needs at least two rows"));
    }
    let mut table = ComparisonTable {
        grouping,
        rows,
        overall: Vec::new(),
    };
    if grouping == Grouping::Overall {
        let mut per_dataset: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
        for r in &table.rows {
            per_dataset.entry(&r.dataset).or_default().insert(&r.method);
        }
        let mut sets = per_dataset.iter();
        let (first_ds, first) = sets.next().expect("rows are non-empty");
        for (ds, methods) in sets {
            if methods != first {
                return Err(RunError::new(
                    Stage::Report,
                    format!("method sets differ between datasets {first_ds:?} and {ds:?}"),
                ));
            }
        }
        let mut overall = Vec::new();
        for method in table.methods() {
            let cells: Vec<&ComparisonRow> = table.rows.iter().filter(|r| r.method == method).collect();
            let mean = |f: fn(&ComparisonRow) -> f64| {
                aggregate(&cells.iter().map(|r| f(r)).collect::<Vec<_>>()).at(Stage::Report)
            };
            overall.push(OverallRow {
                method: method.to_string(),
                oams: mean(|r| r.ams)?,
                oarae: mean(|r| r.arae)?,
                oatp_rate: mean(|r| r.atp_rate)?,
            });
        }
        table.overall = overall;
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(format!("unknown report format {other:?}; expected json, csv or markdown")),
        }
    }
}

impl ReportFormat {
    pub fn from_path(path: &Path) -> ReportFormat {
        match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
            Some("csv") => ReportFormat::Csv,
            Some("md" | "markdown") => ReportFormat::Markdown,
            _ => ReportFormat::Json,
        }
    }
}

fn csv_string(write: impl FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    write(&mut w).at(Stage::Report)?;
    let bytes = w.into_inner().map_err(|e| RunError::new(Stage::Report, e.to_string()))?;
    String::from_utf8(bytes).at(Stage::Report)
}

fn pct(x: f64) -> String {
    format!("{x:.4}")
}

pub fn render_report(r: &RunReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(r).at(Stage::Report).map(|s| s + "\n"),
        ReportFormat::Csv => csv_string(|w| {
            w.write_record(["dataset", "method", "classifier", "ms", "total", "rae", "tp_rate"])?;
            for s in &r.scores {
                w.write_record([
                    r.dataset.clone(),
                    r.method.to_string(),
                    s.classifier.clone(),
                    s.ms.to_string(),
                    s.total.to_string(),
                    pct(s.rae),
                    pct(s.tp_rate),
                ])?;
            }
            w.flush()?;
            Ok(())
        }),
        ReportFormat::Markdown => Ok(report_markdown(r)),
    }
}

fn report_markdown(r: &RunReport) -> String {
    let mut out = format!("# {} on {}\n\nProtocol: {}\n\n", r.method, r.dataset, r.protocol);
    out += "| Steps |";
    for s in &r.stages {
        out += &format!(" {} |", s.stage);
    }
    out += "\n|---|";
    out += &"---|".repeat(r.stages.len());
    out += "\n| Samples |";
    for s in &r.stages {
        out += &format!(" {} |", s.instances);
    }
    out += "\n| Attributes |";
    for s in &r.stages {
        out += &format!(" {} |", s.attributes);
    }
    out += &format!("\n\nSelected ({}): {}\n\n", r.selected.count(), r.selected_names.join(", "));
    out += "| Classifier | MS | Total | RAE (%) | TP rate |\n|---|---|---|---|---|\n";
    for s in &r.scores {
        out += &format!(
            "| {} | {} | {} | {} | {} |\n",
            s.classifier,
            s.ms,
            s.total,
            pct(s.rae),
            pct(s.tp_rate)
        );
    }
    out += &format!(
        "| **Average** | {} | | {} | {} |\n",
        pct(r.summary.ams),
        pct(r.summary.arae),
        pct(r.summary.atp_rate)
    );
    out
}

pub fn render_table(t: &ComparisonTable, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => serde_json::to_string_pretty(t).at(Stage::Report).map(|s| s + "\n"),
        ReportFormat::Csv => csv_string(|w| {
            w.write_record(["dataset", "method", "ams", "arae", "atp_rate"])?;
            for r in &t.rows {
                w.write_record([r.dataset.clone(), r.method.clone(), pct(r.ams), pct(r.arae), pct(r.atp_rate)])?;
            }
            w.flush()?;
            Ok(())
        }),
        ReportFormat::Markdown => Ok(table_markdown(t)),
    }
}

fn table_markdown(t: &ComparisonTable) -> String {
    let methods = t.methods();
    let header = |first: &str| {
        let mut h = format!("| {first} |");
        for m in &methods {
            h += &format!(" {m} |");
        }
        h + "\n|---|" + &"---|".repeat(methods.len()) + "\n"
    };
    let metrics: [(&str, fn(&ComparisonRow) -> f64, fn(&OverallRow) -> f64); 3] = [
        ("AMS", |r| r.ams, |o| o.oams),
        ("ARAE (%)", |r| r.arae, |o| o.oarae),
        ("ATPRate", |r| r.atp_rate, |o| o.oatp_rate),
    ];
    let mut out = String::new();
    for (name, cell, overall) in metrics {
        out += &format!("## {name}\n\n");
        out += &header("Dataset");
        for ds in t.datasets() {
            out += &format!("| {ds} |");
            for m in &methods {
                let v = t.cell(ds, m).map(|r| pct(cell(r))).unwrap_or_default();
                out += &format!(" {v} |");
            }
            out += "\n";
        }
        if !t.overall.is_empty() {
            out += "| **Overall** |";
            for m in &methods {
                let v = t.overall.iter().find(|o| o.method == *m).map(|o| pct(overall(o))).unwrap_or_default();
                out += &format!(" {v} |");
            }
            out += "\n";
        }
        out += "\n";
    }
    out
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).at(Stage::Report)
}

pub fn emit_report(r: &RunReport, format: ReportFormat, path: &Path) -> Result<()> {
    write_file(path, &render_report(r, format)?)
}

pub fn emit_table(t: &ComparisonTable, format: ReportFormat, path: &Path) -> Result<()> {
    write_file(path, &render_table(t, format)?)
}

pub fn read_report(path: &Path) -> Result<RunReport> {
    let text = std::fs::read_to_string(path).at(Stage::Report)?;
    serde_json::from_str(&text).at(Stage::Report)
}

/// Reads `dataset,method,ams,arae,atp_rate` rows.
pub fn read_external_rows(path: &Path) -> Result<Vec<ComparisonRow>> {
    let mut rdr = csv::Reader::from_path(path).at(Stage::Report)?;
    rdr.deserialize().collect::<std::result::Result<Vec<ComparisonRow>, _>>().at(Stage::Report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Feature, FeatureSchema, Instance, Value};

    fn toy() -> Dataset {
        let schema = FeatureSchema::new(
            "toy",
            vec![Feature::numeric("signal"), Feature::numeric("noise")],
            "class",
            ["a", "b"],
        )
        .unwrap();
        let rows = (0..40)
            .map(|i| {
                let c = i % 2;
                let x = c as f64 * 4.0 + (i % 5) as f64 * 0.3;
                let z = ((i * 7) % 11) as f64;
                Instance::new(vec![Value::Numeric(x), Value::Numeric(z)], c)
            })
            .collect();
        Dataset::new(schema, rows).unwrap()
    }

    fn row(ds: &str, m: &str, ams: f64) -> ComparisonRow {
        ComparisonRow {
            dataset: ds.into(),
            method: m.into(),
            ams,
            arae: 10.0,
            atp_rate: 0.9,
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
        }
        assert!("ga-classifier".parse::<Method>().is_err());
    }

    #[test]
    fn all_features_is_identity() {
        let cfg = RunConfig {
            method: Method::AllFeatures,
            ..Default::default()
        };
        let r = run_loaded(&cfg, &toy()).unwrap();
        assert_eq!(r.selected.count(), 2);
        assert!(r.phase1.is_none() && r.search.is_none());
        assert!(r.stages.iter().all(|s| s.instances == 40 && s.attributes == 2));
    }

    #[test]
    fn stage_table_header() {
        let cfg = RunConfig {
            method: Method::InfoGain,
            ..Default::default()
        };
        let r = run_loaded(&cfg, &toy()).unwrap();
        let md = render_report(&r, ReportFormat::Markdown).unwrap();
        assert!(md.contains("| Steps | Initial State | 1st Phase | 2nd Phase(1) | 2nd Phase(2) |"));
    }

    #[test]
    fn overall_mean_and_grid_shape() {
        let rows = vec![row("d1", "m", 4.0), row("d2", "m", 2.5), row("d3", "m", 3.0)];
        let t = compare(&[], &rows, Grouping::Overall).unwrap();
        assert!((t.overall[0].oams - 3.1667).abs() < 1e-4);
        let csv = render_table(&t, ReportFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 1 + 3);
    }

    #[test]
    fn overall_rejects_mismatched_methods() {
        let rows = vec![row("d1", "a", 1.0), row("d1", "b", 1.0), row("d2", "a", 1.0)];
        assert!(compare(&[], &rows, Grouping::Overall).is_err());
        assert!(compare(&[], &rows, Grouping::PerDataset).is_ok());
        assert!(compare(&[], &rows[..1], Grouping::PerDataset).is_err());
    }

    #[test]
    fn config_json_defaults_and_validation() {
        let cfg = RunConfig::from_json(r#"{"dataset":"x.csv","method":"info-gain","eval_folds":5}"#).unwrap();
        assert_eq!(cfg.method, Method::InfoGain);
        assert_eq!(cfg.eval_folds, 5);
        assert_eq!(cfg.normalized().format, Some(DataFormat::Csv));
        let bad = RunConfig {
            eval_folds: 1,
            ..Default::default()
        };
        assert_eq!(bad.validate().unwrap_err().stage, Stage::Config);
    }
}
