use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use hybridfs::dataset::{ClassColumn, DataFormat, ImputePolicy};
use hybridfs::runner::{
    compare, emit_report, emit_table, read_external_rows, read_report, render_report, render_table, run_grid,
    run_method, Grouping, Method, ReportFormat, RunConfig, RunError, RunReport, Stage, SEED_ENV,
};
use hybridfs::scoring::{DiscretizationMethod, ThresholdPolicy};
use hybridfs::search::Seeding;
use hybridfs::smote::RatePolicy;

#[derive(Parser)]
#[command(name = "hybridfs", version, about = "Two-phase hybrid feature selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method on one dataset.
    Run(RunArgs),
    /// Build a comparison table from saved reports or a dataset x method grid.
    Compare(CompareArgs),
    /// Pretty-print a saved JSON report.
    Inspect(InspectArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
    Markdown,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Markdown => ReportFormat::Markdown,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum DataFormatArg {
    Arff,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum ImputeArg {
    MeanMode,
    DropRow,
}

#[derive(Clone, Copy, ValueEnum)]
enum SeedingArg {
    Ranked,
    Random,
}

#[derive(Clone, Copy, ValueEnum)]
enum GroupingArg {
    PerDataset,
    Overall,
}

/// Pipeline settings shared by `run` and grid `compare`. Unset flags keep the
/// value from `--config` or the built-in default.
#[derive(Args, Clone)]
struct PipelineArgs {
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<DataFormatArg>,
    /// Class attribute name (default: last column).
    #[arg(long = "class")]
    class_column: Option<String>,
    #[arg(long, env = SEED_ENV)]
    seed: Option<u64>,
    /// double-majority | balance:CAP | uniform:RATE
    #[arg(long, value_parser = parse_rate_policy)]
    smote_policy: Option<RatePolicy>,
    /// Per-class SMOTE rate override, LABEL=RATE (repeatable).
    #[arg(long = "smote-rate", value_parser = parse_override)]
    smote_rates: Vec<(String, u32)>,
    #[arg(long)]
    k_neighbors: Option<usize>,
    #[arg(long, value_enum)]
    impute: Option<ImputeArg>,
    /// positive | mean | top:FRACTION | abs:VALUE | rel:FRACTION_OF_MAX
    #[arg(long)]
    threshold: Option<ThresholdPolicy>,
    /// mdl | equal-width:BINS
    #[arg(long, value_parser = parse_discretization)]
    discretization: Option<DiscretizationMethod>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    crossover: Option<f64>,
    #[arg(long)]
    mutation: Option<f64>,
    #[arg(long)]
    elitism: Option<usize>,
    #[arg(long)]
    fitness_folds: Option<usize>,
    #[arg(long, value_enum)]
    seeding: Option<SeedingArg>,
    #[arg(long)]
    eval_folds: Option<usize>,
    /// Nest selection inside each evaluation fold.
    #[arg(long)]
    honest: bool,
}

#[derive(Args)]
struct RunArgs {
    /// Dataset file (.arff or .csv).
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    method: Option<Method>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Output file; stdout when absent.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Output format (default: from the output extension, else json).
    #[arg(long, value_enum)]
    report_format: Option<FormatArg>,
    /// Leave wall-clock timings out of the report.
    #[arg(long)]
    omit_timings: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Saved JSON reports.
    reports: Vec<PathBuf>,
    /// Datasets to run (grid mode).
    #[arg(long = "dataset")]
    datasets: Vec<PathBuf>,
    /// Methods to run per dataset (grid mode; default: all).
    #[arg(long = "method")]
    methods: Vec<Method>,
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Extra rows as CSV: dataset,method,ams,arae,atp_rate.
    #[arg(long)]
    external: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "overall")]
    grouping: GroupingArg,
    /// Directory to save each grid report as JSON.
    #[arg(long)]
    save_reports: Option<PathBuf>,
    #[arg(long, short)]
    output: Option<PathBuf>,
    #[arg(long, value_enum)]
    report_format: Option<FormatArg>,
}

#[derive(Args)]
struct InspectArgs {
    report: PathBuf,
    #[arg(long, value_enum, default_value = "markdown")]
    report_format: FormatArg,
}

fn parse_rate_policy(s: &str) -> Result<RatePolicy, String> {
    let (kind, arg) = s.split_once(':').unwrap_or((s, ""));
    let num = || arg.parse::<u32>().map_err(|e| format!("{s:?}: {e}"));
    match kind {
        "double-majority" => Ok(RatePolicy::DoubleMajority),
        "balance" => Ok(RatePolicy::Balance { cap: num()? }),
        "uniform" => Ok(RatePolicy::Uniform { rate: num()? }),
        _ => Err(format!("unknown SMOTE policy {s:?}")),
    }
}

fn parse_override(s: &str) -> Result<(String, u32), String> {
    let (label, rate) = s.split_once('=').ok_or_else(|| format!("expected LABEL=RATE, got {s:?}"))?;
    Ok((label.to_string(), rate.parse().map_err(|e| format!("{s:?}: {e}"))?))
}

fn parse_discretization(s: &str) -> Result<DiscretizationMethod, String> {
    match s.split_once(':') {
        None if s == "mdl" => Ok(DiscretizationMethod::Mdl),
        Some(("equal-width", bins)) => Ok(DiscretizationMethod::EqualWidth {
            bins: bins.parse().map_err(|e| format!("{s:?}: {e}"))?,
        }),
        _ => Err(format!("unknown discretization {s:?}")),
    }
}

impl PipelineArgs {
    fn base_config(&self) -> Result<RunConfig, RunError> {
        match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| RunError::new(Stage::Config, e))?;
                RunConfig::from_json(&text)
            }
            None => Ok(RunConfig::default()),
        }
    }

    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(f) = self.format {
            cfg.format = Some(match f {
                DataFormatArg::Arff => DataFormat::Arff,
                DataFormatArg::Csv => DataFormat::Csv,
            });
        }
        if let Some(c) = &self.class_column {
            cfg.class_column = ClassColumn::Named(c.clone());
        }
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(p) = self.smote_policy {
            cfg.smote.policy = p;
        }
        cfg.smote.overrides.extend(self.smote_rates.iter().cloned());
        if let Some(k) = self.k_neighbors {
            cfg.smote.k_neighbors = k;
        }
        if let Some(i) = self.impute {
            cfg.impute = match i {
                ImputeArg::MeanMode => ImputePolicy::MeanMode,
                ImputeArg::DropRow => ImputePolicy::DropRow,
            };
        }
        if let Some(t) = self.threshold {
            cfg.threshold = t;
        }
        if let Some(d) = self.discretization {
            cfg.discretization = d;
        }
        let ga = &mut cfg.ga;
        if let Some(v) = self.population {
            ga.population_size = v;
        }
        if let Some(v) = self.generations {
            ga.max_generations = v;
        }
        if let Some(v) = self.crossover {
            ga.crossover_prob = v;
        }
        if let Some(v) = self.mutation {
            ga.mutation_prob = v;
        }
        if let Some(v) = self.elitism {
            ga.elitism = v;
        }
        if let Some(v) = self.fitness_folds {
            ga.fitness_folds = v;
        }
        if let Some(s) = self.seeding {
            ga.seeding = match s {
                SeedingArg::Ranked => Seeding::Ranked,
                SeedingArg::Random => Seeding::Random,
            };
        }
        if let Some(v) = self.eval_folds {
            cfg.eval_folds = v;
        }
        if self.honest {
            cfg.honest = true;
        }
    }
}

fn output_format(explicit: Option<FormatArg>, path: Option<&Path>) -> ReportFormat {
    match (explicit, path) {
        (Some(f), _) => f.into(),
        (None, Some(p)) => ReportFormat::from_path(p),
        (None, None) => ReportFormat::Json,
    }
}

fn cmd_run(args: RunArgs) -> Result<(), RunError> {
    let mut cfg = args.pipeline.base_config()?;
    args.pipeline.apply(&mut cfg);
    if let Some(d) = args.dataset {
        cfg.dataset = d;
    }
    if let Some(m) = args.method {
        cfg.method = m;
    }
    if cfg.dataset.as_os_str().is_empty() {
        return Err(RunError::new(Stage::Config, "no dataset given (--dataset or config file)"));
    }
    let mut report = run_method(&cfg)?;
    if args.omit_timings {
        report = report.without_timings();
    }
    let format = output_format(args.report_format, args.output.as_deref());
    match args.output {
        Some(path) => emit_report(&report, format, &path),
        None => {
            print!("{}", render_report(&report, format)?);
            Ok(())
        }
    }
}

fn cmd_compare(args: CompareArgs) -> Result<(), RunError> {
    let mut reports: Vec<RunReport> = args.reports.iter().map(|p| read_report(p)).collect::<Result<_, _>>()?;
    if !args.datasets.is_empty() {
        let mut base = args.pipeline.base_config()?;
        args.pipeline.apply(&mut base);
        let methods = if args.methods.is_empty() { Method::ALL.to_vec() } else { args.methods.clone() };
        let cfgs: Vec<RunConfig> = args
            .datasets
            .iter()
            .flat_map(|d| {
                let base = &base;
                methods.iter().map(move |&m| RunConfig {
                    dataset: d.clone(),
                    method: m,
                    ..base.clone()
                })
            })
            .collect();
        for result in run_grid(&cfgs) {
            let report = result?.without_timings();
            if let Some(dir) = &args.save_reports {
                std::fs::create_dir_all(dir).map_err(|e| RunError::new(Stage::Report, e))?;
                let path = dir.join(format!("{}-{}.json", report.dataset, report.method));
                emit_report(&report, ReportFormat::Json, &path)?;
            }
            reports.push(report);
        }
    }
    let external = match &args.external {
        Some(p) => read_external_rows(p)?,
        None => Vec::new(),
    };
    let grouping = match args.grouping {
        GroupingArg::PerDataset => Grouping::PerDataset,
        GroupingArg::Overall => Grouping::Overall,
    };
    let table = compare(&reports, &external, grouping)?;
    let format = output_format(args.report_format, args.output.as_deref());
    match args.output {
        Some(path) => emit_table(&table, format, &path),
        None => {
            print!("{}", render_table(&table, format)?);
            Ok(())
        }
    }
}

fn cmd_inspect(args: InspectArgs) -> Result<(), RunError> {
    let report = read_report(&args.report)?;
    print!("{}", render_report(&report, args.report_format.into())?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Inspect(a) => cmd_inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e).and_then(|s| s.source());
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(match e.stage {
                Stage::Config => 2,
                Stage::Load => 3,
                _ => 1,
            })
        }
    }
}
