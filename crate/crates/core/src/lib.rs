//! Hybrid feature selection for tabular classification data.
//!
//! The pipeline has two phases. The first grows the sample domain with SMOTE,
//! drops every row a Naive Bayes model misclassifies, and merges the surviving
//! synthetic rows back onto the original data. The second ranks features by
//! information gain, keeps those above a threshold, and runs a genetic wrapper
//! search over the survivors with Naive Bayes accuracy as fitness.
//!
//! ```no_run
//! use hybridfs::runner::{run_method, Method, RunConfig};
//!
//! let cfg = RunConfig::for_dataset("data/wine.arff", Method::Proposed);
//! let report = run_method(&cfg).unwrap();
//! println!("{} features kept", report.selected.count());
//! ```

pub mod classifier;
pub mod dataset;
pub mod metrics;
pub mod refine;
pub mod runner;
pub mod scoring;
pub mod search;
pub mod smote;

pub use classifier::{ClassifierError, ClassifierSpec};
pub use dataset::{Dataset, DatasetError, FeatureSubset};
pub use metrics::MetricsError;
pub use refine::RefineError;
pub use runner::{RunConfig, RunError, RunReport};
pub use scoring::ScoringError;
pub use search::SearchError;
pub use smote::SmoteError;

/// Any error raised by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
    #[error(transparent)]
    Smote(#[from] SmoteError),
    #[error(transparent)]
    Refine(#[from] RefineError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error(transparent)]
    Search(#[from] SearchError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Run(#[from] RunError),
}
