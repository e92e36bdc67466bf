//! Sample-domain refinement: oversample, drop rows Naive Bayes misclassifies,
//! then merge the surviving synthetic rows back onto the original data.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifier::{fit_naive_bayes, nb_posterior, ClassifierError};
use crate::dataset::{Dataset, Provenance};
use crate::smote::{smote, SmoteError, SmotePlan};

#[derive(Debug, Error)]
pub enum RefineError {
    #[error("filter removed every instance")]
    AllRemoved,
    #[error("original and refined schemas differ")]
    SchemaMismatch,
    #[error("cannot filter an empty dataset")]
    Empty,
    #[error(transparent)]
    Smote(#[from] SmoteError),
    #[error(transparent)]
    Classifier(#[from] ClassifierError),
}

pub type Result<T> = std::result::Result<T, RefineError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phase1Report {
    pub before_smote: usize,
    pub after_smote: usize,
    pub removed_by_filter: usize,
    pub removed_synthetic: usize,
    pub after_merge: usize,
    /// Indices into the oversampled dataset.
    pub removed_indices: Vec<usize>,
}

/// Fits NB on all of `d` and drops every row it mislabels (resubstitution).
pub fn filter_misclassified(d: &Dataset) -> Result<(Dataset, Vec<usize>)> {
    if d.is_empty() {
        return Err(RefineError::Empty);
    }
    let model = fit_naive_bayes(d)?;
    let mut keep = Vec::with_capacity(d.len());
    let mut removed = Vec::new();
    for (i, x) in d.instances().iter().enumerate() {
        if nb_posterior(&model, x)?.predicted == x.class_label {
            keep.push(i);
        } else {
            removed.push(i);
        }
    }
    if keep.is_empty() {
        return Err(RefineError::AllRemoved);
    }
    Ok((d.subset_rows(&keep), removed))
}

/// All original rows in order, then every synthetic row of `refined`.
/// Original rows inside `refined` are ignored, so duplicates in the source
/// data survive exactly as often as they occur there.
pub fn merge_with_original(original: &Dataset, refined: &Dataset) -> Result<Dataset> {
    if original.schema().features() != refined.schema().features()
        || original.schema().class_values() != refined.schema().class_values()
    {
        return Err(RefineError::SchemaMismatch);
    }
    let mut rows = original.instances().to_vec();
    rows.extend(
        refined
            .instances()
            .iter()
            .filter(|x| x.provenance == Provenance::Synthetic)
            .cloned(),
    );
    Ok(original.with_instances(rows).expect("schemas were checked equal"))
}

pub fn run_phase1(original: &Dataset, plan: &SmotePlan) -> Result<(Dataset, Phase1Report)> {
    let grown = smote(original, plan)?;
    let (filtered, removed) = filter_misclassified(&grown)?;
    let merged = merge_with_original(original, &filtered)?;
    let removed_synthetic = removed
        .iter()
        .filter(|&&i| grown.instances()[i].provenance == Provenance::Synthetic)
        .count();
    let report = Phase1Report {
        before_smote: original.len(),
        after_smote: grown.len(),
        removed_by_filter: removed.len(),
        removed_synthetic,
        after_merge: merged.len(),
        removed_indices: removed,
    };
    Ok((merged, report))
}
