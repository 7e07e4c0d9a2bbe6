//! Train/test protocol, metrics, the evaluation matrix and forest grid search.

mod grid;
mod matrix;
mod metrics;
mod split;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reduction::SelectionScores;

pub use grid::{best_row, grid_search_rf, write_rows, Checkpoint, GridOptions, GridPoint, GridResult, GridRow, GridSpec};
pub use matrix::{evaluate_cell, run_matrix, Cell, EvalReport, Metrics, Target, REPORT_SCHEMA_VERSION};
pub use metrics::{r2, rmse};
pub use split::{train_test_split, SplitIndices};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommonFeatures {
    pub common: Vec<String>,
    pub arousal_only: Vec<String>,
    pub valence_only: Vec<String>,
}

/// Overlap of two selections, as sorted feature names.
pub fn common_features_report(
    arousal: &SelectionScores,
    valence: &SelectionScores,
    names: &[String],
) -> Result<CommonFeatures> {
    let p = names.len();
    for s in [arousal, valence] {
        if s.f_stats.len() != p || s.selected_indices.iter().any(|&i| i >= p) {
            return Err(Error::SchemaMismatch(format!(
                "selection over {} features does not match a {p}-feature schema",
                s.f_stats.len()
            )));
        }
    }
    let pick = |s: &SelectionScores, other: &SelectionScores, both: bool| {
        let mut v: Vec<String> = s
            .selected_indices
            .iter()
            .filter(|i| other.selected_indices.contains(i) == both)
            .map(|&i| names[i].clone())
            .collect();
        v.sort();
        v
    };
    Ok(CommonFeatures {
        common: pick(arousal, valence, true),
        arousal_only: pick(arousal, valence, false),
        valence_only: pick(valence, arousal, false),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sel(idx: &[usize]) -> SelectionScores {
        SelectionScores { f_stats: vec![1.0; 4], p_values: vec![0.5; 4], selected_indices: idx.to_vec() }
    }

    #[test]
    fn overlap() {
        let names: Vec<String> = ["d", "c", "b", "a"].iter().map(|s| s.to_string()).collect();
        let same = common_features_report(&sel(&[0, 3]), &sel(&[0, 3]), &names).unwrap();
        assert_eq!(same.common, vec!["a", "d"]);
        let disjoint = common_features_report(&sel(&[0, 1]), &sel(&[2, 3]), &names).unwrap();
        assert!(disjoint.common.is_empty());
        assert_eq!(disjoint.arousal_only, vec!["c", "d"]);
        assert_eq!(disjoint.valence_only, vec!["a", "b"]);
        assert!(common_features_report(&sel(&[0]), &sel(&[1]), &names[..3]).is_err());
    }
}
