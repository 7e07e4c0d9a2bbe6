//! Standardization, PCA, univariate selection and correlation analysis.

mod pca;
mod scaler;
mod select;
pub mod stats;

pub use pca::{pca_fit, pca_transform, PcaModel};
pub use scaler::{fit_scaler, Scaler};
pub use select::{f_regression_scores, select_k_best, SelectionScores, F_SENTINEL};
pub use stats::{correlation_matrix, pearson, write_scatter_csv, CorrelationReport};
