//! Statistics over the feature table: correlation, behavioral clustering
//! and regression.

mod correlate;
mod hcluster;
mod iqr;
mod matrix;
mod ols;
pub mod special;
mod ttest;

pub use correlate::{pearson, pearson_matrix, CorrelationMatrix, MIN_PAIRS};
pub use hcluster::{
    cut_tree, hcluster, linkage, stars, zscore, CellStats, ClusterConfig, ClusterError, ClusterResult,
    FeatureSummary, Linkage, Merge,
};
pub use iqr::{iqr_filter, tukey_fences};
pub use matrix::{FeatureMatrix, MatrixError};
pub use ols::{
    min_max, ols, prepare, reduce_model, reg_stars, regress, OlsError, RegressionConfig, RegressionData,
    RegressionReport, RegressionResult, Term, DENSITY_LOG_EPS, INTERCEPT,
};
pub use ttest::{student_ttest, welch_ttest, TTest};
