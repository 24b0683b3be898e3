//! Cross-validation plans, model metrics and the statistical tests used to
//! compare trigger policies.

pub mod cv;
pub mod hypothesis;
pub mod lmm;
pub mod metrics;
pub mod transform;

pub use cv::{make_cv_plan, CvMode, CvPlan, Fold};
pub use hypothesis::{ks_two_sample, paired_t_test, repeated_measures_f, KsTest, RmAnova, TTest};
pub use lmm::{fit_random_intercept_lmm, gls_at, Gls, LmmFit};
pub use metrics::{
    classification_metrics, regression_metrics, ClassificationMetrics, MeanSd, RegressionMetrics,
};
pub use transform::{abs_z_transform, j_vs_pa_curve, CurveBin};
