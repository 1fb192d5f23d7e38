//! The ablation experiment: condition masking, hold-pairs-out
//! cross-validation, metrics, aggregation, significance and the report.

mod condition;
pub mod cv;
mod metrics;
pub mod report;
pub mod stats;

pub use condition::AblationCondition;
pub use cv::{prepare_cv, run_cv, CvConfig, CvData, CvResult, FoldResult};
pub use metrics::{compute_metrics, Metrics};
pub use report::{build_report, render_csv, render_markdown, AblationReport};
pub use stats::{aggregate, mean_std, significance, Aggregate, MeanStd, Significance};
