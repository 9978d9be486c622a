//! Evaluation reports: RMSE tables, error statistics over the remaining
//! TTLC, classification derived from the regression output and its metrics.

mod bins;
mod classify;
mod report;
mod rmse;

pub use bins::{ttlc_bin_stats, BinStat, Channel, TtlcBinStats};
pub use classify::{class_report, class_report_by_counting, classify_from_ttlc, classify_within, ClassMetrics, ClassReport, PREDICTION_HORIZON};
pub use report::{evaluate, EvalMode, EvalReport};
pub use rmse::{rmse, rmse_table, RmseTable, RMSE_COLUMNS, RMSE_ROWS};
