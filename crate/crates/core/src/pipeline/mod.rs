//! Grid search with vehicle-grouped cross validation and final training.

mod hyper;
mod search;

pub use hyper::{Grid, Hyperparams};
pub use search::{
    constant_baseline_mse, cross_validate, fit_model, grid_search, select_best, train_final, undersampled_mse,
    without_fold, FitConfig, FitOutcome, GridResult, GridRow,
};
