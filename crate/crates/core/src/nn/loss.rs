use crate::{Error, Result};

/// Mean over every batch element and both channels of the squared error.
/// Summation runs in batch order.
pub fn mse_loss(pred: &[[f64; 2]], target: &[[f64; 2]]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::input("mse_loss on an empty batch"));
    }
    if pred.len() != target.len() {
        return Err(Error::input(format!(
            "mse_loss length mismatch: {} predictions, {} targets",
            pred.len(),
            target.len()
        )));
    }
    let sum: f64 = pred
        .iter()
        .zip(target)
        .map(|(p, t)| (p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2))
        .sum();
    Ok(sum / (2 * pred.len()) as f64)
}
