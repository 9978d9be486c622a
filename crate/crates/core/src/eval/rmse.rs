use serde::{Deserialize, Serialize};

use crate::dataset::maneuver_flags;
use crate::{Error, Result, MAX_TTLC};

/// Root mean square of the residuals.
pub fn rmse(residuals: &[f64]) -> Result<f64> {
    if residuals.is_empty() {
        return Err(Error::input("rmse of an empty residual set"));
    }
    Ok((residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt())
}

pub const RMSE_ROWS: [&str; 3] = ["overall", "TTLCL", "TTLCR"];
pub const RMSE_COLUMNS: [&str; 4] = ["LCL", "FLW", "LCR", "All"];

/// RMSE per output (rows: both pooled, TTLCL, TTLCR) and per maneuver
/// column. Column membership uses the 7 s horizon; a sample with both
/// labels below 7 s counts in LCL and in LCR. Empty columns hold `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RmseTable {
    pub values: [[Option<f64>; 4]; 3],
    pub counts: [usize; 4],
}

impl RmseTable {
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        self.values[row][col]
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["output".to_string()];
        header.extend(RMSE_COLUMNS.iter().map(|c| c.to_string()));
        w.write_record(&header)?;
        for (r, name) in RMSE_ROWS.iter().enumerate() {
            let mut rec = vec![name.to_string()];
            rec.extend(self.values[r].iter().map(|v| v.map_or(String::new(), |x| x.to_string())));
            w.write_record(&rec)?;
        }
        let mut rec = vec!["count".to_string()];
        rec.extend(self.counts.iter().map(|c| c.to_string()));
        w.write_record(&rec)?;
        w.flush()?;
        Ok(())
    }
}

/// `pred` and `truth` hold `(TTLCL, TTLCR)` pairs.
pub fn rmse_table(pred: &[[f64; 2]], truth: &[[f64; 2]]) -> Result<RmseTable> {
    if pred.len() != truth.len() {
        return Err(Error::input(format!("{} predictions for {} labels", pred.len(), truth.len())));
    }
    // Per column: squared-error sums of the left and right channel.
    let mut sums = [[0.0f64; 2]; 4];
    let mut counts = [0usize; 4];
    for (p, t) in pred.iter().zip(truth) {
        let (l, r) = maneuver_flags(t[0], t[1], MAX_TTLC);
        let sq = [(p[0] - t[0]).powi(2), (p[1] - t[1]).powi(2)];
        let mut cols = vec![3];
        if l {
            cols.push(0);
        }
        if r {
            cols.push(2);
        }
        if !l && !r {
            cols.push(1);
        }
        for c in cols {
            counts[c] += 1;
            sums[c][0] += sq[0];
            sums[c][1] += sq[1];
        }
    }
    let mut values = [[None; 4]; 3];
    for c in 0..4 {
        if counts[c] == 0 {
            continue;
        }
        let n = counts[c] as f64;
        values[0][c] = Some(((sums[c][0] + sums[c][1]) / (2.0 * n)).sqrt());
        values[1][c] = Some((sums[c][0] / n).sqrt());
        values[2][c] = Some((sums[c][1] / n).sqrt());
    }
    Ok(RmseTable { values, counts })
}
