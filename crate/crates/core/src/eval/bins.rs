use serde::{Deserialize, Serialize};

use crate::{Error, Result, MAX_TTLC};

/// Which output is analysed: TTLCL on samples with an upcoming left lane
/// change or TTLCR on samples with an upcoming right one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Left,
    Right,
}

impl Channel {
    pub fn index(self) -> usize {
        match self {
            Channel::Left => 0,
            Channel::Right => 1,
        }
    }
}

/// Absolute-error statistics of one bin of true TTLC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinStat {
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    pub count: usize,
    pub rmse: Option<f64>,
    pub median: Option<f64>,
    pub q1: Option<f64>,
    pub q3: Option<f64>,
    pub whisker_lo: Option<f64>,
    pub whisker_hi: Option<f64>,
    pub outliers: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TtlcBinStats {
    pub channel: Channel,
    pub bin_width: f64,
    pub bins: Vec<BinStat>,
}

impl TtlcBinStats {
    pub fn total_count(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// Mean of the per-bin RMSE over non-empty bins lying inside `[lo, hi]`.
    pub fn mean_rmse_between(&self, lo: f64, hi: f64) -> Option<f64> {
        let v: Vec<f64> = self
            .bins
            .iter()
            .filter(|b| b.lo >= lo - 1e-9 && b.hi <= hi + 1e-9)
            .filter_map(|b| b.rmse)
            .collect();
        (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for b in &self.bins {
            w.serialize(b)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Quantile with linear interpolation between order statistics.
fn quantile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

fn bin_stat(lo: f64, hi: f64, mut errs: Vec<f64>) -> BinStat {
    let center = (lo + hi) / 2.0;
    if errs.is_empty() {
        return BinStat {
            lo,
            hi,
            center,
            count: 0,
            rmse: None,
            median: None,
            q1: None,
            q3: None,
            whisker_lo: None,
            whisker_hi: None,
            outliers: 0,
        };
    }
    errs.sort_by(f64::total_cmp);
    let n = errs.len();
    let rmse = (errs.iter().map(|e| e * e).sum::<f64>() / n as f64).sqrt();
    let (q1, median, q3) = (quantile(&errs, 0.25), quantile(&errs, 0.5), quantile(&errs, 0.75));
    let iqr = q3 - q1;
    let (fence_lo, fence_hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside: Vec<f64> = errs.iter().copied().filter(|&e| e >= fence_lo && e <= fence_hi).collect();
    BinStat {
        lo,
        hi,
        center,
        count: n,
        rmse: Some(rmse),
        median: Some(median),
        q1: Some(q1),
        q3: Some(q3),
        whisker_lo: inside.first().copied(),
        whisker_hi: inside.last().copied(),
        outliers: n - inside.len(),
    }
}

/// Absolute errors of one output grouped by the true TTLC of that output.
/// Only samples whose true TTLC on the channel is below 7 s take part.
/// Bins of `bin_width` cover `[0, 7]`; the last one is closed.
pub fn ttlc_bin_stats(pred: &[[f64; 2]], truth: &[[f64; 2]], bin_width: f64, channel: Channel) -> Result<TtlcBinStats> {
    if pred.len() != truth.len() {
        return Err(Error::input(format!("{} predictions for {} labels", pred.len(), truth.len())));
    }
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::config(format!("invalid bin width {bin_width}")));
    }
    let n_bins = (MAX_TTLC / bin_width - 1e-9).ceil().max(1.0) as usize;
    let mut groups = vec![Vec::new(); n_bins];
    let c = channel.index();
    for (p, t) in pred.iter().zip(truth) {
        if t[c] >= MAX_TTLC {
            continue;
        }
        let b = ((t[c] / bin_width).floor() as usize).min(n_bins - 1);
        groups[b].push((p[c] - t[c]).abs());
    }
    let bins = groups
        .into_iter()
        .enumerate()
        .map(|(i, g)| {
            let lo = i as f64 * bin_width;
            let hi = ((i + 1) as f64 * bin_width).min(MAX_TTLC);
            bin_stat(lo, hi, g)
        })
        .collect();
    Ok(TtlcBinStats { channel, bin_width, bins })
}
