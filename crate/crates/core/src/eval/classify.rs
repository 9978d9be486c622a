use serde::{Deserialize, Serialize};

use crate::dataset::Maneuver;
use crate::{Error, Result};

/// Horizon in seconds within which a predicted TTLC counts as a lane change.
pub const PREDICTION_HORIZON: f64 = 5.0;

/// Maneuver implied by predicted TTLCs: left wins ties.
pub fn classify_from_ttlc(ttlcl: f64, ttlcr: f64) -> Maneuver {
    classify_within(ttlcl, ttlcr, PREDICTION_HORIZON)
}

/// [`classify_from_ttlc`] with a custom horizon.
pub fn classify_within(ttlcl: f64, ttlcr: f64, horizon: f64) -> Maneuver {
    if ttlcl <= horizon && ttlcl <= ttlcr {
        Maneuver::Lcl
    } else if ttlcr <= horizon && ttlcr < ttlcl {
        Maneuver::Lcr
    } else {
        Maneuver::Flw
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub support: usize,
}

/// One-vs-rest metrics per class in LCL, FLW, LCR order. Metrics with a zero
/// denominator are `None`; means are unweighted over the classes where the
/// metric is defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    /// Rows are true classes, columns predicted ones.
    pub confusion: [[usize; 3]; 3],
    pub classes: [ClassMetrics; 3],
    pub mean_precision: Option<f64>,
    pub mean_recall: Option<f64>,
    pub mean_f1: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn f1(p: Option<f64>, r: Option<f64>) -> Option<f64> {
    match (p, r) {
        (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
        (Some(_), Some(_)) => Some(0.0),
        _ => None,
    }
}

fn mean(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

impl ClassReport {
    pub fn from_confusion(confusion: [[usize; 3]; 3]) -> Self {
        let classes = std::array::from_fn(|c| {
            let tp = confusion[c][c];
            let predicted: usize = (0..3).map(|t| confusion[t][c]).sum();
            let support: usize = confusion[c].iter().sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            ClassMetrics { precision, recall, f1: f1(precision, recall), support }
        });
        Self::with_means(confusion, classes)
    }

    fn with_means(confusion: [[usize; 3]; 3], classes: [ClassMetrics; 3]) -> Self {
        Self {
            confusion,
            classes,
            mean_precision: mean(classes.iter().map(|m| m.precision)),
            mean_recall: mean(classes.iter().map(|m| m.recall)),
            mean_f1: mean(classes.iter().map(|m| m.f1)),
        }
    }

    /// Table-shaped CSV: one row per class plus the mean row.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let fmt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["class", "precision", "recall", "f1", "support"])?;
        for (m, c) in Maneuver::ALL.iter().zip(&self.classes) {
            w.write_record([m.name().to_string(), fmt(c.precision), fmt(c.recall), fmt(c.f1), c.support.to_string()])?;
        }
        let total: usize = self.classes.iter().map(|c| c.support).sum();
        w.write_record([
            "mean".to_string(),
            fmt(self.mean_precision),
            fmt(self.mean_recall),
            fmt(self.mean_f1),
            total.to_string(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

fn check_lengths(predicted: &[Maneuver], truth: &[Maneuver]) -> Result<()> {
    if predicted.len() != truth.len() {
        return Err(Error::input(format!("{} predictions for {} labels", predicted.len(), truth.len())));
    }
    Ok(())
}

/// Metrics via the confusion matrix.
pub fn class_report(predicted: &[Maneuver], truth: &[Maneuver]) -> Result<ClassReport> {
    check_lengths(predicted, truth)?;
    let mut confusion = [[0usize; 3]; 3];
    for (p, t) in predicted.iter().zip(truth) {
        confusion[t.index()][p.index()] += 1;
    }
    Ok(ClassReport::from_confusion(confusion))
}

/// Same metrics by counting true/false positives per class directly.
pub fn class_report_by_counting(predicted: &[Maneuver], truth: &[Maneuver]) -> Result<ClassReport> {
    check_lengths(predicted, truth)?;
    let pairs: Vec<(Maneuver, Maneuver)> = predicted.iter().copied().zip(truth.iter().copied()).collect();
    let classes = Maneuver::ALL.map(|m| {
        let tp = pairs.iter().filter(|&&(p, t)| p == m && t == m).count();
        let fp = pairs.iter().filter(|&&(p, t)| p == m && t != m).count();
        let fn_ = pairs.iter().filter(|&&(p, t)| p != m && t == m).count();
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        ClassMetrics { precision, recall, f1: f1(precision, recall), support: tp + fn_ }
    });
    let mut confusion = [[0usize; 3]; 3];
    for t in Maneuver::ALL {
        for p in Maneuver::ALL {
            confusion[t.index()][p.index()] = pairs.iter().filter(|&&pair| pair == (p, t)).count();
        }
    }
    Ok(ClassReport::with_means(confusion, classes))
}
