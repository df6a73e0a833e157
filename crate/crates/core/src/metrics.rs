//! Segmentation and clustering scores.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Foreground is label `+1`; every other value counts as background.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn from_labels(seg: &[i8], gt: &[i8]) -> Result<Self> {
        Error::check_len("confusion counts", gt.len(), seg.len())?;
        let mut c = ConfusionCounts::default();
        for (&s, &g) in seg.iter().zip(gt) {
            match (s == 1, g == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    /// `2 TP / (FP + 2 TP + FN)`, 1 when neither mask has a foreground pixel.
    pub fn dice(&self) -> f64 {
        let den = self.fp + 2 * self.tp + self.fn_;
        if den == 0 {
            1.0
        } else {
            (2 * self.tp) as f64 / den as f64
        }
    }

    /// `TP / (FP + TP + FN)`, 1 when neither mask has a foreground pixel.
    pub fn jaccard(&self) -> f64 {
        let den = self.fp + self.tp + self.fn_;
        if den == 0 {
            1.0
        } else {
            self.tp as f64 / den as f64
        }
    }
}

pub fn dice(seg: &[i8], gt: &[i8]) -> Result<f64> {
    Ok(ConfusionCounts::from_labels(seg, gt)?.dice())
}

pub fn jaccard(seg: &[i8], gt: &[i8]) -> Result<f64> {
    Ok(ConfusionCounts::from_labels(seg, gt)?.jaccard())
}

/// Fraction of matching labels under the better of the two global label
/// assignments.
pub fn accuracy(labels: &[i8], gt: &[i8]) -> Result<f64> {
    Error::check_len("accuracy", gt.len(), labels.len())?;
    if gt.is_empty() {
        return Err(Error::InvalidParameter("accuracy of an empty labelling".into()));
    }
    let same = labels.iter().zip(gt).filter(|(a, b)| a == b).count();
    let best = same.max(gt.len() - same);
    Ok(best as f64 / gt.len() as f64)
}

/// `(t, |u^t - u*|_2)` for each recorded iterate, for log-log plotting.
pub fn rate_log(iterates: &[Vec<f64>], reference: &[f64]) -> Result<Vec<(usize, f64)>> {
    iterates
        .iter()
        .enumerate()
        .map(|(t, u)| {
            Error::check_len("rate_log", reference.len(), u.len())?;
            let d = u
                .iter()
                .zip(reference)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            Ok((t, d))
        })
        .collect()
}

/// Metric summary written next to run outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub dice: Option<f64>,
    pub jaccard: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    /// Outer DCA steps.
    pub iterations: usize,
    /// Total inner sweeps (`iterations * s`).
    pub inner_sweeps: usize,
    pub seconds: f64,
}
