//! Binary classification metrics with good as the positive class.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("{statistic} undefined: {denominator} is zero")]
    UndefinedStatistic {
        statistic: &'static str,
        denominator: &'static str,
    },
    #[error("ROC needs at least one positive and one negative")]
    SingleClassInput,
    #[error("score {index} is not finite")]
    NonFiniteScore { index: usize },
}

impl MetricsError {
    pub fn name(&self) -> &'static str {
        match self {
            Self::LengthMismatch { .. } => "LengthMismatch",
            Self::EmptyInput => "EmptyInput",
            Self::UndefinedStatistic { .. } => "UndefinedStatistic",
            Self::SingleClassInput => "SingleClassInput",
            Self::NonFiniteScore { .. } => "NonFiniteScore",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

/// `true` means good.
pub fn confusion(preds: &[bool], truth: &[bool]) -> Result<Confusion, MetricsError> {
    if preds.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            left: preds.len(),
            right: truth.len(),
        });
    }
    if preds.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let mut c = Confusion::default();
    for (&p, &t) in preds.iter().zip(truth) {
        match (p, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    Ok(c)
}

fn ratio(
    num: u64,
    den: u64,
    statistic: &'static str,
    denominator: &'static str,
) -> Result<f64, MetricsError> {
    if den == 0 {
        Err(MetricsError::UndefinedStatistic {
            statistic,
            denominator,
        })
    } else {
        Ok(num as f64 / den as f64)
    }
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn sensitivity(&self) -> Result<f64, MetricsError> {
        ratio(self.tp, self.tp + self.fn_, "se", "tp+fn")
    }

    pub fn specificity(&self) -> Result<f64, MetricsError> {
        ratio(self.tn, self.tn + self.fp, "sp", "tn+fp")
    }

    pub fn accuracy(&self) -> Result<f64, MetricsError> {
        ratio(self.tp + self.tn, self.total(), "acc", "total")
    }

    pub fn ppv(&self) -> Result<f64, MetricsError> {
        ratio(self.tp, self.tp + self.fp, "ppv", "tp+fp")
    }

    pub fn npv(&self) -> Result<f64, MetricsError> {
        ratio(self.tn, self.tn + self.fn_, "npv", "tn+fn")
    }

    /// Harmonic mean of PPV and sensitivity.
    pub fn f1(&self) -> Result<f64, MetricsError> {
        let ppv = self.ppv()?;
        let se = self.sensitivity()?;
        if ppv + se == 0.0 {
            return Err(MetricsError::UndefinedStatistic {
                statistic: "f1",
                denominator: "ppv+se",
            });
        }
        Ok(2.0 * ppv * se / (ppv + se))
    }

    /// All statistics; fails on the first zero denominator.
    pub fn summary(&self) -> Result<Summary, MetricsError> {
        Ok(Summary {
            se: self.sensitivity()?,
            sp: self.specificity()?,
            acc: self.accuracy()?,
            f1: self.f1()?,
            ppv: self.ppv()?,
            npv: self.npv()?,
        })
    }

    /// Like [`Confusion::summary`] but with undefined statistics left empty.
    pub fn partial_summary(&self) -> PartialSummary {
        PartialSummary {
            se: self.sensitivity().ok(),
            sp: self.specificity().ok(),
            acc: self.accuracy().ok(),
            f1: self.f1().ok(),
            ppv: self.ppv().ok(),
            npv: self.npv().ok(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub se: f64,
    pub sp: f64,
    pub acc: f64,
    pub f1: f64,
    pub ppv: f64,
    pub npv: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialSummary {
    pub se: Option<f64>,
    pub sp: Option<f64>,
    pub acc: Option<f64>,
    pub f1: Option<f64>,
    pub ppv: Option<f64>,
    pub npv: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    /// Scores `>= threshold` are called positive. The first point uses
    /// `+inf`.
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
    pub auc: f64,
}

/// ROC curve over the distinct scores (descending) with trapezoidal AUC.
///
/// Tied scores move the curve diagonally in one step, which gives the
/// half-credit Mann–Whitney value for ties.
pub fn roc_auc(scores: &[f64], truth: &[bool]) -> Result<RocCurve, MetricsError> {
    if scores.len() != truth.len() {
        return Err(MetricsError::LengthMismatch {
            left: scores.len(),
            right: truth.len(),
        });
    }
    if let Some(index) = scores.iter().position(|s| !s.is_finite()) {
        return Err(MetricsError::NonFiniteScore { index });
    }
    let n_pos = truth.iter().filter(|&&t| t).count() as u64;
    let n_neg = truth.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricsError::SingleClassInput);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = vec![RocPoint {
        threshold: f64::INFINITY,
        fpr: 0.0,
        tpr: 0.0,
    }];
    // Integer counts keep the area exact until the final division.
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut twice_area: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let s = scores[order[i]];
        let (tp0, fp0) = (tp, fp);
        while i < order.len() && scores[order[i]] == s {
            if truth[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        twice_area += u128::from(fp - fp0) * u128::from(tp + tp0);
        points.push(RocPoint {
            threshold: s,
            fpr: fp as f64 / n_neg as f64,
            tpr: tp as f64 / n_pos as f64,
        });
    }
    let auc = twice_area as f64 / (2.0 * n_pos as f64 * n_neg as f64);
    Ok(RocCurve { points, auc })
}

/// `threshold,fpr,tpr` rows.
pub fn roc_csv(curve: &RocCurve) -> String {
    let mut out = String::from("threshold,fpr,tpr\n");
    for p in &curve.points {
        let thr = if p.threshold.is_infinite() {
            "inf".to_string()
        } else {
            p.threshold.to_string()
        };
        out.push_str(&format!("{thr},{},{}\n", p.fpr, p.tpr));
    }
    out
}
