//! Micro-averaged precision, recall and F-measure.
//!
//! Per-document decisions are pooled across all classes before averaging.
//! For single-label prediction every false positive of one class is a
//! false negative of another, so pooled precision, recall and F1 all equal
//! accuracy.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// F-beta from precision and recall:
/// `((β² + 1)·P·R) / (β²·P + R)`, or 0 when the denominator is 0.
pub fn fbeta(precision: f64, recall: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let denominator = b2 * precision + recall;
    if denominator == 0.0 {
        return 0.0;
    }
    // With P = R the expression reduces to P for every β; returning it
    // directly keeps the micro-averaged identity exact in floating point.
    if precision == recall {
        return precision;
    }
    ((b2 + 1.0) * precision * recall) / denominator
}

/// Fraction of positions where prediction equals gold.
pub fn accuracy<S: AsRef<str>>(predictions: &[S], golds: &[S]) -> Result<f64> {
    if predictions.len() != golds.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            golds.len()
        )));
    }
    if golds.is_empty() {
        return Err(Error::EmptyInput);
    }
    let correct = predictions
        .iter()
        .zip(golds)
        .filter(|(p, g)| p.as_ref() == g.as_ref())
        .count();
    Ok(correct as f64 / golds.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// Set when precision or recall had a zero denominator and was scored 0.
    pub zero_division: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub labels: Vec<String>,
    /// `confusion[gold][predicted]`, indexed like `labels`.
    pub confusion: Vec<Vec<usize>>,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub beta: f64,
    pub per_class: Vec<ClassScores>,
    pub n: usize,
}

fn ratio(num: usize, den: usize) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

pub fn micro_scores<S: AsRef<str>, L: AsRef<str>>(
    predictions: &[S],
    golds: &[S],
    label_set: &[L],
) -> Result<EvalReport> {
    micro_scores_beta(predictions, golds, label_set, 1.0)
}

pub fn micro_scores_beta<S: AsRef<str>, L: AsRef<str>>(
    predictions: &[S],
    golds: &[S],
    label_set: &[L],
    beta: f64,
) -> Result<EvalReport> {
    if predictions.len() != golds.len() {
        return Err(Error::invalid(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            golds.len()
        )));
    }
    if golds.is_empty() {
        return Err(Error::EmptyInput);
    }
    let labels: Vec<String> = label_set.iter().map(|l| l.as_ref().to_string()).collect();
    let index_of = |s: &str| {
        labels
            .iter()
            .position(|l| l == s)
            .ok_or_else(|| Error::invalid(format!("label {s:?} not in label set")))
    };

    let k = labels.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (p, g) in predictions.iter().zip(golds) {
        let (pi, gi) = (index_of(p.as_ref())?, index_of(g.as_ref())?);
        confusion[gi][pi] += 1;
    }

    let mut tp_total = 0;
    let mut fp_total = 0;
    let mut fn_total = 0;
    let mut per_class = Vec::with_capacity(k);
    for (c, label) in labels.iter().enumerate() {
        let tp = confusion[c][c];
        let predicted: usize = (0..k).map(|g| confusion[g][c]).sum();
        let support: usize = confusion[c].iter().sum();
        tp_total += tp;
        fp_total += predicted - tp;
        fn_total += support - tp;
        let (precision, p_zero) = ratio(tp, predicted);
        let (recall, r_zero) = ratio(tp, support);
        per_class.push(ClassScores {
            label: label.clone(),
            precision,
            recall,
            f1: fbeta(precision, recall, beta),
            support,
            zero_division: p_zero || r_zero,
        });
    }

    let (micro_precision, _) = ratio(tp_total, tp_total + fp_total);
    let (micro_recall, _) = ratio(tp_total, tp_total + fn_total);
    Ok(EvalReport {
        labels,
        confusion,
        micro_precision,
        micro_recall,
        micro_f1: fbeta(micro_precision, micro_recall, beta),
        beta,
        per_class,
        n: golds.len(),
    })
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "n={} micro_precision={:.4} micro_recall={:.4} micro_f1={:.4}",
            self.n, self.micro_precision, self.micro_recall, self.micro_f1
        )?;
        writeln!(f, "{:<12} {:>9} {:>9} {:>9} {:>8}", "label", "precision", "recall", "f1", "support")?;
        for c in &self.per_class {
            writeln!(
                f,
                "{:<12} {:>9.4} {:>9.4} {:>9.4} {:>8}{}",
                c.label,
                c.precision,
                c.recall,
                c.f1,
                c.support,
                if c.zero_division { " (zero division)" } else { "" }
            )?;
        }
        Ok(())
    }
}
