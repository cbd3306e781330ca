//! Confusion matrices and classification reports.
//!
//! Rows are the true class and columns the predicted class, both ordered
//! pathological then healthy. Sensitivity is the recall of the pathological
//! class and specificity the recall of the healthy class.

use std::ops::{Add, AddAssign};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::label::Label;

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("unknown label `{0}`")]
    UnknownLabel(String),
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("report JSON: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionMatrix {
    /// `counts[true][predicted]`
    pub counts: [[u64; 2]; 2],
}

impl ConfusionMatrix {
    pub fn new(counts: [[u64; 2]; 2]) -> Self {
        Self { counts }
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        self.counts[truth.index()][predicted.index()] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn correct(&self) -> u64 {
        self.counts[0][0] + self.counts[1][1]
    }

    pub fn row_sum(&self, truth: Label) -> u64 {
        self.counts[truth.index()].iter().sum()
    }

    pub fn column_sum(&self, predicted: Label) -> u64 {
        self.counts.iter().map(|row| row[predicted.index()]).sum()
    }

    pub fn get(&self, truth: Label, predicted: Label) -> u64 {
        self.counts[truth.index()][predicted.index()]
    }
}

impl Add for ConfusionMatrix {
    type Output = Self;

    fn add(mut self, rhs: Self) -> Self {
        self += rhs;
        self
    }
}

impl AddAssign for ConfusionMatrix {
    fn add_assign(&mut self, rhs: Self) {
        for (a, b) in self.counts.iter_mut().flatten().zip(rhs.counts.iter().flatten()) {
            *a += b;
        }
    }
}

/// Counts `(true, predicted)` pairs.
pub fn accumulate(pairs: &[(Label, Label)]) -> ConfusionMatrix {
    let mut m = ConfusionMatrix::default();
    for &(t, p) in pairs {
        m.record(t, p);
    }
    m
}

/// Like [`accumulate`], for textual labels.
pub fn accumulate_str(pairs: &[(&str, &str)]) -> Result<ConfusionMatrix, EvalError> {
    let parse = |s: &str| s.parse::<Label>().map_err(EvalError::UnknownLabel);
    let typed = pairs
        .iter()
        .map(|&(t, p)| Ok((parse(t)?, parse(p)?)))
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(accumulate(&typed))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// Set when a zero denominator forced precision or recall to 0.
    #[serde(default)]
    pub degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerClass {
    pub pathological: ClassMetrics,
    pub healthy: ClassMetrics,
}

impl PerClass {
    pub fn get(&self, label: Label) -> &ClassMetrics {
        match label {
            Label::Pathological => &self.pathological,
            Label::Healthy => &self.healthy,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub classes: PerClass,
    pub matrix: ConfusionMatrix,
    pub total: u64,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn class_metrics(m: &ConfusionMatrix, label: Label) -> ClassMetrics {
    let diag = m.get(label, label);
    let (precision, p_degenerate) = ratio(diag, m.column_sum(label));
    let (recall, r_degenerate) = ratio(diag, m.row_sum(label));
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    ClassMetrics {
        precision,
        recall,
        f1,
        degenerate: p_degenerate || r_degenerate,
    }
}

pub fn report(matrix: &ConfusionMatrix) -> Result<ClassificationReport, EvalError> {
    let total = matrix.total();
    if total == 0 {
        return Err(EvalError::EmptyMatrix);
    }
    let pathological = class_metrics(matrix, Label::Pathological);
    let healthy = class_metrics(matrix, Label::Healthy);
    Ok(ClassificationReport {
        accuracy: matrix.correct() as f64 / total as f64,
        sensitivity: pathological.recall,
        specificity: healthy.recall,
        classes: PerClass { pathological, healthy },
        matrix: *matrix,
        total,
    })
}

/// Half-up rounding to `decimals` places.
pub fn round_half_up(value: f64, decimals: i32) -> f64 {
    let scale = 10f64.powi(decimals);
    // absorbs representation error such as 0.745 stored as 0.74499999...
    ((value * scale) + 0.5 + 1e-9).floor() / scale
}

/// Ratio shown as a percentage with two decimals, e.g. `71.36`.
pub fn percent(value: f64) -> f64 {
    round_half_up(value * 100.0, 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" => Ok(Self::Text),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown report format `{other}`")),
        }
    }
}

pub fn render_report(report: &ClassificationReport, format: ReportFormat) -> Vec<u8> {
    match format {
        ReportFormat::Json => {
            let mut out = serde_json::to_vec_pretty(report).expect("report serializes");
            out.push(b'\n');
            out
        }
        ReportFormat::Text => render_text(report).into_bytes(),
    }
}

pub fn parse_report_json(bytes: &[u8]) -> Result<ClassificationReport, EvalError> {
    serde_json::from_slice(bytes).map_err(|e| EvalError::Json(e.to_string()))
}

fn render_text(r: &ClassificationReport) -> String {
    let m = &r.matrix;
    let mut out = String::new();
    out.push_str(&format!(
        "{:<14} {:>9} {:>9} {:>9} {:>9}\n",
        "class", "precision", "recall", "f1-score", "support"
    ));
    for label in Label::ALL {
        let c = r.classes.get(label);
        out.push_str(&format!(
            "{:<14} {:>9.2} {:>9.2} {:>9.2} {:>9}{}\n",
            label.as_str(),
            round_half_up(c.precision, 2),
            round_half_up(c.recall, 2),
            round_half_up(c.f1, 2),
            m.row_sum(label),
            if c.degenerate { "  (degenerate)" } else { "" }
        ));
    }
    out.push('\n');
    out.push_str(&format!("overall accuracy: {:.2} %\n", percent(r.accuracy)));
    out.push_str(&format!("sensitivity:      {:.2} %\n", percent(r.sensitivity)));
    out.push_str(&format!("specificity:      {:.2} %\n", percent(r.specificity)));
    out.push('\n');
    out.push_str("confusion matrix (rows = true class, columns = predicted class)\n");
    out.push_str(&format!(
        "{:<20} {:>19} {:>14}\n",
        "", "pred: pathological", "pred: healthy"
    ));
    for label in Label::ALL {
        out.push_str(&format!(
            "{:<20} {:>19} {:>14}\n",
            format!("true: {}", label.as_str()),
            m.get(label, Label::Pathological),
            m.get(label, Label::Healthy)
        ));
    }
    out.push_str(&format!("total: {}\n", r.total));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    use Label::{Healthy as H, Pathological as P};

    #[test]
    fn accumulate_cases() {
        assert_eq!(accumulate(&[]).counts, [[0, 0], [0, 0]]);
        assert_eq!(accumulate(&[(P, P), (P, P), (P, P)]).counts, [[3, 0], [0, 0]]);
        let m = accumulate(&[(P, H), (H, P), (H, H)]);
        assert_eq!(m.counts, [[0, 1], [1, 1]]);
        assert_eq!(accumulate_str(&[("sick", "healthy")]), Err(EvalError::UnknownLabel("sick".into())));
    }

    #[test]
    fn validation_table() {
        let r = report(&ConfusionMatrix::new([[67, 36], [23, 80]])).unwrap();
        assert_eq!(percent(r.accuracy), 71.36);
        assert_eq!(percent(r.specificity), 77.67);
        assert_eq!(round_half_up(r.sensitivity, 2), 0.65);
        assert_eq!(round_half_up(r.classes.pathological.precision, 2), 0.74);
        assert_eq!(round_half_up(r.classes.pathological.f1, 2), 0.69);
        assert_eq!(round_half_up(r.classes.healthy.precision, 2), 0.69);
        assert_eq!(round_half_up(r.classes.healthy.f1, 2), 0.73);
        assert_eq!(round_half_up(r.classes.healthy.recall, 2), 0.78);
    }

    #[test]
    fn testing_table() {
        let r = report(&ConfusionMatrix::new([[514, 256], [23, 81]])).unwrap();
        assert_eq!(percent(r.accuracy), 68.08);
        assert_eq!(percent(r.sensitivity), 66.75);
        assert_eq!(round_half_up(r.classes.pathological.precision, 2), 0.96);
        assert_eq!(round_half_up(r.classes.healthy.precision, 2), 0.24);
        assert_eq!(round_half_up(r.classes.pathological.f1, 2), 0.79);
        assert_eq!(round_half_up(r.classes.healthy.f1, 2), 0.37);
    }

    #[test]
    fn perfect_and_empty() {
        let r = report(&ConfusionMatrix::new([[5, 0], [0, 5]])).unwrap();
        for v in [r.accuracy, r.sensitivity, r.specificity, r.classes.healthy.f1, r.classes.pathological.precision] {
            assert_eq!(v, 1.0);
        }
        let text = String::from_utf8(render_report(&r, ReportFormat::Text)).unwrap();
        assert!(text.contains("pathological        1.00      1.00      1.00"));
        assert_eq!(report(&ConfusionMatrix::default()), Err(EvalError::EmptyMatrix));
    }

    #[test]
    fn degenerate_class_flagged() {
        let r = report(&ConfusionMatrix::new([[4, 0], [0, 0]])).unwrap();
        assert!(r.classes.healthy.degenerate);
        assert_eq!(r.classes.healthy.precision, 0.0);
        assert!(!r.classes.pathological.degenerate);
    }

    #[test]
    fn json_schema_and_round_trip() {
        let r = report(&ConfusionMatrix::new([[514, 256], [23, 81]])).unwrap();
        let bytes = render_report(&r, ReportFormat::Json);
        let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
        assert_eq!(v["matrix"], serde_json::json!([[514, 256], [23, 81]]));
        assert_eq!(v["total"], 874);
        assert!(v["classes"]["pathological"]["precision"].is_f64());
        assert_eq!(parse_report_json(&bytes).unwrap(), r);
    }

    #[test]
    fn rounding_is_half_up() {
        assert_eq!(round_half_up(0.745, 2), 0.75);
        assert_eq!(round_half_up(0.7444, 2), 0.74);
    }

    proptest! {
        #[test]
        fn scale_invariance(a in 0u64..500, b in 0u64..500, c in 0u64..500, d in 1u64..500, k in 1u64..20) {
            let base = report(&ConfusionMatrix::new([[a, b], [c, d]])).unwrap();
            let scaled = report(&ConfusionMatrix::new([[a * k, b * k], [c * k, d * k]])).unwrap();
            prop_assert!((base.accuracy - scaled.accuracy).abs() < 1e-12);
            prop_assert!((base.classes.pathological.f1 - scaled.classes.pathological.f1).abs() < 1e-12);
            prop_assert!((base.classes.healthy.precision - scaled.classes.healthy.precision).abs() < 1e-12);
        }

        #[test]
        fn balanced_accuracy_identity(n in 1u64..300, tp in 0u64..300, tn in 0u64..300) {
            let (tp, tn) = (tp % (n + 1), tn % (n + 1));
            let r = report(&ConfusionMatrix::new([[tp, n - tp], [n - tn, tn]])).unwrap();
            prop_assert!((r.accuracy - (r.sensitivity + r.specificity) / 2.0).abs() < 1e-12);
        }
    }
}
