//! Confusion matrices, per-class recognition rates, and the report / curve
//! writers.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::TrainCurves;

/// `counts[i][j]` = samples of true class `i` predicted as class `j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

/// True-positive rate, true-negative rate and their mean for one class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassRates {
    pub tpr: f64,
    pub tnr: f64,
    pub rr: f64,
}

impl ConfusionMatrix {
    pub fn zeros(k: usize) -> Self {
        Self {
            counts: vec![vec![0; k]; k],
        }
    }

    pub fn from_rows(rows: Vec<Vec<u64>>) -> Result<Self> {
        let k = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::ShapeMismatch {
                op: "confusion matrix",
                expected: vec![k, k],
                got: vec![k, r.len()],
            });
        }
        Ok(Self { counts: rows })
    }

    pub fn k(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    pub fn col_sum(&self, c: usize) -> u64 {
        self.counts.iter().map(|r| r[c]).sum()
    }

    pub fn overall_accuracy(&self) -> Result<f64> {
        overall_accuracy(self)
    }

    pub fn recognition_rate(&self, c: usize) -> Result<ClassRates> {
        recognition_rate(self, c)
    }
}

pub fn confusion_matrix(truth: &[usize], predicted: &[usize], k: usize) -> Result<ConfusionMatrix> {
    if truth.len() != predicted.len() {
        return Err(Error::invalid(format!(
            "label sequences differ in length: {} truths vs {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut m = ConfusionMatrix::zeros(k);
    for (&t, &p) in truth.iter().zip(predicted) {
        for label in [t, p] {
            if label >= k {
                return Err(Error::LabelOutOfRange { label, classes: k });
            }
        }
        m.counts[t][p] += 1;
    }
    Ok(m)
}

pub fn overall_accuracy(m: &ConfusionMatrix) -> Result<f64> {
    let total = m.total();
    if total == 0 {
        return Err(Error::Empty("confusion matrix"));
    }
    Ok(m.trace() as f64 / total as f64)
}

/// TNR counts every sample outside class `c` that was not predicted as `c`.
pub fn recognition_rate(m: &ConfusionMatrix, c: usize) -> Result<ClassRates> {
    if c >= m.k() {
        return Err(Error::IndexOutOfRange { index: c, len: m.k() });
    }
    let total = m.total();
    let row = m.row_sum(c);
    let tp = m.counts[c][c];
    let fp = m.col_sum(c) - tp;
    if row == 0 || total == row {
        return Err(Error::EmptyRow { class: c });
    }
    let tpr = tp as f64 / row as f64;
    let negatives = total - row;
    let tnr = (negatives - fp) as f64 / negatives as f64;
    Ok(ClassRates {
        tpr,
        tnr,
        rr: (tpr + tnr) / 2.0,
    })
}

pub fn mean_recognition_rate(m: &ConfusionMatrix) -> Result<f64> {
    if m.k() == 0 {
        return Err(Error::Empty("confusion matrix"));
    }
    let mut sum = 0.0;
    for c in 0..m.k() {
        sum += recognition_rate(m, c)?.rr;
    }
    Ok(sum / m.k() as f64)
}

fn round4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub name: String,
    pub tpr: f64,
    pub tnr: f64,
    pub rr: f64,
}

/// Serialized evaluation summary; fractions are rounded to 4 decimals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub classes: Vec<String>,
    pub matrix: Vec<Vec<u64>>,
    pub overall_accuracy: f64,
    pub per_class: Vec<ClassReport>,
    pub mean_rr: f64,
}

impl EvalReport {
    /// Builds the report. Classes whose rates are undefined (no samples) are
    /// reported with zero rates and excluded from the mean.
    pub fn new(classes: &[String], m: &ConfusionMatrix) -> Result<Self> {
        if classes.len() != m.k() {
            return Err(Error::invalid(format!(
                "{} class names for a {}-class matrix",
                classes.len(),
                m.k()
            )));
        }
        let overall = overall_accuracy(m)?;
        let mut per_class = Vec::with_capacity(m.k());
        let (mut rr_sum, mut defined) = (0.0, 0usize);
        for (c, name) in classes.iter().enumerate() {
            let rates = match recognition_rate(m, c) {
                Ok(r) => {
                    rr_sum += r.rr;
                    defined += 1;
                    r
                }
                Err(Error::EmptyRow { .. }) => ClassRates { tpr: 0.0, tnr: 0.0, rr: 0.0 },
                Err(e) => return Err(e),
            };
            per_class.push(ClassReport {
                name: name.clone(),
                tpr: round4(rates.tpr),
                tnr: round4(rates.tnr),
                rr: round4(rates.rr),
            });
        }
        Ok(Self {
            classes: classes.to_vec(),
            matrix: m.counts.clone(),
            overall_accuracy: round4(overall),
            per_class,
            mean_rr: if defined == 0 { 0.0 } else { round4(rr_sum / defined as f64) },
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn emit_report(report: &EvalReport, path: &Path) -> Result<()> {
    std::fs::write(path, report.to_json()? + "\n").map_err(|e| Error::io(path, e))
}

pub fn load_report(path: &Path) -> Result<EvalReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    EvalReport::parse(&text)
}

pub const CURVES_HEADER: &str = "epoch,train_loss,train_acc,test_loss,test_acc,eta";

pub fn curves_csv(curves: &TrainCurves) -> String {
    let mut out = String::from(CURVES_HEADER);
    out.push('\n');
    for r in &curves.epochs {
        // `{}` on f64 prints the shortest exact round-trip representation
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.epoch, r.train_loss, r.train_acc, r.test_loss, r.test_acc, r.eta
        );
    }
    out
}

pub fn emit_curves(curves: &TrainCurves, path: &Path) -> Result<()> {
    std::fs::write(path, curves_csv(curves)).map_err(|e| Error::io(path, e))
}

/// Two-panel SVG: accuracies on the left, losses on the right, train solid
/// and test dashed.
pub fn curves_svg(curves: &TrainCurves) -> String {
    const W: f64 = 360.0;
    const H: f64 = 240.0;
    const PAD: f64 = 30.0;
    let n = curves.epochs.len().max(2) as f64;
    let max_loss = curves
        .epochs
        .iter()
        .flat_map(|r| [r.train_loss, r.test_loss])
        .filter(|v| v.is_finite())
        .fold(1e-9, f64::max);

    let polyline = |x0: f64, values: Vec<f64>, top: f64, color: &str, dashed: bool| {
        let pts: Vec<String> = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let x = x0 + PAD + (W - 2.0 * PAD) * i as f64 / (n - 1.0);
                let y = H - PAD - (H - 2.0 * PAD) * (v / top).clamp(0.0, 1.0);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let dash = if dashed { " stroke-dasharray=\"5,3\"" } else { "" };
        format!(
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"{dash} points=\"{}\"/>\n",
            pts.join(" ")
        )
    };
    let col = |f: fn(&crate::nn::EpochRecord) -> f64| curves.epochs.iter().map(f).collect::<Vec<f64>>();

    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{H}\" viewBox=\"0 0 {} {H}\">\n",
        2.0 * W,
        2.0 * W
    );
    svg.push_str("  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    for (x0, title) in [(0.0, "accuracy"), (W, "loss")] {
        let _ = writeln!(
            svg,
            "  <rect x=\"{}\" y=\"{PAD}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>",
            x0 + PAD,
            W - 2.0 * PAD,
            H - 2.0 * PAD
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{title}</text>",
            x0 + PAD,
            PAD - 8.0
        );
    }
    svg.push_str(&polyline(0.0, col(|r| r.train_acc), 1.0, "#1f77b4", false));
    svg.push_str(&polyline(0.0, col(|r| r.test_acc), 1.0, "#1f77b4", true));
    svg.push_str(&polyline(W, col(|r| r.train_loss), max_loss, "#d62728", false));
    svg.push_str(&polyline(W, col(|r| r.test_loss), max_loss, "#d62728", true));
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_chart(curves: &TrainCurves, path: &Path) -> Result<()> {
    std::fs::write(path, curves_svg(curves)).map_err(|e| Error::io(path, e))
}

/// Reference results on the ten-class food benchmark, used as
/// metric fixtures.
pub mod reference {
    pub const FOOD_CLASSES: [&str; 10] = [
        "Apple",
        "Banana",
        "Broccoli",
        "Burger",
        "Egg",
        "Frenchfry",
        "Hotdog",
        "Pizza",
        "Rice",
        "Strawberry",
    ];

    /// Bag-of-features baseline, test images.
    pub const BOF_MATRIX: [[u64; 10]; 10] = [
        [178, 1, 0, 4, 8, 0, 2, 6, 5, 7],
        [2, 43, 1, 2, 4, 4, 5, 2, 1, 1],
        [1, 0, 28, 2, 0, 3, 2, 24, 1, 4],
        [5, 0, 2, 72, 2, 2, 7, 12, 1, 1],
        [20, 1, 2, 7, 75, 1, 6, 6, 6, 1],
        [1, 4, 3, 4, 1, 21, 6, 16, 1, 0],
        [5, 8, 4, 10, 4, 9, 76, 10, 2, 1],
        [5, 0, 4, 5, 1, 1, 7, 221, 3, 4],
        [6, 1, 1, 2, 4, 1, 1, 18, 35, 1],
        [11, 1, 2, 1, 1, 0, 1, 29, 1, 45],
    ];
    pub const BOF_RR: [f64; 10] = [0.89, 0.82, 0.71, 0.83, 0.79, 0.67, 0.78, 0.87, 0.74, 0.73];
    pub const BOF_MEAN_RR: f64 = 0.78;

    /// Best CNN model, test images.
    pub const CNN_MATRIX: [[u64; 10]; 10] = [
        [193, 6, 1, 0, 1, 0, 2, 1, 0, 6],
        [4, 49, 0, 0, 4, 2, 3, 0, 0, 0],
        [0, 0, 64, 0, 0, 0, 1, 1, 0, 0],
        [1, 0, 0, 87, 0, 1, 9, 6, 0, 0],
        [3, 1, 0, 2, 110, 2, 5, 1, 2, 0],
        [0, 2, 0, 0, 0, 53, 1, 4, 0, 0],
        [1, 2, 0, 5, 0, 3, 109, 8, 0, 0],
        [0, 0, 0, 3, 0, 1, 6, 239, 0, 1],
        [0, 0, 0, 1, 0, 0, 1, 5, 64, 0],
        [3, 0, 0, 0, 0, 0, 0, 0, 0, 88],
    ];
    pub const CNN_RR: [f64; 10] = [0.95, 0.89, 0.98, 0.91, 0.93, 0.94, 0.91, 0.96, 0.95, 0.98];
    pub const CNN_MEAN_RR: f64 = 0.94;
    pub const CNN_OVERALL: f64 = 0.904;

    pub fn matrix(rows: &[[u64; 10]; 10]) -> super::ConfusionMatrix {
        super::ConfusionMatrix::from_rows(rows.iter().map(|r| r.to_vec()).collect()).expect("square fixture")
    }
}

#[cfg(test)]
mod tests {
    use super::reference::*;
    use super::*;
    use crate::nn::EpochRecord;

    #[test]
    fn tabulation_examples() {
        let m = confusion_matrix(&[0, 0, 1], &[0, 1, 1], 2).unwrap();
        assert_eq!(m.counts(), &[vec![1, 1], vec![0, 1]]);
        assert_eq!(confusion_matrix(&[], &[], 3).unwrap(), ConfusionMatrix::zeros(3));
        assert!(confusion_matrix(&[0], &[0, 1], 2).is_err());
        assert!(matches!(
            confusion_matrix(&[0], &[2], 2),
            Err(Error::LabelOutOfRange { label: 2, classes: 2 })
        ));
    }

    #[test]
    fn perfect_classifier() {
        let m = confusion_matrix(&[0, 1, 2, 2], &[0, 1, 2, 2], 3).unwrap();
        assert_eq!(overall_accuracy(&m).unwrap(), 1.0);
        for c in 0..3 {
            assert_eq!(recognition_rate(&m, c).unwrap(), ClassRates { tpr: 1.0, tnr: 1.0, rr: 1.0 });
        }
        assert_eq!(mean_recognition_rate(&m).unwrap(), 1.0);
    }

    #[test]
    fn degenerate_inputs() {
        assert!(matches!(overall_accuracy(&ConfusionMatrix::zeros(2)), Err(Error::Empty(_))));
        let m = confusion_matrix(&[0, 0], &[0, 1], 3).unwrap();
        assert!(matches!(recognition_rate(&m, 2), Err(Error::EmptyRow { class: 2 })));
        assert!(matches!(recognition_rate(&m, 0), Err(Error::EmptyRow { class: 0 })));
    }

    #[test]
    fn reference_single_values() {
        let cnn = matrix(&CNN_MATRIX);
        assert_eq!((cnn.trace(), cnn.total()), (1056, 1168));
        assert!((recognition_rate(&cnn, 0).unwrap().rr - 0.953).abs() < 5e-4);
        let bof = matrix(&BOF_MATRIX);
        assert!((recognition_rate(&bof, 1).unwrap().rr - 0.824).abs() < 5e-4);
        assert!((overall_accuracy(&bof).unwrap() - 0.68).abs() < 0.005);
        // last row: 45 of 92 hits, 20 false alarms among 1077 negatives
        let want = (45.0 / 92.0 + 1057.0 / 1077.0) / 2.0;
        assert!((recognition_rate(&bof, 9).unwrap().rr - want).abs() < 1e-12);
    }

    #[test]
    fn report_round_trip() {
        let m = matrix(&CNN_MATRIX);
        let names: Vec<String> = FOOD_CLASSES.iter().map(|s| s.to_string()).collect();
        let r = EvalReport::new(&names, &m).unwrap();
        assert_eq!(r.overall_accuracy, 0.9041);
        let back = EvalReport::parse(&r.to_json().unwrap()).unwrap();
        assert_eq!(back, r);
        let v: serde_json::Value = serde_json::from_str(&r.to_json().unwrap()).unwrap();
        for key in ["classes", "matrix", "overall_accuracy", "per_class", "mean_rr"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    fn curves(n: usize) -> TrainCurves {
        TrainCurves {
            epochs: (1..=n)
                .map(|e| EpochRecord {
                    epoch: e,
                    train_loss: 2.0 / e as f64,
                    train_acc: 0.1 * e as f64,
                    test_loss: 2.5 / e as f64,
                    test_acc: 0.09 * e as f64,
                    eta: 0.01,
                })
                .collect(),
        }
    }

    #[test]
    fn curve_outputs() {
        let c = curves(3);
        let csv = curves_csv(&c);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CURVES_HEADER);
        assert_eq!(lines.len(), 4);
        let fields: Vec<f64> = lines[2].split(',').map(|f| f.parse().unwrap()).collect();
        assert_eq!(fields, vec![2.0, 1.0, 0.2, 1.25, 0.18, 0.01]);
        assert_eq!(curves_svg(&c).matches("<polyline").count(), 4);
        assert_eq!(curves_svg(&curves(1)).matches("<polyline").count(), 4);
    }
}
