//! Correct and error classification rates, confusion matrices and the text
//! reports built from them.
//!
//! CRR is the percentage of samples whose prediction matches the label;
//! ECR is always exactly `100 - CRR`.

use std::fmt::{self, Write as _};

use crate::catalog::{ClassId, ReferencePartition, NUM_CLASSES};
use crate::error::{Error, Result};

/// Which classifier produced the predictions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Head {
    Softmax,
    Svm,
}

impl fmt::Display for Head {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Head::Softmax => "softmax",
            Head::Svm => "svm",
        })
    }
}

impl std::str::FromStr for Head {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "softmax" => Ok(Head::Softmax),
            "svm" => Ok(Head::Svm),
            _ => Err(Error::input(format!("unknown head {s:?} (expected softmax or svm)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassRate {
    pub samples: usize,
    pub correct: usize,
}

impl ClassRate {
    /// `None` for classes without samples.
    pub fn crr(&self) -> Option<f64> {
        (self.samples > 0).then(|| 100.0 * self.correct as f64 / self.samples as f64)
    }

    pub fn ecr(&self) -> Option<f64> {
        self.crr().map(|c| 100.0 - c)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub head: Head,
    pub total: usize,
    pub correct: usize,
    /// `confusion[true][predicted]` by class index.
    pub confusion: Vec<Vec<usize>>,
}

impl EvalReport {
    /// Builds a report from true and predicted labels.
    pub fn from_predictions(head: Head, truth: &[ClassId], predicted: &[ClassId]) -> Result<Self> {
        if truth.is_empty() {
            return Err(Error::input("cannot evaluate an empty sample set"));
        }
        if truth.len() != predicted.len() {
            return Err(Error::input(format!(
                "{} labels but {} predictions",
                truth.len(),
                predicted.len()
            )));
        }
        let mut confusion = vec![vec![0usize; NUM_CLASSES]; NUM_CLASSES];
        for (t, p) in truth.iter().zip(predicted) {
            if t.index() >= NUM_CLASSES || p.index() >= NUM_CLASSES {
                return Err(Error::input(format!("class outside 1..={NUM_CLASSES}")));
            }
            confusion[t.index()][p.index()] += 1;
        }
        let correct = (0..NUM_CLASSES).map(|i| confusion[i][i]).sum();
        Ok(EvalReport {
            head,
            total: truth.len(),
            correct,
            confusion,
        })
    }

    pub fn crr(&self) -> f64 {
        100.0 * self.correct as f64 / self.total as f64
    }

    pub fn ecr(&self) -> f64 {
        100.0 - self.crr()
    }

    pub fn class_rate(&self, class: ClassId) -> ClassRate {
        let row = &self.confusion[class.index()];
        ClassRate {
            samples: row.iter().sum(),
            correct: row[class.index()],
        }
    }

    /// `head,crr,ecr` header plus one data row.
    pub fn summary_csv(&self) -> String {
        format!("head,crr,ecr\n{},{:.4},{:.4}\n", self.head, self.crr(), self.ecr())
    }

    /// Confusion counts with class names labelling rows (true) and columns
    /// (predicted).
    pub fn confusion_csv(&self) -> String {
        let mut out = String::from("true\\predicted");
        for c in ClassId::all() {
            write!(out, ",{}", c.name()).unwrap();
        }
        out.push('\n');
        for c in ClassId::all() {
            out.push_str(&c.name());
            for n in &self.confusion[c.index()] {
                write!(out, ",{n}").unwrap();
            }
            out.push('\n');
        }
        out
    }
}

/// Evaluates a batch predictor over `(label, input)` items.
pub fn evaluate<I, F>(head: Head, items: &[I], label: impl Fn(&I) -> ClassId, mut predict: F) -> Result<EvalReport>
where
    F: FnMut(&[I]) -> Result<Vec<ClassId>>,
{
    if items.is_empty() {
        return Err(Error::input("cannot evaluate an empty sample set"));
    }
    let predicted = predict(items)?;
    let truth: Vec<ClassId> = items.iter().map(label).collect();
    EvalReport::from_predictions(head, &truth, &predicted)
}

fn rate_row(out: &mut String, name: &str, crr: Option<f64>) {
    match crr {
        Some(c) => writeln!(out, "{name:<20} {c:>10.2} {:>10.2}", 100.0 - c).unwrap(),
        None => writeln!(out, "{name:<20} {:>10} {:>10}", "-", "-").unwrap(),
    }
}

fn table_header(out: &mut String, first: &str) {
    writeln!(out, "{first:<20} {:>10} {:>10}", "CRR (%)", "ECR (%)").unwrap();
}

/// One row per class with CRR and ECR to two decimals, then an `Average`
/// row over all samples (the class rates weighted by class counts).
pub fn per_class_table(report: &EvalReport) -> String {
    let mut out = String::new();
    table_header(&mut out, "Character");
    for c in ClassId::all() {
        rate_row(&mut out, &c.name(), report.class_rate(c).crr());
    }
    rate_row(&mut out, "Average", Some(report.crr()));
    out
}

/// Like [`per_class_table`] but one row per group of `partition`, each row
/// pooling the samples of its member classes.
pub fn per_group_table(report: &EvalReport, partition: &ReferencePartition) -> String {
    let mut out = String::new();
    table_header(&mut out, "Group");
    for g in 1..=partition.num_groups() {
        let members = partition.members(g);
        let (samples, correct) = members.iter().fold((0, 0), |(s, c), &m| {
            let r = report.class_rate(m);
            (s + r.samples, c + r.correct)
        });
        let name = members.iter().map(|m| m.name()).collect::<Vec<_>>().join("/");
        rate_row(&mut out, &name, ClassRate { samples, correct }.crr());
    }
    rate_row(&mut out, "Average", Some(report.crr()));
    out
}

/// Side-by-side CRR/ECR of several heads.
pub fn comparison_table(reports: &[EvalReport]) -> String {
    let mut out = String::new();
    table_header(&mut out, "Head");
    for r in reports {
        rate_row(&mut out, &r.head.to_string(), Some(r.crr()));
    }
    out
}

/// Off-diagonal confusion entries, largest first; ties ordered by
/// `(true, predicted)` id. At most `top_k` entries.
pub fn confusion_pairs(report: &EvalReport, top_k: usize) -> Vec<(ClassId, ClassId, usize)> {
    let mut pairs: Vec<(ClassId, ClassId, usize)> = Vec::new();
    for (t, row) in report.confusion.iter().enumerate() {
        for (p, &n) in row.iter().enumerate() {
            if t != p && n > 0 {
                pairs.push((ClassId::from_index(t), ClassId::from_index(p), n));
            }
        }
    }
    pairs.sort_by(|a, b| b.2.cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
    pairs.truncate(top_k.max(1));
    pairs
}
