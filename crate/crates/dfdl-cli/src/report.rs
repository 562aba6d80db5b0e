//! Evaluation reports with two emitters, plain text and JSON, that
//! carry the same numbers.

use dfdl::{Error, Result};
use serde::Serialize;

/// Echo of the evaluation inputs, so a report is self-describing.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportConfig {
    pub model: String,
    pub manifest: String,
    pub patch_size: usize,
    pub downsample: usize,
    pub lambda: f64,
}

/// Image-level evaluation result over a manifest's test split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub labels: Vec<String>,
    /// Row t, column p: images of true class t predicted as class p.
    pub confusion: Vec<Vec<u64>>,
    /// Test images per true class (the confusion row sums).
    pub image_counts: Vec<u64>,
    /// Patches classified per true class.
    pub patch_counts: Vec<u64>,
    pub per_class_accuracy: Vec<f64>,
    pub overall_accuracy: f64,
    pub wall_secs: f64,
    pub config: ReportConfig,
}

impl RunReport {
    /// Derives counts and accuracies from the confusion matrix and
    /// checks the report invariants: the matrix is square with one row
    /// per label, every class has at least one test image, and all
    /// accuracies land in [0, 1] by construction.
    pub fn new(
        labels: Vec<String>,
        confusion: Vec<Vec<u64>>,
        patch_counts: Vec<u64>,
        wall_secs: f64,
        config: ReportConfig,
    ) -> Result<Self> {
        let c = labels.len();
        if c == 0 {
            return Err(Error::InvalidInput("report needs at least one class".into()));
        }
        if confusion.len() != c || confusion.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidInput(format!(
                "confusion matrix must be {c}x{c}"
            )));
        }
        if patch_counts.len() != c {
            return Err(Error::InvalidInput(format!(
                "expected {c} patch counts, got {}",
                patch_counts.len()
            )));
        }
        let image_counts: Vec<u64> = confusion.iter().map(|row| row.iter().sum()).collect();
        if let Some(empty) = image_counts.iter().position(|&n| n == 0) {
            return Err(Error::InvalidInput(format!(
                "class {:?} has no test images",
                labels[empty]
            )));
        }
        let per_class_accuracy: Vec<f64> = (0..c)
            .map(|t| confusion[t][t] as f64 / image_counts[t] as f64)
            .collect();
        let correct: u64 = (0..c).map(|t| confusion[t][t]).sum();
        let total: u64 = image_counts.iter().sum();
        Ok(Self {
            labels,
            confusion,
            image_counts,
            patch_counts,
            per_class_accuracy,
            overall_accuracy: correct as f64 / total as f64,
            wall_secs,
            config,
        })
    }

    /// Line-delimited key=value form. Floats use Rust's shortest
    /// round-trip formatting, so parsing a value back yields the exact
    /// f64 that the JSON emitter serializes.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut line = |key: &str, value: String| {
            out.push_str(key);
            out.push('=');
            out.push_str(&value);
            out.push('\n');
        };
        line("labels", self.labels.join(","));
        for (label, count) in self.labels.iter().zip(&self.image_counts) {
            line(&format!("images.{label}"), count.to_string());
        }
        for (label, count) in self.labels.iter().zip(&self.patch_counts) {
            line(&format!("patches.{label}"), count.to_string());
        }
        for (t, row) in self.confusion.iter().enumerate() {
            for (p, count) in row.iter().enumerate() {
                line(
                    &format!("confusion.{}.{}", self.labels[t], self.labels[p]),
                    count.to_string(),
                );
            }
        }
        for (label, acc) in self.labels.iter().zip(&self.per_class_accuracy) {
            line(&format!("accuracy.{label}"), acc.to_string());
        }
        line("accuracy.overall", self.overall_accuracy.to_string());
        line("wall_secs", self.wall_secs.to_string());
        line("config.model", self.config.model.clone());
        line("config.manifest", self.config.manifest.clone());
        line("config.patch_size", self.config.patch_size.to_string());
        line("config.downsample", self.config.downsample.to_string());
        line("config.lambda", self.config.lambda.to_string());
        out
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serialization");
        text.push('\n');
        text
    }
}
