//! Simulation-level recognizers standing in for learned perception: an
//! action classifier with a configurable confusion matrix and a face oracle
//! with a configurable miss rate.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub const KNOWN_ACTIONS: [&str; 6] = ["push", "pull", "lift", "drop", "wave", "point"];
pub const UNKNOWN_ACTION: &str = "unknown";

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    pub label: String,
    /// Probability mass the confusion row puts on the returned label;
    /// absent for unknown gestures.
    pub confidence: Option<f64>,
}

impl Classification {
    pub fn is_known(&self) -> bool {
        self.label != UNKNOWN_ACTION
    }
}

/// Rows are true labels, columns predicted labels. Missing rows default to
/// the identity.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfusionMatrix {
    rows: BTreeMap<String, BTreeMap<String, f64>>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConfusionError {
    #[error("confusion row `{0}` is not one of the six known actions")]
    UnknownRow(String),
    #[error("confusion row `{row}` names unknown action `{col}`")]
    UnknownColumn { row: String, col: String },
    #[error("confusion row `{row}` sums to {sum}, expected 1")]
    NotStochastic { row: String, sum: f64 },
    #[error("confusion row `{row}` has a negative entry")]
    Negative { row: String },
}

impl ConfusionMatrix {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn with_row(mut self, truth: &str, row: &[(&str, f64)]) -> Self {
        self.rows.insert(
            truth.to_string(),
            row.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        );
        self
    }

    /// Symmetric swap between two labels with probability `p`.
    pub fn swap(a: &str, b: &str, p: f64) -> Self {
        Self::identity()
            .with_row(a, &[(a, 1.0 - p), (b, p)])
            .with_row(b, &[(b, 1.0 - p), (a, p)])
    }

    pub fn validate(&self) -> Result<(), ConfusionError> {
        for (row, cols) in &self.rows {
            if !KNOWN_ACTIONS.contains(&row.as_str()) {
                return Err(ConfusionError::UnknownRow(row.clone()));
            }
            let mut sum = 0.0;
            for (col, p) in cols {
                if !KNOWN_ACTIONS.contains(&col.as_str()) {
                    return Err(ConfusionError::UnknownColumn {
                        row: row.clone(),
                        col: col.clone(),
                    });
                }
                if *p < 0.0 {
                    return Err(ConfusionError::Negative { row: row.clone() });
                }
                sum += p;
            }
            if (sum - 1.0).abs() > 1e-9 {
                return Err(ConfusionError::NotStochastic { row: row.clone(), sum });
            }
        }
        Ok(())
    }

    pub fn probability(&self, truth: &str, predicted: &str) -> f64 {
        match self.rows.get(truth) {
            Some(row) => row.get(predicted).copied().unwrap_or(0.0),
            None => f64::from(u8::from(truth == predicted)),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ActionClassifier {
    pub confusion: ConfusionMatrix,
}

impl ActionClassifier {
    pub fn new(confusion: ConfusionMatrix) -> Self {
        Self { confusion }
    }

    /// Draws exactly one uniform sample per known gesture.
    pub fn classify<R: Rng + ?Sized>(&self, truth: &str, rng: &mut R) -> Classification {
        if !KNOWN_ACTIONS.contains(&truth) {
            return Classification {
                label: UNKNOWN_ACTION.to_string(),
                confidence: None,
            };
        }
        let label = match self.confusion.rows.get(truth) {
            None => truth.to_string(),
            Some(row) => {
                let u: f64 = rng.gen();
                let mut acc = 0.0;
                let mut pick = None;
                for (col, p) in row {
                    acc += p;
                    if u < acc {
                        pick = Some(col.clone());
                        break;
                    }
                }
                pick.or_else(|| row.keys().next_back().cloned())
                    .unwrap_or_else(|| truth.to_string())
            }
        };
        let confidence = Some(self.confusion.probability(truth, &label));
        Classification { label, confidence }
    }
}

/// Identity oracle keyed by the simulated human's identity. The first
/// encounter is always unrecognized; later ones miss with `miss_rate`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FaceOracle {
    pub miss_rate: f64,
}

impl FaceOracle {
    pub fn signature(true_name: &str) -> String {
        format!("face:{true_name}")
    }

    pub fn recognizes<R: Rng + ?Sized>(&self, seen_before: bool, rng: &mut R) -> bool {
        if !seen_before {
            return false;
        }
        rng.gen::<f64>() >= self.miss_rate
    }
}
