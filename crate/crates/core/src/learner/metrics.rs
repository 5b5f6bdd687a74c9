use ndarray::Array2;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class_f1: Vec<f64>,
    /// Classes with no support in the mask and no predictions. They count as F1 = 0.
    pub absent_classes: Vec<usize>,
    pub evaluated: usize,
}

/// One JSON line per epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
    /// Dirichlet energy of the last hidden state on the propagation graph.
    pub hidden_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub test: Evaluation,
    pub diverged: bool,
}

impl Metrics {
    pub fn to_jsonl(&self) -> String {
        self.epochs
            .iter()
            .map(|e| serde_json::to_string(e).expect("epoch record serializes") + "\n")
            .collect()
    }
}

pub fn argmax_rows(logits: &Array2<f64>, rows: &[usize]) -> Vec<usize> {
    rows.iter()
        .map(|&i| {
            let r = logits.row(i);
            let mut best = 0;
            for c in 1..r.len() {
                if r[c] > r[best] {
                    best = c;
                }
            }
            best
        })
        .collect()
}

/// Accuracy and macro-F1 of `predicted` against `truth`.
pub fn classification_scores(predicted: &[usize], truth: &[usize], num_classes: usize) -> Evaluation {
    assert_eq!(predicted.len(), truth.len());
    let n = truth.len();
    let correct = predicted.iter().zip(truth).filter(|(p, t)| p == t).count();
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    for (&p, &t) in predicted.iter().zip(truth) {
        if p == t {
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let mut absent = Vec::new();
    let per_class_f1: Vec<f64> = (0..num_classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if denom == 0 {
                absent.push(c);
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .collect();
    let macro_f1 = if num_classes == 0 { 0.0 } else { per_class_f1.iter().sum::<f64>() / num_classes as f64 };
    Evaluation {
        accuracy: if n == 0 { 0.0 } else { correct as f64 / n as f64 },
        macro_f1,
        per_class_f1,
        absent_classes: absent,
        evaluated: n,
    }
}
