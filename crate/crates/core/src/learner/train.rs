use ndarray::Array2;

use super::metrics::{argmax_rows, classification_scores, EpochRecord, Evaluation, Metrics};
use super::model::{cross_entropy, forward, forward_tape, loss_and_gradients, seeded_rng, Batch, ModelParams, Problem, TrainConfig};
use super::Adam;
use crate::graph::{mask_indices, SparseMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the best-validation epoch.
    pub params: ModelParams,
    pub metrics: Metrics,
}

/// Full-batch training with best-validation-accuracy checkpointing.
///
/// A non-finite loss stops the run; the best parameters seen so far are
/// returned with `metrics.diverged` set.
pub fn train(problem: &Problem, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let batch = Batch::from_mask(&problem.train_mask);
    if batch.rows().is_empty() {
        return Err(Error::EmptyTrainMask);
    }
    let val_rows = labeled_rows(problem, &problem.val_mask);
    let select_rows = if val_rows.is_empty() { batch.rows().to_vec() } else { val_rows.clone() };

    let mut rng = seeded_rng(config.seed);
    let mut params = ModelParams::init(problem, config, &mut rng);
    let mut adam = Adam::new(&params);
    let mut best = params.clone();
    let mut best_epoch = 0;
    let mut best_val = f64::NEG_INFINITY;
    let mut epochs = Vec::with_capacity(config.epochs_max);
    let mut diverged = false;

    for epoch in 0..config.epochs_max {
        let step = loss_and_gradients(&params, problem, &batch, config, Some(&mut rng));
        let (loss, grads) = match step {
            Ok(v) if v.0.is_finite() && v.1.is_finite() => v,
            Ok(_) => {
                log::warn!("non-finite loss at epoch {epoch}; keeping best checkpoint");
                diverged = true;
                break;
            }
            Err(e) if e.is_numerical() => {
                log::warn!("{e} at epoch {epoch}; keeping best checkpoint");
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        adam.step(&mut params, &grads, config.lr);

        let (logits, hidden_energy) = match eval_pass(&params, problem, config) {
            Ok(v) => v,
            Err(e) if e.is_numerical() => {
                diverged = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let train_accuracy = accuracy(&logits, problem, batch.rows());
        let (val_loss, val_accuracy) = if val_rows.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            (cross_entropy(&logits, &problem.labels, &val_rows)?.0, accuracy(&logits, problem, &val_rows))
        };
        let selection = accuracy(&logits, problem, &select_rows);
        if selection > best_val {
            best_val = selection;
            best_epoch = epoch;
            best = params.clone();
        }
        epochs.push(EpochRecord { epoch, train_loss: loss, train_accuracy, val_loss, val_accuracy, hidden_energy });
    }

    let test = evaluate(&best, problem, &problem.test_mask, config)?;
    Ok(TrainOutcome {
        params: best,
        metrics: Metrics { epochs, best_epoch, best_val_accuracy: best_val.max(0.0), test, diverged },
    })
}

/// Accuracy and macro-F1 over labeled rows of `mask` (first `N` rows only).
pub fn evaluate(params: &ModelParams, problem: &Problem, mask: &[bool], config: &TrainConfig) -> Result<Evaluation> {
    let logits = forward(params, problem, config)?;
    let rows = labeled_rows(problem, mask);
    let predicted = argmax_rows(&logits, &rows);
    let truth: Vec<usize> = rows.iter().map(|&i| problem.labels[i].expect("labeled row")).collect();
    Ok(classification_scores(&predicted, &truth, problem.num_classes))
}

fn labeled_rows(problem: &Problem, mask: &[bool]) -> Vec<usize> {
    mask_indices(mask).into_iter().filter(|&i| i < problem.num_base && problem.labels[i].is_some()).collect()
}

fn accuracy(logits: &Array2<f64>, problem: &Problem, rows: &[usize]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    let predicted = argmax_rows(logits, rows);
    let hits = rows.iter().zip(&predicted).filter(|(&i, &p)| problem.labels[i] == Some(p)).count();
    hits as f64 / rows.len() as f64
}

fn eval_pass(params: &ModelParams, problem: &Problem, config: &TrainConfig) -> Result<(Array2<f64>, f64)> {
    let f = forward_tape(params, problem, config, None)?;
    let hidden = f.propagated[f.propagated.len().saturating_sub(2)];
    let energy = operator_energy(&problem.propagation, f.tape.value(hidden));
    Ok((f.tape.value(f.logits).clone(), energy))
}

/// `½ Σ_{i≠j} p_ij ‖h_i − h_j‖²` over the stored entries of the propagation operator.
pub fn operator_energy(p: &SparseMatrix, h: &Array2<f64>) -> f64 {
    let mut e = 0.0;
    for i in 0..p.nrows {
        for (j, w) in p.row(i) {
            if i != j {
                let d: f64 = h.row(i).iter().zip(h.row(j)).map(|(a, b)| (a - b) * (a - b)).sum();
                e += 0.5 * w * d;
            }
        }
    }
    e
}
