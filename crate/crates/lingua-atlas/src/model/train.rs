//! Mini-batch Adam training loop with early stopping.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{
    loss_and_grad, write_checkpoint, Checkpoint, ClassifierConfig, ClassifierState,
    FeaturizedCorpus, ModelError,
};
use crate::dsp::MelSpectrogram;

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub test_accuracy: f64,
}

#[derive(Debug)]
pub struct TrainOutcome {
    pub state: ClassifierState,
    pub class_ids: Vec<crate::corpus::LanguageId>,
    pub history: Vec<EpochStats>,
}

impl TrainOutcome {
    pub fn into_checkpoint(self) -> Checkpoint {
        Checkpoint {
            state: self.state,
            class_ids: self.class_ids,
        }
    }
}

/// Accuracy of argmax classification over a test split; logit ties resolve
/// to the lowest class index.
pub fn evaluate(
    state: &ClassifierState,
    split: &[(usize, MelSpectrogram)],
) -> Result<f64, ModelError> {
    if split.is_empty() {
        return Err(ModelError::EmptySplit("test"));
    }
    let mut correct = 0usize;
    for (class, spec) in split {
        let trace = super::forward(state, spec)?;
        let mut best = 0usize;
        for (idx, &v) in trace.logits.iter().enumerate() {
            if v > trace.logits[best] {
                best = idx;
            }
        }
        if best == *class {
            correct += 1;
        }
    }
    Ok(correct as f64 / split.len() as f64)
}

/// Shuffled mini-batch Adam, deterministic for a fixed config seed.
///
/// Batches are buckets of similar-length utterances (shuffle, then a stable
/// sort by frame count). A checkpoint is written to `checkpoint_path` after
/// every epoch. Training stops early once test accuracy has not improved for
/// `config.plateau_epochs` consecutive epochs.
pub fn train(
    config: &ClassifierConfig,
    corpus: &FeaturizedCorpus,
    checkpoint_path: Option<&Path>,
) -> Result<TrainOutcome, ModelError> {
    config.validate()?;
    if corpus.n_classes() != config.n_classes {
        return Err(ModelError::Config(format!(
            "corpus has {} languages but config declares {} classes",
            corpus.n_classes(),
            config.n_classes
        )));
    }
    if corpus.train.is_empty() {
        return Err(ModelError::EmptySplit("train"));
    }
    if corpus.test.is_empty() {
        return Err(ModelError::EmptySplit("test"));
    }
    let mut seen = vec![false; config.n_classes];
    for (class, spec) in corpus.train.iter().chain(&corpus.test) {
        if *class >= config.n_classes {
            return Err(ModelError::ClassOutOfRange {
                class: *class,
                n_classes: config.n_classes,
            });
        }
        if spec.n_bins() != config.input_dim {
            return Err(ModelError::ShapeMismatch {
                expected: config.input_dim,
                got: spec.n_bins(),
            });
        }
    }
    for (class, _) in &corpus.train {
        seen[*class] = true;
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(ModelError::ClassMissingFromTrain(
            corpus.class_ids[missing].to_string(),
        ));
    }

    let mut state = ClassifierState::init(config)?;
    let mut rng = ChaCha20Rng::seed_from_u64(config.seed.wrapping_add(0x5eed));
    let mut history = Vec::new();
    let mut best_accuracy = f64::NEG_INFINITY;
    let mut epochs_since_best = 0usize;

    for epoch in 1..=config.max_epochs {
        let mut order: Vec<usize> = (0..corpus.train.len()).collect();
        order.shuffle(&mut rng);
        order.sort_by_key(|&idx| corpus.train[idx].1.n_frames());

        let mut loss_sum = 0.0;
        for (batch_idx, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<(&MelSpectrogram, usize)> = chunk
                .iter()
                .map(|&idx| {
                    let (class, spec) = &corpus.train[idx];
                    (spec, *class)
                })
                .collect();
            let (loss, grads) = loss_and_grad(&state, &batch)?;
            if !loss.is_finite() {
                return Err(ModelError::NonFinite {
                    epoch,
                    batch: batch_idx,
                });
            }
            state.adam_step(&grads).map_err(|_| ModelError::NonFinite {
                epoch,
                batch: batch_idx,
            })?;
            debug_assert!(state.params.all_finite());
            loss_sum += loss * batch.len() as f64;
        }

        let train_loss = loss_sum / corpus.train.len() as f64;
        let test_accuracy = evaluate(&state, &corpus.test)?;
        history.push(EpochStats {
            epoch,
            train_loss,
            test_accuracy,
        });
        if let Some(path) = checkpoint_path {
            let ckpt = Checkpoint {
                state: state.clone(),
                class_ids: corpus.class_ids.clone(),
            };
            write_checkpoint(&ckpt, path)?;
        }

        if test_accuracy > best_accuracy + 1e-12 {
            best_accuracy = test_accuracy;
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= config.plateau_epochs {
                break;
            }
        }
    }

    Ok(TrainOutcome {
        state,
        class_ids: corpus.class_ids.clone(),
        history,
    })
}
