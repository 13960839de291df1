//! Stochastic gradient descent with early stopping on development F1.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::eval::{f_score, Prf};
use crate::model::Model;
use crate::params::Gradients;
use crate::{Error, Graph, LabeledCorpus, Result, Segmentation};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Initial learning rate.
    pub eta0: f64,
    pub max_epochs: usize,
    /// Epochs without a strict dev-F1 improvement before stopping.
    pub patience: usize,
    /// Seeds the per-epoch shuffle.
    pub seed: u64,
    /// Global gradient norm bound.
    pub clip_norm: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            eta0: 0.1,
            max_epochs: 100,
            patience: 10,
            seed: 1,
            clip_norm: 5.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta0.is_finite() && self.eta0 > 0.0) {
            return Err(Error::Config(format!("eta0 must be positive, got {}", self.eta0)));
        }
        if !(self.clip_norm.is_finite() && self.clip_norm > 0.0) {
            return Err(Error::Config(format!("clip_norm must be positive, got {}", self.clip_norm)));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be positive".into()));
        }
        Ok(())
    }
}

/// `eta0 / (1 + 0.1 t)` for epoch `t` (0-based).
pub fn learning_rate(epoch: usize, eta0: f64) -> f64 {
    eta0 / (1.0 + 0.1 * epoch as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochReport {
    pub epoch: usize,
    pub mean_nll: f64,
    pub dev: Prf,
    pub learning_rate: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub epochs: Vec<EpochReport>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub best_dev: Prf,
    pub stopped_early: bool,
}

/// Decodes every sequence of `corpus` and scores it against the gold.
pub fn evaluate(model: &Model, corpus: &LabeledCorpus) -> Result<(Vec<Segmentation>, Prf)> {
    let preds = corpus
        .sequences
        .iter()
        .map(|ex| model.decode(&ex.tokens))
        .collect::<Result<Vec<_>>>()?;
    let prf = f_score(corpus, &preds)?;
    Ok((preds, prf))
}

fn check_corpus(model: &Model, corpus: &LabeledCorpus, what: &str) -> Result<()> {
    if corpus.labels != *model.labels() {
        return Err(Error::Validation(format!("{what} corpus label set differs from the model")));
    }
    corpus
        .validate(Some(model.max_segment_len()))
        .map_err(|e| Error::Validation(format!("{what}: {e}")))
}

/// Trains in place and leaves the best-on-dev parameters in `model`.
/// `observer` is called after every epoch.
pub fn train(
    model: &mut Model,
    train: &LabeledCorpus,
    dev: &LabeledCorpus,
    cfg: &TrainConfig,
    mut observer: impl FnMut(&EpochReport),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Validation("training corpus is empty".into()));
    }
    check_corpus(model, train, "train")?;
    check_corpus(model, dev, "dev")?;
    if cfg.max_epochs == 0 {
        let (_, dev_prf) = evaluate(model, dev)?;
        return Ok(TrainOutcome {
            epochs: Vec::new(),
            best_epoch: 0,
            best_dev: dev_prf,
            stopped_early: false,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut grads = Gradients::new();
    let mut reports = Vec::new();
    let mut best: Option<(usize, Prf, crate::ParamStore)> = None;
    let mut stale = 0;
    let mut stopped_early = false;

    for epoch in 0..cfg.max_epochs {
        let lr = learning_rate(epoch, cfg.eta0);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        let mut count = 0usize;
        for &i in &order {
            let ex = &train.sequences[i];
            if ex.tokens.is_empty() {
                continue;
            }
            let loss = {
                let mut g = Graph::with_params(model.params());
                let loss = model.loss(&mut g, &ex.tokens, &ex.gold)?;
                g.backward(loss)?;
                grads.zero(model.params());
                g.accumulate_into(&mut grads)?;
                g.scalar(loss)
            };
            if !loss.is_finite() {
                return Err(Error::Precondition(format!(
                    "non-finite loss on training sequence {i} in epoch {epoch}"
                )));
            }
            grads.clip_norm(model.params(), cfg.clip_norm);
            model.params_mut().sgd_step(&grads, lr);
            total += loss;
            count += 1;
        }
        let (_, dev_prf) = evaluate(model, dev)?;
        let report = EpochReport {
            epoch,
            mean_nll: if count == 0 { 0.0 } else { total / count as f64 },
            dev: dev_prf,
            learning_rate: lr,
        };
        observer(&report);
        reports.push(report);

        let improved = best.as_ref().is_none_or(|(_, b, _)| dev_prf.f1 > b.f1);
        if improved {
            best = Some((epoch, dev_prf, model.params().clone()));
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }

    let (best_epoch, best_dev, params) = best.expect("at least one epoch ran");
    *model.params_mut() = params;
    Ok(TrainOutcome {
        epochs: reports,
        best_epoch,
        best_dev,
        stopped_early,
    })
}
