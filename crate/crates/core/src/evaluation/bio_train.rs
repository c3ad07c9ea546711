use std::cell::Cell;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::bio::{batch_cross_entropy, BioConfig, BioModel, BioParams};
use crate::curation::{McqItem, LETTERS};
use crate::tensor::{argmax, Mat};
use crate::training::{early_stop, stratified_split, AdamW, Slot, Split, DEFAULT_FRACTIONS};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BioTrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub fractions: [f64; 3],
    pub seed: u64,
}

impl Default for BioTrainConfig {
    fn default() -> Self {
        BioTrainConfig { learning_rate: 1e-4, batch_size: 64, max_epochs: 100, patience: 10, fractions: DEFAULT_FRACTIONS, seed: 0 }
    }
}

/// Held-out indices that can be read only through [`TestSplit::read`], which
/// counts every access.
pub struct TestSplit {
    indices: Vec<usize>,
    reads: Cell<usize>,
}

impl TestSplit {
    pub fn new(indices: Vec<usize>) -> Self {
        TestSplit { indices, reads: Cell::new(0) }
    }

    pub fn read(&self) -> &[usize] {
        self.reads.set(self.reads.get() + 1);
        &self.indices
    }

    pub fn reads(&self) -> usize {
        self.reads.get()
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BioEpoch {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BioReport {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub epochs: Vec<BioEpoch>,
    pub best_epoch: usize,
    pub test_accuracy: f64,
    pub test_indices: Vec<usize>,
    pub test_predictions: Vec<usize>,
    pub test_logits: Vec<Vec<f64>>,
    pub test_reads: usize,
}

fn accuracy(model: &BioModel, windows: &[Mat], labels: &[usize], idx: &[usize]) -> Result<(f64, Vec<usize>, Vec<Vec<f64>>)> {
    let mut preds = Vec::with_capacity(idx.len());
    let mut logits = Vec::with_capacity(idx.len());
    for &i in idx {
        let l = model.predict(&windows[i])?;
        preds.push(argmax(&l));
        logits.push(l);
    }
    let hits = idx.iter().zip(&preds).filter(|(&i, &p)| labels[i] == p).count();
    Ok((hits as f64 / idx.len().max(1) as f64, preds, logits))
}

fn slots<'a>(p: &'a mut BioParams, g: &'a BioParams) -> Vec<Option<Slot<'a>>> {
    let decay: Vec<bool> = p.tensors().iter().map(|t| t.1).collect();
    p.tensors_mut()
        .into_iter()
        .zip(g.tensors())
        .zip(decay)
        .map(|((pt, gt), decay)| Some(Slot { value: &mut pt.1.data[..], grad: &gt.2.data[..], decay }))
        .collect()
}

/// Stratified split, Adam training with early stopping on validation
/// accuracy, then a single evaluation of the best model on the test split.
pub fn train_bio_baseline(
    windows: &[Mat],
    labels: &[usize],
    cfg: &BioConfig,
    tcfg: &BioTrainConfig,
) -> Result<(BioModel, BioReport, Split)> {
    if windows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if windows.len() != labels.len() {
        return Err(Error::ShapeMismatch(format!("{} windows, {} labels", windows.len(), labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= cfg.n_classes) {
        return Err(Error::InvalidParameter(format!("label {bad} outside {} classes", cfg.n_classes)));
    }
    if tcfg.batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    let ids: Vec<String> = (0..windows.len()).map(|i| format!("window-{i}")).collect();
    let keyed: Vec<(&str, Option<usize>)> = ids.iter().map(String::as_str).zip(labels.iter().map(|&l| Some(l))).collect();
    let split = stratified_split(&keyed, tcfg.fractions, tcfg.seed)?;
    if split.train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let test = TestSplit::new(split.test.clone());
    let val_idx = if split.val.is_empty() { split.train.clone() } else { split.val.clone() };

    let mut model = BioModel::init(cfg.clone(), tcfg.seed)?;
    let mut opt = AdamW::new(0.0);
    let mut history = Vec::new();
    let mut epochs = Vec::new();
    let mut best = model.clone();
    for epoch in 1..=tcfg.max_epochs {
        let mut order = split.train.clone();
        order.shuffle(&mut seed::rng(tcfg.seed, &format!("bio/order/{epoch}")));
        let mut batches: Vec<&[usize]> = order.chunks(tcfg.batch_size).collect();
        // batch statistics need two rows
        if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
            batches.pop();
            let n = batches.len();
            batches[n - 1] = &order[(n - 1) * tcfg.batch_size..];
        }
        let mut loss_sum = 0.0;
        for (k, batch) in batches.iter().enumerate() {
            let xs: Vec<&Mat> = batch.iter().map(|&i| &windows[i]).collect();
            let ys: Vec<usize> = batch.iter().map(|&i| labels[i]).collect();
            let mut rng = seed::rng(tcfg.seed, &format!("bio/dropout/{epoch}/{k}"));
            let (logits, cache) = model.forward(&xs, Some(&mut rng))?;
            let (loss, d) = batch_cross_entropy(&logits, &ys);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss(k));
            }
            loss_sum += loss * batch.len() as f64;
            let mut g = model.params.zeros_like();
            model.backward(&cache, &d, &mut g);
            model.update_running(&cache);
            opt.step(slots(&mut model.params, &g), tcfg.learning_rate);
        }
        let (val_acc, _, _) = accuracy(&model, windows, labels, &val_idx)?;
        history.push(val_acc);
        epochs.push(BioEpoch { epoch, train_loss: loss_sum / split.train.len() as f64, val_accuracy: val_acc });
        log::debug!("bio epoch {epoch}: val accuracy {val_acc:.4}");
        let (stop, best_epoch) = early_stop(&history, tcfg.patience);
        if best_epoch == epoch {
            best = model.clone();
        }
        if stop {
            break;
        }
    }
    let (_, best_epoch) = early_stop(&history, tcfg.patience);
    let model = best;
    let test_idx = test.read().to_vec();
    let (test_accuracy, test_predictions, test_logits) = accuracy(&model, windows, labels, &test_idx)?;
    let report = BioReport {
        n_train: split.train.len(),
        n_val: split.val.len(),
        n_test: test.len(),
        epochs,
        best_epoch,
        test_accuracy,
        test_indices: test_idx,
        test_predictions,
        test_logits,
        test_reads: test.reads(),
    };
    Ok((model, report, split))
}

/// Letter of the option whose label name equals `predicted`.
pub fn bio_pred_to_option(predicted: &str, item: &McqItem) -> Option<char> {
    item.options.iter().position(|o| o.name == predicted).map(|i| LETTERS[i])
}
