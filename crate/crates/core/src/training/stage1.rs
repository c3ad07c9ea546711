use std::path::Path;

use super::optim::{fusion_slots, Slot};
use super::stage::{fit, holdout, Stage, StageConfig, TrainReport, Trainee};
use crate::model::ops::{linear, linear_backward};
use crate::model::params::Linear;
use crate::model::{checkpoint, FusionModel, FusionParams, ModalInputs, Prepared};
use crate::seed;
use crate::tensor::{argmax, log_sum_exp, Mat};
use crate::{Error, Result};

/// A time-series window with its prompt (which must contain one TS segment)
/// and target class index.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage1Example {
    pub id: String,
    pub prompt_ids: Vec<usize>,
    pub ts: Mat,
    pub target: usize,
}

pub struct Stage1Outcome {
    pub model: FusionModel,
    /// Linear readout over the `<|ts_end|>` hidden state; discarded after alignment.
    pub probe: Linear,
    pub report: TrainReport,
}

fn readout_row(model: &FusionModel, prepared: &Prepared) -> Result<usize> {
    let end = model.vocab.ts_ids().ok_or_else(|| Error::MalformedPlaceholder("vocabulary has no TS tokens".into()))?.end;
    prepared
        .proc
        .token_ids
        .iter()
        .position(|&t| t == end)
        .ok_or_else(|| Error::MalformedPlaceholder("stage-1 prompt has no <|ts_end|>".into()))
}

/// Probe logits for one example (inference mode).
pub fn probe_logits(model: &FusionModel, probe: &Linear, ex: &Stage1Example) -> Result<Vec<f64>> {
    let prepared = model.prepare(&ex.prompt_ids, ModalInputs { ts: Some(&ex.ts), ..Default::default() })?;
    let (hidden, _) = model.forward_train(&prepared, None)?;
    let r = readout_row(model, &prepared)?;
    Ok(linear(&hidden.slice_rows(r, r + 1), probe).data)
}

struct Aligner<'a> {
    model: FusionModel,
    probe: Linear,
    data: &'a [Stage1Example],
    val: Vec<usize>,
}

impl Trainee for Aligner<'_> {
    type Grads = (FusionParams, Linear);
    type Snapshot = (FusionParams, Linear);

    fn zero_grads(&self) -> Self::Grads {
        (self.model.params.zeros_like(), Linear::zeros(self.probe.d_in(), self.probe.d_out()))
    }

    fn scale_grads(g: &mut Self::Grads, s: f64) {
        g.0.scale(s);
        g.1.w.scale(s);
        g.1.b.scale(s);
    }

    fn slots<'b>(&'b mut self, g: &'b Self::Grads) -> Vec<Option<Slot<'b>>> {
        let mut slots = fusion_slots(&mut self.model.params, &g.0);
        slots.push(Some(Slot { value: &mut self.probe.w.data, grad: &g.1.w.data, decay: true }));
        slots.push(Some(Slot { value: &mut self.probe.b.data, grad: &g.1.b.data, decay: false }));
        slots
    }

    fn accumulate(&self, index: usize, rng: Option<&mut seed::Rng>, g: &mut Self::Grads) -> Result<f64> {
        let ex = &self.data[index];
        let m = &self.model;
        let prepared = m.prepare(&ex.prompt_ids, ModalInputs { ts: Some(&ex.ts), ..Default::default() })?;
        let (hidden, cache) = m.forward_train(&prepared, rng)?;
        let r = readout_row(m, &prepared)?;
        let h = hidden.slice_rows(r, r + 1);
        let logits = linear(&h, &self.probe);
        if ex.target >= logits.cols {
            return Err(Error::InvalidParameter(format!("target {} outside {} probe classes", ex.target, logits.cols)));
        }
        let lse = log_sum_exp(&logits.data);
        let loss = lse - logits.data[ex.target];
        let mut d = Mat::from_vec(1, logits.cols, logits.data.iter().map(|l| (l - lse).exp()).collect());
        d.data[ex.target] -= 1.0;
        let dh = linear_backward(&h, &d, &self.probe, Some(&mut g.1));
        let mut d_hidden = Mat::zeros(hidden.rows, hidden.cols);
        d_hidden.row_mut(r).copy_from_slice(&dh.data);
        m.backward_from_hidden(&prepared, &cache, &d_hidden, &mut g.0);
        Ok(loss)
    }

    fn val_metric(&self) -> Result<f64> {
        let mut correct = 0;
        for &i in &self.val {
            let ex = &self.data[i];
            if argmax(&probe_logits(&self.model, &self.probe, ex)?) == ex.target {
                correct += 1;
            }
        }
        Ok(correct as f64 / self.val.len().max(1) as f64)
    }

    fn snapshot(&self) -> Self::Snapshot {
        (self.model.params.clone(), self.probe.clone())
    }

    fn restore(&mut self, s: Self::Snapshot) {
        self.model.params = s.0;
        self.probe = s.1;
    }
}

/// Projector alignment with a jointly trained class probe. Validation accuracy
/// of the probe drives early stopping; the best model is saved under
/// `out/aligned` when `out` is given.
pub fn train_stage1(
    model: FusionModel,
    data: &[Stage1Example],
    n_classes: usize,
    cfg: &StageConfig,
    out: Option<&Path>,
) -> Result<Stage1Outcome> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (train, val) = holdout(data.len(), cfg.val_fraction, cfg.seed);
    let mut model = model;
    model.params.set_frozen(cfg.frozen_groups.iter().copied());
    let probe = Linear::new(model.config.d_model, n_classes, &mut seed::rng(cfg.seed, "probe-init"));
    let mut t = Aligner { model, probe, data, val };
    let n_val = t.val.len();
    let mut report = fit(&mut t, &train, n_val, cfg, true)?;
    if let Some(dir) = out {
        let path = dir.join(Stage::Align.checkpoint_name());
        checkpoint::save(&path, &t.model, &format!("seed {} stage align", cfg.seed))?;
        report.checkpoints.push(path.display().to_string());
    }
    Ok(Stage1Outcome { model: t.model, probe: t.probe, report })
}
