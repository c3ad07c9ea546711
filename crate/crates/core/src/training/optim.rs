//! Adam with decoupled weight decay over flat parameter slots.

use crate::model::FusionParams;

/// One parameter tensor with its gradient. `decay` selects weight decay.
pub struct Slot<'a> {
    pub value: &'a mut [f64],
    pub grad: &'a [f64],
    pub decay: bool,
}

#[derive(Debug, Clone)]
pub struct AdamW {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    step: u64,
    /// Per-slot moments; `None` until the slot is first updated, and forever
    /// for frozen slots.
    moments: Vec<Option<(Vec<f64>, Vec<f64>)>>,
}

impl AdamW {
    pub fn new(weight_decay: f64) -> Self {
        AdamW { beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay, step: 0, moments: Vec::new() }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn allocated_slots(&self) -> usize {
        self.moments.iter().filter(|m| m.is_some()).count()
    }

    /// Applies one update. `None` entries are frozen and left untouched.
    pub fn step(&mut self, slots: Vec<Option<Slot<'_>>>, lr: f64) {
        self.step += 1;
        if self.moments.len() < slots.len() {
            self.moments.resize(slots.len(), None);
        }
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (slot, state) in slots.into_iter().zip(self.moments.iter_mut()) {
            let Some(slot) = slot else { continue };
            let (m, v) = state.get_or_insert_with(|| (vec![0.0; slot.value.len()], vec![0.0; slot.value.len()]));
            let wd = if slot.decay { self.weight_decay } else { 0.0 };
            for i in 0..slot.value.len() {
                let g = slot.grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let update = (m[i] / c1) / ((v[i] / c2).sqrt() + self.eps);
                slot.value[i] -= lr * (update + wd * slot.value[i]);
            }
        }
    }
}

/// Pairs every tensor of `params` with its gradient; frozen groups map to `None`.
pub fn fusion_slots<'a>(params: &'a mut FusionParams, grads: &'a FusionParams) -> Vec<Option<Slot<'a>>> {
    let frozen = params.frozen.clone();
    params
        .tensors_mut()
        .into_iter()
        .zip(grads.tensors())
        .map(|(p, g)| {
            (!frozen.contains(&p.group)).then(|| Slot { value: &mut p.mat.data[..], grad: &g.mat.data[..], decay: p.decay })
        })
        .collect()
}

/// Global L2 norm of the non-frozen slots.
pub fn global_norm(slots: &[Option<Slot<'_>>]) -> f64 {
    slots.iter().flatten().map(|s| s.grad.iter().map(|g| g * g).sum::<f64>()).sum::<f64>().sqrt()
}
