use std::f64::consts::PI;

pub fn warmup_steps(total_steps: usize, warmup_frac: f64) -> usize {
    ((warmup_frac * total_steps as f64).ceil() as usize).min(total_steps)
}

/// Linear warmup to `base_lr`, then cosine decay to zero at `total_steps`.
pub fn cosine_warmup_lr(step: usize, total_steps: usize, base_lr: f64, warmup_frac: f64) -> f64 {
    let total = total_steps.max(1);
    let step = step.min(total);
    if step == total {
        return 0.0;
    }
    let w = warmup_steps(total, warmup_frac);
    if step < w {
        return base_lr * step as f64 / w as f64;
    }
    let progress = (step - w) as f64 / (total - w) as f64;
    base_lr * 0.5 * (1.0 + (PI * progress).cos())
}
