/// First epoch (1-based) achieving the maximum.
pub fn best_epoch(history: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in history.iter().enumerate() {
        if v > history[best] {
            best = i;
        }
    }
    best + 1
}

/// Stops once `patience` consecutive epochs (at least one) have passed without
/// a strict improvement over the best value.
pub fn early_stop(history: &[f64], patience: usize) -> (bool, usize) {
    if history.is_empty() {
        return (false, 0);
    }
    let best = best_epoch(history);
    let streak = history.len() - best;
    (streak >= patience.max(1), best)
}
