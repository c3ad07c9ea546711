use std::fmt::Write as _;

use super::window::TsWindow;

/// Fixed 4-decimal rendering (ties to even), with `-0.0000` folded to `0.0000`.
pub fn fmt4(x: f64) -> String {
    let s = format!("{x:.4}");
    if s == "-0.0000" {
        "0.0000".to_string()
    } else {
        s
    }
}

/// Textual description of a window for text-only injection: shape, mean
/// absolute magnitude, mean absolute first difference, then per-channel
/// statistics for the first eight channels.
pub fn summarize_ts(window: &TsWindow) -> String {
    let m = &window.values;
    let (rows, cols) = m.shape();
    let mean_abs = if m.is_empty() { 0.0 } else { m.data.iter().map(|v| v.abs()).sum::<f64>() / m.len() as f64 };
    let diff_abs = |c: usize| -> f64 { (1..rows).map(|t| (m.at(t, c) - m.at(t - 1, c)).abs()).sum() };
    let n_diff = rows.saturating_sub(1) * cols;
    let mean_delta = if n_diff == 0 { 0.0 } else { (0..cols).map(diff_abs).sum::<f64>() / n_diff as f64 };

    let mut out = format!("Time-series array of shape ({rows}, {cols}).\n");
    let _ = writeln!(out, "Mean absolute magnitude: {}.", fmt4(mean_abs));
    let _ = writeln!(out, "Mean absolute temporal change: {}.", fmt4(mean_delta));
    for c in 0..cols.min(8) {
        let col: Vec<f64> = (0..rows).map(|t| m.at(t, c)).collect();
        let n = rows.max(1) as f64;
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let min = col.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = col.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let delta = if rows > 1 { diff_abs(c) / (rows - 1) as f64 } else { 0.0 };
        let _ = writeln!(
            out,
            "Channel {}: mean {}, std {}, min {}, max {}, mean change {}.",
            c + 1,
            fmt4(mean),
            fmt4(var.sqrt()),
            fmt4(if rows == 0 { 0.0 } else { min }),
            fmt4(if rows == 0 { 0.0 } else { max }),
            fmt4(delta)
        );
    }
    out
}
