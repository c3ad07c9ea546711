use crate::{Error, Result};

pub const DEFAULT_T_OBS: f64 = 6.0;
const PRE_FRACTION: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipWindow {
    pub anchor_s: f64,
    pub start_s: f64,
    pub end_s: f64,
    pub t_obs_s: f64,
    /// Moved to stay inside the media (width preserved).
    pub shifted: bool,
    /// Media shorter than the window: the window is the whole media.
    pub truncated: bool,
}

/// Window `[anchor − 0.85·T, anchor + 0.15·T]`, shifted into `[0, duration]`
/// or truncated when the media is shorter than `T`.
pub fn clip_window(anchor_s: f64, t_obs_s: f64, media_duration_s: f64) -> Result<ClipWindow> {
    if !(t_obs_s > 0.0) {
        return Err(Error::InvalidParameter(format!("t_obs {t_obs_s} must be positive")));
    }
    if !(0.0..=media_duration_s).contains(&anchor_s) {
        return Err(Error::AnchorOutOfRange { anchor: anchor_s, duration: media_duration_s });
    }
    let start = anchor_s - PRE_FRACTION * t_obs_s;
    let end = start + t_obs_s;
    let mut w = ClipWindow { anchor_s, start_s: start, end_s: end, t_obs_s, shifted: false, truncated: false };
    if media_duration_s < t_obs_s {
        w.start_s = 0.0;
        w.end_s = media_duration_s;
        w.truncated = true;
    } else if start < 0.0 {
        w.start_s = 0.0;
        w.end_s = t_obs_s;
        w.shifted = true;
    } else if end > media_duration_s {
        w.end_s = media_duration_s;
        w.start_s = media_duration_s - t_obs_s;
        w.shifted = true;
    }
    Ok(w)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SamplingPlan {
    pub duration_s: f64,
    pub coarse: Vec<f64>,
    pub rescans: Vec<Vec<f64>>,
}

const MAX_COARSE: usize = 16;
const COARSE_SPACING: f64 = 1.5;
const GAP_THRESHOLD: f64 = 2.0;
const RESCAN_SPACING: f64 = 0.5;
const DENSE_HALF_SPAN: f64 = 2.0;
const DENSE_SPACING: f64 = 0.2;

fn tidy(t: f64) -> f64 {
    (t * 1e9).round() / 1e9
}

/// Coarse frames at `max(1.5, d/16)` spacing (at most 16), plus 0.5 s rescans
/// inside every gap wider than 2 s, the tail gap included.
pub fn plan_sampling(media_duration_s: f64) -> Result<SamplingPlan> {
    if !(media_duration_s > 0.0) || !media_duration_s.is_finite() {
        return Err(Error::NonPositiveDuration(media_duration_s));
    }
    let n = MAX_COARSE.min((media_duration_s / COARSE_SPACING).ceil() as usize).max(1);
    let spacing = COARSE_SPACING.max(media_duration_s / MAX_COARSE as f64);
    let coarse: Vec<f64> = (0..n).map(|i| tidy(i as f64 * spacing)).collect();
    let mut bounds = coarse.clone();
    bounds.push(media_duration_s);
    let mut rescans = Vec::new();
    for pair in bounds.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b - a > GAP_THRESHOLD {
            let fill: Vec<f64> = (1..)
                .map(|j| tidy(a + j as f64 * RESCAN_SPACING))
                .take_while(|&t| t < b - 1e-9)
                .collect();
            rescans.push(fill);
        }
    }
    Ok(SamplingPlan { duration_s: media_duration_s, coarse, rescans })
}

impl SamplingPlan {
    /// Timestamps at 0.2 s spacing within 2 s either side of `anchor_s`.
    pub fn dense(&self, anchor_s: f64) -> Result<Vec<f64>> {
        if !(0.0..=self.duration_s).contains(&anchor_s) {
            return Err(Error::AnchorOutOfRange { anchor: anchor_s, duration: self.duration_s });
        }
        let lo = (anchor_s - DENSE_HALF_SPAN).max(0.0);
        let hi = (anchor_s + DENSE_HALF_SPAN).min(self.duration_s);
        Ok((0..).map(|j| tidy(lo + j as f64 * DENSE_SPACING)).take_while(|&t| t <= hi + 1e-9).collect())
    }

    pub fn all_timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        self.coarse.iter().chain(self.rescans.iter().flatten()).copied()
    }
}
