use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const DENOISE_SUPPRESSION: f64 = 0.85;
const RETAIN_ABOVE: f64 = 0.10;
const DISCARD_BELOW: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Retain,
    Discard,
    DenoiseRetain,
    DenoiseDiscard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateDecision {
    pub verdict: Verdict,
    pub pre_score: f64,
    pub post_score: Option<f64>,
}

impl GateDecision {
    pub fn retained(&self) -> bool {
        matches!(self.verdict, Verdict::Retain | Verdict::DenoiseRetain)
    }
}

/// Scores above 0.10 are kept, below 0.03 dropped; the band in between is
/// denoised (suppression 0.85), rescored and kept when the new score is ≥ 0.03.
pub fn gate_audio<C, D, S>(pre_score: f64, clip: &C, denoiser: D, rescore: S) -> Result<GateDecision>
where
    D: FnOnce(&C, f64) -> Result<C>,
    S: FnOnce(&C) -> Result<f64>,
{
    if !(0.0..=1.0).contains(&pre_score) {
        return Err(Error::InvalidParameter(format!("pre-score {pre_score} outside [0, 1]")));
    }
    if pre_score > RETAIN_ABOVE {
        return Ok(GateDecision { verdict: Verdict::Retain, pre_score, post_score: None });
    }
    if pre_score < DISCARD_BELOW {
        return Ok(GateDecision { verdict: Verdict::Discard, pre_score, post_score: None });
    }
    let cleaned = denoiser(clip, DENOISE_SUPPRESSION)?;
    let post = rescore(&cleaned)?;
    if !post.is_finite() {
        return Err(Error::ScorerFailure(format!("rescore returned {post}")));
    }
    let verdict = if post >= DISCARD_BELOW { Verdict::DenoiseRetain } else { Verdict::DenoiseDiscard };
    Ok(GateDecision { verdict, pre_score, post_score: Some(post) })
}
