use std::fmt;

use crate::curation::MultimodalSample;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModalityMask {
    pub use_video: bool,
    pub use_audio: bool,
    pub use_ts: bool,
}

impl ModalityMask {
    pub const FULL: ModalityMask = ModalityMask { use_video: true, use_audio: true, use_ts: true };

    /// The seven non-empty masks: unimodal, bi-modal, then tri-modal.
    pub const GRID: [ModalityMask; 7] = [
        ModalityMask { use_video: true, use_audio: false, use_ts: false },
        ModalityMask { use_video: false, use_audio: true, use_ts: false },
        ModalityMask { use_video: false, use_audio: false, use_ts: true },
        ModalityMask { use_video: true, use_audio: true, use_ts: false },
        ModalityMask { use_video: true, use_audio: false, use_ts: true },
        ModalityMask { use_video: false, use_audio: true, use_ts: true },
        ModalityMask::FULL,
    ];

    pub fn count(&self) -> usize {
        [self.use_video, self.use_audio, self.use_ts].iter().filter(|b| **b).count()
    }

    /// `V`, `A`, `TS` joined with `+`, e.g. `V+TS`.
    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.use_video {
            parts.push("V");
        }
        if self.use_audio {
            parts.push("A");
        }
        if self.use_ts {
            parts.push("TS");
        }
        parts.join("+")
    }

    pub fn parse(s: &str) -> Result<Self> {
        let mut m = ModalityMask { use_video: false, use_audio: false, use_ts: false };
        for part in s.split('+').map(str::trim) {
            match part.to_ascii_uppercase().as_str() {
                "V" | "VIDEO" => m.use_video = true,
                "A" | "AUDIO" => m.use_audio = true,
                "TS" => m.use_ts = true,
                _ => return Err(Error::Config(format!("unknown modality `{part}` in mask `{s}`"))),
            }
        }
        Ok(m)
    }
}

impl fmt::Display for ModalityMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Removes masked modalities; the text query is kept.
pub fn mask_sample(sample: &MultimodalSample, mask: ModalityMask) -> Result<MultimodalSample> {
    let mut s = sample.clone();
    if !mask.use_video {
        s.video = None;
    }
    if !mask.use_audio {
        s.audio = None;
    }
    if !mask.use_ts {
        s.ts = None;
    }
    if mask.count() == 0 || (s.video.is_none() && s.audio.is_none() && s.ts.is_none()) {
        return Err(Error::AllModalitiesMasked);
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::biosignal::TsWindow;
    use crate::model::FrameStack;
    use crate::tensor::Mat;

    fn quad() -> MultimodalSample {
        MultimodalSample {
            video: Some(FrameStack::new(1, 1, 1, 1, vec![0.5]).unwrap()),
            audio: Some(Mat::zeros(1, 2)),
            ts: Some(TsWindow::new(Mat::zeros(5, 3), "c", "s", 0.0)),
            text_query: "q".into(),
            ..MultimodalSample::new("x", "s")
        }
    }

    #[test]
    fn masking() {
        let q = quad();
        assert_eq!(mask_sample(&q, ModalityMask::FULL).unwrap(), q);
        let v = mask_sample(&q, ModalityMask::GRID[0]).unwrap();
        assert!(v.video.is_some() && v.audio.is_none() && v.ts.is_none());
        assert_eq!(v.text_query, "q");
        let again = mask_sample(&v, ModalityMask::parse("V+TS").unwrap()).unwrap();
        assert_eq!(again, v);
        assert!(matches!(mask_sample(&v, ModalityMask::GRID[2]), Err(Error::AllModalitiesMasked)));
        let none = ModalityMask { use_video: false, use_audio: false, use_ts: false };
        assert!(matches!(mask_sample(&q, none), Err(Error::AllModalitiesMasked)));
    }

    #[test]
    fn grid_is_complete_and_distinct() {
        let set: std::collections::HashSet<_> = ModalityMask::GRID.iter().collect();
        assert_eq!(set.len(), 7);
        assert_eq!(ModalityMask::GRID.map(|m| m.count()), [1, 1, 1, 2, 2, 2, 3]);
        for m in ModalityMask::GRID {
            assert_eq!(ModalityMask::parse(&m.label()).unwrap(), m);
        }
    }
}
