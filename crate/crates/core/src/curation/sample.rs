use crate::biosignal::TsWindow;
use crate::model::FrameStack;
use crate::taxonomy::IntentLabel;
use crate::tensor::Mat;
use crate::{Error, Result};

pub const LETTERS: [char; 4] = ['A', 'B', 'C', 'D'];

#[derive(Debug, Clone, PartialEq)]
pub struct MultimodalSample {
    pub id: String,
    pub session_id: String,
    pub video: Option<FrameStack>,
    /// Mel feature matrix, `frames × mel_bins`.
    pub audio: Option<Mat>,
    pub ts: Option<TsWindow>,
    pub text_query: String,
    pub label: Option<IntentLabel>,
    pub label_distribution: Option<Vec<f64>>,
    /// Label carried by the attached time-series source; differs from `label`
    /// only in conflict items.
    pub ts_label: Option<IntentLabel>,
}

impl MultimodalSample {
    pub fn new(id: &str, session_id: &str) -> Self {
        MultimodalSample {
            id: id.to_string(),
            session_id: session_id.to_string(),
            video: None,
            audio: None,
            ts: None,
            text_query: String::new(),
            label: None,
            label_distribution: None,
            ts_label: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| Error::InvalidSample { id: self.id.clone(), reason: reason.to_string() };
        if self.video.is_none() && self.audio.is_none() && self.ts.is_none() && self.text_query.is_empty() {
            return Err(bad("no modality present"));
        }
        if let Some(d) = &self.label_distribution {
            if d.iter().any(|p| !(*p >= 0.0)) || (d.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
                return Err(bad("label distribution must be nonnegative and sum to 1"));
            }
        }
        if let Some(v) = &self.video {
            if v.data.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(bad("video values outside [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn label_name(&self) -> Option<&str> {
        self.label.as_ref().map(|l| l.name.as_str())
    }
}

/// Divides nonnegative scores by their sum.
pub fn normalize_scores(scores: &[f64]) -> Result<Vec<f64>> {
    let total: f64 = scores.iter().sum();
    if scores.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) || !(total > 0.0) {
        return Err(Error::InvalidParameter("scores must be finite, nonnegative and not all zero".into()));
    }
    Ok(scores.iter().map(|s| s / total).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct McqItem {
    pub sample: MultimodalSample,
    pub options: [IntentLabel; 4],
    pub answer_index: usize,
}

impl McqItem {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: String| Error::InvalidSample { id: self.sample.id.clone(), reason };
        for i in 0..4 {
            for j in i + 1..4 {
                if self.options[i].name == self.options[j].name {
                    return Err(bad(format!("duplicate option `{}`", self.options[i].name)));
                }
            }
        }
        if self.answer_index > 3 {
            return Err(bad(format!("answer index {}", self.answer_index)));
        }
        match &self.sample.label {
            Some(l) if *l == self.options[self.answer_index] => Ok(()),
            _ => Err(bad("options[answer_index] is not the sample label".into())),
        }
    }

    pub fn answer_letter(&self) -> char {
        LETTERS[self.answer_index]
    }

    pub fn letter_of(&self, name: &str) -> Option<char> {
        self.options.iter().position(|o| o.name == name).map(|i| LETTERS[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_validation() {
        let s = MultimodalSample::new("x", "s");
        assert!(s.validate().is_err());
        let mut s = MultimodalSample { text_query: "what?".into(), ..s };
        s.validate().unwrap();
        s.label_distribution = Some(vec![0.5, 0.6]);
        assert!(s.validate().is_err());
        s.label_distribution = Some(normalize_scores(&[1.0, 3.0, 6.0]).unwrap());
        s.validate().unwrap();
        assert_eq!(s.label_distribution.as_ref().unwrap(), &vec![0.1, 0.3, 0.6]);
        assert!(normalize_scores(&[0.0, 0.0]).is_err());
        assert!(normalize_scores(&[-1.0, 2.0]).is_err());
    }
}
