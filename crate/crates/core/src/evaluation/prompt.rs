use std::path::Path;

use crate::curation::{McqItem, MultimodalSample};
use crate::model::vocab::{AUD_END, AUD_START, AUD_UNIT, TS_END, TS_START, TS_UNIT, VIS_END, VIS_START, VIS_UNIT};
use crate::{Error, Result};

pub const DEFAULT_MCQ_TEMPLATE: &str = include_str!("../../assets/mcq_prompt.txt");
const SLOTS: [&str; 5] = ["{question}", "{A}", "{B}", "{C}", "{D}"];

/// Decision prompt with `{question}` and `{A}`–`{D}` slots.
#[derive(Debug, Clone, PartialEq)]
pub struct McqTemplate {
    text: String,
}

impl McqTemplate {
    pub fn new(text: &str) -> Result<Self> {
        for s in SLOTS {
            if text.matches(s).count() != 1 {
                return Err(Error::Config(format!("MCQ template must contain {s} exactly once")));
            }
        }
        Ok(McqTemplate { text: text.to_string() })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::new(&std::fs::read_to_string(path)?)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn render(&self, question: &str, options: [&str; 4]) -> String {
        let mut out = self.text.replace("{question}", question);
        for (slot, o) in SLOTS[1..].iter().zip(options) {
            out = out.replace(slot, o);
        }
        out
    }
}

impl Default for McqTemplate {
    fn default() -> Self {
        McqTemplate::new(DEFAULT_MCQ_TEMPLATE).expect("shipped template is valid")
    }
}

/// Placeholder segments for the modalities present, in video, audio, TS order.
pub fn modality_prefix(sample: &MultimodalSample) -> String {
    let mut s = String::new();
    if sample.video.is_some() {
        s.push_str(&format!("{VIS_START}{VIS_UNIT}{VIS_END}"));
    }
    if sample.audio.is_some() {
        s.push_str(&format!("{AUD_START}{AUD_UNIT}{AUD_END}"));
    }
    if sample.ts.is_some() {
        s.push_str(&format!("{TS_START}{TS_UNIT}{TS_END}"));
    }
    s
}

/// Full model prompt for an item: placeholders then the rendered question.
/// The sample's own text query is used when `question` is empty.
pub fn render_item(item: &McqItem, template: &McqTemplate, question: &str) -> String {
    let q = if question.is_empty() { item.sample.text_query.as_str() } else { question };
    let names = [0, 1, 2, 3].map(|i| item.options[i].name.as_str());
    format!("{}{}", modality_prefix(&item.sample), template.render(q, names))
}
