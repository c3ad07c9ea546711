//! Placeholder expansion and interleaved context assembly.

use serde::{Deserialize, Serialize};

use super::vocab::{MarkerIds, Vocab};
use crate::tensor::Mat;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Modality {
    TsUnit,
    VisionUnit,
    AudioUnit,
}

impl Modality {
    pub fn name(self) -> &'static str {
        match self {
            Modality::TsUnit => "ts",
            Modality::VisionUnit => "vision",
            Modality::AudioUnit => "audio",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProcessorOutput {
    pub token_ids: Vec<usize>,
    pub slots: Vec<(usize, Modality)>,
}

impl ProcessorOutput {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }

    pub fn count(&self, m: Modality) -> usize {
        self.slots.iter().filter(|(_, s)| *s == m).count()
    }

    pub fn is_slot(&self, pos: usize) -> bool {
        self.slots.binary_search_by_key(&pos, |(p, _)| *p).is_ok()
    }
}

/// Position of the single `start, unit, end` triple for one modality, if any.
fn locate(ids: &[usize], m: MarkerIds, modality: Modality) -> Result<Option<usize>> {
    let bad = |why: &str| Error::MalformedPlaceholder(format!("{}: {why}", modality.name()));
    let starts: Vec<usize> = ids.iter().enumerate().filter(|(_, &t)| t == m.start).map(|(i, _)| i).collect();
    let units = ids.iter().filter(|&&t| t == m.unit).count();
    let ends = ids.iter().filter(|&&t| t == m.end).count();
    match starts.as_slice() {
        [] if units == 0 && ends == 0 => Ok(None),
        [] if units > 0 => Err(bad("unit token outside start/end")),
        [] => Err(bad("end without start")),
        [s] => {
            if ends == 0 {
                return Err(bad("start without end"));
            }
            if units != 1 || ends != 1 || ids.get(s + 1) != Some(&m.unit) || ids.get(s + 2) != Some(&m.end) {
                return Err(bad("expected exactly start, unit, end in sequence"));
            }
            Ok(Some(*s))
        }
        _ => Err(bad("more than one placeholder segment")),
    }
}

/// Replaces each modality's single unit token with `count` unit slots.
pub fn expand_placeholders(
    query_ids: &[usize],
    k_ts: usize,
    m_vision: usize,
    n_audio: usize,
    vocab: &Vocab,
    max_seq_len: usize,
) -> Result<ProcessorOutput> {
    let mut plan: Vec<(usize, usize, Modality, usize)> = Vec::new();
    for (ids, count, modality) in [
        (vocab.ts_ids(), k_ts, Modality::TsUnit),
        (vocab.vision_ids(), m_vision, Modality::VisionUnit),
        (vocab.audio_ids(), n_audio, Modality::AudioUnit),
    ] {
        let found = match ids {
            Some(m) => locate(query_ids, m, modality)?.map(|s| (s + 1, m.unit)),
            None => None,
        };
        match found {
            Some((pos, unit)) => plan.push((pos, unit, modality, count)),
            None if count > 0 => {
                return Err(Error::MalformedPlaceholder(format!(
                    "{}: {count} embeddings supplied but the query has no placeholder",
                    modality.name()
                )))
            }
            None => {}
        }
    }
    plan.sort();
    let needed = query_ids.len() + plan.iter().map(|p| p.3).sum::<usize>() - plan.len();
    if needed > max_seq_len {
        return Err(Error::SequenceTooLong { needed, max: max_seq_len });
    }
    let mut token_ids = Vec::with_capacity(needed);
    let mut slots = Vec::new();
    let mut next = plan.iter().peekable();
    for (i, &t) in query_ids.iter().enumerate() {
        match next.peek() {
            Some(&&(pos, unit, modality, count)) if pos == i => {
                for _ in 0..count {
                    slots.push((token_ids.len(), modality));
                    token_ids.push(unit);
                }
                next.next();
            }
            _ => token_ids.push(t),
        }
    }
    Ok(ProcessorOutput { token_ids, slots })
}

/// Writes modality rows into their slot positions over the token embeddings.
pub fn assemble_context(
    proc: &ProcessorOutput,
    text_embeds: &Mat,
    ts_proj: Option<&Mat>,
    vision: Option<&Mat>,
    audio: Option<&Mat>,
) -> Result<Mat> {
    if text_embeds.rows != proc.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} text embedding rows for a sequence of {}",
            text_embeds.rows,
            proc.len()
        )));
    }
    let mut ctx = text_embeds.clone();
    for (modality, rows) in [(Modality::TsUnit, ts_proj), (Modality::VisionUnit, vision), (Modality::AudioUnit, audio)] {
        let expected = proc.count(modality);
        let got = rows.map_or(0, |m| m.rows);
        if expected != got {
            return Err(Error::SlotCountMismatch { modality: modality.name().to_string(), expected, got });
        }
        let Some(rows) = rows else { continue };
        if rows.cols != ctx.cols {
            return Err(Error::ShapeMismatch(format!("{} embeddings have width {}", modality.name(), rows.cols)));
        }
        for (r, (pos, _)) in proc.slots.iter().filter(|(_, m)| *m == modality).enumerate() {
            ctx.row_mut(*pos).copy_from_slice(rows.row(r));
        }
    }
    Ok(ctx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::vocab::extend_vocab;
    use crate::seed;

    fn vocab() -> Vocab {
        extend_vocab(&Vocab::base(&["predict", "window"])).unwrap()
    }

    #[test]
    fn ts_unit_expands_to_k_copies() {
        let v = vocab();
        let ts = v.ts_ids().unwrap();
        let q = v.encode("a window <|ts_start|><|ts_unit|><|ts_end|> predict");
        let out = expand_placeholders(&q, 5, 0, 0, &v, 512).unwrap();
        let s = out.token_ids.iter().position(|&t| t == ts.start).unwrap();
        assert_eq!(&out.token_ids[s + 1..s + 6], &[ts.unit; 5]);
        assert_eq!(out.token_ids[s + 6], ts.end);
        assert_eq!(out.count(Modality::TsUnit), 5);
        assert_eq!(out.len(), q.len() + 4);

        let zero = expand_placeholders(&q, 0, 0, 0, &v, 512).unwrap();
        let s = zero.token_ids.iter().position(|&t| t == ts.start).unwrap();
        assert_eq!(zero.token_ids[s + 1], ts.end);
        assert!(zero.slots.is_empty());
    }

    #[test]
    fn malformed_placeholders() {
        let v = vocab();
        for q in [
            "x <|ts_unit|> y",
            "<|ts_start|><|ts_unit|> y",
            "<|ts_start|><|ts_unit|><|ts_end|><|ts_start|><|ts_unit|><|ts_end|>",
            "<|ts_end|>",
            "<|vis_unit|>",
        ] {
            assert!(matches!(expand_placeholders(&v.encode(q), 1, 0, 0, &v, 512), Err(Error::MalformedPlaceholder(_))), "{q}");
        }
        let q = v.encode("<|ts_start|><|ts_unit|><|ts_end|>");
        assert!(matches!(expand_placeholders(&q, 600, 0, 0, &v, 512), Err(Error::SequenceTooLong { needed: 602, max: 512 })));
        assert!(expand_placeholders(&q, 1, 2, 0, &v, 512).is_err());
    }

    #[test]
    fn all_three_modalities_in_marker_order() {
        let v = vocab();
        let q = v.encode("<|aud_start|><|aud_unit|><|aud_end|> <|vis_start|><|vis_unit|><|vis_end|> <|ts_start|><|ts_unit|><|ts_end|>?");
        let out = expand_placeholders(&q, 3, 2, 4, &v, 512).unwrap();
        let kinds: Vec<Modality> = out.slots.iter().map(|s| s.1).collect();
        let mut expected = vec![Modality::AudioUnit; 4];
        expected.extend([Modality::VisionUnit; 2]);
        expected.extend([Modality::TsUnit; 3]);
        assert_eq!(kinds, expected);
        assert!(out.slots.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn assembly_places_rows_in_order() {
        let v = vocab();
        let q = v.encode("<|ts_start|><|ts_unit|><|ts_end|> window");
        let out = expand_placeholders(&q, 3, 0, 0, &v, 64).unwrap();
        let mut rng = seed::rng(1, "asm");
        let text = Mat::randn(out.len(), 4, 1.0, &mut rng);
        let ts = Mat::randn(3, 4, 1.0, &mut rng);
        let ctx = assemble_context(&out, &text, Some(&ts), None, None).unwrap();
        for (r, (pos, _)) in out.slots.iter().enumerate() {
            assert_eq!(ctx.row(*pos), ts.row(r));
        }
        assert_eq!(ctx.row(0), text.row(0));
        assert!(matches!(
            assemble_context(&out, &text, None, None, None),
            Err(Error::SlotCountMismatch { expected: 3, got: 0, .. })
        ));
        let plain = expand_placeholders(&v.encode("window"), 0, 0, 0, &v, 64).unwrap();
        let t = Mat::randn(plain.len(), 4, 1.0, &mut rng);
        assert_eq!(assemble_context(&plain, &t, None, None, None).unwrap(), t);
    }

    #[test]
    fn scrambled_rows_round_trip() {
        let v = vocab();
        let q = v.encode("<|vis_start|><|vis_unit|><|vis_end|><|ts_start|><|ts_unit|><|ts_end|>");
        let out = expand_placeholders(&q, 4, 3, 0, &v, 64).unwrap();
        let mut rng = seed::rng(2, "perm");
        let text = Mat::randn(out.len(), 3, 1.0, &mut rng);
        let ts = Mat::randn(4, 3, 1.0, &mut rng);
        let vis = Mat::randn(3, 3, 1.0, &mut rng);
        let ctx = assemble_context(&out, &text, Some(&ts), Some(&vis), None).unwrap();
        let perm = [2usize, 0, 3, 1];
        let scrambled = Mat::from_rows(&perm.iter().map(|&i| ts.row(i).to_vec()).collect::<Vec<_>>());
        let mut unscrambled = Mat::zeros(4, 3);
        for (r, &i) in perm.iter().enumerate() {
            unscrambled.row_mut(i).copy_from_slice(scrambled.row(r));
        }
        assert_eq!(assemble_context(&out, &text, Some(&unscrambled), Some(&vis), None).unwrap(), ctx);
    }
}
