//! The assembled model: encoders, processor and transformer behind one type,
//! plus greedy and temperature decoding.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::FusionConfig;
use super::encoders::{
    audio_backward, audio_encode, project_ts, ts_encode, ts_encode_backward, vision_backward, vision_encode,
    FrameStack, TsCache,
};
use super::ops::linear_backward;
use super::params::{FusionParams, Group};
use super::processor::{assemble_context, expand_placeholders, Modality, ProcessorOutput};
use super::transformer::{backward_hidden, forward_hidden, lm_logits, TransformerCache};
use super::vocab::{extend_vocab, Vocab};
use crate::seed;
use crate::tensor::{argmax, axpy, softmax_in_place, Mat};
use crate::{Error, Result};

/// Optional modality payloads for one sample.
#[derive(Debug, Clone, Copy, Default)]
pub struct ModalInputs<'a> {
    pub ts: Option<&'a Mat>,
    pub video: Option<&'a FrameStack>,
    pub audio: Option<&'a Mat>,
}

pub struct TsEncoded {
    pub hidden: Mat,
    pub projected: Mat,
    cache: TsCache,
}

#[derive(Default)]
pub struct Encoded {
    pub ts: Option<TsEncoded>,
    /// Embedding rows and the patch features they came from.
    pub vision: Option<(Mat, Mat)>,
    /// Embedding rows and the mel input.
    pub audio: Option<(Mat, Mat)>,
}

impl Encoded {
    pub fn counts(&self) -> (usize, usize, usize) {
        (
            self.ts.as_ref().map_or(0, |t| t.projected.rows),
            self.vision.as_ref().map_or(0, |v| v.0.rows),
            self.audio.as_ref().map_or(0, |a| a.0.rows),
        )
    }
}

/// A processed prompt with its assembled context.
pub struct Prepared {
    pub proc: ProcessorOutput,
    pub encoded: Encoded,
    pub context: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionModel {
    pub config: FusionConfig,
    pub vocab: Vocab,
    pub params: FusionParams,
}

impl FusionModel {
    /// Fresh parameters for `vocab` (the config's vocab size is overwritten).
    pub fn init(mut config: FusionConfig, vocab: Vocab, seed: u64) -> Result<Self> {
        config.vocab_size = vocab.len();
        let params = FusionParams::init(&config, &mut seed::rng(seed, "model-init"))?;
        Ok(FusionModel { config, vocab, params })
    }

    /// Vocabulary surgery: appends the time-series control tokens and grows
    /// the embedding and output head.
    pub fn with_ts_tokens(self, seed: u64) -> Result<Self> {
        let new_vocab = extend_vocab(&self.vocab)?;
        let params = resize_embeddings(&self.params, &self.vocab, &new_vocab, seed)?;
        let config = FusionConfig { vocab_size: new_vocab.len(), ..self.config };
        Ok(FusionModel { config, vocab: new_vocab, params })
    }

    pub fn encode(&self, inputs: ModalInputs<'_>) -> Result<Encoded> {
        let ts = match inputs.ts {
            Some(w) => {
                let (hidden, cache) = ts_encode(w, &self.params, self.config.ts.pool)?;
                let projected = project_ts(&hidden, &self.params)?;
                Some(TsEncoded { hidden, projected, cache })
            }
            None => None,
        };
        let vision = inputs.video.map(|v| vision_encode(v, &self.params, self.config.vision.patch)).transpose()?;
        let audio = inputs.audio.map(|a| audio_encode(a, &self.params).map(|e| (e, a.clone()))).transpose()?;
        Ok(Encoded { ts, vision, audio })
    }

    pub fn token_embeddings(&self, ids: &[usize]) -> Result<Mat> {
        let d = self.config.d_model;
        let mut m = Mat::zeros(ids.len(), d);
        for (i, &t) in ids.iter().enumerate() {
            if t >= self.params.tok_emb.rows {
                return Err(Error::ShapeMismatch(format!("token id {t} outside embedding table")));
            }
            m.row_mut(i).copy_from_slice(self.params.tok_emb.row(t));
        }
        Ok(m)
    }

    /// Expands placeholders in `prompt_ids` and assembles the context.
    pub fn prepare(&self, prompt_ids: &[usize], inputs: ModalInputs<'_>) -> Result<Prepared> {
        let encoded = self.encode(inputs)?;
        let (k, m, n) = encoded.counts();
        let proc = expand_placeholders(prompt_ids, k, m, n, &self.vocab, self.config.max_seq_len)?;
        let text = self.token_embeddings(&proc.token_ids)?;
        let context = assemble_context(
            &proc,
            &text,
            encoded.ts.as_ref().map(|t| &t.projected),
            encoded.vision.as_ref().map(|v| &v.0),
            encoded.audio.as_ref().map(|a| &a.0),
        )?;
        Ok(Prepared { proc, encoded, context })
    }

    pub fn prepare_text(&self, prompt: &str, inputs: ModalInputs<'_>) -> Result<Prepared> {
        self.prepare(&self.vocab.encode(prompt), inputs)
    }

    /// Appends plain tokens to a prepared context.
    pub fn extend(&self, prepared: &mut Prepared, ids: &[usize]) -> Result<()> {
        let extra = self.token_embeddings(ids)?;
        let needed = prepared.context.rows + ids.len();
        if needed > self.config.max_seq_len {
            return Err(Error::SequenceTooLong { needed, max: self.config.max_seq_len });
        }
        prepared.context.data.extend_from_slice(&extra.data);
        prepared.context.rows += ids.len();
        prepared.proc.token_ids.extend_from_slice(ids);
        Ok(())
    }

    /// Routes the context gradient to token embeddings and, for trainable
    /// groups, back through the projector and encoders.
    pub fn backward_context(&self, prepared: &Prepared, d_ctx: &Mat, grads: &mut FusionParams) {
        let p = &self.params;
        let proc = &prepared.proc;
        if p.trainable(Group::TokenEmbeddings) {
            for (i, &t) in proc.token_ids.iter().enumerate() {
                if !proc.is_slot(i) {
                    axpy(1.0, d_ctx.row(i), grads.tok_emb.row_mut(t));
                }
            }
        }
        let gather = |m: Modality| {
            let rows: Vec<Vec<f64>> =
                proc.slots.iter().filter(|(_, s)| *s == m).map(|(pos, _)| d_ctx.row(*pos).to_vec()).collect();
            Mat::from_vec(rows.len(), d_ctx.cols, rows.concat())
        };
        if let Some(ts) = &prepared.encoded.ts {
            let need_proj = p.trainable(Group::TsProjector);
            let need_enc = p.trainable(Group::TsEncoder);
            if need_proj || need_enc {
                let d_proj = gather(Modality::TsUnit);
                let d_hidden =
                    linear_backward(&ts.hidden, &d_proj, &p.ts_proj, need_proj.then_some(&mut grads.ts_proj));
                if need_enc {
                    ts_encode_backward(&d_hidden, &ts.cache, p, grads);
                }
            }
        }
        if let Some((_, feats)) = &prepared.encoded.vision {
            if p.trainable(Group::VisionEncoder) {
                vision_backward(feats, &gather(Modality::VisionUnit), grads);
            }
        }
        if let Some((_, mel)) = &prepared.encoded.audio {
            if p.trainable(Group::AudioEncoder) {
                audio_backward(mel, &gather(Modality::AudioUnit), grads);
            }
        }
    }

    /// Training-mode forward to the final hidden states; dropout uses `rng`
    /// when the configured rate is positive.
    pub fn forward_train(&self, prepared: &Prepared, rng: Option<&mut seed::Rng>) -> Result<(Mat, TransformerCache)> {
        let dropout = rng.map(|r| (self.config.dropout, r));
        forward_hidden(&self.config, &self.params, &prepared.context, dropout)
    }

    pub fn backward_from_hidden(&self, prepared: &Prepared, cache: &TransformerCache, d_hidden: &Mat, grads: &mut FusionParams) {
        let d_ctx = backward_hidden(&self.params, &self.config, cache, d_hidden, grads);
        self.backward_context(prepared, &d_ctx, grads);
    }

    /// Backpropagates `d_logits` through the head (rows may be a subset given
    /// by `rows`, in order) and the rest of the model.
    pub fn backward_from_logits(
        &self,
        prepared: &Prepared,
        cache: &TransformerCache,
        hidden: &Mat,
        rows: &[usize],
        d_logits: &Mat,
        grads: &mut FusionParams,
    ) {
        let h = Mat::from_vec(rows.len(), hidden.cols, rows.iter().flat_map(|&r| hidden.row(r).to_vec()).collect());
        let train_head = self.params.trainable(Group::LmHead);
        let dh = linear_backward(&h, d_logits, &self.params.lm_head, train_head.then_some(&mut grads.lm_head));
        let mut d_hidden = Mat::zeros(hidden.rows, hidden.cols);
        for (k, &r) in rows.iter().enumerate() {
            axpy(1.0, dh.row(k), d_hidden.row_mut(r));
        }
        self.backward_from_hidden(prepared, cache, &d_hidden, grads);
    }

    /// Logits for the last position of a context.
    pub fn next_logits(&self, context: &Mat) -> Result<Vec<f64>> {
        let (y, _) = forward_hidden::<rand_chacha::ChaCha8Rng>(&self.config, &self.params, context, None)?;
        let last = y.slice_rows(y.rows - 1, y.rows);
        Ok(lm_logits(&self.params, &last).data)
    }

    fn generate(
        &self,
        prepared: &Prepared,
        max_new_tokens: usize,
        mut pick: impl FnMut(&[f64]) -> usize,
    ) -> Result<String> {
        if max_new_tokens == 0 {
            return Ok(String::new());
        }
        let eot = self.vocab.eot();
        let mut ctx = prepared.context.clone();
        let mut out = Vec::new();
        for _ in 0..max_new_tokens {
            if ctx.rows >= self.config.max_seq_len {
                return Err(Error::SequenceTooLong { needed: ctx.rows + 1, max: self.config.max_seq_len });
            }
            let logits = self.next_logits(&ctx)?;
            let t = pick(&logits);
            if t == eot {
                break;
            }
            out.push(t);
            ctx.data.extend_from_slice(self.params.tok_emb.row(t));
            ctx.rows += 1;
        }
        Ok(self.vocab.decode(&out))
    }

    /// Argmax decoding, ties to the lowest id; stops at end-of-text.
    pub fn decode_greedy(&self, prepared: &Prepared, max_new_tokens: usize) -> Result<String> {
        self.generate(prepared, max_new_tokens, argmax)
    }

    /// Draws each token from `softmax(logits / T)` with a seeded generator.
    pub fn sample(&self, prepared: &Prepared, temperature: f64, seed: u64, max_new_tokens: usize) -> Result<String> {
        if !(temperature > 0.0) {
            return Err(Error::NonPositiveTemperature(temperature));
        }
        let mut rng = seed::rng_from(seed);
        self.generate(prepared, max_new_tokens, |l| sample_index(l, temperature, &mut rng))
    }
}

/// One categorical draw from `softmax(logits / T)`.
pub fn sample_index<R: Rng + ?Sized>(logits: &[f64], temperature: f64, rng: &mut R) -> usize {
    let mut p: Vec<f64> = logits.iter().map(|l| l / temperature).collect();
    softmax_in_place(&mut p);
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        acc += pi;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the final partial sum; take the last nonzero entry
    p.iter().rposition(|&x| x > 0.0).unwrap_or(0)
}

/// Copies the old embedding and head rows and initialises new rows as the old
/// row mean plus N(0, 0.02²) noise.
pub fn resize_embeddings(params: &FusionParams, old: &Vocab, new: &Vocab, seed: u64) -> Result<FusionParams> {
    if new.len() < old.len() || old.tokens().iter().zip(new.tokens()).any(|(a, b)| a != b) {
        return Err(Error::ShapeMismatch("new vocabulary does not extend the old one".into()));
    }
    if params.tok_emb.rows != old.len() || params.lm_head.w.rows != old.len() {
        return Err(Error::ShapeMismatch(format!(
            "embedding has {} rows for a vocabulary of {}",
            params.tok_emb.rows,
            old.len()
        )));
    }
    let mut rng = seed::rng(seed, "resize-embeddings");
    let noise = Normal::new(0.0, 0.02).expect("valid std");
    let mut grow = |m: &Mat| -> Mat {
        let mut mean = vec![0.0; m.cols];
        for i in 0..m.rows {
            axpy(1.0 / m.rows as f64, m.row(i), &mut mean);
        }
        let mut out = m.clone();
        for _ in m.rows..new.len() {
            out.data.extend(mean.iter().map(|&v| v + noise.sample(&mut rng)));
            out.rows += 1;
        }
        out
    };
    let mut p = params.clone();
    p.tok_emb = grow(&params.tok_emb);
    p.lm_head.w = grow(&params.lm_head.w);
    let bias_mean = params.lm_head.b.data.iter().sum::<f64>() / old.len().max(1) as f64;
    p.lm_head.b.data.resize(new.len(), bias_mean);
    p.lm_head.b.cols = new.len();
    Ok(p)
}
