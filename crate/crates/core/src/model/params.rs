//! Parameter store, split into named groups with freeze flags.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::config::FusionConfig;
use crate::tensor::Mat;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Group {
    TokenEmbeddings,
    Blocks,
    LmHead,
    TsEncoder,
    TsProjector,
    VisionEncoder,
    AudioEncoder,
}

impl Group {
    pub const ALL: [Group; 7] = [
        Group::TokenEmbeddings,
        Group::Blocks,
        Group::LmHead,
        Group::TsEncoder,
        Group::TsProjector,
        Group::VisionEncoder,
        Group::AudioEncoder,
    ];
    pub const BACKBONE: [Group; 3] = [Group::TokenEmbeddings, Group::Blocks, Group::LmHead];

    pub fn name(self) -> &'static str {
        match self {
            Group::TokenEmbeddings => "token_embeddings",
            Group::Blocks => "blocks",
            Group::LmHead => "lm_head",
            Group::TsEncoder => "ts_encoder",
            Group::TsProjector => "ts_projector",
            Group::VisionEncoder => "vision_encoder",
            Group::AudioEncoder => "audio_encoder",
        }
    }

    /// Parses a group name; `backbone` expands to embeddings, blocks and head.
    pub fn parse_set(name: &str) -> Result<Vec<Group>> {
        if name == "backbone" {
            return Ok(Group::BACKBONE.to_vec());
        }
        Ok(vec![name.parse()?])
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Group {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Group::ALL
            .into_iter()
            .find(|g| g.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown parameter group `{s}`")))
    }
}

/// `y = x Wᵀ + b` with `W: [out, in]`, `b: 1 × out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear {
    pub w: Mat,
    pub b: Mat,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(d_in: usize, d_out: usize, rng: &mut R) -> Self {
        Linear { w: Mat::fan_in_uniform(d_out, d_in, d_in, rng), b: Mat::zeros(1, d_out) }
    }

    pub fn zeros(d_in: usize, d_out: usize) -> Self {
        Linear { w: Mat::zeros(d_out, d_in), b: Mat::zeros(1, d_out) }
    }

    pub fn d_in(&self) -> usize {
        self.w.cols
    }

    pub fn d_out(&self) -> usize {
        self.w.rows
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerNorm {
    pub g: Mat,
    pub b: Mat,
}

impl LayerNorm {
    pub fn new(d: usize) -> Self {
        let mut g = Mat::zeros(1, d);
        g.fill(1.0);
        LayerNorm { g, b: Mat::zeros(1, d) }
    }
}

/// Same-padded 1-D convolution; `w: [out, kernel · in]` indexed `k · in + c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d {
    pub w: Mat,
    pub b: Mat,
    pub kernel: usize,
    pub in_channels: usize,
}

impl Conv1d {
    pub fn new<R: Rng + ?Sized>(in_channels: usize, out: usize, kernel: usize, rng: &mut R) -> Self {
        let fan_in = in_channels * kernel;
        Conv1d { w: Mat::fan_in_uniform(out, fan_in, fan_in, rng), b: Mat::zeros(1, out), kernel, in_channels }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub ln1: LayerNorm,
    pub wq: Linear,
    pub wk: Linear,
    pub wv: Linear,
    pub wo: Linear,
    pub ln2: LayerNorm,
    pub fc1: Linear,
    pub fc2: Linear,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionParams {
    pub tok_emb: Mat,
    pub pos_emb: Mat,
    pub blocks: Vec<Block>,
    pub ln_f: LayerNorm,
    pub lm_head: Linear,
    pub ts_convs: Vec<Conv1d>,
    pub ts_out: Linear,
    pub ts_proj: Linear,
    pub vision: Linear,
    pub audio: Linear,
    pub frozen: BTreeSet<Group>,
}

/// A named tensor together with its group and whether weight decay applies.
pub struct TensorRef<'a> {
    pub group: Group,
    pub name: String,
    pub decay: bool,
    pub mat: &'a Mat,
}

pub struct TensorMut<'a> {
    pub group: Group,
    pub name: String,
    pub decay: bool,
    pub mat: &'a mut Mat,
}

macro_rules! tensor_list {
    ($self:ident, $ty:ident, $($amp:tt)+) => {{
        let mut out: Vec<$ty> = Vec::new();
        let p = $self;
        out.push($ty { group: Group::TokenEmbeddings, name: "tok_emb".into(), decay: true, mat: $($amp)+ p.tok_emb });
        out.push($ty { group: Group::TokenEmbeddings, name: "pos_emb".into(), decay: true, mat: $($amp)+ p.pos_emb });
        for (i, b) in ($($amp)+ p.blocks).into_iter().enumerate() {
            let pre = format!("blocks.{i}");
            out.push($ty { group: Group::Blocks, name: format!("{pre}.ln1.g"), decay: false, mat: $($amp)+ b.ln1.g });
            out.push($ty { group: Group::Blocks, name: format!("{pre}.ln1.b"), decay: false, mat: $($amp)+ b.ln1.b });
            for (n, l) in [("wq", $($amp)+ b.wq), ("wk", $($amp)+ b.wk), ("wv", $($amp)+ b.wv), ("wo", $($amp)+ b.wo)] {
                out.push($ty { group: Group::Blocks, name: format!("{pre}.{n}.w"), decay: true, mat: $($amp)+ l.w });
                out.push($ty { group: Group::Blocks, name: format!("{pre}.{n}.b"), decay: false, mat: $($amp)+ l.b });
            }
            out.push($ty { group: Group::Blocks, name: format!("{pre}.ln2.g"), decay: false, mat: $($amp)+ b.ln2.g });
            out.push($ty { group: Group::Blocks, name: format!("{pre}.ln2.b"), decay: false, mat: $($amp)+ b.ln2.b });
            for (n, l) in [("fc1", $($amp)+ b.fc1), ("fc2", $($amp)+ b.fc2)] {
                out.push($ty { group: Group::Blocks, name: format!("{pre}.{n}.w"), decay: true, mat: $($amp)+ l.w });
                out.push($ty { group: Group::Blocks, name: format!("{pre}.{n}.b"), decay: false, mat: $($amp)+ l.b });
            }
        }
        out.push($ty { group: Group::Blocks, name: "ln_f.g".into(), decay: false, mat: $($amp)+ p.ln_f.g });
        out.push($ty { group: Group::Blocks, name: "ln_f.b".into(), decay: false, mat: $($amp)+ p.ln_f.b });
        out.push($ty { group: Group::LmHead, name: "lm_head.w".into(), decay: true, mat: $($amp)+ p.lm_head.w });
        out.push($ty { group: Group::LmHead, name: "lm_head.b".into(), decay: false, mat: $($amp)+ p.lm_head.b });
        for (i, c) in ($($amp)+ p.ts_convs).into_iter().enumerate() {
            out.push($ty { group: Group::TsEncoder, name: format!("ts_conv.{i}.w"), decay: true, mat: $($amp)+ c.w });
            out.push($ty { group: Group::TsEncoder, name: format!("ts_conv.{i}.b"), decay: false, mat: $($amp)+ c.b });
        }
        let linears = [
            (Group::TsEncoder, "ts_out", $($amp)+ p.ts_out),
            (Group::TsProjector, "ts_proj", $($amp)+ p.ts_proj),
            (Group::VisionEncoder, "vision", $($amp)+ p.vision),
            (Group::AudioEncoder, "audio", $($amp)+ p.audio),
        ];
        for (g, n, l) in linears {
            out.push($ty { group: g, name: format!("{n}.w"), decay: true, mat: $($amp)+ l.w });
            out.push($ty { group: g, name: format!("{n}.b"), decay: false, mat: $($amp)+ l.b });
        }
        out
    }};
}

impl FusionParams {
    /// Gaussian σ = 0.02 for embeddings and the head, fan-in uniform for the
    /// remaining linear maps, zero biases, unit norm gains.
    pub fn init<R: Rng + ?Sized>(cfg: &FusionConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.d_model;
        let blocks = (0..cfg.n_layers)
            .map(|_| Block {
                ln1: LayerNorm::new(d),
                wq: Linear::new(d, d, rng),
                wk: Linear::new(d, d, rng),
                wv: Linear::new(d, d, rng),
                wo: Linear::new(d, d, rng),
                ln2: LayerNorm::new(d),
                fc1: Linear::new(d, cfg.d_ff(), rng),
                fc2: Linear::new(cfg.d_ff(), d, rng),
            })
            .collect();
        let mut ts_convs = Vec::new();
        let mut c_in = cfg.ts.in_channels;
        for &c_out in &cfg.ts.conv_channels {
            ts_convs.push(Conv1d::new(c_in, c_out, cfg.ts.kernel, rng));
            c_in = c_out;
        }
        Ok(FusionParams {
            tok_emb: Mat::randn(cfg.vocab_size, d, 0.02, rng),
            pos_emb: Mat::randn(cfg.max_seq_len, d, 0.02, rng),
            blocks,
            ln_f: LayerNorm::new(d),
            lm_head: Linear { w: Mat::randn(cfg.vocab_size, d, 0.02, rng), b: Mat::zeros(1, cfg.vocab_size) },
            ts_out: Linear::new(c_in, cfg.ts.d_ts, rng),
            ts_convs,
            ts_proj: Linear::new(cfg.ts.d_ts, d, rng),
            vision: Linear::new(cfg.vision.d_in(), d, rng),
            audio: Linear::new(cfg.audio.mel_bins, d, rng),
            frozen: BTreeSet::new(),
        })
    }

    /// Same structure with every tensor zeroed and nothing frozen; used as the
    /// gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.mat.fill(0.0);
        }
        z.frozen.clear();
        z
    }

    pub fn tensors(&self) -> Vec<TensorRef<'_>> {
        tensor_list!(self, TensorRef, &)
    }

    pub fn tensors_mut(&mut self) -> Vec<TensorMut<'_>> {
        tensor_list!(self, TensorMut, &mut)
    }

    pub fn is_frozen(&self, g: Group) -> bool {
        self.frozen.contains(&g)
    }

    pub fn trainable(&self, g: Group) -> bool {
        !self.frozen.contains(&g)
    }

    pub fn set_frozen(&mut self, groups: impl IntoIterator<Item = Group>) {
        self.frozen = groups.into_iter().collect();
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.mat.len()).sum()
    }

    /// All values of one group, concatenated in tensor order.
    pub fn group_values(&self, g: Group) -> Vec<f64> {
        self.tensors().into_iter().filter(|t| t.group == g).flat_map(|t| t.mat.data.iter().copied()).collect()
    }

    pub fn set_group_values(&mut self, g: Group, values: &[f64]) -> Result<()> {
        let mut offset = 0;
        for t in self.tensors_mut().into_iter().filter(|t| t.group == g) {
            let n = t.mat.len();
            if offset + n > values.len() {
                return Err(Error::ShapeMismatch(format!("group {g} needs more than {} values", values.len())));
            }
            t.mat.data.copy_from_slice(&values[offset..offset + n]);
            offset += n;
        }
        if offset != values.len() {
            return Err(Error::ShapeMismatch(format!("group {g} holds {offset} values, got {}", values.len())));
        }
        Ok(())
    }

    pub fn scale(&mut self, s: f64) {
        for t in self.tensors_mut() {
            t.mat.scale(s);
        }
    }

    pub fn add_assign(&mut self, other: &FusionParams) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.mat.add_assign(b.mat);
        }
    }

    pub fn sum_sq(&self) -> f64 {
        self.tensors().iter().map(|t| t.mat.sum_sq()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;

    #[test]
    fn every_tensor_belongs_to_one_group() {
        let cfg = FusionConfig { vocab_size: 20, d_model: 8, n_heads: 2, n_layers: 2, max_seq_len: 16, ..Default::default() };
        let p = FusionParams::init(&cfg, &mut seed::rng(1, "t")).unwrap();
        let total: usize = Group::ALL.iter().map(|&g| p.group_values(g).len()).sum();
        assert_eq!(total, p.param_count());
        let names: std::collections::HashSet<String> = p.tensors().into_iter().map(|t| t.name).collect();
        assert_eq!(names.len(), p.tensors().len());
        let mut q = p.zeros_like();
        q.set_group_values(Group::Blocks, &p.group_values(Group::Blocks)).unwrap();
        assert_eq!(q.group_values(Group::Blocks), p.group_values(Group::Blocks));
        assert!(q.set_group_values(Group::LmHead, &[1.0]).is_err());
    }

    #[test]
    fn backbone_alias() {
        assert_eq!(Group::parse_set("backbone").unwrap().len(), 3);
        assert_eq!(Group::parse_set("ts_projector").unwrap(), vec![Group::TsProjector]);
        assert!(Group::parse_set("nope").is_err());
    }
}
