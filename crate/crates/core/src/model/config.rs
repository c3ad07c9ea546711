use std::fmt::Write as _;

use crate::config::FlatConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TsEncoderConfig {
    pub in_channels: usize,
    pub conv_channels: Vec<usize>,
    pub kernel: usize,
    pub d_ts: usize,
    /// Temporal pooling factor; the encoder emits `ceil(A / pool)` rows.
    pub pool: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VisionConfig {
    pub patch: usize,
    pub channels: usize,
}

impl VisionConfig {
    pub fn d_in(&self) -> usize {
        self.patch * self.patch * self.channels
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AudioConfig {
    pub mel_bins: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub ffn_mult: usize,
    pub max_seq_len: usize,
    pub vocab_size: usize,
    pub ts: TsEncoderConfig,
    pub vision: VisionConfig,
    pub audio: AudioConfig,
    /// Residual dropout rate used in training mode.
    pub dropout: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        FusionConfig {
            d_model: 128,
            n_layers: 4,
            n_heads: 4,
            ffn_mult: 4,
            max_seq_len: 512,
            vocab_size: 0,
            ts: TsEncoderConfig { in_channels: 3, conv_channels: vec![32, 32], kernel: 3, d_ts: 64, pool: 1 },
            vision: VisionConfig { patch: 4, channels: 3 },
            audio: AudioConfig { mel_bins: 32 },
            dropout: 0.0,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("d_model", self.d_model),
            ("n_layers", self.n_layers),
            ("n_heads", self.n_heads),
            ("ffn_mult", self.ffn_mult),
            ("max_seq_len", self.max_seq_len),
            ("vocab_size", self.vocab_size),
            ("ts.in_channels", self.ts.in_channels),
            ("ts.kernel", self.ts.kernel),
            ("ts.d_ts", self.ts.d_ts),
            ("ts.pool", self.ts.pool),
            ("vision.patch", self.vision.patch),
            ("vision.channels", self.vision.channels),
            ("audio.mel_bins", self.audio.mel_bins),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if self.ts.conv_channels.iter().any(|&c| c == 0) {
            return Err(Error::Config("ts.conv_channels entries must be positive".into()));
        }
        if self.d_model % self.n_heads != 0 {
            return Err(Error::Config(format!("d_model {} not divisible by n_heads {}", self.d_model, self.n_heads)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn d_ff(&self) -> usize {
        self.d_model * self.ffn_mult
    }

    /// Number of encoder rows for a window of `a` seconds.
    pub fn ts_steps(&self, a: usize) -> usize {
        a.div_ceil(self.ts.pool)
    }

    /// Flat `key = value` rendering used in checkpoint manifests.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let list = self.ts.conv_channels.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",");
        let _ = writeln!(out, "model.d_model = {}", self.d_model);
        let _ = writeln!(out, "model.n_layers = {}", self.n_layers);
        let _ = writeln!(out, "model.n_heads = {}", self.n_heads);
        let _ = writeln!(out, "model.ffn_mult = {}", self.ffn_mult);
        let _ = writeln!(out, "model.max_seq_len = {}", self.max_seq_len);
        let _ = writeln!(out, "model.vocab_size = {}", self.vocab_size);
        let _ = writeln!(out, "model.dropout = {}", self.dropout);
        let _ = writeln!(out, "ts.in_channels = {}", self.ts.in_channels);
        let _ = writeln!(out, "ts.conv_channels = {list}");
        let _ = writeln!(out, "ts.kernel = {}", self.ts.kernel);
        let _ = writeln!(out, "ts.d_ts = {}", self.ts.d_ts);
        let _ = writeln!(out, "ts.pool = {}", self.ts.pool);
        let _ = writeln!(out, "vision.patch = {}", self.vision.patch);
        let _ = writeln!(out, "vision.channels = {}", self.vision.channels);
        let _ = writeln!(out, "audio.mel_bins = {}", self.audio.mel_bins);
        out
    }

    /// Reads any `model.*`, `ts.*`, `vision.*`, `audio.*` keys over the defaults
    /// in `base`.
    pub fn from_flat(cfg: &mut FlatConfig, base: &FusionConfig) -> Result<Self> {
        let mut c = base.clone();
        c.d_model = cfg.get_or("model.d_model", c.d_model)?;
        c.n_layers = cfg.get_or("model.n_layers", c.n_layers)?;
        c.n_heads = cfg.get_or("model.n_heads", c.n_heads)?;
        c.ffn_mult = cfg.get_or("model.ffn_mult", c.ffn_mult)?;
        c.max_seq_len = cfg.get_or("model.max_seq_len", c.max_seq_len)?;
        c.vocab_size = cfg.get_or("model.vocab_size", c.vocab_size)?;
        c.dropout = cfg.get_or("model.dropout", c.dropout)?;
        c.ts.in_channels = cfg.get_or("ts.in_channels", c.ts.in_channels)?;
        if let Some(list) = cfg.get_list("ts.conv_channels")? {
            c.ts.conv_channels = list;
        }
        c.ts.kernel = cfg.get_or("ts.kernel", c.ts.kernel)?;
        c.ts.d_ts = cfg.get_or("ts.d_ts", c.ts.d_ts)?;
        c.ts.pool = cfg.get_or("ts.pool", c.ts.pool)?;
        c.vision.patch = cfg.get_or("vision.patch", c.vision.patch)?;
        c.vision.channels = cfg.get_or("vision.channels", c.vision.channels)?;
        c.audio.mel_bins = cfg.get_or("audio.mel_bins", c.audio.mel_bins)?;
        Ok(c)
    }
}
