//! Toy modality encoders: a 1-D convolutional time-series encoder with a linear
//! projector, a patch-mean vision encoder and a per-frame mel encoder.

use serde::{Deserialize, Serialize};

use super::ops::{gelu_backward, gelu_mat, linear, linear_backward, linear_backward_weights};
use super::params::{Conv1d, FusionParams, Linear};
use crate::tensor::{matmul, matmul_at_acc, matmul_bt, Mat};
use crate::{Error, Result};

/// Video frames in `(T, H, W, C)` row-major order, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameStack {
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl FrameStack {
    pub fn new(frames: usize, height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != frames * height * width * channels {
            return Err(Error::ShapeMismatch(format!(
                "frame stack {frames}x{height}x{width}x{channels} needs {} values, got {}",
                frames * height * width * channels,
                data.len()
            )));
        }
        Ok(FrameStack { frames, height, width, channels, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.frames, self.height, self.width, self.channels]
    }

    #[inline]
    pub fn at(&self, t: usize, y: usize, x: usize, c: usize) -> f64 {
        self.data[((t * self.height + y) * self.width + x) * self.channels + c]
    }
}

pub(crate) fn im2col(x: &Mat, kernel: usize) -> Mat {
    let (steps, c) = x.shape();
    let pad = (kernel - 1) / 2;
    let mut col = Mat::zeros(steps, kernel * c);
    for t in 0..steps {
        for k in 0..kernel {
            let src = t + k;
            if src < pad || src - pad >= steps {
                continue;
            }
            col.data[t * kernel * c + k * c..t * kernel * c + (k + 1) * c].copy_from_slice(x.row(src - pad));
        }
    }
    col
}

pub(crate) fn col2im(dcol: &Mat, steps: usize, c: usize, kernel: usize) -> Mat {
    let pad = (kernel - 1) / 2;
    let mut dx = Mat::zeros(steps, c);
    for t in 0..steps {
        for k in 0..kernel {
            let src = t + k;
            if src < pad || src - pad >= steps {
                continue;
            }
            let from = &dcol.data[t * kernel * c + k * c..t * kernel * c + (k + 1) * c];
            for (d, f) in dx.row_mut(src - pad).iter_mut().zip(from) {
                *d += f;
            }
        }
    }
    dx
}

pub struct TsCache {
    cols: Vec<Mat>,
    pre: Vec<Mat>,
    last: Mat,
    steps: usize,
    pool: usize,
}

/// Encodes an `A × C` window into `ceil(A / pool) × d_ts` hidden states.
pub fn ts_encode(window: &Mat, p: &FusionParams, pool: usize) -> Result<(Mat, TsCache)> {
    let expected = p.ts_convs.first().map_or(p.ts_out.d_in(), |c| c.in_channels);
    if window.cols != expected {
        return Err(Error::ChannelMismatch { expected, got: window.cols });
    }
    if pool == 0 {
        return Err(Error::InvalidParameter("temporal pool must be positive".into()));
    }
    let mut h = window.clone();
    let mut cols = Vec::with_capacity(p.ts_convs.len());
    let mut pre = Vec::with_capacity(p.ts_convs.len());
    for conv in &p.ts_convs {
        let col = im2col(&h, conv.kernel);
        let mut z = matmul_bt(&col, &conv.w);
        z.add_row_broadcast(&conv.b);
        h = gelu_mat(&z);
        cols.push(col);
        pre.push(z);
    }
    let z = linear(&h, &p.ts_out);
    let steps = window.rows;
    let k = steps.div_ceil(pool);
    let mut out = Mat::zeros(k, z.cols);
    for j in 0..k {
        let (lo, hi) = (j * pool, ((j + 1) * pool).min(steps));
        for t in lo..hi {
            for (o, v) in out.row_mut(j).iter_mut().zip(z.row(t)) {
                *o += v / (hi - lo) as f64;
            }
        }
    }
    Ok((out, TsCache { cols, pre, last: h, steps, pool }))
}

/// Backpropagates `d_out` (k × d_ts) into the encoder weights.
pub fn ts_encode_backward(d_out: &Mat, cache: &TsCache, p: &FusionParams, grads: &mut FusionParams) {
    let steps = cache.steps;
    let mut dz = Mat::zeros(steps, d_out.cols);
    for t in 0..steps {
        let j = t / cache.pool;
        let hi = ((j + 1) * cache.pool).min(steps);
        let n = (hi - j * cache.pool) as f64;
        for (d, v) in dz.row_mut(t).iter_mut().zip(d_out.row(j)) {
            *d = v / n;
        }
    }
    let mut dh = linear_backward(&cache.last, &dz, &p.ts_out, Some(&mut grads.ts_out));
    for i in (0..p.ts_convs.len()).rev() {
        let conv: &Conv1d = &p.ts_convs[i];
        let dpre = gelu_backward(&cache.pre[i], &dh);
        let g = &mut grads.ts_convs[i];
        matmul_at_acc(&dpre, &cache.cols[i], &mut g.w);
        dpre.accumulate_col_sums(&mut g.b);
        if i > 0 {
            let dcol = matmul(&dpre, &conv.w);
            dh = col2im(&dcol, steps, conv.in_channels, conv.kernel);
        }
    }
}

pub fn project_ts(hiddens: &Mat, p: &FusionParams) -> Result<Mat> {
    check_width(hiddens, &p.ts_proj, "ts projector")?;
    Ok(linear(hiddens, &p.ts_proj))
}

fn check_width(x: &Mat, l: &Linear, what: &str) -> Result<()> {
    if x.cols != l.d_in() {
        return Err(Error::ShapeMismatch(format!("{what} expects width {}, got {}", l.d_in(), x.cols)));
    }
    Ok(())
}

/// Per-frame mean over non-overlapping `patch × patch` tiles, flattened as
/// `(py, px, c)`.
pub fn patch_means(frames: &FrameStack, patch: usize) -> Result<Mat> {
    let [t, h, w, c] = frames.shape();
    if patch == 0 || h % patch != 0 || w % patch != 0 {
        return Err(Error::ShapeMismatch(format!("frame {h}x{w} is not divisible into {patch}x{patch} patches")));
    }
    let tiles = ((h / patch) * (w / patch)) as f64;
    let mut out = Mat::zeros(t, patch * patch * c);
    for f in 0..t {
        let row = out.row_mut(f);
        for y in 0..h {
            for x in 0..w {
                let base = ((y % patch) * patch + x % patch) * c;
                for ch in 0..c {
                    row[base + ch] += frames.at(f, y, x, ch) / tiles;
                }
            }
        }
    }
    Ok(out)
}

/// Returns the `m × d_model` embedding and the patch features it was computed from.
pub fn vision_encode(frames: &FrameStack, p: &FusionParams, patch: usize) -> Result<(Mat, Mat)> {
    let feats = patch_means(frames, patch)?;
    check_width(&feats, &p.vision, "vision encoder")?;
    Ok((linear(&feats, &p.vision), feats))
}

pub fn audio_encode(mel: &Mat, p: &FusionParams) -> Result<Mat> {
    check_width(mel, &p.audio, "audio encoder")?;
    Ok(linear(mel, &p.audio))
}

pub fn vision_backward(feats: &Mat, d_out: &Mat, grads: &mut FusionParams) {
    linear_backward_weights(feats, d_out, &mut grads.vision);
}

pub fn audio_backward(mel: &Mat, d_out: &Mat, grads: &mut FusionParams) {
    linear_backward_weights(mel, d_out, &mut grads.audio);
}
