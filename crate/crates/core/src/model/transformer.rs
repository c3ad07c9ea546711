//! Pre-norm causal transformer over an already-assembled embedding sequence.

use rand::Rng;

use super::config::FusionConfig;
use super::ops::{gelu_backward, gelu_mat, layer_norm, layer_norm_backward, linear, linear_backward, LnCache};
use super::params::{Block, FusionParams, Group};
use crate::tensor::{axpy, dot, Mat};
use crate::{Error, Result};

struct BlockCache {
    ln1: LnCache,
    a: Mat,
    q: Mat,
    k: Mat,
    v: Mat,
    probs: Vec<Mat>,
    concat: Mat,
    attn_mask: Option<Vec<f64>>,
    ln2: LnCache,
    c: Mat,
    u: Mat,
    z: Mat,
    mlp_mask: Option<Vec<f64>>,
}

pub struct TransformerCache {
    blocks: Vec<BlockCache>,
    ln_f: LnCache,
}

fn dropout_mask<R: Rng + ?Sized>(n: usize, rate: f64, rng: &mut R) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..n).map(|_| if rng.random::<f64>() < rate { 0.0 } else { keep }).collect()
}

fn maybe_mask<R: Rng + ?Sized>(n: usize, dropout: &mut Option<(f64, &mut R)>) -> Option<Vec<f64>> {
    match dropout {
        Some((rate, rng)) if *rate > 0.0 => Some(dropout_mask(n, *rate, &mut **rng)),
        _ => None,
    }
}

fn apply_mask(x: &mut Mat, mask: &Option<Vec<f64>>) {
    if let Some(m) = mask {
        for (v, k) in x.data.iter_mut().zip(m) {
            *v *= k;
        }
    }
}

fn attention(q: &Mat, k: &Mat, v: &Mat, n_heads: usize) -> (Mat, Vec<Mat>) {
    let (l, d) = q.shape();
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let mut out = Mat::zeros(l, d);
    let mut probs = Vec::with_capacity(n_heads);
    for h in 0..n_heads {
        let cols = h * dh..(h + 1) * dh;
        let mut p = Mat::zeros(l, l);
        for i in 0..l {
            let qi = &q.row(i)[cols.clone()];
            let row = &mut p.data[i * l..i * l + i + 1];
            for (j, s) in row.iter_mut().enumerate() {
                *s = dot(qi, &k.row(j)[cols.clone()]) * scale;
            }
            crate::tensor::softmax_in_place(row);
            for j in 0..=i {
                let w = p.data[i * l + j];
                let vj = &v.data[j * d + cols.start..j * d + cols.end];
                axpy(w, vj, &mut out.data[i * d + cols.start..i * d + cols.end]);
            }
        }
        probs.push(p);
    }
    (out, probs)
}

fn attention_backward(dout: &Mat, c: &BlockCache, n_heads: usize) -> (Mat, Mat, Mat) {
    let (l, d) = c.q.shape();
    let dh = d / n_heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let (mut dq, mut dk, mut dv) = (Mat::zeros(l, d), Mat::zeros(l, d), Mat::zeros(l, d));
    let mut dp = vec![0.0; l];
    for h in 0..n_heads {
        let (s0, s1) = (h * dh, (h + 1) * dh);
        let p = &c.probs[h];
        for i in 0..l {
            let doi = &dout.data[i * d + s0..i * d + s1];
            let mut sum = 0.0;
            for j in 0..=i {
                let pij = p.data[i * l + j];
                dp[j] = dot(doi, &c.v.data[j * d + s0..j * d + s1]);
                sum += pij * dp[j];
                axpy(pij, doi, &mut dv.data[j * d + s0..j * d + s1]);
            }
            for j in 0..=i {
                let ds = p.data[i * l + j] * (dp[j] - sum) * scale;
                if ds != 0.0 {
                    axpy(ds, &c.k.data[j * d + s0..j * d + s1], &mut dq.data[i * d + s0..i * d + s1]);
                    axpy(ds, &c.q.data[i * d + s0..i * d + s1], &mut dk.data[j * d + s0..j * d + s1]);
                }
            }
        }
    }
    (dq, dk, dv)
}

fn block_forward<R: Rng + ?Sized>(
    b: &Block,
    x: Mat,
    n_heads: usize,
    dropout: &mut Option<(f64, &mut R)>,
) -> (Mat, BlockCache) {
    let (a, ln1) = layer_norm(&x, &b.ln1);
    let q = linear(&a, &b.wq);
    let k = linear(&a, &b.wk);
    let v = linear(&a, &b.wv);
    let (concat, probs) = attention(&q, &k, &v, n_heads);
    let mut attn = linear(&concat, &b.wo);
    let attn_mask = maybe_mask(attn.len(), dropout);
    apply_mask(&mut attn, &attn_mask);
    let mut h1 = x;
    h1.add_assign(&attn);
    let (c, ln2) = layer_norm(&h1, &b.ln2);
    let u = linear(&c, &b.fc1);
    let z = gelu_mat(&u);
    let mut m = linear(&z, &b.fc2);
    let mlp_mask = maybe_mask(m.len(), dropout);
    apply_mask(&mut m, &mlp_mask);
    let mut h2 = h1;
    h2.add_assign(&m);
    (h2, BlockCache { ln1, a, q, k, v, probs, concat, attn_mask, ln2, c, u, z, mlp_mask })
}

fn block_backward(b: &Block, c: &BlockCache, dh2: Mat, n_heads: usize, grad: Option<&mut Block>) -> Mat {
    let mut grad = grad;
    let mut dm = dh2.clone();
    apply_mask(&mut dm, &c.mlp_mask);
    let dz = linear_backward(&c.z, &dm, &b.fc2, grad.as_deref_mut().map(|g| &mut g.fc2));
    let du = gelu_backward(&c.u, &dz);
    let dc = linear_backward(&c.c, &du, &b.fc1, grad.as_deref_mut().map(|g| &mut g.fc1));
    let mut dh1 = dh2;
    dh1.add_assign(&layer_norm_backward(&dc, &c.ln2, &b.ln2, grad.as_deref_mut().map(|g| &mut g.ln2)));
    let mut dattn = dh1.clone();
    apply_mask(&mut dattn, &c.attn_mask);
    let dconcat = linear_backward(&c.concat, &dattn, &b.wo, grad.as_deref_mut().map(|g| &mut g.wo));
    let (dq, dk, dv) = attention_backward(&dconcat, c, n_heads);
    let mut da = linear_backward(&c.a, &dq, &b.wq, grad.as_deref_mut().map(|g| &mut g.wq));
    da.add_assign(&linear_backward(&c.a, &dk, &b.wk, grad.as_deref_mut().map(|g| &mut g.wk)));
    da.add_assign(&linear_backward(&c.a, &dv, &b.wv, grad.as_deref_mut().map(|g| &mut g.wv)));
    let mut dx = dh1;
    dx.add_assign(&layer_norm_backward(&da, &c.ln1, &b.ln1, grad.map(|g| &mut g.ln1)));
    dx
}

/// Adds positional embeddings, runs the blocks and the final norm. Returns the
/// `L × d_model` normalised hidden states. Dropout is active only when a rate
/// and generator are supplied.
pub fn forward_hidden<R: Rng + ?Sized>(
    cfg: &FusionConfig,
    p: &FusionParams,
    context: &Mat,
    dropout: Option<(f64, &mut R)>,
) -> Result<(Mat, TransformerCache)> {
    let l = context.rows;
    if l > cfg.max_seq_len || l > p.pos_emb.rows {
        return Err(Error::SequenceTooLong { needed: l, max: cfg.max_seq_len.min(p.pos_emb.rows) });
    }
    if context.cols != cfg.d_model {
        return Err(Error::ShapeMismatch(format!("context width {} != d_model {}", context.cols, cfg.d_model)));
    }
    let mut dropout = dropout;
    let mut x = context.clone();
    for i in 0..l {
        axpy(1.0, p.pos_emb.row(i), x.row_mut(i));
    }
    let mut blocks = Vec::with_capacity(p.blocks.len());
    for b in &p.blocks {
        let (next, cache) = block_forward(b, x, cfg.n_heads, &mut dropout);
        blocks.push(cache);
        x = next;
    }
    let (y, ln_f) = layer_norm(&x, &p.ln_f);
    Ok((y, TransformerCache { blocks, ln_f }))
}

/// Backpropagates `dy` (gradient of the final hidden states) and returns the
/// gradient of the context. Weight gradients are skipped for frozen groups.
pub fn backward_hidden(p: &FusionParams, cfg: &FusionConfig, cache: &TransformerCache, dy: &Mat, grads: &mut FusionParams) -> Mat {
    let train_blocks = p.trainable(Group::Blocks);
    let mut dx = layer_norm_backward(dy, &cache.ln_f, &p.ln_f, train_blocks.then_some(&mut grads.ln_f));
    for (i, b) in p.blocks.iter().enumerate().rev() {
        dx = block_backward(b, &cache.blocks[i], dx, cfg.n_heads, train_blocks.then_some(&mut grads.blocks[i]));
    }
    if p.trainable(Group::TokenEmbeddings) {
        for i in 0..dx.rows {
            axpy(1.0, dx.row(i), grads.pos_emb.row_mut(i));
        }
    }
    dx
}

pub fn lm_logits(p: &FusionParams, hidden: &Mat) -> Mat {
    linear(hidden, &p.lm_head)
}

/// Full forward to `L × vocab` logits in evaluation mode.
pub fn forward(cfg: &FusionConfig, p: &FusionParams, context: &Mat) -> Result<Mat> {
    let (y, _) = forward_hidden::<rand_chacha::ChaCha8Rng>(cfg, p, context, None)?;
    Ok(lm_logits(p, &y))
}
