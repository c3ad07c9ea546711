//! CNN-LSTM biosignal classifier: two same-padded convolutions (the first
//! followed by max-pooling), a single-layer LSTM, batch normalisation of the
//! last hidden state and a two-layer head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::gradcheck::ParamVec;
use crate::model::encoders::{col2im, im2col};
use crate::model::ops::{linear, linear_backward};
use crate::model::params::{Conv1d, Linear};
use crate::tensor::{log_sum_exp, matmul, matmul_at_acc, matmul_bt, Mat};
use crate::{seed, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BioConfig {
    pub in_steps: usize,
    pub in_channels: usize,
    pub conv1_channels: usize,
    pub conv2_channels: usize,
    pub kernel: usize,
    pub pool: usize,
    pub dropout: f64,
    pub lstm_hidden: usize,
    pub fc_hidden: usize,
    pub n_classes: usize,
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl Default for BioConfig {
    fn default() -> Self {
        BioConfig {
            in_steps: 5,
            in_channels: 3,
            conv1_channels: 32,
            conv2_channels: 64,
            kernel: 3,
            pool: 2,
            dropout: 0.3,
            lstm_hidden: 64,
            fc_hidden: 32,
            n_classes: 10,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
        }
    }
}

impl BioConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            self.in_steps,
            self.in_channels,
            self.conv1_channels,
            self.conv2_channels,
            self.kernel,
            self.pool,
            self.lstm_hidden,
            self.fc_hidden,
            self.n_classes,
        ];
        if dims.contains(&0) || self.in_steps / self.pool == 0 {
            return Err(Error::Config("bio baseline dimensions must be positive and pooling must leave a step".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("bio baseline dropout must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

/// Gates stacked as input, forget, cell, output: `w_ih: [4H, in]`, `w_hh: [4H, H]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub w_ih: Mat,
    pub w_hh: Mat,
    pub b: Mat,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BioParams {
    pub conv1: Conv1d,
    pub conv2: Conv1d,
    pub lstm: Lstm,
    pub bn_gamma: Mat,
    pub bn_beta: Mat,
    pub fc1: Linear,
    pub fc2: Linear,
}

impl BioParams {
    pub fn init<R: Rng + ?Sized>(cfg: &BioConfig, rng: &mut R) -> Self {
        let h = cfg.lstm_hidden;
        BioParams {
            conv1: Conv1d::new(cfg.in_channels, cfg.conv1_channels, cfg.kernel, rng),
            conv2: Conv1d::new(cfg.conv1_channels, cfg.conv2_channels, cfg.kernel, rng),
            lstm: Lstm {
                w_ih: Mat::fan_in_uniform(4 * h, cfg.conv2_channels, h, rng),
                w_hh: Mat::fan_in_uniform(4 * h, h, h, rng),
                b: Mat::fan_in_uniform(1, 4 * h, h, rng),
            },
            bn_gamma: Mat::from_vec(1, h, vec![1.0; h]),
            bn_beta: Mat::zeros(1, h),
            fc1: Linear::new(h, cfg.fc_hidden, rng),
            fc2: Linear::new(cfg.fc_hidden, cfg.n_classes, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.1.fill(0.0);
        }
        z
    }

    /// `(name, applies weight decay, tensor)` in a fixed order.
    pub fn tensors(&self) -> Vec<(&'static str, bool, &Mat)> {
        vec![
            ("conv1.w", true, &self.conv1.w),
            ("conv1.b", false, &self.conv1.b),
            ("conv2.w", true, &self.conv2.w),
            ("conv2.b", false, &self.conv2.b),
            ("lstm.w_ih", true, &self.lstm.w_ih),
            ("lstm.w_hh", true, &self.lstm.w_hh),
            ("lstm.b", false, &self.lstm.b),
            ("bn.gamma", false, &self.bn_gamma),
            ("bn.beta", false, &self.bn_beta),
            ("fc1.w", true, &self.fc1.w),
            ("fc1.b", false, &self.fc1.b),
            ("fc2.w", true, &self.fc2.w),
            ("fc2.b", false, &self.fc2.b),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Mat)> {
        vec![
            ("conv1.w", &mut self.conv1.w),
            ("conv1.b", &mut self.conv1.b),
            ("conv2.w", &mut self.conv2.w),
            ("conv2.b", &mut self.conv2.b),
            ("lstm.w_ih", &mut self.lstm.w_ih),
            ("lstm.w_hh", &mut self.lstm.w_hh),
            ("lstm.b", &mut self.lstm.b),
            ("bn.gamma", &mut self.bn_gamma),
            ("bn.beta", &mut self.bn_beta),
            ("fc1.w", &mut self.fc1.w),
            ("fc1.b", &mut self.fc1.b),
            ("fc2.w", &mut self.fc2.w),
            ("fc2.b", &mut self.fc2.b),
        ]
    }

    pub fn scale(&mut self, s: f64) {
        for (_, t) in self.tensors_mut() {
            t.scale(s);
        }
    }
}

impl ParamVec for BioParams {
    fn n_params(&self) -> usize {
        self.tensors().iter().map(|t| t.2.len()).sum()
    }

    fn param(&self, i: usize) -> f64 {
        let mut i = i;
        for (_, _, t) in self.tensors() {
            if i < t.len() {
                return t.data[i];
            }
            i -= t.len();
        }
        panic!("parameter index out of range")
    }

    fn set_param(&mut self, i: usize, v: f64) {
        let mut i = i;
        for (_, t) in self.tensors_mut() {
            if i < t.len() {
                t.data[i] = v;
                return;
            }
            i -= t.len();
        }
        panic!("parameter index out of range")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BioModel {
    pub config: BioConfig,
    pub params: BioParams,
    pub running_mean: Vec<f64>,
    pub running_var: Vec<f64>,
}

struct LstmCache {
    xs: Mat,
    hs: Vec<Vec<f64>>,
    cs: Vec<Vec<f64>>,
    /// Post-activation gates per step, `[i | f | g | o]`.
    gates: Vec<Vec<f64>>,
}

struct SampleCache {
    col1: Mat,
    z1: Mat,
    pool_src: Vec<usize>,
    m1: Option<Vec<f64>>,
    col2: Mat,
    z2: Mat,
    m2: Option<Vec<f64>>,
    lstm: LstmCache,
}

pub struct BioCache {
    samples: Vec<SampleCache>,
    bn_in: Mat,
    xhat: Mat,
    rstd: Vec<f64>,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
    train: bool,
    bn_out: Mat,
    fc1_pre: Mat,
    m3: Option<Vec<f64>>,
    fc1_out: Mat,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn relu_mat(z: &Mat) -> Mat {
    Mat::from_vec(z.rows, z.cols, z.data.iter().map(|v| v.max(0.0)).collect())
}

fn dropout_mask<R: Rng + ?Sized>(n: usize, rate: f64, rng: Option<&mut R>) -> Option<Vec<f64>> {
    match rng {
        Some(r) if rate > 0.0 => {
            let keep = 1.0 / (1.0 - rate);
            Some((0..n).map(|_| if r.random::<f64>() < rate { 0.0 } else { keep }).collect())
        }
        _ => None,
    }
}

fn apply_mask(m: &mut Mat, mask: &Option<Vec<f64>>) {
    if let Some(mask) = mask {
        for (v, k) in m.data.iter_mut().zip(mask) {
            *v *= k;
        }
    }
}

fn conv(x: &Mat, c: &Conv1d) -> (Mat, Mat) {
    let col = im2col(x, c.kernel);
    let mut z = matmul_bt(&col, &c.w);
    z.add_row_broadcast(&c.b);
    (col, z)
}

impl BioModel {
    pub fn init(config: BioConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let params = BioParams::init(&config, &mut seed::rng(seed, "bio-init"));
        let h = config.lstm_hidden;
        Ok(BioModel { config, params, running_mean: vec![0.0; h], running_var: vec![1.0; h] })
    }

    fn check_input(&self, x: &Mat) -> Result<()> {
        if x.shape() != (self.config.in_steps, self.config.in_channels) {
            return Err(Error::ShapeMismatch(format!(
                "bio baseline expects {}x{} windows, got {}x{}",
                self.config.in_steps, self.config.in_channels, x.rows, x.cols
            )));
        }
        Ok(())
    }

    fn lstm_forward(&self, xs: Mat) -> LstmCache {
        let h = self.config.lstm_hidden;
        let l = &self.params.lstm;
        let mut hs = vec![vec![0.0; h]];
        let mut cs = vec![vec![0.0; h]];
        let mut gates = Vec::with_capacity(xs.rows);
        let pre_x = {
            let mut p = matmul_bt(&xs, &l.w_ih);
            p.add_row_broadcast(&l.b);
            p
        };
        for t in 0..xs.rows {
            let hp = Mat::from_vec(1, h, hs[t].clone());
            let rec = matmul_bt(&hp, &l.w_hh);
            let mut a: Vec<f64> = pre_x.row(t).iter().zip(&rec.data).map(|(x, r)| x + r).collect();
            for j in 0..h {
                a[j] = sigmoid(a[j]);
                a[h + j] = sigmoid(a[h + j]);
                a[2 * h + j] = a[2 * h + j].tanh();
                a[3 * h + j] = sigmoid(a[3 * h + j]);
            }
            let c: Vec<f64> = (0..h).map(|j| a[h + j] * cs[t][j] + a[j] * a[2 * h + j]).collect();
            let hn: Vec<f64> = (0..h).map(|j| a[3 * h + j] * c[j].tanh()).collect();
            gates.push(a);
            cs.push(c);
            hs.push(hn);
        }
        LstmCache { xs, hs, cs, gates }
    }

    /// Forward pass over a batch. With `rng` the model is in training mode:
    /// dropout is active and batch statistics normalise the LSTM output.
    pub fn forward<R: Rng + ?Sized>(&self, xs: &[&Mat], mut rng: Option<&mut R>) -> Result<(Mat, BioCache)> {
        let cfg = &self.config;
        let p = &self.params;
        let train = rng.is_some();
        let b = xs.len();
        let h = cfg.lstm_hidden;
        let mut samples = Vec::with_capacity(b);
        let mut bn_in = Mat::zeros(b, h);
        for (bi, x) in xs.iter().enumerate() {
            self.check_input(x)?;
            let (col1, z1) = conv(x, &p.conv1);
            let a1 = relu_mat(&z1);
            let steps = a1.rows / cfg.pool;
            let mut pooled = Mat::zeros(steps, a1.cols);
            let mut pool_src = vec![0; steps * a1.cols];
            for t in 0..steps {
                for c in 0..a1.cols {
                    let mut best = t * cfg.pool;
                    for s in t * cfg.pool..(t + 1) * cfg.pool {
                        if a1.at(s, c) > a1.at(best, c) {
                            best = s;
                        }
                    }
                    pool_src[t * a1.cols + c] = best;
                    *pooled.at_mut(t, c) = a1.at(best, c);
                }
            }
            let m1 = dropout_mask(pooled.len(), cfg.dropout, rng.as_deref_mut());
            apply_mask(&mut pooled, &m1);
            let (col2, z2) = conv(&pooled, &p.conv2);
            let mut a2 = relu_mat(&z2);
            let m2 = dropout_mask(a2.len(), cfg.dropout, rng.as_deref_mut());
            apply_mask(&mut a2, &m2);
            let lstm = self.lstm_forward(a2);
            bn_in.row_mut(bi).copy_from_slice(lstm.hs.last().unwrap());
            samples.push(SampleCache { col1, z1, pool_src, m1, col2, z2, m2, lstm });
        }
        let (mean, var) = if train {
            let mut mean = vec![0.0; h];
            let mut var = vec![0.0; h];
            for r in 0..b {
                for j in 0..h {
                    mean[j] += bn_in.at(r, j) / b as f64;
                }
            }
            for r in 0..b {
                for j in 0..h {
                    var[j] += (bn_in.at(r, j) - mean[j]).powi(2) / b as f64;
                }
            }
            (mean, var)
        } else {
            (self.running_mean.clone(), self.running_var.clone())
        };
        let rstd: Vec<f64> = var.iter().map(|v| 1.0 / (v + cfg.bn_eps).sqrt()).collect();
        let mut xhat = Mat::zeros(b, h);
        let mut bn_out = Mat::zeros(b, h);
        for r in 0..b {
            for j in 0..h {
                let xh = (bn_in.at(r, j) - mean[j]) * rstd[j];
                *xhat.at_mut(r, j) = xh;
                *bn_out.at_mut(r, j) = p.bn_gamma.data[j] * xh + p.bn_beta.data[j];
            }
        }
        let fc1_pre = linear(&bn_out, &p.fc1);
        let mut fc1_out = relu_mat(&fc1_pre);
        let m3 = dropout_mask(fc1_out.len(), cfg.dropout, rng.as_deref_mut());
        apply_mask(&mut fc1_out, &m3);
        let logits = linear(&fc1_out, &p.fc2);
        let cache = BioCache {
            samples,
            bn_in,
            xhat,
            rstd,
            batch_mean: mean,
            batch_var: var,
            train,
            bn_out,
            fc1_pre,
            m3,
            fc1_out,
        };
        Ok((logits, cache))
    }

    /// Inference-mode logits for one window.
    pub fn predict(&self, x: &Mat) -> Result<Vec<f64>> {
        Ok(self.forward::<seed::Rng>(&[x], None)?.0.data)
    }

    /// Folds the batch statistics of a training forward pass into the
    /// running estimates (unbiased variance).
    pub fn update_running(&mut self, cache: &BioCache) {
        let b = cache.samples.len() as f64;
        let m = self.config.bn_momentum;
        let unbias = if b > 1.0 { b / (b - 1.0) } else { 1.0 };
        for j in 0..self.running_mean.len() {
            self.running_mean[j] = (1.0 - m) * self.running_mean[j] + m * cache.batch_mean[j];
            self.running_var[j] = (1.0 - m) * self.running_var[j] + m * cache.batch_var[j] * unbias;
        }
    }

    fn lstm_backward(&self, c: &LstmCache, dh_last: &[f64], g: &mut Lstm) -> Mat {
        let h = self.config.lstm_hidden;
        let l = &self.params.lstm;
        let steps = c.xs.rows;
        let mut dxs = Mat::zeros(steps, c.xs.cols);
        let mut dh = dh_last.to_vec();
        let mut dc_next = vec![0.0; h];
        for t in (0..steps).rev() {
            let a = &c.gates[t];
            let mut da = vec![0.0; 4 * h];
            for j in 0..h {
                let (i, f, gg, o) = (a[j], a[h + j], a[2 * h + j], a[3 * h + j]);
                let tc = c.cs[t + 1][j].tanh();
                let d_o = dh[j] * tc;
                let dc = dc_next[j] + dh[j] * o * (1.0 - tc * tc);
                da[j] = dc * gg * i * (1.0 - i);
                da[h + j] = dc * c.cs[t][j] * f * (1.0 - f);
                da[2 * h + j] = dc * i * (1.0 - gg * gg);
                da[3 * h + j] = d_o * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            let dam = Mat::from_vec(1, 4 * h, da);
            let xt = c.xs.slice_rows(t, t + 1);
            let hp = Mat::from_vec(1, h, c.hs[t].clone());
            matmul_at_acc(&dam, &xt, &mut g.w_ih);
            matmul_at_acc(&dam, &hp, &mut g.w_hh);
            dam.accumulate_col_sums(&mut g.b);
            dxs.row_mut(t).copy_from_slice(&matmul(&dam, &l.w_ih).data);
            dh = matmul(&dam, &l.w_hh).data;
        }
        dxs
    }

    /// Accumulates parameter gradients for `d_logits` (already scaled by the
    /// caller's loss normalisation). Batch-norm is differentiated in the mode
    /// the forward pass ran in.
    pub fn backward(&self, cache: &BioCache, d_logits: &Mat, g: &mut BioParams) {
        let cfg = &self.config;
        let p = &self.params;
        let b = cache.samples.len();
        let h = cfg.lstm_hidden;
        let mut d_fc1 = linear_backward(&cache.fc1_out, d_logits, &p.fc2, Some(&mut g.fc2));
        apply_mask(&mut d_fc1, &cache.m3);
        for (d, z) in d_fc1.data.iter_mut().zip(&cache.fc1_pre.data) {
            if *z <= 0.0 {
                *d = 0.0;
            }
        }
        let d_bn_out = linear_backward(&cache.bn_out, &d_fc1, &p.fc1, Some(&mut g.fc1));
        let mut d_bn_in = Mat::zeros(b, h);
        for j in 0..h {
            let mut sum_d = 0.0;
            let mut sum_dx = 0.0;
            for r in 0..b {
                let dy = d_bn_out.at(r, j);
                g.bn_gamma.data[j] += dy * cache.xhat.at(r, j);
                g.bn_beta.data[j] += dy;
                let dxh = dy * p.bn_gamma.data[j];
                sum_d += dxh;
                sum_dx += dxh * cache.xhat.at(r, j);
            }
            for r in 0..b {
                let dxh = d_bn_out.at(r, j) * p.bn_gamma.data[j];
                *d_bn_in.at_mut(r, j) = if cache.train {
                    cache.rstd[j] / b as f64 * (b as f64 * dxh - sum_d - cache.xhat.at(r, j) * sum_dx)
                } else {
                    dxh * cache.rstd[j]
                };
            }
        }
        for (r, s) in cache.samples.iter().enumerate() {
            let mut d_a2 = self.lstm_backward(&s.lstm, d_bn_in.row(r), &mut g.lstm);
            apply_mask(&mut d_a2, &s.m2);
            for (d, z) in d_a2.data.iter_mut().zip(&s.z2.data) {
                if *z <= 0.0 {
                    *d = 0.0;
                }
            }
            matmul_at_acc(&d_a2, &s.col2, &mut g.conv2.w);
            d_a2.accumulate_col_sums(&mut g.conv2.b);
            let mut d_pooled = col2im(&matmul(&d_a2, &p.conv2.w), d_a2.rows, cfg.conv1_channels, cfg.kernel);
            apply_mask(&mut d_pooled, &s.m1);
            let mut d_a1 = Mat::zeros(s.z1.rows, s.z1.cols);
            for t in 0..d_pooled.rows {
                for c in 0..d_pooled.cols {
                    let src = s.pool_src[t * d_pooled.cols + c];
                    if s.z1.at(src, c) > 0.0 {
                        *d_a1.at_mut(src, c) += d_pooled.at(t, c);
                    }
                }
            }
            matmul_at_acc(&d_a1, &s.col1, &mut g.conv1.w);
            d_a1.accumulate_col_sums(&mut g.conv1.b);
        }
    }
}

impl BioCache {
    /// Final LSTM hidden state per batch row, before normalisation.
    pub fn lstm_output(&self) -> &Mat {
        &self.bn_in
    }
}

/// Mean cross-entropy over a batch and its logit gradient.
pub fn batch_cross_entropy(logits: &Mat, labels: &[usize]) -> (f64, Mat) {
    let b = logits.rows as f64;
    let mut d = Mat::zeros(logits.rows, logits.cols);
    let mut loss = 0.0;
    for (r, &y) in labels.iter().enumerate() {
        let row = logits.row(r);
        let lse = log_sum_exp(row);
        loss += lse - row[y];
        for (dj, l) in d.row_mut(r).iter_mut().zip(row) {
            *dj = (l - lse).exp() / b;
        }
        d.row_mut(r)[y] -= 1.0 / b;
    }
    (loss / b, d)
}
