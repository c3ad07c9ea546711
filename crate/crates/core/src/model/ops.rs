//! Layer kernels with hand-written backward passes.

use super::params::{LayerNorm, Linear};
use crate::tensor::{matmul, matmul_at_acc, matmul_bt, Mat};

pub const LN_EPS: f64 = 1e-5;

pub fn linear(x: &Mat, l: &Linear) -> Mat {
    let mut y = matmul_bt(x, &l.w);
    y.add_row_broadcast(&l.b);
    y
}

/// Returns `dx`; weight gradients are accumulated into `grad` when given.
pub fn linear_backward(x: &Mat, dy: &Mat, l: &Linear, grad: Option<&mut Linear>) -> Mat {
    if let Some(g) = grad {
        matmul_at_acc(dy, x, &mut g.w);
        dy.accumulate_col_sums(&mut g.b);
    }
    matmul(dy, &l.w)
}

/// Weight gradients only, for inputs that need no gradient.
pub fn linear_backward_weights(x: &Mat, dy: &Mat, grad: &mut Linear) {
    matmul_at_acc(dy, x, &mut grad.w);
    dy.accumulate_col_sums(&mut grad.b);
}

pub struct LnCache {
    pub xhat: Mat,
    pub rstd: Vec<f64>,
}

pub fn layer_norm(x: &Mat, ln: &LayerNorm) -> (Mat, LnCache) {
    let d = x.cols;
    let mut y = Mat::zeros(x.rows, d);
    let mut xhat = Mat::zeros(x.rows, d);
    let mut rstd = Vec::with_capacity(x.rows);
    for i in 0..x.rows {
        let r = x.row(i);
        let mean = r.iter().sum::<f64>() / d as f64;
        let var = r.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let rs = 1.0 / (var + LN_EPS).sqrt();
        rstd.push(rs);
        let xh = xhat.row_mut(i);
        for j in 0..d {
            xh[j] = (r[j] - mean) * rs;
        }
        let yr = &mut y.data[i * d..(i + 1) * d];
        for j in 0..d {
            yr[j] = xhat.data[i * d + j] * ln.g.data[j] + ln.b.data[j];
        }
    }
    (y, LnCache { xhat, rstd })
}

pub fn layer_norm_backward(dy: &Mat, cache: &LnCache, ln: &LayerNorm, grad: Option<&mut LayerNorm>) -> Mat {
    let d = dy.cols;
    if let Some(g) = grad {
        for i in 0..dy.rows {
            let (dr, xr) = (dy.row(i), cache.xhat.row(i));
            for j in 0..d {
                g.g.data[j] += dr[j] * xr[j];
                g.b.data[j] += dr[j];
            }
        }
    }
    let mut dx = Mat::zeros(dy.rows, d);
    let mut dxhat = vec![0.0; d];
    for i in 0..dy.rows {
        let (dr, xr) = (dy.row(i), cache.xhat.row(i));
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for j in 0..d {
            dxhat[j] = dr[j] * ln.g.data[j];
            m1 += dxhat[j];
            m2 += dxhat[j] * xr[j];
        }
        m1 /= d as f64;
        m2 /= d as f64;
        let rs = cache.rstd[i];
        let out = dx.row_mut(i);
        for j in 0..d {
            out[j] = rs * (dxhat[j] - m1 - xr[j] * m2);
        }
    }
    dx
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

/// Tanh-approximated GELU.
pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

pub fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

pub fn gelu_mat(x: &Mat) -> Mat {
    Mat { rows: x.rows, cols: x.cols, data: x.data.iter().map(|&v| gelu(v)).collect() }
}

/// `dy ⊙ gelu'(x)`.
pub fn gelu_backward(x: &Mat, dy: &Mat) -> Mat {
    Mat { rows: x.rows, cols: x.cols, data: x.data.iter().zip(&dy.data).map(|(&v, &d)| d * gelu_grad(v)).collect() }
}
