//! Central finite-difference checks for hand-written backward passes.

use std::ops::Range;

use crate::model::params::{FusionParams, Group};

/// Flat read/write access to a parameter set.
pub trait ParamVec {
    fn n_params(&self) -> usize;
    fn param(&self, i: usize) -> f64;
    fn set_param(&mut self, i: usize, v: f64);
}

impl ParamVec for FusionParams {
    fn n_params(&self) -> usize {
        self.param_count()
    }

    fn param(&self, i: usize) -> f64 {
        let mut i = i;
        for t in self.tensors() {
            if i < t.mat.len() {
                return t.mat.data[i];
            }
            i -= t.mat.len();
        }
        panic!("parameter index out of range")
    }

    fn set_param(&mut self, i: usize, v: f64) {
        let mut i = i;
        for t in self.tensors_mut() {
            if i < t.mat.len() {
                t.mat.data[i] = v;
                return;
            }
            i -= t.mat.len();
        }
        panic!("parameter index out of range")
    }
}

impl ParamVec for Vec<f64> {
    fn n_params(&self) -> usize {
        self.len()
    }

    fn param(&self, i: usize) -> f64 {
        self[i]
    }

    fn set_param(&mut self, i: usize, v: f64) {
        self[i] = v;
    }
}

/// Flat index range of each group (groups are stored contiguously).
pub fn group_range(p: &FusionParams, g: Group) -> Range<usize> {
    let mut start = None;
    let mut offset = 0;
    let mut end = 0;
    for t in p.tensors() {
        if t.group == g {
            start.get_or_insert(offset);
            end = offset + t.mat.len();
        }
        offset += t.mat.len();
    }
    start.unwrap_or(0)..end
}

/// `(loss(θ + ε e_i) − loss(θ − ε e_i)) / 2ε` for each index; θ is restored.
pub fn finite_difference<P: ParamVec, F: FnMut(&P) -> f64>(p: &mut P, indices: &[usize], eps: f64, mut loss: F) -> Vec<f64> {
    indices
        .iter()
        .map(|&i| {
            let v = p.param(i);
            p.set_param(i, v + eps);
            let up = loss(p);
            p.set_param(i, v - eps);
            let down = loss(p);
            p.set_param(i, v);
            (up - down) / (2.0 * eps)
        })
        .collect()
}

/// `|a − n| / max(|a|, |n|, floor)`; the floor keeps near-zero gradients from
/// turning rounding noise into large ratios.
pub fn rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}
