//! Ten-class tri-axial windows scattered around fixed per-class means.

use rand_distr::{Distribution, Normal};

use crate::seed;
use crate::tensor::Mat;

pub const IMU_CLASSES: usize = 10;

/// Class mean: a point on a radius-2 circle in the first two axes, with the
/// third axis alternating between +1 and -1.
pub fn imu_centroid(class: usize) -> [f64; 3] {
    let angle = std::f64::consts::TAU * class as f64 / IMU_CLASSES as f64;
    let z = if class % 2 == 0 { 1.0 } else { -1.0 };
    [2.0 * angle.cos(), 2.0 * angle.sin(), z]
}

/// `n_per_class` windows of `len × 3` per class, class-major order.
pub fn imu_task(n_per_class: usize, len: usize, noise: f64, seed: u64) -> (Vec<Mat>, Vec<usize>) {
    let normal = Normal::new(0.0, noise).expect("valid noise");
    let mut rng = seed::rng(seed, "imu-task");
    let mut windows = Vec::with_capacity(n_per_class * IMU_CLASSES);
    let mut labels = Vec::with_capacity(n_per_class * IMU_CLASSES);
    for c in 0..IMU_CLASSES {
        let mu = imu_centroid(c);
        for _ in 0..n_per_class {
            let data = (0..len).flat_map(|_| mu).map(|m| m + normal.sample(&mut rng)).collect();
            windows.push(Mat::from_vec(len, 3, data));
            labels.push(c);
        }
    }
    (windows, labels)
}

/// Class whose mean is closest to the window's per-channel mean.
pub fn nearest_centroid(window: &Mat) -> usize {
    let mut mean = [0.0; 3];
    for r in 0..window.rows {
        for (m, v) in mean.iter_mut().zip(window.row(r)) {
            *m += v / window.rows as f64;
        }
    }
    (0..IMU_CLASSES)
        .map(|c| {
            let mu = imu_centroid(c);
            (c, (0..3).map(|j| (mean[j] - mu[j]).powi(2)).sum::<f64>())
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(c, _)| c)
        .expect("at least one class")
}
