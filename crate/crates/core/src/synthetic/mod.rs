//! Generated datasets with known structure, used by the experiments, the CLI
//! `synth` command and the test suites.

mod experiment;
mod fusion;
mod imu;
mod streams;

pub use experiment::{eval_config, run_experiment, uq_items, ExperimentConfig, ExperimentReport};
pub use fusion::{
    class_bits, fusion_taxonomy, fusion_vocab, FusionTask, FusionTaskConfig, COMPACT_TEMPLATE, FUSION_LABELS,
    FUSION_QUESTION,
};
pub use imu::{imu_centroid, imu_task, nearest_centroid, IMU_CLASSES};
pub use streams::{fixture_stream, StreamFixture};
