#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use quadfuse::biosignal::SensorStream;
use quadfuse::taxonomy::IntentTaxonomy;

pub const COMPACT: &str = "{question}\n{A} (A)\n{B} (B)\n{C} (C)\n{D} (D)\n";

pub fn run(cwd: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_quadfuse"))
        .args(args)
        .current_dir(cwd)
        .env("QUADFUSE_LOG", "warn")
        .output()
        .expect("binary runs")
}

pub fn ok(cwd: &Path, args: &[&str]) -> Output {
    let out = run(cwd, args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    out
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn write(root: &Path, name: &str, text: &str) {
    fs::write(root.join(name), text).unwrap();
}

const SYNTH: &str = "synth.subjects = 3
synth.seconds = 120
synth.n_av = 120
synth.n_ts = 120
synth.imu_per_class = 20
synth.video_channels = 1
synth.mel_bins = 8
";

const PREPARE_TS: &str = "streams_dir = data/streams
taxonomy_path = data/taxonomy.tsv
nbp.window_lens = 5
nbp.horizons = 1,2
";

const BENCH: &str = "taxonomy_path = data/taxonomy.tsv
av_pool = data/av_pool.jsonl
ts_pool = data/ts_pool.jsonl
conflict_n = 10
";

const PROMPT: &str = "taxonomy_path = data/taxonomy.tsv
eval.template_path = compact.txt
eval.question = Intent?
";

const STAGE1: &str = "data = nbp/nbp.jsonl
model.d_model = 16
model.n_layers = 1
model.n_heads = 2
model.max_seq_len = 128
ts.conv_channels = 8
ts.d_ts = 8
vision.channels = 1
audio.mel_bins = 8
stage1.max_epochs = 2
stage1.learning_rate = 0.003
";

const STAGE2: &str = "data = bench/bench.jsonl
stage2.max_epochs = 2
stage2.learning_rate = 0.003
stage2.per_device_batch = 8
";

const EVAL: &str = "checkpoint = model/final
items = bench/bench.jsonl
";

const UQ: &str = "checkpoint = model/final
congruent = bench/congruent.jsonl
conflict = bench/conflict.jsonl
uq.draws = 5
";

const BIO: &str = "data = data/imu.jsonl
bio.learning_rate = 0.01
bio.max_epochs = 4
bio.batch_size = 16
bio.conv1_channels = 8
bio.conv2_channels = 8
bio.lstm_hidden = 8
bio.fc_hidden = 8
";

const PLOT: &str = "plot.ablation_csv = ablate/ablation.csv
plot.uq_csv = uq/uq_summary.csv
";

/// Writes the config files of the small fixture pipeline into `root`.
pub fn write_configs(root: &Path) {
    write(root, "compact.txt", COMPACT);
    write(root, "synth.conf", SYNTH);
    write(root, "prepare_ts.conf", PREPARE_TS);
    write(root, "bench.conf", BENCH);
    write(root, "stage1.conf", &format!("{PROMPT}{STAGE1}"));
    write(root, "stage2.conf", &format!("{PROMPT}{STAGE2}"));
    write(root, "eval.conf", &format!("{PROMPT}{EVAL}"));
    write(root, "uq.conf", &format!("{PROMPT}{UQ}"));
    write(root, "bio.conf", BIO);
    write(root, "plot.conf", PLOT);
}

/// Every command of the fixture pipeline, in order, with relative paths.
pub const PIPELINE: [&[&str]; 10] = [
    &["synth", "--config", "synth.conf", "--seed", "5", "--out", "data"],
    &["prepare-ts", "--config", "prepare_ts.conf", "--seed", "5", "--out", "nbp"],
    &["prepare-bench", "--config", "bench.conf", "--seed", "5", "--out", "bench"],
    &["train", "--stage", "1", "--config", "stage1.conf", "--seed", "5", "--out", "model"],
    &["train", "--stage", "2", "--config", "stage2.conf", "--seed", "5", "--out", "model"],
    &["eval", "--config", "eval.conf", "--seed", "5", "--out", "eval"],
    &["ablate", "--config", "eval.conf", "--seed", "5", "--out", "ablate"],
    &["uq", "--config", "uq.conf", "--seed", "5", "--out", "uq"],
    &["baseline-bio", "--config", "bio.conf", "--seed", "5", "--out", "bio"],
    &["plot", "--config", "plot.conf", "--seed", "5", "--out", "plots"],
];

pub fn pipeline(root: &Path) {
    write_configs(root);
    for args in PIPELINE {
        ok(root, args);
    }
}

/// Relative path to contents for every file under `root`.
pub fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(base: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(base, &p, out);
            } else {
                out.insert(p.strip_prefix(base).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

/// Brute-force next-behaviour windows of a second-level stream: every start
/// on the stride grid whose seconds through the target are present and
/// consecutive, with a labelled, non-transient, in-taxonomy target at
/// `start + a - 1 + b`. Returns `(start_s, target, window rows)`.
pub fn nbp_oracle(
    s: &SensorStream,
    a: usize,
    b: usize,
    stride: usize,
    taxonomy: &IntentTaxonomy,
) -> Vec<(f64, String, Vec<Vec<f64>>)> {
    let rows = &s.samples;
    let mut out = Vec::new();
    let mut start = 0;
    while start < rows.len() {
        let target = start + a - 1 + b;
        if target < rows.len() {
            let span = &rows[start..=target];
            let present = span.iter().all(|r| !r.gap);
            let consecutive = span.windows(2).all(|w| w[1].timestamp_s - w[0].timestamp_s == 1.0);
            let t = &rows[target];
            if present && consecutive && !t.transient {
                if let Some(label) = t.label.as_deref().filter(|l| taxonomy.contains(l)) {
                    let window = rows[start..start + a].iter().map(|r| r.channels.clone()).collect();
                    out.push((rows[start].timestamp_s, label.to_string(), window));
                }
            }
        }
        start += stride;
    }
    out
}
