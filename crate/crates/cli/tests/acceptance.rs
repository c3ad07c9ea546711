//! Acceptance suite: one check per primary criterion, each printed as a
//! PASS/FAIL line. Set `ACCEPTANCE_ONLY=3,5` to run a subset.

mod common;

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use quadfuse::biosignal::{aggregate_to_seconds, segment_nbp, SensorStream, StreamSample};
use quadfuse::evaluation::{batch_cross_entropy, entropy_bits, train_bio_baseline, BioConfig, BioModel, BioTrainConfig};
use quadfuse::gradcheck::{finite_difference, group_range, rel_error, ParamVec};
use quadfuse::model::vocab::SPECIALS;
use quadfuse::model::{
    checkpoint, extend_vocab, transformer, AudioConfig, FrameStack, FusionConfig, FusionModel, Group, Modality,
    ModalInputs, TsEncoderConfig, VisionConfig, Vocab,
};
use quadfuse::seed;
use quadfuse::synthetic::{imu_task, run_experiment, ExperimentConfig, IMU_CLASSES};
use quadfuse::taxonomy::IntentTaxonomy;
use quadfuse::tensor::{log_sum_exp, softmax_in_place, Mat};
use quadfuse::training::{
    cosine_warmup_lr, train_stage1, train_stage2, train_stage2_split, warmup_steps, Stage1Example, Stage2Example,
    StageConfig,
};
use rand::seq::IndexedRandom;
use rand::Rng;

const EXPERIMENT_SEED: u64 = 1;

// ---------------------------------------------------------------- fixtures

fn tiny_vocab() -> Vocab {
    let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
    for t in ["A", "B", "C", "D", " ", ".", "\n", "a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l", "m"] {
        tokens.push(t.to_string());
    }
    extend_vocab(&Vocab::from_tokens(tokens, None).unwrap()).unwrap()
}

/// Two layers, width 8, vocabulary 32.
fn tiny_model(seed: u64) -> FusionModel {
    let config = FusionConfig {
        d_model: 8,
        n_layers: 2,
        n_heads: 2,
        ffn_mult: 2,
        max_seq_len: 40,
        vocab_size: 32,
        ts: TsEncoderConfig { in_channels: 3, conv_channels: vec![4, 3], kernel: 3, d_ts: 5, pool: 2 },
        vision: VisionConfig { patch: 2, channels: 1 },
        audio: AudioConfig { mel_bins: 4 },
        dropout: 0.0,
    };
    let v = tiny_vocab();
    assert_eq!(v.len(), 32);
    FusionModel::init(config, v, seed).unwrap()
}

const QUAD_PROMPT: &str =
    "<|vis_start|><|vis_unit|><|vis_end|>ab <|aud_start|><|aud_unit|><|aud_end|> <|ts_start|><|ts_unit|><|ts_end|>c.";

fn quad_example(model: &FusionModel, rng: &mut seed::Rng, response: &str) -> Stage2Example {
    let mut response_ids = model.vocab.encode(response);
    response_ids.push(model.vocab.eot());
    Stage2Example {
        id: format!("q{}", rng.random::<u32>()),
        prompt_ids: model.vocab.encode(QUAD_PROMPT),
        response_ids,
        ts: Some(Mat::randn(5, 3, 1.0, rng)),
        video: Some(FrameStack::new(2, 4, 4, 1, (0..32).map(|_| rng.random::<f64>()).collect()).unwrap()),
        audio: Some(Mat::randn(3, 4, 1.0, rng)),
    }
}

/// Mean next-token cross-entropy over every position against random targets,
/// and its analytic gradient.
fn lm_loss(model: &FusionModel, ex: &Stage2Example, targets: &[usize]) -> (f64, quadfuse::model::FusionParams) {
    let prepared = model.prepare(&ex.prompt_ids, ex.inputs()).unwrap();
    let (hidden, cache) = model.forward_train(&prepared, None).unwrap();
    let logits = transformer::lm_logits(&model.params, &hidden);
    let l = logits.rows;
    let mut d = Mat::zeros(l, logits.cols);
    let mut loss = 0.0;
    for i in 0..l {
        let mut p = logits.row(i).to_vec();
        loss += log_sum_exp(&p) - p[targets[i]];
        softmax_in_place(&mut p);
        p[targets[i]] -= 1.0;
        for (o, v) in d.row_mut(i).iter_mut().zip(&p) {
            *o = v / l as f64;
        }
    }
    let mut grads = model.params.zeros_like();
    let rows: Vec<usize> = (0..l).collect();
    model.backward_from_logits(&prepared, &cache, &hidden, &rows, &d, &mut grads);
    (loss / l as f64, grads)
}

// ---------------------------------------------------------------- criteria

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn c1_gradients() -> Outcome {
    const DRAWS: u64 = 20;
    const PER_GROUP: usize = 6;
    let started = Instant::now();
    let mut rng = seed::rng(1, "acceptance-fd");
    let modules: [(&str, Vec<Group>); 3] = [
        ("ts-encoder", vec![Group::TsEncoder]),
        ("projector", vec![Group::TsProjector]),
        ("transformer", Group::BACKBONE.to_vec()),
    ];
    let mut worst = [0.0f64; 4];
    let mut checked = [0usize; 4];
    for draw in 0..DRAWS {
        let mut model = tiny_model(1000 + draw);
        let ex = quad_example(&model, &mut rng, "");
        let n = model.prepare(&ex.prompt_ids, ex.inputs()).unwrap().proc.len();
        let targets: Vec<usize> = (0..n).map(|_| rng.random_range(0..model.vocab.len())).collect();
        let (_, grads) = lm_loss(&model, &ex, &targets);
        for (m, (_, groups)) in modules.iter().enumerate() {
            let pool: Vec<usize> = groups.iter().flat_map(|&g| group_range(&model.params, g)).collect();
            let idx: Vec<usize> = pool.choose_multiple(&mut rng, PER_GROUP).copied().collect();
            let mut params = model.params.clone();
            let numeric = finite_difference(&mut params, &idx, 1e-4, |p| {
                model.params = p.clone();
                lm_loss(&model, &ex, &targets).0
            });
            model.params = params;
            for (k, &i) in idx.iter().enumerate() {
                worst[m] = worst[m].max(rel_error(grads.param(i), numeric[k], 1e-6));
                checked[m] += 1;
            }
        }
    }
    let bio_cfg = BioConfig {
        conv1_channels: 4,
        conv2_channels: 5,
        lstm_hidden: 3,
        fc_hidden: 4,
        n_classes: 3,
        dropout: 0.0,
        ..Default::default()
    };
    for draw in 0..DRAWS {
        let m = BioModel::init(bio_cfg.clone(), 2000 + draw).unwrap();
        let xs: Vec<Mat> = (0..4).map(|_| Mat::randn(5, 3, 1.0, &mut rng)).collect();
        let labels: Vec<usize> = (0..4).map(|i| i % 3).collect();
        let refs: Vec<&Mat> = xs.iter().collect();
        let loss = |p: &quadfuse::evaluation::BioParams| {
            let mm = BioModel { params: p.clone(), ..m.clone() };
            let (l, _) = mm.forward(&refs, Some(&mut seed::rng(0, "unused"))).unwrap();
            batch_cross_entropy(&l, &labels)
        };
        let (logits, cache) = m.forward(&refs, Some(&mut seed::rng(0, "unused"))).unwrap();
        let (_, d) = batch_cross_entropy(&logits, &labels);
        let mut g = m.params.zeros_like();
        m.backward(&cache, &d, &mut g);
        let idx: Vec<usize> = (0..PER_GROUP * 2).map(|_| rng.random_range(0..m.params.n_params())).collect();
        let mut p = m.params.clone();
        let numeric = finite_difference(&mut p, &idx, 1e-4, |p| loss(p).0);
        for (k, &i) in idx.iter().enumerate() {
            worst[3] = worst[3].max(rel_error(g.param(i), numeric[k], 1e-6));
            checked[3] += 1;
        }
    }
    let elapsed = started.elapsed();
    let names = ["ts-encoder", "projector", "transformer", "bio"];
    let detail = names
        .iter()
        .zip(worst.iter().zip(&checked))
        .map(|(n, (w, c))| format!("{n} max rel {w:.1e} over {c}"))
        .collect::<Vec<_>>()
        .join(", ");
    check(
        worst.iter().all(|&w| w <= 1e-3) && elapsed < Duration::from_secs(120),
        format!("{detail}; {DRAWS} draws each; {:.1}s", elapsed.as_secs_f64()),
    )
}

fn c2_processor_agreement() -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for pool in [1usize, 2, 3] {
        let mut model = tiny_model(12);
        model.config.ts.pool = pool;
        let mut rng = seed::rng(12, "agree");
        for a in [5usize, 7, 10, 15] {
            let window = Mat::randn(a, 3, 1.0, &mut rng);
            let prepared = model
                .prepare_text("<|ts_start|><|ts_unit|><|ts_end|>a", ModalInputs { ts: Some(&window), ..Default::default() })
                .unwrap();
            let projected = &prepared.encoded.ts.as_ref().unwrap().projected;
            let slots: Vec<usize> =
                prepared.proc.slots.iter().filter(|(_, m)| *m == Modality::TsUnit).map(|(p, _)| *p).collect();
            let rows_match =
                slots.iter().enumerate().all(|(k, &pos)| prepared.context.row(pos) == projected.row(k));
            let agree = slots.len() == projected.rows && projected.rows == a.div_ceil(pool) && rows_match;
            ok &= agree;
            if !agree {
                details.push(format!("pool {pool} A={a}: {} slots, {} encoder rows", slots.len(), projected.rows));
            }
        }
    }
    check(ok, if ok { "A in {5,7,10,15}, pool in {1,2,3}: slot count and rows agree".into() } else { details.join("; ") })
}

fn random_stream(rng: &mut seed::Rng, labels: &[&str]) -> SensorStream {
    let rate = rng.random_range(1..4) as f64;
    let mut s = SensorStream::new("s", "x", rate, 2);
    let seconds = rng.random_range(5..60);
    let mut label: Option<String> = None;
    for sec in 0..seconds {
        if rng.random::<f64>() < 0.2 {
            label = if rng.random::<f64>() < 0.15 { None } else { Some(labels.choose(rng).unwrap().to_string()) };
        }
        if rng.random::<f64>() < 0.08 {
            continue;
        }
        let transient = rng.random::<f64>() < 0.1;
        for k in 0..rate as usize {
            let t = sec as f64 + k as f64 / rate;
            let mut x = StreamSample::raw(t, vec![rng.random(), rng.random()], label.as_deref());
            x.transient = transient;
            s.samples.push(x);
        }
    }
    if s.samples.is_empty() {
        s.samples.push(StreamSample::raw(0.0, vec![0.0, 0.0], Some(labels[0])));
    }
    s
}

fn c3_segment_oracle() -> Outcome {
    let started = Instant::now();
    let taxonomy = IntentTaxonomy::default_taxonomy();
    let labels = ["Walk", "Rest", "Groom", "not_a_label"];
    let mut rng = seed::rng(3, "acceptance-nbp");
    let mut total = 0;
    for n in 0..1000 {
        let raw = random_stream(&mut rng, &labels);
        let stream = aggregate_to_seconds(&raw).map_err(|e| e.to_string())?;
        let (a, b, stride) = (rng.random_range(1..9), rng.random_range(1..6), rng.random_range(1..4));
        let got = segment_nbp(&stream, a, b, stride, &taxonomy).map_err(|e| e.to_string())?;
        let want = common::nbp_oracle(&stream, a, b, stride, &taxonomy);
        let got: Vec<(f64, String, Vec<Vec<f64>>)> =
            got.iter().map(|w| (w.window.start_s, w.target.name.clone(), w.window.rows())).collect();
        if got != want {
            return Err(format!("stream {n} (A={a}, B={b}, stride {stride}): {} windows, oracle {}", got.len(), want.len()));
        }
        total += want.len();
    }
    let elapsed = started.elapsed();
    check(
        elapsed < Duration::from_secs(60) && total > 0,
        format!("1000 streams, {total} windows identical; {:.2}s", elapsed.as_secs_f64()),
    )
}

fn group_bytes(dir: &std::path::Path, g: Group) -> Vec<u8> {
    std::fs::read(dir.join(checkpoint::group_file(g))).unwrap()
}

fn c4_freeze() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let model = tiny_model(4);
    let before = dir.path().join("before");
    checkpoint::save(&before, &model, "init").unwrap();
    let mut rng = seed::rng(4, "freeze");
    let prompt = model.vocab.encode("ab<|ts_start|><|ts_unit|><|ts_end|>");
    let s1: Vec<Stage1Example> = (0..24)
        .map(|i| Stage1Example { id: format!("x{i}"), prompt_ids: prompt.clone(), ts: Mat::randn(5, 3, 1.0, &mut rng), target: i % 3 })
        .collect();
    let align = StageConfig { learning_rate: 1e-2, max_epochs: 2, per_device_batch: 4, grad_accum_steps: 1, ..StageConfig::align(4) };
    let aligned = train_stage1(model, &s1, 3, &align, Some(dir.path())).unwrap();
    let s2: Vec<Stage2Example> = (0..8).map(|_| quad_example(&aligned.model, &mut rng, "B")).collect();
    let spec = StageConfig { learning_rate: 1e-2, max_epochs: 2, warmup_frac: 0.0, ..StageConfig::specialize(4) };
    train_stage2(aligned.model, &s2, &spec, Some(dir.path())).unwrap();
    let (a, f) = (dir.path().join("aligned"), dir.path().join("final"));
    let mut violations = Vec::new();
    for g in Group::ALL {
        let s1_changed = group_bytes(&before, g) != group_bytes(&a, g);
        if s1_changed != (g == Group::TsProjector) {
            violations.push(format!("stage 1 {g}"));
        }
        let s2_changed = group_bytes(&a, g) != group_bytes(&f, g);
        if s2_changed != Group::BACKBONE.contains(&g) {
            violations.push(format!("stage 2 {g}"));
        }
    }
    check(
        violations.is_empty(),
        if violations.is_empty() {
            "stage 1 changes only the projector; stage 2 changes only the backbone".into()
        } else {
            format!("unexpected change state: {}", violations.join(", "))
        },
    )
}

fn c5_entropy() -> Outcome {
    let closed = [
        (vec![10usize], 0.0),
        (vec![5, 5], 1.0),
        (vec![1; 10], 10f64.log2()),
    ];
    for (counts, want) in &closed {
        let h = entropy_bits(counts);
        if (h - want).abs() > 1e-12 {
            return Err(format!("counts {counts:?}: {h} bits, expected {want}"));
        }
    }
    let mut runner = TestRunner::new(PropConfig { cases: 512, failure_persistence: None, ..PropConfig::default() });
    let bound = runner.run(&prop::collection::vec(0usize..30, 1..12), |counts| {
        let n: usize = counts.iter().sum();
        prop_assume!(n > 0);
        let h = entropy_bits(&counts);
        prop_assert!(h >= 0.0 && h <= (n as f64).log2() + 1e-12, "H {} for {:?}", h, counts);
        Ok(())
    });
    match bound {
        Ok(()) => Ok("0, 1 and log2(10) to 1e-12; H <= log2 N over 512 random tallies".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn c6_c7_fusion() -> (Outcome, Outcome) {
    let started = Instant::now();
    let cfg = ExperimentConfig::new(EXPERIMENT_SEED);
    let result = run_experiment(&cfg, None);
    let elapsed = started.elapsed();
    let (_, report) = match result {
        Ok(r) => r,
        Err(e) => return (Err(e.to_string()), Err("experiment failed".into())),
    };
    let acc = |m: &str| report.accuracy(m).unwrap_or(f64::NAN);
    let tri = acc("V+A+TS");
    let bi = [("V+A", acc("V+A")), ("V+TS", acc("V+TS")), ("A+TS", acc("A+TS"))];
    let (best_name, best) = bi.iter().cloned().fold(("", f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
    let c6 = check(
        tri - best >= 0.05
            && tri > 0.25
            && bi.iter().all(|(_, a)| *a > 0.25)
            && cfg.n_train >= 2000
            && cfg.n_eval >= 400
            && elapsed < Duration::from_secs(30 * 60),
        format!(
            "tri {tri:.3}, best bi-modal {best_name} {best:.3} (margin {:.1}pp); {} train, {} eval, 8 classes; {:.0}s",
            100.0 * (tri - best),
            cfg.n_train,
            cfg.n_eval,
            elapsed.as_secs_f64()
        ),
    );
    let uq = &report.uq;
    let c7 = check(
        uq.difference_bits >= 0.5
            && uq.separation >= 0.7
            && uq.n_congruent == 50
            && uq.n_conflict == 50
            && cfg.uq.draws == 10
            && cfg.uq.temperature == 0.7,
        format!(
            "congruent {:.3} bits, conflict {:.3} bits, difference {:.3}, separation {:.3}; n=50/group, N=10, T=0.7",
            uq.congruent_mean_bits, uq.conflict_mean_bits, uq.difference_bits, uq.separation
        ),
    );
    (c6, c7)
}

/// Largest-remainder apportionment in integer arithmetic (percent weights).
fn apportion(n: usize, percents: [usize; 3]) -> [usize; 3] {
    let mut counts = percents.map(|p| n * p / 100);
    let rems = percents.map(|p| n * p % 100);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| rems[b].cmp(&rems[a]).then(a.cmp(&b)));
    let left = n - counts.iter().sum::<usize>();
    for &i in order.iter().take(left) {
        counts[i] += 1;
    }
    counts
}

fn c8_bio() -> Outcome {
    let per_class = 50;
    let (windows, labels) = imu_task(per_class, 5, 0.3, 8);
    let cfg = BioConfig { in_steps: 5, in_channels: 3, n_classes: IMU_CLASSES, ..Default::default() };
    let tcfg = BioTrainConfig { seed: 8, ..Default::default() };
    let (_, report, split) = train_bio_baseline(&windows, &labels, &cfg, &tcfg).map_err(|e| e.to_string())?;
    let want = apportion(per_class, [70, 10, 20]);
    let mut split_ok = true;
    for c in 0..IMU_CLASSES {
        let got = split.parts().map(|part| part.iter().filter(|&&i| labels[i] == c).count());
        split_ok &= got == want;
    }
    let all: BTreeSet<usize> = split.parts().iter().flat_map(|p| p.iter().copied()).collect();
    split_ok &= all.len() == windows.len();
    check(
        report.test_accuracy >= 0.95 && report.test_reads == 1 && split_ok,
        format!(
            "test accuracy {:.3} on {} windows, test reads {}, per-class split {:?} {}",
            report.test_accuracy,
            report.n_test,
            report.test_reads,
            want,
            if split_ok { "exact" } else { "MISMATCH" }
        ),
    )
}

fn c9_determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    common::pipeline(a.path());
    common::pipeline(b.path());
    let (sa, sb) = (common::snapshot(a.path()), common::snapshot(b.path()));
    if sa.keys().ne(sb.keys()) {
        return Err("reruns produced different file sets".into());
    }
    let differing: Vec<String> =
        sa.iter().filter(|(k, v)| sb[*k] != **v).map(|(k, _)| k.display().to_string()).collect();
    if !differing.is_empty() {
        return Err(format!("differing files: {}", differing.join(", ")));
    }
    let mut greedy = Vec::new();
    for run in 0..3 {
        let out = format!("greedy{run}");
        common::ok(a.path(), &["eval", "--config", "eval.conf", "--seed", "5", "--out", &out]);
        greedy.push(std::fs::read(a.path().join(&out).join("eval.jsonl")).unwrap());
    }
    check(
        greedy.windows(2).all(|w| w[0] == w[1]),
        format!("{} files byte-identical across two full pipeline runs; greedy eval identical over 3 runs", sa.len()),
    )
}

fn c10_schedule() -> Outcome {
    let (total, base, frac) = (1000usize, 1e-4, 0.03);
    let w = warmup_steps(total, frac);
    let mid = w + (total - w) / 2;
    let l0 = cosine_warmup_lr(0, total, base, frac);
    let lw = cosine_warmup_lr(w, total, base, frac);
    let lm = cosine_warmup_lr(mid, total, base, frac);
    let landmarks = l0 == 0.0 && (lw - base).abs() <= 1e-12 && (lm - base / 2.0).abs() <= 1e-12 && (total - w) % 2 == 0;

    let model = tiny_model(6);
    let mut rng = seed::rng(10, "accum");
    let data = vec![quad_example(&model, &mut rng, "A"), quad_example(&model, &mut rng, "D.")];
    let base_cfg = StageConfig { max_epochs: 1, warmup_frac: 0.0, learning_rate: 1e-2, ..StageConfig::specialize(9) };
    let accum = StageConfig { per_device_batch: 1, grad_accum_steps: 2, ..base_cfg.clone() };
    let batch = StageConfig { per_device_batch: 2, grad_accum_steps: 1, ..base_cfg };
    let ra = train_stage2_split(model.clone(), &data, &[0, 1], &[0], &accum, None).map_err(|e| e.to_string())?;
    let rb = train_stage2_split(model.clone(), &data, &[0, 1], &[0], &batch, None).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for (x, y) in ra.model.params.tensors().iter().zip(rb.model.params.tensors()) {
        for (p, q) in x.mat.data.iter().zip(&y.mat.data) {
            worst = worst.max((p - q).abs() / p.abs().max(q.abs()).max(1e-12));
        }
    }
    let moved = ra.model.params != model.params;
    check(
        landmarks && worst <= 1e-6 && moved,
        format!("lr(0)={l0}, lr({w})={lw:e}, lr({mid})={lm:e}; accumulation vs batch max rel diff {worst:.1e}"),
    )
}

// ---------------------------------------------------------------- driver

fn guarded(f: impl FnOnce() -> Outcome) -> Outcome {
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(o) => o,
        Err(e) => Err(format!(
            "panicked: {}",
            e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default()
        )),
    }
}

fn main() {
    let only: Option<BTreeSet<usize>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|v| v.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let want = |n: usize| only.as_ref().is_none_or(|s| s.contains(&n));
    let names = [
        "",
        "finite-difference gradients",
        "processor/encoder agreement",
        "segment_nbp vs brute force",
        "freeze contracts",
        "entropy closed forms",
        "tri-modal beats bi-modal",
        "conflict entropy gap",
        "biosignal baseline",
        "CLI determinism",
        "lr schedule and accumulation",
    ];
    let mut results: Vec<(usize, Outcome)> = Vec::new();
    let simple: [(usize, fn() -> Outcome); 8] = [
        (1, c1_gradients),
        (2, c2_processor_agreement),
        (3, c3_segment_oracle),
        (4, c4_freeze),
        (5, c5_entropy),
        (8, c8_bio),
        (9, c9_determinism),
        (10, c10_schedule),
    ];
    for (n, f) in simple {
        if want(n) {
            results.push((n, guarded(f)));
        }
    }
    if want(6) || want(7) {
        let (c6, c7) = match panic::catch_unwind(c6_c7_fusion) {
            Ok(pair) => pair,
            Err(_) => (Err("panicked".into()), Err("panicked".into())),
        };
        for (n, o) in [(6, c6), (7, c7)] {
            if want(n) {
                results.push((n, o));
            }
        }
    }
    results.sort_by_key(|r| r.0);
    let mut failed = 0;
    println!();
    for (n, o) in &results {
        match o {
            Ok(d) => println!("acceptance {n:>2} PASS  {}: {d}", names[*n]),
            Err(d) => {
                failed += 1;
                println!("acceptance {n:>2} FAIL  {}: {d}", names[*n]);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
