use super::*;
use crate::gradcheck::{finite_difference, group_range, rel_error};
use crate::seed;
use crate::tensor::{softmax_in_place, Mat};
use rand::seq::IndexedRandom;
use rand::Rng;

pub(crate) fn tiny_vocab() -> Vocab {
    let mut tokens: Vec<String> = vocab::SPECIALS.iter().map(|s| s.to_string()).collect();
    for t in ["A", "B", "C", "D", " ", ".", "\n", "a", "b", "c", "d", "e", "f", "g", "h", "i", "j", "k", "l", "m"] {
        tokens.push(t.to_string());
    }
    let base = Vocab::from_tokens(tokens, None).unwrap();
    extend_vocab(&base).unwrap()
}

pub(crate) fn tiny_config() -> FusionConfig {
    FusionConfig {
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
    }
}

pub(crate) fn tiny_model(seed: u64) -> FusionModel {
    let v = tiny_vocab();
    assert_eq!(v.len(), 32);
    FusionModel::init(tiny_config(), v, seed).unwrap()
}

struct Sample {
    prompt: Vec<usize>,
    ts: Mat,
    video: FrameStack,
    audio: Mat,
    targets: Vec<usize>,
}

fn random_sample(model: &FusionModel, rng: &mut seed::Rng) -> Sample {
    let v = &model.vocab;
    let text = "<|vis_start|><|vis_unit|><|vis_end|>ab <|aud_start|><|aud_unit|><|aud_end|> <|ts_start|><|ts_unit|><|ts_end|>c.";
    let prompt = v.encode(text);
    let ts = Mat::randn(5, 3, 1.0, rng);
    let video = FrameStack::new(2, 4, 4, 1, (0..32).map(|_| rng.random::<f64>()).collect()).unwrap();
    let audio = Mat::randn(3, 4, 1.0, rng);
    let len = prompt.len() - 3 + 3 + 2 + 3;
    let targets = (0..len).map(|_| rng.random_range(0..v.len())).collect();
    Sample { prompt, ts, video, audio, targets }
}

fn inputs(s: &Sample) -> ModalInputs<'_> {
    ModalInputs { ts: Some(&s.ts), video: Some(&s.video), audio: Some(&s.audio) }
}

fn loss_and_grad(model: &FusionModel, s: &Sample) -> (f64, FusionParams) {
    let prepared = model.prepare(&s.prompt, inputs(s)).unwrap();
    let (hidden, cache) = model.forward_train(&prepared, None).unwrap();
    let logits = transformer::lm_logits(&model.params, &hidden);
    let l = logits.rows;
    assert_eq!(l, s.targets.len());
    let mut d = Mat::zeros(l, logits.cols);
    let mut loss = 0.0;
    for i in 0..l {
        let mut p = logits.row(i).to_vec();
        loss += crate::tensor::log_sum_exp(&p) - p[s.targets[i]];
        softmax_in_place(&mut p);
        p[s.targets[i]] -= 1.0;
        for (o, v) in d.row_mut(i).iter_mut().zip(&p) {
            *o = v / l as f64;
        }
    }
    let mut grads = model.params.zeros_like();
    let rows: Vec<usize> = (0..l).collect();
    model.backward_from_logits(&prepared, &cache, &hidden, &rows, &d, &mut grads);
    (loss / l as f64, grads)
}

fn loss_only(model: &FusionModel, s: &Sample) -> f64 {
    loss_and_grad(model, s).0
}

#[test]
fn full_model_gradients_match_finite_differences() {
    let mut rng = seed::rng(11, "fd-model");
    for draw in 0..3 {
        let mut model = tiny_model(100 + draw);
        let s = random_sample(&model, &mut rng);
        let (_, grads) = loss_and_grad(&model, &s);
        let analytic: Vec<f64> = grads.tensors().iter().flat_map(|t| t.mat.data.clone()).collect();
        let mut worst: f64 = 0.0;
        for g in Group::ALL {
            let range: Vec<usize> = group_range(&model.params, g).collect();
            let idx: Vec<usize> = range.choose_multiple(&mut rng, 25).copied().collect();
            let mut params = model.params.clone();
            let numeric = finite_difference(&mut params, &idx, 1e-4, |p| {
                model.params = p.clone();
                loss_only(&model, &s)
            });
            for (k, &i) in idx.iter().enumerate() {
                let e = rel_error(analytic[i], numeric[k], 1e-6);
                assert!(e <= 1e-3, "group {g} index {i}: analytic {} numeric {}", analytic[i], numeric[k]);
                worst = worst.max(e);
            }
            model.params = params;
        }
        assert!(worst < 1e-3);
    }
}

#[test]
fn causal_mask_hides_future_rows() {
    let model = tiny_model(5);
    let mut rng = seed::rng(5, "causal");
    let ctx = Mat::randn(10, 8, 1.0, &mut rng);
    let base = transformer::forward(&model.config, &model.params, &ctx).unwrap();
    for j in 0..10 {
        let mut c2 = ctx.clone();
        for v in c2.row_mut(j) {
            *v += 3.0;
        }
        let out = transformer::forward(&model.config, &model.params, &c2).unwrap();
        assert_eq!(&out.data[..j * base.cols], &base.data[..j * base.cols]);
        assert_ne!(out.row(j), base.row(j));
    }
    let one = transformer::forward(&model.config, &model.params, &Mat::zeros(1, 8)).unwrap();
    assert_eq!(one.shape(), (1, 32));
    assert!(matches!(
        transformer::forward(&model.config, &model.params, &Mat::zeros(41, 8)),
        Err(crate::Error::SequenceTooLong { needed: 41, max: 40 })
    ));
}

#[test]
fn softmax_rows_are_normalised() {
    let model = tiny_model(6);
    let ctx = Mat::randn(6, 8, 1.0, &mut seed::rng(6, "sm"));
    let logits = transformer::forward(&model.config, &model.params, &ctx).unwrap();
    for i in 0..6 {
        let mut p = logits.row(i).to_vec();
        softmax_in_place(&mut p);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn greedy_decoding_is_reproducible() {
    let model = tiny_model(7);
    let s = random_sample(&model, &mut seed::rng(7, "greedy"));
    let prepared = model.prepare(&s.prompt, inputs(&s)).unwrap();
    let a = model.decode_greedy(&prepared, 6).unwrap();
    for _ in 0..3 {
        assert_eq!(model.decode_greedy(&prepared, 6).unwrap(), a);
    }
    assert_eq!(model.decode_greedy(&prepared, 0).unwrap(), "");
}

#[test]
fn rigged_head_always_says_a() {
    let mut model = tiny_model(8);
    let a = model.vocab.id("A").unwrap();
    model.params.lm_head.w.fill(0.0);
    model.params.lm_head.b.fill(0.0);
    model.params.lm_head.b.data[a] = 5.0;
    let prepared = model.prepare_text("ab", ModalInputs::default()).unwrap();
    assert_eq!(model.decode_greedy(&prepared, 4).unwrap(), "AAAA");
    // all-tied logits fall back to the lowest id, which is the pad token
    model.params.lm_head.b.fill(0.0);
    assert_eq!(model.decode_greedy(&prepared, 1).unwrap(), vocab::PAD);
}

#[test]
fn sampling_is_seeded_and_tends_to_greedy() {
    let model = tiny_model(9);
    let s = random_sample(&model, &mut seed::rng(9, "sample"));
    let prepared = model.prepare(&s.prompt, inputs(&s)).unwrap();
    let x = model.sample(&prepared, 0.7, 42, 5).unwrap();
    assert_eq!(x, model.sample(&prepared, 0.7, 42, 5).unwrap());
    assert_eq!(model.sample(&prepared, 1e-6, 3, 5).unwrap(), model.decode_greedy(&prepared, 5).unwrap());
    assert!(matches!(model.sample(&prepared, 0.0, 1, 1), Err(crate::Error::NonPositiveTemperature(_))));
}

#[test]
fn single_step_frequencies_follow_softmax() {
    let mut rng = seed::rng(10, "freq");
    let logits = [0.0, 2f64.ln()];
    let n = 10_000;
    let ones = (0..n).filter(|_| sample_index(&logits, 1.0, &mut rng) == 1).count();
    let f = ones as f64 / n as f64;
    assert!((f - 2.0 / 3.0).abs() < 0.02, "{f}");
}

#[test]
fn resize_keeps_old_rows_and_centres_new_ones() {
    let base = Vocab::base(&["cat"]);
    let cfg = FusionConfig { d_model: 16, n_heads: 2, n_layers: 1, max_seq_len: 8, ..tiny_config() };
    let model = FusionModel::init(cfg, base.clone(), 1).unwrap();
    let same = resize_embeddings(&model.params, &base, &base, 1).unwrap();
    assert_eq!(same, model.params);
    let ext = extend_vocab(&base).unwrap();
    let mut dev_sum = vec![0.0; 16];
    let seeds = 200;
    for s in 0..seeds {
        let p = resize_embeddings(&model.params, &base, &ext, s).unwrap();
        assert_eq!(&p.tok_emb.data[..model.params.tok_emb.len()], &model.params.tok_emb.data[..]);
        assert_eq!(&p.lm_head.w.data[..model.params.lm_head.w.len()], &model.params.lm_head.w.data[..]);
        assert_eq!(p.tok_emb.rows, ext.len());
        for c in 0..16 {
            let mean: f64 = (0..base.len()).map(|r| model.params.tok_emb.at(r, c)).sum::<f64>() / base.len() as f64;
            for r in base.len()..ext.len() {
                let dev = p.tok_emb.at(r, c) - mean;
                assert!(dev.abs() < 5.0 * 0.02, "new row too far from mean");
                dev_sum[c] += dev;
            }
        }
    }
    // the average deviation over 600 draws shrinks like 0.02/sqrt(600)
    for d in dev_sum {
        assert!((d / (3 * seeds) as f64).abs() < 3.0 * 0.02 / ((3 * seeds) as f64).sqrt() * 1.5);
    }
    let other = Vocab::base(&["dog"]);
    assert!(resize_embeddings(&model.params, &base, &other, 0).is_err());
}

#[test]
fn surgery_preserves_existing_ids() {
    let base = Vocab::base(&["cat", "walking"]);
    let cfg = FusionConfig { d_model: 8, n_heads: 2, n_layers: 1, max_seq_len: 16, ..tiny_config() };
    let model = FusionModel::init(cfg, base.clone(), 1).unwrap();
    let old = model.params.tok_emb.clone();
    let m = model.with_ts_tokens(3).unwrap();
    let ts = m.vocab.ts_ids().unwrap();
    assert_eq!((ts.start, ts.unit, ts.end), (base.len(), base.len() + 1, base.len() + 2));
    assert_eq!(&m.params.tok_emb.data[..old.len()], &old.data[..]);
    assert_eq!(m.config.vocab_size, base.len() + 3);
}

#[test]
fn processor_agrees_with_encoder_across_window_lengths() {
    for pool in [1, 2, 3] {
        let mut model = tiny_model(12);
        model.config.ts.pool = pool;
        model.config.max_seq_len = 40;
        let mut rng = seed::rng(12, "agree");
        for a in [5usize, 7, 10, 15] {
            let window = Mat::randn(a, 3, 1.0, &mut rng);
            let prepared = model.prepare_text("<|ts_start|><|ts_unit|><|ts_end|>a", ModalInputs { ts: Some(&window), ..Default::default() }).unwrap();
            let k = prepared.encoded.ts.as_ref().unwrap().projected.rows;
            assert_eq!(k, model.config.ts_steps(a));
            assert_eq!(prepared.proc.count(Modality::TsUnit), k);
        }
    }
}

#[test]
fn checkpoint_round_trip_is_byte_stable() {
    let dir = tempfile::tempdir().unwrap();
    let mut model = tiny_model(13);
    model.params.set_frozen([Group::TsEncoder, Group::Blocks]);
    checkpoint::save(&dir.path().join("a"), &model, "seed=13").unwrap();
    let loaded = checkpoint::load(&dir.path().join("a")).unwrap();
    assert_eq!(loaded.vocab, model.vocab);
    assert_eq!(loaded.config, model.config);
    assert_eq!(loaded.params.frozen, model.params.frozen);
    let mut rounded = model.params.clone();
    checkpoint::round_to_f32(&mut rounded);
    assert_eq!(loaded.params, rounded);
    checkpoint::save(&dir.path().join("b"), &loaded, "seed=13").unwrap();
    for g in Group::ALL {
        let f = checkpoint::group_file(g);
        assert_eq!(std::fs::read(dir.path().join("a").join(&f)).unwrap(), std::fs::read(dir.path().join("b").join(&f)).unwrap());
    }
    assert_eq!(
        std::fs::read(dir.path().join("a/manifest")).unwrap(),
        std::fs::read(dir.path().join("b/manifest")).unwrap()
    );
}
