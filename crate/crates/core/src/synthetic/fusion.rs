//! An eight-class task that only the conjunction of all three sensory
//! modalities decodes.
//!
//! With class `c = 4·b2 + 2·b1 + b0`, the time series carries `(b0, b1)`, the
//! video carries `b0` and a nuisance bit `r`, and the audio carries `r xor b2`.
//! Any pair of modalities leaves two classes open.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::biosignal::TsWindow;
use crate::curation::{build_mcq, synthesize_matched, McqItem, MultimodalSample, LETTERS};
use crate::model::{FrameStack, Vocab};
use crate::seed;
use crate::training::mcq_vocab;
use crate::taxonomy::IntentTaxonomy;
use crate::tensor::Mat;
use crate::Result;

pub const FUSION_LABELS: [&str; 8] = ["Feed", "Groom", "Rest", "Run", "Shake", "Trot", "Walk", "active_climbing"];
pub const FUSION_QUESTION: &str = "Intent?";
/// Option lines that repeat each label's tokens right before its letter.
pub const COMPACT_TEMPLATE: &str = "{question}\n{A} (A)\n{B} (B)\n{C} (C)\n{D} (D)\n";

/// `(b0, b1, b2)` of a class id.
pub fn class_bits(class: usize) -> [bool; 3] {
    [class & 1 == 1, class & 2 == 2, class & 4 == 4]
}

fn sign(b: bool) -> f64 {
    if b {
        1.0
    } else {
        -1.0
    }
}

pub fn fusion_taxonomy() -> IntentTaxonomy {
    IntentTaxonomy::default_taxonomy().subset(&FUSION_LABELS).expect("labels are in the shipped taxonomy")
}

/// Base vocabulary covering the compact prompt as whole words. Each
/// `label (letter)` option line is a single token, so answering is a choice
/// among tokens present in the prompt.
pub fn fusion_vocab() -> Vocab {
    mcq_vocab(&FUSION_LABELS, FUSION_QUESTION)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusionTaskConfig {
    pub ts_len: usize,
    pub ts_noise: f64,
    pub frames: usize,
    pub frame_size: usize,
    /// Must match the vision encoder's patch size.
    pub patch: usize,
    /// Colour channels; every channel repeats the grey value.
    pub channels: usize,
    pub pixel_noise: f64,
    pub audio_frames: usize,
    pub mel_bins: usize,
    pub audio_noise: f64,
}

impl Default for FusionTaskConfig {
    fn default() -> Self {
        FusionTaskConfig {
            ts_len: 5,
            ts_noise: 0.3,
            frames: 4,
            frame_size: 8,
            patch: 4,
            channels: 1,
            pixel_noise: 0.05,
            audio_frames: 4,
            mel_bins: 8,
            audio_noise: 0.2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FusionTask {
    pub config: FusionTaskConfig,
    pub taxonomy: IntentTaxonomy,
}

impl Default for FusionTask {
    fn default() -> Self {
        FusionTask::new(FusionTaskConfig::default())
    }
}

impl FusionTask {
    pub fn new(config: FusionTaskConfig) -> Self {
        FusionTask { config, taxonomy: fusion_taxonomy() }
    }

    /// `ts_len × 3` window: channel means `±1` for `b0` and `b1`, zero third axis.
    pub fn ts<R: Rng + ?Sized>(&self, class: usize, rng: &mut R) -> Mat {
        let [b0, b1, _] = class_bits(class);
        let normal = Normal::new(0.0, self.config.ts_noise).expect("valid noise");
        let mu = [sign(b0), sign(b1), 0.0];
        let data = (0..self.config.ts_len).flat_map(|_| mu).map(|m| m + normal.sample(rng)).collect();
        Mat::from_vec(self.config.ts_len, 3, data)
    }

    /// Grey frames whose within-patch left/right contrast encodes `b0` and
    /// top/bottom contrast encodes `r`.
    pub fn video<R: Rng + ?Sized>(&self, b0: bool, r: bool, rng: &mut R) -> FrameStack {
        let c = &self.config;
        let normal = Normal::new(0.0, c.pixel_noise).expect("valid noise");
        let half = c.patch / 2;
        let mut data = Vec::with_capacity(c.frames * c.frame_size * c.frame_size * c.channels);
        for _ in 0..c.frames {
            for y in 0..c.frame_size {
                for x in 0..c.frame_size {
                    let sx = sign(b0) * sign(x % c.patch < half);
                    let sy = sign(r) * sign(y % c.patch < half);
                    let v = 0.5 + 0.25 * sx + 0.25 * sy + normal.sample(rng);
                    data.extend(std::iter::repeat_n(v.clamp(0.0, 1.0), c.channels));
                }
            }
        }
        FrameStack::new(c.frames, c.frame_size, c.frame_size, c.channels, data).expect("consistent shape")
    }

    /// Log-mel-like frames with energy in the upper bins when `bit` is set and
    /// in the lower bins otherwise.
    pub fn audio<R: Rng + ?Sized>(&self, bit: bool, rng: &mut R) -> Mat {
        let c = &self.config;
        let normal = Normal::new(0.0, c.audio_noise).expect("valid noise");
        let mut m = Mat::zeros(c.audio_frames, c.mel_bins);
        for t in 0..c.audio_frames {
            for b in 0..c.mel_bins {
                let upper = b >= c.mel_bins / 2;
                *m.at_mut(t, b) = f64::from(u8::from(upper == bit)) + normal.sample(rng);
            }
        }
        m
    }

    fn labelled(&self, id: &str, session: &str, class: usize) -> MultimodalSample {
        MultimodalSample {
            text_query: FUSION_QUESTION.to_string(),
            label: Some(self.taxonomy.labels()[class].clone()),
            ..MultimodalSample::new(id, session)
        }
    }

    /// Video and audio of one class with a random nuisance bit.
    pub fn av_sample<R: Rng + ?Sized>(&self, id: &str, session: &str, class: usize, rng: &mut R) -> MultimodalSample {
        let [b0, _, b2] = class_bits(class);
        let r: bool = rng.random();
        let mut s = self.labelled(id, session, class);
        s.video = Some(self.video(b0, r, rng));
        s.audio = Some(self.audio(r ^ b2, rng));
        s
    }

    pub fn ts_sample<R: Rng + ?Sized>(&self, id: &str, session: &str, class: usize, rng: &mut R) -> MultimodalSample {
        let mut s = self.labelled(id, session, class);
        s.ts = Some(TsWindow::new(self.ts(class, rng), session, session, 0.0));
        s.ts_label = s.label.clone();
        s
    }

    /// Class-balanced AV and TS pools spread over five sessions each.
    pub fn pools(&self, n_av: usize, n_ts: usize, seed: u64) -> (Vec<MultimodalSample>, Vec<MultimodalSample>) {
        let mut rng = seed::rng(seed, "fusion-pools");
        let n = FUSION_LABELS.len();
        let av = (0..n_av).map(|i| self.av_sample(&format!("av{i:05}"), &format!("av-s{}", i % 5), i % n, &mut rng)).collect();
        let ts = (0..n_ts).map(|i| self.ts_sample(&format!("ts{i:05}"), &format!("ts-s{}", i % 5), i % n, &mut rng)).collect();
        (av, ts)
    }

    /// `n` tri-modal MCQ items built through pool matching. Item ids carry
    /// `tag` so that different splits never share ids.
    pub fn benchmark(&self, n: usize, tag: &str, seed: u64) -> Result<Vec<McqItem>> {
        let seed = seed::derive(seed, tag);
        let (mut av, mut ts) = self.pools(n, n.max(FUSION_LABELS.len() * 5), seed);
        for s in av.iter_mut().chain(ts.iter_mut()) {
            s.id = format!("{tag}-{}", s.id);
        }
        let (matched, _) = synthesize_matched(&av, &ts, seed);
        matched.iter().map(|s| build_mcq(s, &self.taxonomy, seed)).collect()
    }

    /// Like [`FusionTask::benchmark`], but a `fraction` of matched pairs
    /// become disagreement episodes: the TS window comes from a behaviour with
    /// the opposite `b0` (activity) bit, and the next behaviour is
    /// uninformative. Such an episode is emitted four times with one shared
    /// prompt, once keyed to each option, under a uniform label distribution.
    pub fn training_set(&self, n: usize, fraction: f64, tag: &str, seed: u64) -> Result<Vec<McqItem>> {
        let seed = seed::derive(seed, tag);
        let (mut av, mut ts) = self.pools(n, n.max(FUSION_LABELS.len() * 5), seed);
        for s in av.iter_mut().chain(ts.iter_mut()) {
            s.id = format!("{tag}-{}", s.id);
        }
        let (matched, _) = synthesize_matched(&av, &ts, seed);
        let k = self.taxonomy.len();
        let mut out = Vec::with_capacity(matched.len());
        for s in matched {
            let mut rng = seed::rng_from(seed::derive_item(seed, "disagree", &s.id));
            if rng.random::<f64>() >= fraction {
                out.push(build_mcq(&s, &self.taxonomy, seed)?);
                continue;
            }
            let activity = |m: &MultimodalSample| class_bits(m.label.as_ref().expect("labelled").id)[0];
            let other = loop {
                let t = &ts[rng.random_range(0..ts.len())];
                if activity(t) != activity(&s) {
                    break t;
                }
            };
            let episode = MultimodalSample {
                id: format!("{}~{}", s.id.split('+').next().unwrap_or(&s.id), other.id),
                ts: other.ts.clone(),
                ts_label: other.label.clone(),
                label_distribution: Some(vec![1.0 / k as f64; k]),
                ..s
            };
            let item = build_mcq(&episode, &self.taxonomy, seed)?;
            for (i, option) in item.options.iter().enumerate() {
                let mut copy = item.clone();
                copy.sample.id = format!("{}/{}", item.sample.id, LETTERS[i]);
                copy.sample.label = Some(option.clone());
                copy.answer_index = i;
                out.push(copy);
            }
        }
        Ok(out)
    }
}
