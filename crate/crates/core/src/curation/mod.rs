//! Deterministic curation steps: clip windowing, frame sampling plans, audio
//! gating, intent-matched synthesis, MCQ construction, congruent/conflict sets
//! and the expert review filter. Learned annotators sit behind [`Annotator`].

mod clip;
mod gate;
mod io;
mod review;
mod sample;
mod synth;

pub use clip::{clip_window, plan_sampling, ClipWindow, SamplingPlan, DEFAULT_T_OBS};
pub use gate::{gate_audio, GateDecision, Verdict, DENOISE_SUPPRESSION};
pub use io::{read_mcq_items, read_samples, write_mcq_items, write_samples};
pub use review::{apply_review, parse_review, Annotation, Annotator, ReviewEntry, ReviewVerdict, RuleBasedAnnotator};
pub use sample::{normalize_scores, McqItem, MultimodalSample, LETTERS};
pub use synth::{build_conflict_sets, build_mcq, synthesize_matched, MatchReport};
