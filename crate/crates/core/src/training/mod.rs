//! Two-stage training: projector alignment against a class probe, then
//! backbone specialization on next-token loss. Also the shared optimizer,
//! schedule, early stopping and stratified splitting.

mod early;
mod optim;
mod schedule;
mod split;
mod stage;
mod stage1;
mod stage2;


pub use early::{best_epoch, early_stop};
pub use optim::{fusion_slots, global_norm, AdamW, Slot};
pub use schedule::{cosine_warmup_lr, warmup_steps};
pub use split::{largest_remainder, stratified_split, Split, DEFAULT_FRACTIONS};
pub use stage::{holdout, EpochRecord, Stage, StageConfig, TrainReport};
pub use stage1::{probe_logits, train_stage1, Stage1Example, Stage1Outcome};
pub use stage2::{
    example_loss, masked_cross_entropy, mcq_examples, mcq_response, mcq_vocab, response_targets, token_accuracy, train_stage2, train_stage2_split,
    Stage2Example, Stage2Outcome,
};
