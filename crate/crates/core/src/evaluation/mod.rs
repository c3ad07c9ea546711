//! Benchmark evaluation: modality masking, answer extraction, greedy MCQ
//! accuracy and the seven-mask ablation, predictive-entropy uncertainty, and
//! the CNN-LSTM biosignal baseline.

mod answer;
pub mod bio;
mod bio_train;
mod entropy;
mod mask;
mod mcq;
mod prompt;

pub use answer::{match_class_name, parse_answer};
pub use bio::{batch_cross_entropy, BioConfig, BioModel, BioParams};
pub use bio_train::{bio_pred_to_option, train_bio_baseline, BioEpoch, BioReport, BioTrainConfig, TestSplit};
pub use entropy::{
    bits_to_nats, entropy_bits, predictive_entropy, tally, uq_report, EntropyRecord, Extraction, UqConfig, UqGroup, UqSummary,
    UNPARSEABLE,
};
pub use mask::{mask_sample, ModalityMask};
pub use mcq::{ablation_csv, ablation_grid, eval_mcq, AblationRow, AnswerModel, Decode, EvalConfig, EvalRecord, MAX_ANSWER_TOKENS};
pub use prompt::{modality_prefix, render_item, McqTemplate, DEFAULT_MCQ_TEMPLATE};
