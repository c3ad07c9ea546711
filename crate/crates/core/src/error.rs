use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    // taxonomy
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("taxonomy has no entries")]
    EmptyTaxonomy,
    #[error("malformed entry at line {line}: {reason}")]
    MalformedEntry { line: usize, reason: String },
    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    // biosignal
    #[error("stream has no samples")]
    EmptyStream,
    #[error("timestamps not strictly increasing at sample {0}")]
    NonMonotonicTimestamps(usize),
    #[error("stream is not second-level; aggregate it first")]
    StreamNotSecondLevel,
    #[error("{family} query requires parameter {which}")]
    MissingParameter { family: String, which: char },
    #[error("template bank has no templates for family {0}")]
    EmptyTemplateBank(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    // curation
    #[error("anchor {anchor} outside media bounds [0, {duration}]")]
    AnchorOutOfRange { anchor: f64, duration: f64 },
    #[error("media duration must be positive, got {0}")]
    NonPositiveDuration(f64),
    #[error("audio scorer failed: {0}")]
    ScorerFailure(String),
    #[error("taxonomy has {0} labels; at least 4 are needed for a four-option question")]
    TaxonomyTooSmall(usize),
    #[error("insufficient pool for {group}: needed {needed}, available {available}")]
    InsufficientPool { group: String, needed: usize, available: usize },
    #[error("invalid sample `{id}`: {reason}")]
    InvalidSample { id: String, reason: String },

    // model
    #[error("base vocabulary already contains control token {0}")]
    ControlTokenCollision(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("time-series window has {got} channels, encoder expects {expected}")]
    ChannelMismatch { expected: usize, got: usize },
    #[error("sequence needs {needed} positions but max_seq_len is {max}")]
    SequenceTooLong { needed: usize, max: usize },
    #[error("malformed placeholder: {0}")]
    MalformedPlaceholder(String),
    #[error("{modality} slots: expected {expected} embedding rows, got {got}")]
    SlotCountMismatch { modality: String, expected: usize, got: usize },
    #[error("temperature must be positive, got {0}")]
    NonPositiveTemperature(f64),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    // training
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("non-finite loss at step {0}")]
    NonFiniteLoss(usize),
    #[error("item `{0}` has no label")]
    UnlabeledItem(String),

    // evaluation
    #[error("every modality is masked")]
    AllModalitiesMasked,
    #[error("no items to evaluate")]
    EmptyItemSet,
    #[error("entropy group `{0}` is empty")]
    EmptyGroup(String),
    #[error("entropy {entropy} bits exceeds the {draws}-draw maximum; class mapping is broken")]
    EntropyOutOfBounds { entropy: f64, draws: usize },

    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad input data or arguments, as opposed to
    /// failures of a run that was given valid input.
    pub fn is_input_error(&self) -> bool {
        !matches!(
            self,
            Error::NonFiniteLoss(_) | Error::ScorerFailure(_) | Error::EntropyOutOfBounds { .. }
        )
    }
}
