use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: shape mismatch {left:?} vs {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: [usize; 2],
        right: [usize; 2],
    },
    #[error("{op}: {msg}")]
    InvalidArgument { op: &'static str, msg: String },
    #[error("empty loss")]
    EmptyLoss,
    #[error("loss must be a scalar, got shape {0:?}")]
    NonScalarLoss([usize; 2]),
    #[error("backward already called on this tape; reset it first")]
    BackwardConsumed,
    #[error("attention over empty support")]
    EmptyAttentionSupport,

    #[error("empty stroke")]
    EmptyStroke,
    #[error("sequence exceeds n: {strokes} strokes do not fit in {n} tokens")]
    SequenceExceedsN { strokes: usize, n: usize },
    #[error("degenerate scale")]
    DegenerateScale,
    #[error("empty sequence")]
    EmptySequence,

    #[error("no glyph for symbol {0:?}")]
    NoGlyph(char),
    #[error("sentence too long: {strokes} strokes exceed the budget of {max}")]
    SentenceTooLong { strokes: usize, max: usize },
    #[error("split: {0}")]
    Split(String),
    #[error("line {line}: {msg}")]
    MalformedLine { line: usize, msg: String },

    #[error("vocab: {0}")]
    Vocab(String),
    #[error("unknown token id {0}")]
    UnknownTokenId(usize),

    #[error("config: {0}")]
    Config(String),
    #[error("config mismatch in fields: {}", .0.join(", "))]
    ConfigMismatch(Vec<String>),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("non-finite loss {loss} at epoch {epoch}, step {step}")]
    NonFiniteLoss { loss: f64, epoch: usize, step: usize },

    #[error("empty reference string at index {0}")]
    EmptyReference(usize),
    #[error("ablation: {0}")]
    Ablation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
