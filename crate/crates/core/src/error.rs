use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("sketch has no strokes")]
    EmptySketch,

    #[error("invalid sketch: {0}")]
    InvalidSketch(String),

    #[error("crop of {crop} px does not fit a {width}x{height} bitmap")]
    CropTooLarge { crop: usize, width: usize, height: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("shape-context scale must be positive and finite, got {0}")]
    InvalidScale(f64),

    #[error("all sampled points coincide; descriptor scale is zero")]
    ZeroScale,

    #[error("need at least {needed} {what}, got {got}")]
    Insufficient { what: &'static str, needed: usize, got: usize },

    #[error("empty {0}")]
    Empty(&'static str),

    #[error("class {class:?} has {count} sketches, at least {min} required")]
    ClassTooSmall { class: String, count: usize, min: usize },

    #[error("config: {0}")]
    Config(String),

    #[error("file format: {0}")]
    Format(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// Wrap an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// True for failures caused by input data rather than numerics or I/O.
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Stage { source, .. } => source.is_data_error(),
            Error::Numeric(_) => false,
            _ => true,
        }
    }
}
