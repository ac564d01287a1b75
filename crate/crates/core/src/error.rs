use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("unsupported character {0:?}")]
    UnsupportedCharacter(char),

    #[error("unsupported glyph text {0:?}: expected one character 0-9/A-Z or a pair of letters A-Z")]
    UnsupportedText(String),

    #[error("glyph {text:?} needs {needed_width}x{needed_height} px but the canvas is {width}x{height}")]
    GlyphTooLarge {
        text: String,
        needed_width: u32,
        needed_height: u32,
        width: u32,
        height: u32,
    },

    #[error("requested {requested} emitters but the mask holds only {available} pixels")]
    MaskTooSmall { requested: usize, available: usize },

    #[error("glyph mask is empty")]
    EmptyMask,

    #[error("degenerate mask: {0}")]
    DegenerateMask(&'static str),

    #[error("image is {actual_width}x{actual_height}, expected {expected_width}x{expected_height}")]
    DimensionMismatch {
        expected_width: u32,
        expected_height: u32,
        actual_width: u32,
        actual_height: u32,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("fit did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("label checksum mismatch: recorded {recorded}, computed {computed}")]
    Checksum { recorded: String, computed: String },

    #[error("malformed {what}: {detail}")]
    Format { what: &'static str, detail: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            expected,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 3,
            Error::Csv(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => 3,
            Error::Checksum { .. } | Error::Format { .. } | Error::Json(_) | Error::Csv(_) => 4,
            Error::NonConvergence { .. } => 5,
            _ => 2,
        }
    }
}
