use crate::index::PersonId;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Two vectors (or a vector and an index) disagree on dimension.
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    /// A vector entry violates the feature-vector domain (negative, NaN or infinite).
    #[error("invalid vector entry at index {index}: {value}")]
    InvalidEntry { index: usize, value: f64 },

    /// An operation that needs at least one vector got none.
    #[error("gallery is empty")]
    EmptyGallery,

    /// A vector with no nonzero entry cannot be normalized.
    #[error("degenerate vector: all entries are zero")]
    DegenerateVector,

    /// A layer specification or input does not compose shape-wise.
    #[error("layer shape error: {0}")]
    LayerShape(String),

    /// A training label lies outside [0, num_classes).
    #[error("label {label} out of range for {num_classes} classes")]
    Label { label: usize, num_classes: usize },

    /// Two or more person bands intersect; the index would be ambiguous.
    #[error("band collision between {}", format_pairs(.0))]
    BandCollision(Vec<(PersonId, PersonId)>),

    /// Enrollment attempted for a person already present.
    #[error("person {0} is already enrolled")]
    DuplicatePerson(PersonId),

    /// The claimed identity does not exist in the index.
    #[error("person {0} is not enrolled")]
    UnknownPerson(PersonId),

    /// Underlying filesystem failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    /// A persisted artifact could not be written.
    #[error("serialization error: {0}")]
    Serialization(String),

    /// A persisted artifact is malformed, truncated, or of an unsupported version.
    #[error("format error: {0}")]
    Format(String),

    /// A persisted artifact parsed but violates a structural invariant.
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
}

fn format_pairs(pairs: &[(PersonId, PersonId)]) -> String {
    pairs
        .iter()
        .map(|(a, b)| format!("({a}, {b})"))
        .collect::<Vec<_>>()
        .join(", ")
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable machine-readable code, used by the CLI and the service.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension_mismatch",
            Error::InvalidEntry { .. } => "invalid_entry",
            Error::EmptyGallery => "empty_gallery",
            Error::DegenerateVector => "degenerate_vector",
            Error::LayerShape(_) => "layer_shape",
            Error::Label { .. } => "label_out_of_range",
            Error::BandCollision(_) => "band_collision",
            Error::DuplicatePerson(_) => "duplicate_person",
            Error::UnknownPerson(_) => "unknown_person",
            Error::Io(_) => "io_error",
            Error::Serialization(_) => "serialization_error",
            Error::Format(_) => "format_error",
            Error::InvariantViolation(_) => "invariant_violation",
        }
    }
}
