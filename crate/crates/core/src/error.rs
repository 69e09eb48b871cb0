use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("point id {id} is out of range for a space of {len} points")]
    InvalidPoint { id: usize, len: usize },

    #[error("objects belong to spaces of different sizes ({left} vs {right})")]
    SpaceMismatch { left: usize, right: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid cover: {0}")]
    InvalidCover(String),

    #[error("{what}: search exceeded the node budget of {budget}")]
    NodeBudget { what: &'static str, budget: u64 },

    #[error("cover has {count} members, above the cap of {cap}")]
    MemberCap { count: usize, cap: usize },

    #[error(
        "enumerating minimum subcovers needs {needed} combinations (budget {budget}); \
         use the lower/upper Lebesgue rates instead"
    )]
    EnumerationBudget { needed: u128, budget: u64 },

    #[error("rate window {start}..={end} is outside the usable prefix of length {usable}")]
    EmptyWindow { start: usize, end: usize, usable: usize },

    #[error("eventual image is a single point; preimage-gap bounds are undefined")]
    SinglePointEventualImage,

    #[error("unknown family `{name}`{}", suggestion.as_ref().map(|s| alloc::format!(", did you mean `{s}`?")).unwrap_or_default())]
    UnknownFamily { name: String, suggestion: Option<String> },

    #[error("family `{family}`, parameter `{key}`: {reason}")]
    InvalidParam { family: &'static str, key: String, reason: String },

    #[error("parameter `{key}` underflows double precision; the largest safe value is {safe_max}")]
    Underflow { key: String, safe_max: f64 },
}

impl Error {
    /// Usage errors are caller mistakes; everything else is a numeric or
    /// budget failure of an otherwise valid request.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidPoint { .. }
                | Error::SpaceMismatch { .. }
                | Error::InvalidArgument(_)
                | Error::InvalidCover(_)
                | Error::EmptyWindow { .. }
                | Error::UnknownFamily { .. }
                | Error::InvalidParam { .. }
        )
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
