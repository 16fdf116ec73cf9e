use thiserror::Error;

/// Failures surfaced by the codec, the container parser, and the model coder.
#[derive(Debug, Error)]
pub enum Error {
    #[error("container does not start with the PTPM magic")]
    BadMagic,
    #[error("unsupported container version {0}")]
    BadVersion(u8),
    #[error("invalid quantizer scheme {0}")]
    BadScheme(u8),
    #[error("container truncated")]
    Truncated,
    #[error("payload extents do not match container size")]
    InconsistentOffsets,
    #[error("invalid header field: {0}")]
    BadHeader(&'static str),
    #[error("input is empty")]
    EmptyInput,
    #[error("context depth {0} exceeds the supported maximum {max}", max = crate::MAX_DEPTH)]
    DepthTooLarge(u8),
    #[error("block shorter than the context depth")]
    BlockTooShort,
    #[error("count tables have different depths")]
    DepthMismatch,
    #[error("tree structure code is malformed")]
    MalformedStructure,
    #[error("bitstream ended early")]
    BitstreamUnderrun,
    #[error("block index out of range")]
    BlockOutOfRange,
    #[error("invalid option: {0}")]
    InvalidOptions(&'static str),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
