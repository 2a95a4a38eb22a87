use thiserror::Error;

/// Errors produced by the radar processing chain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("invalid target: {0}")]
    InvalidTarget(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("signal too short: need {needed} samples, have {available}")]
    SignalTooShort { needed: usize, available: usize },

    #[error("zero transmit symbol at subcarrier {subcarrier}, symbol {symbol}")]
    ZeroSymbol { subcarrier: usize, symbol: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("index out of bounds: {0}")]
    OutOfBounds(String),

    #[error("image {rows}x{cols} is smaller than the CFAR footprint {footprint_rows}x{footprint_cols}")]
    ImageTooSmall {
        rows: usize,
        cols: usize,
        footprint_rows: usize,
        footprint_cols: usize,
    },

    #[error("estimation impossible: {0}")]
    EstimationImpossible(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
