use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("outgoing probabilities of state {key} sum to {sum}")]
    Normalization { key: String, sum: f64 },

    #[error("state {key} has more than one edge labelled {symbol:?}")]
    DuplicateEdge { key: String, symbol: char },

    #[error("state {key} is not unifilar")]
    Unifilarity { key: String },

    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("symbol {0:?} is not in the machine alphabet")]
    Alphabet(char),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("word enumeration exceeded the cap of {cap} entries at length {t}")]
    Budget { cap: usize, t: usize },

    #[error("word {word:?} has no certifiable probability")]
    ZeroProbability { word: String },

    #[error("insufficient data: {samples} samples for {distinct} distinct words")]
    InsufficientData { samples: usize, distinct: usize },

    #[error("expansion of {0} is not defined at this horizon")]
    HorizonExceeded(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
