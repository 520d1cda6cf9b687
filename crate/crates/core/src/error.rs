use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error("construction failed after {attempts} attempts: {reason}")]
    ConstructionFailed { attempts: u64, reason: String },
    #[error("depth cap exceeded: {boxes} boxes requested, cap is {cap}")]
    DepthCap { boxes: u128, cap: u128 },
    #[error("grid too large: {cells} cells requested, cap is {cap}")]
    GridTooLarge { cells: u128, cap: u128 },
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
