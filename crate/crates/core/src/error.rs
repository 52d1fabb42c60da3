use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("action component {index} is not finite ({value})")]
    NonFiniteAction { index: usize, value: f64 },

    #[error("unknown object `{0}`")]
    UnknownObject(String),

    #[error("object `{0}` is attached to the hand")]
    ObjectAttached(String),

    #[error("overlap of {overlap:.6} m between `{a}` and `{b}` could not be resolved")]
    UnresolvedOverlap { a: String, b: String, overlap: f64 },

    #[error("no valid layout after {attempts} consecutive rejections")]
    Infeasible { attempts: usize },

    #[error("scenario document: {0}")]
    Scenario(String),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
