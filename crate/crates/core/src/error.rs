use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("object {id} footprint leaves the usable area of the map ({reason})")]
    ObjectOutOfBounds { id: usize, reason: String },

    #[error("scene sampler exhausted its rejection budget (seed {seed}, placing {count} objects)")]
    SamplerExhausted { seed: u64, count: usize },

    #[error("window at ({row}, {col}) of size {h}x{w} exceeds map extents {map_h}x{map_w}")]
    WindowOutOfBounds {
        row: i64,
        col: i64,
        h: usize,
        w: usize,
        map_h: usize,
        map_w: usize,
    },

    #[error("shift ({dx}, {dy}) exceeds the map margin of {margin} px")]
    ShiftExceedsMargin { dx: i64, dy: i64, margin: usize },

    #[error("unknown object id {0}")]
    UnknownObject(usize),

    #[error("Fourier frequency {index} = ({fx}, {fy}) is not below the Nyquist rate {nyquist}")]
    AboveNyquist {
        index: usize,
        fx: f64,
        fy: f64,
        nyquist: f64,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("malformed container: {0}")]
    Format(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image encoding: {0}")]
    Image(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
