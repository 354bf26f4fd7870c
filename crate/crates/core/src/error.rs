use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed mesh file {path}, line {line}: {msg}")]
    MalformedMesh {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("degenerate triangle (area {area:e} m²) at face {face}")]
    DegenerateTriangle { face: usize, area: f64 },

    #[error("patch {0} is not bound to any material")]
    UnboundPatch(usize),

    #[error("patch {patch} matched by conflicting bindings {first} and {second}")]
    ConflictingBindings {
        patch: usize,
        first: usize,
        second: usize,
    },

    #[error("invalid material '{name}': {msg}")]
    InvalidMaterial { name: String, msg: String },

    #[error("unknown material '{0}'")]
    UnknownMaterial(String),

    #[error("no patches in domain")]
    EmptyDomain,

    #[error("weather file {path}: {msg}")]
    Weather { path: PathBuf, msg: String },

    #[error("time {t} s outside weather span [{start}, {end}] s")]
    OutOfSpan { t: f64, start: f64, end: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("CTF unstable for this construction at dt = {dt} s: {reason}; use the finite-difference method instead")]
    CtfUnstable { dt: f64, reason: String },

    #[error("solver failed on patch {patch} at t = {time} s: {msg}")]
    Solver { patch: usize, time: f64, msg: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
