use std::fmt;
use std::path::PathBuf;

use crate::face_model::Organ;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Pipeline stage a failure happened in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    GlobalWarp,
    LocalReshape,
    LambdaSelection,
    Elastic,
    Render,
    Illumination,
    Output,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Load => "load",
            Stage::GlobalWarp => "global-warp",
            Stage::LocalReshape => "local-reshape",
            Stage::LambdaSelection => "lambda-selection",
            Stage::Elastic => "elastic",
            Stage::Render => "render",
            Stage::Illumination => "illumination",
            Stage::Output => "output",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("duplicate feature point id {0}")]
    DuplicateId(usize),
    #[error("unknown organ label `{0}`")]
    UnknownOrgan(String),
    #[error("feature point ids must be exactly 0..{0}")]
    NonContiguousIds(usize),
    #[error("need at least 3 feature points, got {0}")]
    TooFewPoints(usize),
    #[error("feature point {id} at ({x}, {y}) is outside the {width}x{height} image")]
    OutOfBounds {
        id: usize,
        x: f64,
        y: f64,
        width: u32,
        height: u32,
    },
    #[error("feature point {0} has a non-finite coordinate")]
    NonFinite(usize),
    #[error("points file has no `size` line and no image size was supplied")]
    MissingSize,
    #[error("organ {0} is degenerate (absent, single-point or zero extent)")]
    DegenerateOrgan(Organ),
    #[error("face bounding box has zero width or height")]
    ZeroFaceBox,
    #[error("feature point schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("all points are collinear, cannot triangulate")]
    Collinear,
    #[error("unknown vertex id {0}")]
    UnknownVertex(usize),
    #[error("meshes do not share connectivity")]
    ConnectivityMismatch,
    #[error("triangle ({0}, {1}, {2}) is degenerate")]
    DegenerateTriangle(usize, usize, usize),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },
    #[error("image format: {0}")]
    Format(String),
    #[error("training images have zero variance")]
    DegenerateTraining,
    #[error("invalid lambda grid: {0}")]
    InvalidGrid(String),
    #[error("invalid muscle area: {0}")]
    InvalidMuscle(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
    #[error("{stage} stage: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at_stage(self, stage: Stage) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage {
                stage,
                source: Box::new(e),
            },
        }
    }

    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    /// True for malformed or missing inputs, false for numeric failures
    /// inside a processing stage.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::File { source, .. } => source.is_input_error(),
            Error::Stage { stage, source } => *stage == Stage::Load && source.is_input_error(),
            Error::Parse { .. }
            | Error::DuplicateId(_)
            | Error::UnknownOrgan(_)
            | Error::NonContiguousIds(_)
            | Error::TooFewPoints(_)
            | Error::OutOfBounds { .. }
            | Error::NonFinite(_)
            | Error::MissingSize
            | Error::Format(_)
            | Error::SchemaMismatch(_)
            | Error::DimensionMismatch { .. }
            | Error::InvalidGrid(_)
            | Error::InvalidMuscle(_)
            | Error::InvalidArgument(_)
            | Error::Io(_) => true,
            _ => false,
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            Error::File { source, .. } => source.stage(),
            _ => None,
        }
    }
}
