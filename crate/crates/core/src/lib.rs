//! Interface capturing on 2D/3D Cartesian and 2D triangular meshes.
//!
//! Each interface cell carries a tanh-scaled quadratic reconstruction that is
//! read two ways: its cell average is the conservative volume fraction (VOF),
//! and its inverse scaling is a local level-set field. The VOF field advances
//! by a finite-volume flux update, the level-set field by a semi-Lagrangian
//! trace through the same reconstruction, and the far field is rebuilt by
//! eikonal reinitialization. The `cli` module wires these into the standard
//! advection benchmarks (slotted disk, single vortex, 3D deformation and
//! shear flows) with their error metrics.

pub mod cli;
pub mod diagnostics;
pub mod geom;
pub mod mesh;
pub mod quadrature;
pub mod reinit;
pub mod thinc;
pub mod transport;
pub mod velocity;

use std::fmt;
use std::path::PathBuf;

/// Library-wide error type.
#[derive(Debug)]
pub enum Error {
    /// Invalid configuration (bad extents, counts, flag values).
    Config(String),
    /// Malformed mesh file; `line` is 1-based within the file.
    MeshFormat { path: PathBuf, line: usize, msg: String },
    /// A numerical routine violated one of its guarantees.
    Numerics(String),
    /// Two fields or a field and a mesh disagree on cell count.
    FieldMismatch { expected: usize, got: usize },
    /// Underlying I/O failure, with the path that triggered it.
    Io { path: PathBuf, source: std::io::Error },
}

impl Error {
    /// Stable one-word category, used by the CLI for machine-parseable exits.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::MeshFormat { .. } => "mesh-format",
            Error::Numerics(_) => "numerics",
            Error::FieldMismatch { .. } => "field-mismatch",
            Error::Io { .. } => "io",
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Config(msg) => write!(f, "{msg}"),
            Error::MeshFormat { path, line, msg } => {
                write!(f, "{}:{line}: {msg}", path.display())
            }
            Error::Numerics(msg) => write!(f, "{msg}"),
            Error::FieldMismatch { expected, got } => {
                write!(f, "field length {got} does not match mesh cell count {expected}")
            }
            Error::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
