use std::fmt;
use std::path::Path;

use planar_ranging::geometry::GeometryError;
use planar_ranging::homography::HomographyError;
use planar_ranging::mono::{CalibrationError, RangingError};
use planar_ranging::mosaic::MosaicError;
use planar_ranging::sim::SimError;
use planar_ranging::stereo::StereoError;

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad invocation; exit code 2.
    Usage(String),
    /// Named domain failure; exit code 1.
    Domain { kind: &'static str, message: String },
}

impl CliError {
    pub fn domain(kind: &'static str, message: impl Into<String>) -> Self {
        CliError::Domain {
            kind,
            message: message.into(),
        }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::domain("Io", format!("{}: {e}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain { .. } => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "Usage",
            CliError::Domain { kind, .. } => kind,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage: {m}"),
            CliError::Domain { kind, message } => write!(f, "{kind}: {message}"),
        }
    }
}

macro_rules! domain_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::domain(e.kind(), e.to_string())
            }
        }
    )*};
}

domain_from!(
    GeometryError,
    RangingError,
    CalibrationError,
    HomographyError,
    MosaicError,
    StereoError,
    SimError
);
