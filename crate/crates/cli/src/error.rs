use std::fmt;

use cvnn::CvnnError;

pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_GUARD: i32 = 3;
pub const EXIT_DECODE: i32 = 4;

#[derive(Debug)]
pub enum CliError {
    /// Every configuration problem found.
    Config(Vec<String>),
    Core(CvnnError),
    Io(std::io::Error),
    Image(image::ImageError),
    /// A decode produced no usable result.
    Decode(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) if e.is_conditioning() => EXIT_GUARD,
            CliError::Core(CvnnError::AmplitudeOverflow { .. }) => EXIT_GUARD,
            CliError::Core(
                CvnnError::InvalidParameter(_)
                | CvnnError::InvalidSpec(_)
                | CvnnError::UnknownCharacter(_)
                | CvnnError::HeaderMismatch(_)
                | CvnnError::Json(_),
            ) => EXIT_CONFIG,
            CliError::Decode(_) => EXIT_DECODE,
            _ => EXIT_FAILURE,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(v) => {
                write!(f, "invalid configuration ({} problem{}):", v.len(), if v.len() == 1 { "" } else { "s" })?;
                for m in v {
                    write!(f, "\n  - {m}")?;
                }
                Ok(())
            }
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "I/O error: {e}"),
            CliError::Image(e) => write!(f, "image error: {e}"),
            CliError::Decode(m) => write!(f, "decode failure: {m}"),
        }
    }
}

impl From<CvnnError> for CliError {
    fn from(e: CvnnError) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<image::ImageError> for CliError {
    fn from(e: image::ImageError) -> Self {
        CliError::Image(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(CvnnError::Json(e))
    }
}
