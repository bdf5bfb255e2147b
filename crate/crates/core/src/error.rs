use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("json parse error at {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("schema violation at {path} ({pointer}): {msg}")]
    Schema {
        path: PathBuf,
        /// JSON-pointer-style location of the offending field.
        pointer: String,
        msg: String,
    },
    #[error("no annotations found under {0}")]
    EmptyDataset(PathBuf),
    #[error("invalid density: {0}")]
    InvalidDensity(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(String),
    #[error("class table error: {0}")]
    ClassTable(String),
    #[error("gray value undefined for class {class_id} with {class_count} classes (0 is background)")]
    GrayValue { class_id: u16, class_count: u16 },
    #[error("isim decode error: values {values:?} not in the gray table for {class_count} classes")]
    UnknownGray { values: Vec<u8>, class_count: u16 },
    #[error("raster is not 8-bit grayscale: {0}")]
    RasterFormat(String),
    #[error("cannot build a prompt from an empty layout")]
    EmptyLayout,
    #[error("prompt parse error at byte {offset}: {msg}")]
    SodiParse { offset: usize, msg: String },
    #[error("bundle {0} already exists (pass overwrite to replace)")]
    BundleExists(String),
    #[error("bundle verify error: {0}")]
    Verify(String),
    #[error("{0}")]
    InvalidInput(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn schema(path: impl Into<PathBuf>, pointer: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Schema {
            path: path.into(),
            pointer: pointer.into(),
            msg: msg.into(),
        }
    }
}
