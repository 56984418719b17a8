//! Files, serialization and the command-line front end for `cpath-core`.

pub mod error;
pub mod output;
pub mod qmi_file;
pub mod source;

pub use error::{Error, Result};
