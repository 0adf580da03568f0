//! Library side of the command-line frontend: file formats, command
//! implementations, and the fit report. The binary in `main.rs` is a thin
//! argument-parsing shell over this crate, which keeps every parser
//! reachable from tests and fuzz targets.

pub mod commands;
pub mod growth;
pub mod io;
pub mod summary;
