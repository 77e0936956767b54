//! File formats, benchmarks and the `gist` command line over
//! [`gist_core`].
//!
//! * [`io`]: edge lists, OFF meshes, embedding CSV and `GISTEMB1` binary,
//!   atomic writes.
//! * [`model_io`]: `GISTMDL1` model files.
//! * [`config`]: `key=value` run configs spliced into the arguments.
//! * [`report`]: JSON and CSV renderings of the core reports.
//! * [`bench`]: forward timing and peak resident memory.
//! * [`cli`]: subcommands and exit codes.

pub mod bench;
pub mod cli;
pub mod config;
mod error;
pub mod io;
pub mod model_io;
pub mod report;

pub use error::{Error, Result};
