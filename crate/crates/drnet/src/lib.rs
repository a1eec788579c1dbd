//! File formats, a parallel benchmark runner and the `drnet` command line
//! on top of [`drnet_core`].

pub mod cli;
pub mod config;
pub mod formats;
pub mod runner;

pub use drnet_core as core;

/// Crate version with a `git describe` suffix when built from a checkout.
pub fn version() -> &'static str {
    concat!(env!("CARGO_PKG_VERSION"), "+", env!("DRNET_GIT_DESCRIBE"))
}
