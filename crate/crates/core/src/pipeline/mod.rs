//! Two-stage optimization, fixtures, persistence.

pub mod config;
pub mod init;
pub mod optim;
pub mod report;
pub mod stages;
pub mod synth;
pub mod views;
pub mod ply;
#[cfg(feature = "io")]
pub mod io;
pub mod run;
