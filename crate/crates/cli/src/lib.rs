//! Command-line front end for the `deltabose` propagator library.

pub mod job;
pub mod output;
pub mod run;
pub mod verify;

pub use job::{Command, Estimator, Format, JobSpec};
pub use run::{run, Report};
