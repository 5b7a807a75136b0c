//! Command-line front end for the `rumor_core` library.

pub mod args;
pub mod run;
