//! Scenario files, the expression grammar and the command-line front end
//! for `finsler-core`.

pub mod cli;
pub mod expr;
pub mod scenario_file;
