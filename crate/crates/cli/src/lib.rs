//! Command-line front end for `polyvi`: problem files, random families,
//! reports.

pub mod commands;
pub mod generate;
pub mod problem_file;
pub mod report;
