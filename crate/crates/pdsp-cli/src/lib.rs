//! Front end for the point-distance solver: problem file format, built-in
//! benchmark corpus, run orchestration and reporting.

pub mod corpus;
pub mod problem;
pub mod report;
pub mod runner;
