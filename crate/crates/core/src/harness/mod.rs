//! Statistical checks, generators, verification suites and benchmarks behind the CLI.

pub mod bench;
pub mod graphs;
pub mod manifest;
pub mod stats;
pub mod verify;
