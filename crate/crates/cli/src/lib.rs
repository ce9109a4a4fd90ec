//! Library surface of the batch front-end; the `tetrad` binary is a thin
//! wrapper. Exposed so integration tests drive the same code paths.

pub mod examples;
pub mod grid;
pub mod manifest;
pub mod report;
pub mod tasks;
