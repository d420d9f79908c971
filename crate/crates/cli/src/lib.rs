//! Library surface of the `ltispec` binary: document formats and command
//! implementations, exposed so integration tests can parse the outputs.

pub mod commands;
pub mod docs;
