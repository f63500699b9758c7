//! The `seqlab` command line and the JSON annotation service.

pub mod commands;
pub mod server;
