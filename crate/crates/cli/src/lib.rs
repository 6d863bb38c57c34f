//! Config parsing, output persistence and command drivers behind the
//! `sarquad` binary.

pub mod commands;
pub mod config;
pub mod output;
