//! Harness around the compositional matching core: encoder backends, the
//! on-disk embedding cache, HTTP clients with fixture replay, dataset
//! adapters, the scoring pipeline, and the evaluation runners behind the
//! `comclip` CLI.

pub mod cache;
pub mod cli;
pub mod client;
pub mod config;
pub mod dataset;
pub mod encoder;
pub mod evalrun;
pub mod imgio;
pub mod pipeline;

pub use comclip_core as core;
