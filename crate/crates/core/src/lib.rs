//! Cross-response analysis of trades-and-quotes tick data.

pub mod error;
pub mod fitting;
pub mod ingest;
pub mod pipeline;
pub mod response;
pub mod returns;
pub mod signing;
pub mod synth;
pub mod universe;

pub use error::{Error, ErrorClass, Result};
