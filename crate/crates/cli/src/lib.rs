//! Training, decoding and benchmarking on top of `bcrf-core`.

pub mod bench;
pub mod data;
pub mod decode;
pub mod error;
pub mod metrics;
pub mod model;
pub mod oracle_check;
pub mod scorer;
pub mod synth;
pub mod tensor_io;
pub mod train;

pub use oracle_check::{oracle_check, OracleCheckConfig, OracleReport};
