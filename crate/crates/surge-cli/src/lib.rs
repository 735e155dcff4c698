//! Runnable surface of the bursty-region engine: stream parsing, result
//! emission, synthetic workload generation, the benchmark harness, and the
//! replay loop behind the `surge` binary.

pub mod bench;
pub mod emit;
pub mod gen;
pub mod run;
pub mod stream;

pub use surge_core;
