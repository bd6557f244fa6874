//! Count-interval quantization toolkit.
//!
//! Point annotations become per-pixel density maps, density maps become
//! per-patch local counts, and the pooled counts drive everything else:
//! equalized-product interval partitions, per-interval count proxies,
//! interleaved second-head derivation, class-map encoding and decoding,
//! and Monte-Carlo noise simulation with error reports.
//!
//! Every stage is a pure function of its inputs plus an explicit seed, so
//! pipelines reproduce bit for bit.

pub mod density;
pub mod error;
pub mod io;
pub mod partition;
pub mod proxy;
pub mod quantize;
pub mod rng;
pub mod simulate;
pub mod stats;
pub mod synth;

#[cfg(test)]
mod testutil;

pub use error::{ErrorClass, Result, UepError};
