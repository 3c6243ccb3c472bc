//! Locality sensitive hashing for set-queries.
//!
//! The crate is layered bottom-up:
//!
//! * [`metrics`]: point kernels and set-to-point aggregations.
//! * [`hashes`]: base hash families with exact collision laws.
//! * [`slsh`]: repeat, exhaustive, weighted and centroid set-query families.
//! * [`lift`]: shrink-lift geometry and the average-distance pipelines.
//! * [`index`]: parameter planning and the amplified multi-table index.
//! * [`ellipsoid`]: euclidean and angular ellipsoid queries.
//! * [`center`]: the quantized structure for center euclidean distance.
//! * [`oracle`]: brute force search and Monte Carlo collision estimates.
//! * [`structure`]: runtime-selected structures over dense, bit and token records.
//! * [`storage`]: dataset parsing, query files and index snapshots.
//! * [`selftest`]: randomized property suites shared by the CLI and Python.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod center;
pub mod ellipsoid;
pub mod error;
pub mod family;
pub mod hashes;
pub mod index;
pub mod lift;
pub mod metrics;
pub mod oracle;
pub mod rng;
pub mod selftest;
pub mod slsh;
pub mod storage;
pub mod structure;

pub use error::{Error, Result};
pub use family::{BaseFamily, HashFamily};
pub use metrics::{BitVector, Point, Rational, SetQuery, TokenSet};
