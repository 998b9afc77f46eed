//! Type Size coding for exponential families.
//!
//! Sequences over a finite alphabet are grouped into type classes, either
//! *quantized* (the sufficient statistic falls in the same half-open cuboid of
//! side `s/n`) or *point* (the sufficient statistic is exactly equal). The
//! one-to-one code sorts classes by exact size, ranks sequences with big-integer
//! enumerative coding, and maps rank `k` to the `k`-th binary string of
//! `∅, 0, 1, 00, 01, …`.
//!
//! Alongside the codec the crate evaluates the finite-blocklength ε-coding
//! rate exactly, fits third-order `log n` coefficients, and checks the
//! type-size and likelihood-approximation bounds on exhaustive instances.

pub mod bigmath;
pub mod codec;
pub mod compositions;
pub mod container;
mod error;
pub mod expofam;
pub mod markov;
pub mod point;
pub mod quantized;
pub mod rate;
pub mod specfile;

pub use codec::{ClassOrdering, Codeword, TypeSizeCodec};
pub use compositions::Composition;
pub use error::{Error, Result};
pub use expofam::{Alphabet, FamilySpec, ModelEval, ParamVector};
pub use markov::{MarkovFamilySpec, MarkovTypeIndex};
pub use point::{ExactStatMap, LatticeMap, LatticePoint};
pub use quantized::{Grid, GridParams, TypeClass, TypeIndex};
pub use rate::{RateReport, SourceSpec};

/// Default cap on the number of compositions enumerated by a type index.
pub const DEFAULT_COMPOSITION_BUDGET: u64 = 5_000_000;
/// Default cap on `|X|^n` for exhaustive Markov path enumeration.
pub const DEFAULT_PATH_BUDGET: u64 = 2_000_000;
