//! Uniform-sampling sketches for discovering small quasi-identifiers.
//!
//! A set of columns `A` *separates* two rows when the rows differ on at least
//! one column of `A`. `Γ_A` counts the row pairs `A` leaves unseparated. This
//! crate provides:
//!
//! - [`dataset`]: a dictionary-encoded columnar table loaded from CSV.
//! - [`separation`]: exact partition refinement and `Γ_A` counting, the
//!   oracle everything probabilistic is checked against.
//! - [`filter`]: the tuple-sample ε-separation-key filter and the pair-sample
//!   baseline.
//! - [`minkey`]: greedy and exhaustive minimum-key mining over a sample.
//! - [`estimator`]: pair-sample estimates of `Γ_A` for small `A`.
//! - [`analysis`]: collision probabilities, elementary symmetric polynomials
//!   and the worst-case clique-size search.
//! - [`adversarial`]: generators for the hard instances.
//! - [`bench`]: the tuple-vs-pair benchmark harness.

pub mod adversarial;
pub mod analysis;
pub mod bench;
pub mod dataset;
pub mod error;
pub mod estimator;
pub mod filter;
pub mod minkey;
pub mod sampling;
pub mod separation;
pub mod sketch_io;

pub use dataset::{AttributeSet, Dataset, SampleRows};
pub use error::{Error, Result};
pub use estimator::{Estimate, EstimatorSketch};
pub use filter::{Decision, PairSketch, SampleMode, TupleSketch};
pub use separation::{LookupTable, Partition};
