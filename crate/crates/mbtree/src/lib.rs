//! Markov branching trees of the alpha-gamma family.
//!
//! A two-parameter family of random rooted trees grown leaf by leaf: a new
//! leaf attaches to an existing leaf edge, an inner edge, or a branch point
//! with weights controlled by `(alpha, gamma)`. The family interpolates
//! between several classical models (Ford's alpha model at `gamma = alpha`,
//! the Yule/comb/star boundary cases) and has an explicit split-kernel
//! description: the subtree sizes at every branch point follow a product
//! formula over rising factorials that this crate evaluates either in exact
//! rational arithmetic or in floating point.
//!
//! What lives where:
//!
//! * [`growth`] — sequential samplers, including the coloured variant whose
//!   crushed image reproduces the two-parameter family from Ford's model;
//! * [`laws`] — exact split kernels, exchangeable-partition probabilities,
//!   decrement matrices and consistency checks;
//! * [`crp`] — seating processes, regenerative compositions, stick-breaking,
//!   one-sided stable and Mittag-Leffler samplers;
//! * [`oracle`] — exhaustive small-`n` enumeration of the exact tree law,
//!   used to cross-check every kernel against brute force;
//! * [`measures`] — fragmentation densities in size-biased order and the
//!   associated Lévy density;
//! * [`limits`] — reduced-tree statistics and Monte-Carlo suites verifying
//!   the scaling limits (edge lengths, degrees, spine frequencies);
//! * [`tree`], [`numerics`], [`rng`] — arena trees and text format, scalar
//!   abstraction plus special-function/statistics helpers, seeded RNG
//!   streams;
//! * [`cli`] — the `mbtree` command-line interface.

pub mod cli;
pub mod crp;
pub mod growth;
pub mod laws;
pub mod limits;
pub mod measures;
pub mod numerics;
pub mod oracle;
pub mod rng;
pub mod tree;

#[cfg(doctest)]
mod book;

use std::fmt;

/// Crate-wide error type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// Model or distribution parameters outside their valid range.
    Params(String),
    /// Malformed tree text or numeric literal.
    Parse(String),
    /// Operation applied to a tree or argument it is not defined for.
    Domain(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Params(msg) => write!(f, "invalid parameters: {msg}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
