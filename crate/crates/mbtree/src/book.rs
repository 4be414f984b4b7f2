//! Doctest hooks for the guide in `book/`: every fenced Rust block in the
//! chapters compiles and runs under `cargo test --doc`, so the book cannot
//! drift out of sync with the API. One module per chapter keeps failures
//! attributable.

#[doc = include_str!("../../../book/src/overview.md")]
mod overview {}

#[doc = include_str!("../../../book/src/growing-trees.md")]
mod growing_trees {}

#[doc = include_str!("../../../book/src/exact-laws.md")]
mod exact_laws {}

#[doc = include_str!("../../../book/src/oracle.md")]
mod oracle {}

#[doc = include_str!("../../../book/src/seating-processes.md")]
mod seating_processes {}

#[doc = include_str!("../../../book/src/dislocation-measures.md")]
mod dislocation_measures {}

#[doc = include_str!("../../../book/src/scaling-limits.md")]
mod scaling_limits {}

#[doc = include_str!("../../../book/src/cli.md")]
mod cli_reference {}
