//! Runs every code block in the book as a doc-test, so `cargo test
//! --workspace` fails whenever the book drifts from the library. mdBook
//! itself cannot test blocks that depend on external crates; including
//! the chapters as module docs hands them to rustdoc, which can.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/tableaus.md")]
pub mod tableaus {}

#[doc = include_str!("../../../book/src/order-conditions.md")]
pub mod order_conditions {}

#[doc = include_str!("../../../book/src/stability.md")]
pub mod stability {}

#[doc = include_str!("../../../book/src/heuristics.md")]
pub mod heuristics {}

#[doc = include_str!("../../../book/src/solver.md")]
pub mod solver {}

#[doc = include_str!("../../../book/src/search.md")]
pub mod search {}

#[doc = include_str!("../../../book/src/benchmarks.md")]
pub mod benchmarks {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
