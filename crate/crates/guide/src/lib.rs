//! The `slicevec` guide.
//!
//! Each module holds one chapter of the book under `book/src`, so every
//! example in the book runs as a doc-test of this crate.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/slices.md")]
pub mod slices {}

#[doc = include_str!("../../../book/src/vocabulary.md")]
pub mod vocabulary {}

#[doc = include_str!("../../../book/src/training.md")]
pub mod training {}

#[doc = include_str!("../../../book/src/geometry.md")]
pub mod geometry {}

#[doc = include_str!("../../../book/src/experiments.md")]
pub mod experiments {}

#[doc = include_str!("../../../book/src/generation.md")]
pub mod generation {}

#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
