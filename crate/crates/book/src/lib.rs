//! The guide in `book/` as doctests. mdbook cannot link workspace crates
//! into its snippets, so each chapter is pulled in here instead and
//! `cargo test --doc` runs its code blocks.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/clicks.md")]
pub mod clicks {}
#[doc = include_str!("../../../book/src/boundaries.md")]
pub mod boundaries {}
#[doc = include_str!("../../../book/src/segmentation.md")]
pub mod segmentation {}
#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("../../../book/src/protocol.md")]
pub mod protocol {}
#[doc = include_str!("../../../book/src/service.md")]
pub mod service {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
