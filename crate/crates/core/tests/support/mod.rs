//! Helpers shared by the integration test targets. Each target uses a
//! different subset.
#![allow(dead_code)]

pub mod oracles;
pub mod world;
