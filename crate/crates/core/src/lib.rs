//! Synthesis engine for BEV-conditioned radiance fields.
//!
//! The crate turns bird's-eye-view semantic maps into queryable radiance
//! fields, renders them with volume compositing, and composes many local
//! renders into panoramas with a sliding window.

pub mod bevmap;
pub mod container;
pub mod error;
pub mod generator;
pub mod metrics;
pub mod pipeline;
pub mod renderer;
pub mod signal;
pub mod stitcher;

pub use error::{Error, Result};
