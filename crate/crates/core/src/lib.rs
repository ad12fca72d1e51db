//! Texture-jitter data synthesis, open-set tampered-text evaluation and the
//! difference-aware forensics (DAF) numerical head.
//!
//! The crate is `no_std` and only needs `alloc`. Everything in here is a pure
//! function of its inputs: file formats, image codecs for disk IO, thread pools
//! and the command line live in the `ostf` companion crate.
//!
//! Module map:
//!
//! - [`imaging`]: RGB image type and the deterministic texture operations
//!   (blurs, sharpening, lossy JPEG round trip, deblocking, resampling).
//! - [`jitter`]: target selection, size-adaptive intensity, recipe drawing,
//!   feathered splicing and the per-image driver.
//! - [`dataset`]: annotation schema, ICDAR ground-truth parsing, sessions,
//!   statistics and manifest validation.
//! - [`eval`]: box rasterization, pixel / instance metrics, robustness
//!   distortions and the 9×9 open-set matrix.
//! - [`daf`]: the DAF forward pass, its losses, analytic gradients, a finite
//!   difference checker and a toy trainer.

#![no_std]

extern crate alloc;

pub mod daf;
pub mod dataset;
mod error;
pub mod eval;
pub mod geometry;
pub mod imaging;
pub mod jitter;

pub use error::{Error, Result};
pub use geometry::{BBox, Point, Quad};
pub use imaging::Image;
