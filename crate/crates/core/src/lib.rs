//! Coalescing Brownian motion on the unit circle and the step-function
//! representation of the stepping-stone model with circular Brownian
//! migration.
//!
//! The crate is `no_std` (with `alloc`) when built without default
//! features. The `parallel` feature (on by default) pulls in `std` and
//! runs Monte Carlo replicates on a rayon pool; results do not depend on
//! the worker count.
//!
//! Layout:
//!
//! - [`geometry`]: points, arcs and gap vectors on the circle `[0, 1)`.
//! - [`analytics`]: closed-form Laplace transforms, theta-series CDFs and
//!   expected cluster counts.
//! - [`engine`]: time-stepped circular coalescing Brownian motion.
//! - [`flow`]: grid approximation of the Arratia flow.
//! - [`stepping_stone`]: step-function states, entrance law, evolution and
//!   fixation.
//! - [`stats`]: replicate drivers, summaries and hypothesis tests.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod analytics;
pub mod engine;
mod error;
pub mod flow;
pub mod geometry;
pub mod rng;
pub mod stats;
pub mod stepping_stone;

pub use error::{Error, Result};
pub use geometry::{arc_length, circular_sort, in_arc, CirclePoint, GapVector};
