//! Hypernetwork-based dynamic feature selection.
//!
//! The library trains a classifier whose weights are generated per observed
//! feature subset: a set-attention encoder maps the binary knowledge status
//! to a unit-norm conditioning vector, a hypernetwork expands it into the
//! parameters of a small primary network, and a score-based selector acquires
//! features sequentially under a budget. Everything runs on an in-crate
//! reverse-mode autodiff tape over dense f64 tensors.

pub mod autodiff;
pub mod data;
pub mod synthetic;
pub mod encoder;
pub mod params;
pub mod stats;

pub use autodiff::{finite_diff_check, Tape, TensorId};
pub use data::{Dataset, KnowledgeStatus};
