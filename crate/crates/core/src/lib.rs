//! Learning to rank with a neural comparator.
//!
//! A weight-shared three-layer network compares two documents; a stable
//! merge sort turns those comparisons into a ranking. Training pairs are
//! collected incrementally from the comparisons the current network gets
//! wrong while sorting, and the comparator that ranks the validation set
//! best is kept.
//!
//! - [`comparator`]: the network, its gradients and model file format
//! - [`training`]: pair construction and the epoch loop
//! - [`sortnet`]: comparison sorting and the incremental loop
//! - [`metrics`]: P@n, MAP and NDCG@n
//! - [`data`]: LETOR-style input, normalization and folds
//! - [`workflow`]: the train/rank/eval/kfold/selftest commands

pub mod comparator;
pub mod data;
pub mod error;
pub mod fixture;
pub mod metrics;
pub mod selftest;
pub mod sortnet;
pub mod training;
pub mod workflow;

pub use comparator::{Activation, Preference, Target, WeightSharedComparator};
pub use error::{Error, Result};
