//! Algorithmic core of the privfed pipeline.
//!
//! Everything in this crate is `no_std` (it needs `alloc`) and free of IO:
//!
//! - [`dataset`]: samples, labels and the seeded three-way federated partition.
//! - [`preprocess`]: per-class SMOTE expansion and isolation-forest outlier removal.
//! - [`features`]: standardization, Jacobi PCA and loading-based feature ranking.
//! - [`gbdt`]: a second-order gradient-boosted tree classifier with grid-search tuning.
//! - [`federation`]: the versioned model codec, wire frames and the soft-vote ensemble.
//! - [`metrics`]: confusion counts and accuracy.
//!
//! The std companion crate `privfed` adds file formats, transports, the node
//! runtime and the CLI.

#![no_std]
#![warn(missing_debug_implementations)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod dataset;
pub mod features;
pub mod federation;
pub mod gbdt;
pub mod metrics;
pub mod preprocess;
pub mod rng;

pub use dataset::{Dataset, DatasetError, FederatedSplit, Label, Sample, Shard};
pub use federation::{EnsembleModel, FederatedMessage, MessageType};
pub use gbdt::{GbdtModel, GbdtParams};
pub use metrics::Metrics;
pub use rng::SeededRng;
