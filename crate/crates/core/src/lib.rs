//! Privacy-preserving biometric matching over derived feature vectors.
//!
//! Raw biometric captures never enter this crate. Images are reduced to
//! nonnegative feature vectors by a small convolutional network, galleries of
//! such vectors collapse to a single mean, and every enrolled person is
//! represented only by an interval of distances to that mean. Matching a
//! probe is then a binary search over sorted disjoint intervals, which makes
//! lookup cost logarithmic in the number of persons and keeps stored state
//! free of invertible biometric data.

pub mod error;
pub mod index;
pub mod net;
pub mod oracle;
pub mod pgm;
pub mod store;
pub mod synthetic;
pub mod vector;

pub use error::{Error, Result};
pub use index::{
    Band, BandedIndex, ClassificationResult, Decision, Gallery, MeanPolicy, Neighbor, Outcome,
    PersonId, DEFAULT_MARGIN, SINGLE_SAMPLE_HALF_WIDTH,
};
pub use net::io::{load_weights, save_weights};
pub use net::train::{evaluate, train, Dataset, TrainReport, TrainingConfig};
pub use net::{conv_output_size, Network, NetworkBuilder, Tensor};
pub use store::{load_snapshot, save_snapshot, LoadedSnapshot, SnapshotMeta, FORMAT_VERSION};
pub use vector::{
    distance_to_mean, l1_distance, mean_vector, normalize, FeatureVector, MeanVector,
};
