//! Similarity and diversity assessment for wireless channel-state datasets.
//!
//! Samples are complex tensors over antennas, subcarriers and snapshots. Each
//! sample is reduced to spectral features (power delay profile, angular power
//! spectrum, Doppler spectrum and their sparsities); datasets are then compared
//! through distance matrices between those features.

// NaN must fail validation, so `!(x > 0.0)` is the intended form.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod distance;
pub mod diversity;
pub mod error;
pub mod features;
pub mod jpeg;
pub mod model;
pub mod similarity;
pub mod synth;
pub mod transport;
pub mod workflow;

pub use distance::{DistanceKind, DistanceMatrix};
pub use diversity::{BinEdges, DiversityMeasure};
pub use error::{Error, Result};
pub use features::{FeatureBundle, FeatureKind, FeatureView, RealMatrix};
pub use model::{ChannelSample, Dataset, RandomSeed, SampleShape};
pub use similarity::{Bandwidth, SimilarityMeasure};
pub use synth::{Generated, PathRanges, SynthConfig};
pub use transport::TransportPlan;
pub use workflow::{
    AggregationRule, DiversityConfig, Normalization, QualityReport, SelectionConfig,
    SelectionResult, Selector, SimilarityConfig,
};
