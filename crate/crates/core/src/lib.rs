//! Decision-point choice prediction for indoor wayfinding in multi-story
//! buildings.
//!
//! The pipeline runs: [`network`] (the building graph) →
//! [`mapping`] (trajectories to decision-point sequences) → [`dataset`]
//! (lagged, label-encoded samples) → [`models`] (random forest and
//! multinomial logistic regression) → [`evaluation`] and [`experiments`].
//! [`synth`] generates a building and trajectories with known ground truth.

pub mod dataset;
pub mod evaluation;
pub mod experiments;
pub mod mapping;
pub mod models;
pub mod network;
pub mod rng;
pub mod synth;
pub mod textio;

pub use mapping::{
    DecisionSequence, FloorTransform, MappingConfig, MappingError, Trajectory, TrajectorySample,
    TransformSet,
};
pub use network::{IndoorNetwork, NetworkError, NodeId, NodeKind};
pub use dataset::{Dataset, DatasetError, LabelEncoder, PersonProfile, Sample, SplitConfig};
pub use evaluation::{EvalError, EvalReport};
pub use experiments::{ExpConfig, ExperimentError, ExperimentReport};
pub use models::{Classifier, ForestParams, MlrConfig, Model, ModelError, ModelFile};
pub use synth::{SynthError, SynthSpec};
