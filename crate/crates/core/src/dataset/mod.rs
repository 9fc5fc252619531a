//! Classification samples built from decision sequences.
//!
//! Each visit after the first becomes one sample: the features are the task
//! number followed by the codes of the `lag` preceding decision points (most
//! recent first), optionally followed by the nine encoded profile fields; the
//! target is the code of the visited node. Positions before the start of a
//! sequence hold [`START_CODE`]. No feature is normalized.

mod encoder;
mod io;
mod profile;
mod split;

use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::mapping::DecisionSequence;
use crate::network::IndoorNetwork;
use crate::textio::FileError;

pub use encoder::{fit_label_encoder, LabelEncoder};
pub use io::{read_dataset, sidecar_path, write_dataset, DatasetManifest, DATASET_FORMAT};
pub use profile::{
    read_profiles, write_profiles, PersonProfile, ProfileEncoders, DEVICES, EDUCATION_LEVELS,
    EVACUATION_EXPERIENCE, FAMILIARITY_SCALE, FREQUENCY_SCALE, GENDERS, PROFILE_FIELDS,
};
pub use split::{split, split_indices, SplitConfig, SplitIndices};

/// Feature value for lag positions before the start of a sequence.
pub const START_CODE: f64 = -1.0;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot fit a label encoder on zero categories")]
    EmptyCategories,
    #[error("unknown {field} category {value:?}")]
    UnknownCategory { field: String, value: String },
    #[error("lag must be at least 1")]
    InvalidLag,
    #[error("dataset has lag {have}, cannot provide lag {want}")]
    LagTooLarge { have: usize, want: usize },
    #[error("no profile for participant {0}")]
    MissingProfile(String),
    #[error("dataset has no profile features")]
    NoProfiles,
    #[error("dataset already has profile features")]
    ProfilesAlreadyAttached,
    #[error("train fraction {0} is not in (0, 1)")]
    InvalidFraction(f64),
    #[error("split of {n} samples at fraction {fraction} leaves an empty partition")]
    EmptyPartition { n: usize, fraction: f64 },
    #[error("dataset manifest: {0}")]
    Manifest(String),
    #[error(transparent)]
    File(#[from] FileError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub target: u32,
    pub participant: String,
    pub task: u8,
}

/// Encoder over every decision point of a network.
pub fn node_encoder_for(net: &IndoorNetwork) -> Result<LabelEncoder, DatasetError> {
    fit_label_encoder(net.node_ids().map(|id| id.as_str()))
}

fn code_of(enc: &LabelEncoder, label: &str) -> Result<u32, DatasetError> {
    enc.encode(label).ok_or_else(|| DatasetError::UnknownCategory {
        field: "node".into(),
        value: label.to_owned(),
    })
}

/// One sample per position `t >= 1` of the sequence.
pub fn make_lagged_samples(
    seq: &DecisionSequence,
    lag: usize,
    node_encoder: &LabelEncoder,
) -> Result<Vec<Sample>, DatasetError> {
    if lag == 0 {
        return Err(DatasetError::InvalidLag);
    }
    let codes = seq
        .nodes
        .iter()
        .map(|n| code_of(node_encoder, n.as_str()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((1..codes.len())
        .map(|t| {
            let mut features = Vec::with_capacity(1 + lag);
            features.push(f64::from(seq.task));
            features.extend((1..=lag).map(|k| match t.checked_sub(k) {
                Some(i) => f64::from(codes[i]),
                None => START_CODE,
            }));
            Sample {
                features,
                target: codes[t],
                participant: seq.participant.clone(),
                task: seq.task,
            }
        })
        .collect())
}

/// Appends the encoded profile of each sample's participant.
pub fn attach_profiles(
    samples: Vec<Sample>,
    profiles: &BTreeMap<String, PersonProfile>,
    encoders: &ProfileEncoders,
) -> Result<Vec<Sample>, DatasetError> {
    samples
        .into_iter()
        .map(|mut s| {
            let p = profiles
                .get(&s.participant)
                .ok_or_else(|| DatasetError::MissingProfile(s.participant.clone()))?;
            s.features.extend(encoders.encode(p)?);
            Ok(s)
        })
        .collect()
}

pub fn lag_feature_names(lag: usize) -> Vec<String> {
    std::iter::once("task".to_owned())
        .chain((1..=lag).map(|k| format!("prev_{k}")))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub node_encoder: LabelEncoder,
    pub profile_encoders: Option<ProfileEncoders>,
    pub feature_names: Vec<String>,
    pub lag: usize,
}

impl Dataset {
    pub fn from_sequences(
        sequences: &[DecisionSequence],
        lag: usize,
        node_encoder: LabelEncoder,
    ) -> Result<Self, DatasetError> {
        let mut samples = Vec::new();
        for seq in sequences {
            samples.extend(make_lagged_samples(seq, lag, &node_encoder)?);
        }
        Ok(Dataset {
            samples,
            node_encoder,
            profile_encoders: None,
            feature_names: lag_feature_names(lag),
            lag,
        })
    }

    /// Adds profile features, fitting the encoders on `profiles`.
    pub fn with_profiles(
        self,
        profiles: &BTreeMap<String, PersonProfile>,
    ) -> Result<Self, DatasetError> {
        if self.has_profiles() {
            return Err(DatasetError::ProfilesAlreadyAttached);
        }
        let encoders = ProfileEncoders::fit(profiles.values())?;
        let samples = attach_profiles(self.samples, profiles, &encoders)?;
        let mut feature_names = self.feature_names;
        feature_names.extend(PROFILE_FIELDS.iter().map(|s| s.to_string()));
        Ok(Dataset {
            samples,
            profile_encoders: Some(encoders),
            feature_names,
            ..self
        })
    }

    pub fn has_profiles(&self) -> bool {
        self.profile_encoders.is_some()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Size of the target code space.
    pub fn n_classes(&self) -> usize {
        self.node_encoder.len()
    }

    pub fn targets(&self) -> Vec<u32> {
        self.samples.iter().map(|s| s.target).collect()
    }

    fn with_samples(&self, samples: Vec<Sample>) -> Dataset {
        Dataset {
            samples,
            node_encoder: self.node_encoder.clone(),
            profile_encoders: self.profile_encoders.clone(),
            feature_names: self.feature_names.clone(),
            lag: self.lag,
        }
    }

    pub fn subset(&self, indices: &[usize]) -> Dataset {
        self.with_samples(indices.iter().map(|&i| self.samples[i].clone()).collect())
    }

    pub fn filter_task(&self, task: u8) -> Dataset {
        self.with_samples(
            self.samples
                .iter()
                .filter(|s| s.task == task)
                .cloned()
                .collect(),
        )
    }

    /// Same samples without the profile suffix.
    pub fn without_profiles(&self) -> Result<Dataset, DatasetError> {
        if !self.has_profiles() {
            return Err(DatasetError::NoProfiles);
        }
        let keep = 1 + self.lag;
        let mut ds = self.with_samples(
            self.samples
                .iter()
                .map(|s| Sample {
                    features: s.features[..keep].to_vec(),
                    ..s.clone()
                })
                .collect(),
        );
        ds.profile_encoders = None;
        ds.feature_names.truncate(keep);
        Ok(ds)
    }

    /// Drops lag positions beyond `lag`. Because positions are ordered most
    /// recent first, this equals featurizing the sequences at `lag` directly.
    pub fn truncate_lag(&self, lag: usize) -> Result<Dataset, DatasetError> {
        if lag == 0 {
            return Err(DatasetError::InvalidLag);
        }
        if lag > self.lag {
            return Err(DatasetError::LagTooLarge {
                have: self.lag,
                want: lag,
            });
        }
        let cut = 1 + lag..1 + self.lag;
        let mut ds = self.with_samples(
            self.samples
                .iter()
                .map(|s| {
                    let mut f = s.features.clone();
                    f.drain(cut.clone());
                    Sample {
                        features: f,
                        ..s.clone()
                    }
                })
                .collect(),
        );
        ds.feature_names.drain(cut);
        ds.lag = lag;
        Ok(ds)
    }

    /// SHA-256 over the schema and every sample, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for name in &self.feature_names {
            h.update(name.as_bytes());
            h.update([0]);
        }
        for label in self.node_encoder.categories() {
            h.update(label.as_bytes());
            h.update([0]);
        }
        for s in &self.samples {
            h.update(s.participant.as_bytes());
            h.update([0, s.task]);
            for f in &s.features {
                h.update(f.to_le_bytes());
            }
            h.update(s.target.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}
