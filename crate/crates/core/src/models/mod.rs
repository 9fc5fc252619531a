//! Random forest and multinomial logistic regression classifiers.

mod forest;
mod logistic;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, LabelEncoder};
use crate::textio::{read_json, write_json, FileError};

pub use forest::{
    feature_importance_fscore, rf_train, top_nodes, train_tree, ForestParams, Mtry,
    RandomForestModel, TreeNode,
};
pub use logistic::{
    gradient, mcfadden_pseudo_r2, mlr_train, penalized_log_likelihood, LogisticModel, MlrConfig,
    TrainingLog,
};

pub const MODEL_FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("expected {expected} features, got {found}")]
    FeatureLength { expected: usize, found: usize },
    #[error("target {target} outside 0..{n_classes}")]
    TargetOutOfRange { target: u32, n_classes: usize },
    #[error("only class {0} present; need at least two")]
    SingleClass(u32),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("objective became non-finite at iteration {iteration}; lower learning_rate")]
    NonFinite { iteration: usize },
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    File(#[from] FileError),
}

pub trait Classifier: Sync {
    fn n_features(&self) -> usize;
    fn predict(&self, x: &[f64]) -> Result<u32, ModelError>;

    fn predict_all(&self, x: &[&[f64]]) -> Result<Vec<u32>, ModelError> {
        x.iter().map(|r| self.predict(r)).collect()
    }
}

/// Checks shapes and target range; returns the feature count.
pub(crate) fn check_training_set(
    x: &[&[f64]],
    y: &[u32],
    n_classes: usize,
) -> Result<usize, ModelError> {
    let Some(first) = x.first() else {
        return Err(ModelError::EmptyDataset);
    };
    if x.len() != y.len() {
        return Err(ModelError::InvalidParams(format!(
            "{} rows but {} targets",
            x.len(),
            y.len()
        )));
    }
    let d = first.len();
    if let Some(r) = x.iter().find(|r| r.len() != d) {
        return Err(ModelError::FeatureLength {
            expected: d,
            found: r.len(),
        });
    }
    if let Some(&t) = y.iter().find(|&&t| t as usize >= n_classes) {
        return Err(ModelError::TargetOutOfRange {
            target: t,
            n_classes,
        });
    }
    Ok(d)
}

/// Feature rows and targets of a dataset, borrowed.
pub fn design(ds: &Dataset) -> (Vec<&[f64]>, Vec<u32>) {
    ds.samples
        .iter()
        .map(|s| (s.features.as_slice(), s.target))
        .unzip()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", content = "model", rename_all = "snake_case")]
pub enum Model {
    Rf(RandomForestModel),
    Mlr(LogisticModel),
}

impl Model {
    pub fn algo(&self) -> &'static str {
        match self {
            Model::Rf(_) => "rf",
            Model::Mlr(_) => "mlr",
        }
    }
}

impl Classifier for Model {
    fn n_features(&self) -> usize {
        match self {
            Model::Rf(m) => m.n_features(),
            Model::Mlr(m) => m.n_features(),
        }
    }

    fn predict(&self, x: &[f64]) -> Result<u32, ModelError> {
        match self {
            Model::Rf(m) => m.predict(x),
            Model::Mlr(m) => m.predict(x),
        }
    }
}

/// A trained model with the schema it expects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub model_format: u32,
    pub feature_names: Vec<String>,
    pub node_labels: LabelEncoder,
    /// File name of the encoder manifest of the training data.
    pub encoder_manifest: String,
    pub training_data_digest: String,
    #[serde(flatten)]
    pub model: Model,
}

impl ModelFile {
    pub fn new(model: Model, train: &Dataset, encoder_manifest: impl Into<String>) -> Self {
        ModelFile {
            model_format: MODEL_FORMAT,
            feature_names: train.feature_names.clone(),
            node_labels: train.node_encoder.clone(),
            encoder_manifest: encoder_manifest.into(),
            training_data_digest: train.digest(),
            model,
        }
    }

    /// Errors unless `ds` has this model's feature schema and node labels.
    pub fn check_compatible(&self, ds: &Dataset) -> Result<(), ModelError> {
        if ds.feature_names != self.feature_names {
            return Err(ModelError::Format(format!(
                "model expects features {:?}, data has {:?}",
                self.feature_names, ds.feature_names
            )));
        }
        if ds.node_encoder != self.node_labels {
            return Err(ModelError::Format(
                "data and model use different node label encodings".into(),
            ));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        Ok(write_json(path, self)?)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let v: serde_json::Value = read_json(path)?;
        match v.get("model_format").and_then(|f| f.as_u64()) {
            Some(f) if f == u64::from(MODEL_FORMAT) => {}
            other => {
                return Err(FileError::new(
                    path,
                    None,
                    format!("unsupported model_format {other:?}"),
                )
                .into())
            }
        }
        serde_json::from_value(v).map_err(|e| FileError::new(path, None, e.to_string()).into())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::fit_label_encoder;
    use crate::mapping::DecisionSequence;

    fn tiny() -> Dataset {
        let enc = fit_label_encoder(["402", "404", "406"]).unwrap();
        let seq = DecisionSequence {
            participant: "P".into(),
            task: 1,
            nodes: vec!["402".into(), "404".into(), "406".into(), "404".into(), "402".into()],
        };
        Dataset::from_sequences(&[seq], 1, enc).unwrap()
    }

    #[test]
    fn model_files_round_trip() {
        let ds = tiny();
        let (x, y) = design(&ds);
        let dir = tempfile::tempdir().unwrap();
        let rf = rf_train(&x, &y, ds.n_classes(), &ForestParams::default()).unwrap();
        let mlr = mlr_train(&x, &y, ds.n_classes(), &MlrConfig { max_iters: 20, ..Default::default() }).unwrap();
        for m in [Model::Rf(rf), Model::Mlr(mlr)] {
            let path = dir.path().join(format!("{}.json", m.algo()));
            let f = ModelFile::new(m, &ds, "d.encoders.json");
            f.save(&path).unwrap();
            let back = ModelFile::load(&path).unwrap();
            assert_eq!(back, f);
            back.check_compatible(&ds).unwrap();
            let text = std::fs::read_to_string(&path).unwrap();
            assert!(text.contains("\"model_format\": 1"));
        }
    }

    #[test]
    fn wrong_format_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        std::fs::write(&path, r#"{"model_format": 2}"#).unwrap();
        assert!(matches!(ModelFile::load(&path), Err(ModelError::File(_))));
    }

    #[test]
    fn shape_checks() {
        let a = [1.0, 2.0];
        let b = [1.0];
        assert!(matches!(
            check_training_set(&[&a, &b], &[0, 0], 1),
            Err(ModelError::FeatureLength { .. })
        ));
        assert!(check_training_set(&[&a], &[0, 1], 2).is_err());
    }
}
