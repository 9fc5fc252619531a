//! Accuracy, balanced accuracy, per-class recall and grouped evaluation.
//!
//! Balanced accuracy averages recall over the classes that have at least one
//! true sample; classes absent from `y_true` are left out of the mean.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, LabelEncoder, PersonProfile};
use crate::models::{Classifier, ModelError};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{truth} true labels but {pred} predictions")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("label {0} is not in the class set")]
    UnknownLabel(u32),
    #[error("no samples to evaluate")]
    Empty,
    #[error("no class has a true sample")]
    NoTrueSamples,
    #[error("participant {participant} has no {attribute} attribute")]
    MissingAttribute {
        participant: String,
        attribute: &'static str,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `counts[i][j]`: samples of true class `classes[i]` predicted as `classes[j]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<u32>,
    pub counts: Vec<Vec<u64>>,
}

pub fn confusion_matrix(
    y_true: &[u32],
    y_pred: &[u32],
    classes: &[u32],
) -> Result<ConfusionMatrix, EvalError> {
    if y_true.len() != y_pred.len() {
        return Err(EvalError::LengthMismatch {
            truth: y_true.len(),
            pred: y_pred.len(),
        });
    }
    let mut classes = classes.to_vec();
    classes.sort_unstable();
    classes.dedup();
    let pos: HashMap<u32, usize> = classes.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    let at = |c: u32| pos.get(&c).copied().ok_or(EvalError::UnknownLabel(c));
    let mut counts = vec![vec![0u64; classes.len()]; classes.len()];
    for (&t, &p) in y_true.iter().zip(y_pred) {
        counts[at(t)?][at(p)?] += 1;
    }
    Ok(ConfusionMatrix { classes, counts })
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_total(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }
}

pub fn accuracy(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    match cm.total() {
        0 => Err(EvalError::Empty),
        n => Ok(cm.trace() as f64 / n as f64),
    }
}

/// Recall of every class with at least one true sample.
pub fn per_class_recall(cm: &ConfusionMatrix) -> BTreeMap<u32, f64> {
    cm.classes
        .iter()
        .enumerate()
        .filter_map(|(i, &c)| {
            let row = cm.row_total(i);
            (row > 0).then(|| (c, cm.counts[i][i] as f64 / row as f64))
        })
        .collect()
}

pub fn balanced_accuracy(cm: &ConfusionMatrix) -> Result<f64, EvalError> {
    let r = per_class_recall(cm);
    if r.is_empty() {
        return Err(EvalError::NoTrueSamples);
    }
    Ok(r.values().sum::<f64>() / r.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: u64,
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    pub per_class_recall: BTreeMap<u32, f64>,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn from_confusion(confusion: ConfusionMatrix) -> Result<Self, EvalError> {
        Ok(EvalReport {
            n: confusion.total(),
            accuracy: accuracy(&confusion)?,
            balanced_accuracy: balanced_accuracy(&confusion)?,
            per_class_recall: per_class_recall(&confusion),
            confusion,
        })
    }

    pub fn from_labels(y_true: &[u32], y_pred: &[u32], classes: &[u32]) -> Result<Self, EvalError> {
        Self::from_confusion(confusion_matrix(y_true, y_pred, classes)?)
    }
}

/// Predicts every sample (in parallel, order preserved).
pub fn predict_dataset(model: &dyn Classifier, ds: &Dataset) -> Result<Vec<u32>, EvalError> {
    Ok(ds
        .samples
        .par_iter()
        .map(|s| model.predict(&s.features))
        .collect::<Result<Vec<_>, _>>()?)
}

/// Report over the full node code space of `ds`.
pub fn evaluate(model: &dyn Classifier, ds: &Dataset) -> Result<EvalReport, EvalError> {
    let pred = predict_dataset(model, ds)?;
    let classes: Vec<u32> = (0..ds.n_classes() as u32).collect();
    EvalReport::from_labels(&ds.targets(), &pred, &classes)
}

/// Per-class recall keyed by node label.
pub fn per_node_report(cm: &ConfusionMatrix, nodes: &LabelEncoder) -> BTreeMap<String, f64> {
    per_class_recall(cm)
        .into_iter()
        .map(|(c, r)| {
            let label = nodes.decode(c).map_or_else(|| c.to_string(), str::to_owned);
            (label, r)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    None,
    Task,
    Gender,
    Device,
    Familiarity,
    /// Building familiarity crossed with task.
    FamiliarityTask,
}

impl GroupBy {
    pub fn needs_profiles(self) -> bool {
        !matches!(self, GroupBy::None | GroupBy::Task)
    }
}

fn group_key(
    by: GroupBy,
    participant: &str,
    task: u8,
    profiles: Option<&BTreeMap<String, PersonProfile>>,
) -> Result<String, EvalError> {
    let attr = |field: &'static str| -> Result<String, EvalError> {
        profiles
            .and_then(|p| p.get(participant))
            .and_then(|p| p.category(field))
            .map(str::to_owned)
            .ok_or_else(|| EvalError::MissingAttribute {
                participant: participant.to_owned(),
                attribute: field,
            })
    };
    Ok(match by {
        GroupBy::None => "all".to_owned(),
        GroupBy::Task => format!("task {task}"),
        GroupBy::Gender => attr("gender")?,
        GroupBy::Device => attr("device")?,
        GroupBy::Familiarity => attr("building_familiarity")?,
        GroupBy::FamiliarityTask => format!("{} / task {task}", attr("building_familiarity")?),
    })
}

/// Partitions `ds` by the attribute and reports each part. Groups whose
/// samples carry no decodable class still appear if non-empty.
pub fn group_eval(
    model: &dyn Classifier,
    ds: &Dataset,
    by: GroupBy,
    profiles: Option<&BTreeMap<String, PersonProfile>>,
) -> Result<BTreeMap<String, EvalReport>, EvalError> {
    let pred = predict_dataset(model, ds)?;
    let mut groups: BTreeMap<String, (Vec<u32>, Vec<u32>)> = BTreeMap::new();
    for (s, &p) in ds.samples.iter().zip(&pred) {
        let key = group_key(by, &s.participant, s.task, profiles)?;
        let g = groups.entry(key).or_default();
        g.0.push(s.target);
        g.1.push(p);
    }
    let classes: Vec<u32> = (0..ds.n_classes() as u32).collect();
    groups
        .into_iter()
        .map(|(k, (t, p))| Ok((k, EvalReport::from_labels(&t, &p, &classes)?)))
        .collect()
}
