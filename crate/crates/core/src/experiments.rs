//! Experiment protocol: usage statistics, baseline comparison, per-task
//! models, profile ablation, parameter sweeps and feature importance.
//!
//! Every experiment splits once with [`ExpConfig::split`] and reuses that
//! split for all of its rows, so rows differ only in what they vary.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{split_indices, Dataset, DatasetError, SplitConfig, SplitIndices};
use crate::evaluation::{evaluate, EvalError, EvalReport};
use crate::mapping::DecisionSequence;
use crate::models::{
    design, feature_importance_fscore, mcfadden_pseudo_r2, mlr_train, rf_train, top_nodes,
    ForestParams, MlrConfig, ModelError, RandomForestModel,
};

pub const REPORT_FORMAT: u32 = 1;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("no sequences")]
    NoSequences,
    #[error("task {0} missing from the dataset")]
    MissingTask(u8),
    #[error("task {task}: only {classes} distinct next node(s) in the training split")]
    TooFewClasses { task: u8, classes: usize },
    #[error("invalid sweep: {0}")]
    InvalidSweep(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExpConfig {
    pub forest: ForestParams,
    pub mlr: MlrConfig,
    pub split: SplitConfig,
}

impl ExpConfig {
    /// Same configuration with every seed set to `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.forest.seed = seed;
        self.mlr.seed = seed;
        self.split.seed = seed;
        self
    }
}

// ---------------------------------------------------------------- usage

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LengthSummary {
    pub n: usize,
    pub mean: f64,
    pub min: usize,
    pub max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UsageStats {
    /// Visits per node; a node entered twice counts twice.
    pub node_counts: BTreeMap<String, usize>,
    pub node_counts_per_task: BTreeMap<u8, BTreeMap<String, usize>>,
    pub lengths: BTreeMap<u8, LengthSummary>,
    /// Sequence length per task and participant.
    pub per_participant: BTreeMap<u8, BTreeMap<String, usize>>,
}

pub fn usage_stats(sequences: &[DecisionSequence]) -> Result<UsageStats, ExperimentError> {
    if sequences.is_empty() {
        return Err(ExperimentError::NoSequences);
    }
    let mut node_counts = BTreeMap::new();
    let mut per_task: BTreeMap<u8, BTreeMap<String, usize>> = BTreeMap::new();
    let mut per_participant: BTreeMap<u8, BTreeMap<String, usize>> = BTreeMap::new();
    for s in sequences {
        for n in &s.nodes {
            *node_counts.entry(n.to_string()).or_insert(0) += 1;
            *per_task.entry(s.task).or_default().entry(n.to_string()).or_insert(0) += 1;
        }
        per_participant
            .entry(s.task)
            .or_default()
            .insert(s.participant.clone(), s.nodes.len());
    }
    let lengths = per_participant
        .iter()
        .map(|(&t, m)| {
            let v: Vec<usize> = m.values().copied().collect();
            (
                t,
                LengthSummary {
                    n: v.len(),
                    mean: v.iter().sum::<usize>() as f64 / v.len() as f64,
                    min: *v.iter().min().unwrap(),
                    max: *v.iter().max().unwrap(),
                },
            )
        })
        .collect();
    Ok(UsageStats {
        node_counts,
        node_counts_per_task: per_task,
        lengths,
        per_participant,
    })
}

impl UsageStats {
    /// `task<TAB>n<TAB>mean<TAB>min<TAB>max` rows.
    pub fn lengths_tsv(&self) -> String {
        let mut out = String::from("task\tn\tmean_length\tmin_length\tmax_length\n");
        for (t, l) in &self.lengths {
            let _ = writeln!(out, "{t}\t{}\t{:.4}\t{}\t{}", l.n, l.mean, l.min, l.max);
        }
        out
    }
}

// ---------------------------------------------------------------- reports

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub config: String,
    pub repetition: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub accuracy: f64,
    pub balanced_accuracy: f64,
    /// Further per-row numbers, e.g. pseudo R² or feature count.
    pub extra: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub report_format: u32,
    pub experiment: String,
    pub dataset_digest: String,
    /// Digest of the train/test index sets shared by all rows.
    pub split_digest: String,
    pub config: ExpConfig,
    pub params: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub rows: Vec<ReportRow>,
    pub provenance: Provenance,
    /// Published figures for the same setting, as context only.
    pub reference_values: Vec<String>,
}

fn fmt_value(v: f64) -> String {
    format!("{v:.6}")
}

impl ExperimentReport {
    /// Tab-separated rows with a header; `extra` keys become columns.
    pub fn to_tsv(&self) -> String {
        let extra_keys: Vec<&String> = {
            let mut k: Vec<&String> = self.rows.iter().flat_map(|r| r.extra.keys()).collect();
            k.sort();
            k.dedup();
            k
        };
        let mut out = String::from("config\trepetition\tn_train\tn_test\taccuracy\tbalanced_accuracy");
        for k in &extra_keys {
            out.push('\t');
            out.push_str(k);
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}",
                r.config,
                r.repetition,
                r.n_train,
                r.n_test,
                fmt_value(r.accuracy),
                fmt_value(r.balanced_accuracy)
            );
            for k in &extra_keys {
                out.push('\t');
                if let Some(v) = r.extra.get(*k) {
                    out.push_str(&fmt_value(*v));
                }
            }
            out.push('\n');
        }
        out
    }

    /// Provenance block as pretty JSON, with reference values appended.
    pub fn provenance_json(&self) -> String {
        #[derive(Serialize)]
        struct Block<'a> {
            #[serde(flatten)]
            provenance: &'a Provenance,
            reference_values: &'a [String],
        }
        serde_json::to_string_pretty(&Block {
            provenance: &self.provenance,
            reference_values: &self.reference_values,
        })
        .expect("report serializes")
    }

    /// Mean and spread (max - min) of accuracy per configuration, in row order.
    pub fn summary(&self) -> Vec<(String, f64, f64)> {
        let mut out: Vec<(String, Vec<f64>)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|(c, _)| *c == r.config) {
                Some((_, v)) => v.push(r.accuracy),
                None => out.push((r.config.clone(), vec![r.accuracy])),
            }
        }
        out.into_iter()
            .map(|(c, v)| {
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                (c, mean, hi - lo)
            })
            .collect()
    }

    pub fn row(&self, config: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.config == config)
    }
}

struct Split {
    indices: SplitIndices,
    train: Dataset,
    test: Dataset,
}

fn make_split(ds: &Dataset, cfg: &SplitConfig) -> Result<Split, ExperimentError> {
    let indices = split_indices(ds.len(), cfg)?;
    Ok(Split {
        train: ds.subset(&indices.train),
        test: ds.subset(&indices.test),
        indices,
    })
}

fn row(config: impl Into<String>, repetition: usize, sp: &Split, rep: &EvalReport) -> ReportRow {
    ReportRow {
        config: config.into(),
        repetition,
        n_train: sp.train.len(),
        n_test: sp.test.len(),
        accuracy: rep.accuracy,
        balanced_accuracy: rep.balanced_accuracy,
        extra: BTreeMap::new(),
    }
}

fn fit_forest(train: &Dataset, params: &ForestParams) -> Result<RandomForestModel, ModelError> {
    let (x, y) = design(train);
    rf_train(&x, &y, train.n_classes(), params)
}

fn provenance(
    experiment: &str,
    ds: &Dataset,
    sp: &SplitIndices,
    cfg: &ExpConfig,
    params: serde_json::Value,
) -> Provenance {
    Provenance {
        report_format: REPORT_FORMAT,
        experiment: experiment.to_owned(),
        dataset_digest: ds.digest(),
        split_digest: sp.digest(),
        config: *cfg,
        params,
    }
}

// ---------------------------------------------------------------- experiments

/// Random forest and logistic regression on the same split.
pub fn compare_baselines(ds: &Dataset, cfg: &ExpConfig) -> Result<ExperimentReport, ExperimentError> {
    let sp = make_split(ds, &cfg.split)?;
    let rf = fit_forest(&sp.train, &cfg.forest)?;
    let rf_rep = evaluate(&rf, &sp.test)?;

    let (x, y) = design(&sp.train);
    let mlr = mlr_train(&x, &y, sp.train.n_classes(), &cfg.mlr)?;
    let mlr_rep = evaluate(&mlr, &sp.test)?;
    let mut mlr_row = row("mlr", 0, &sp, &mlr_rep);
    mlr_row
        .extra
        .insert("pseudo_r2".into(), mcfadden_pseudo_r2(&mlr, &x, &y)?);
    mlr_row
        .extra
        .insert("iterations".into(), mlr.training_log.iterations as f64);

    Ok(ExperimentReport {
        rows: vec![row("rf", 0, &sp, &rf_rep), mlr_row],
        provenance: provenance("compare", ds, &sp.indices, cfg, serde_json::Value::Null),
        reference_values: vec![
            "published accuracy on the original VR data: rf 0.93, mlr 0.05".into(),
        ],
    })
}

/// One forest per task, each on its own split of that task's samples.
pub fn per_task_models(ds: &Dataset, cfg: &ExpConfig) -> Result<ExperimentReport, ExperimentError> {
    let mut rows = Vec::new();
    let mut digests = BTreeMap::new();
    for task in 1..=4u8 {
        let sub = ds.filter_task(task);
        if sub.is_empty() {
            return Err(ExperimentError::MissingTask(task));
        }
        let sp = make_split(&sub, &cfg.split)?;
        let mut classes: Vec<u32> = sp.train.targets();
        classes.sort_unstable();
        classes.dedup();
        if classes.len() < 2 {
            return Err(ExperimentError::TooFewClasses {
                task,
                classes: classes.len(),
            });
        }
        let rf = fit_forest(&sp.train, &cfg.forest)?;
        let rep = evaluate(&rf, &sp.test)?;
        let mut r = row(format!("task{task}"), 0, &sp, &rep);
        r.extra.insert("n_samples".into(), sub.len() as f64);
        rows.push(r);
        digests.insert(format!("task{task}"), sp.indices.digest());
    }
    let full = split_indices(ds.len(), &cfg.split)?;
    Ok(ExperimentReport {
        rows,
        provenance: provenance(
            "per_task",
            ds,
            &full,
            cfg,
            serde_json::json!({ "task_split_digests": digests }),
        ),
        reference_values: vec![
            "published accuracy / balanced accuracy: task1 0.95/0.89, task2 0.93/0.88, task3 0.96/0.89, task4 0.80/0.80".into(),
        ],
    })
}

/// Forest with and without the profile features, same split and seeds.
pub fn profile_ablation(ds: &Dataset, cfg: &ExpConfig) -> Result<ExperimentReport, ExperimentError> {
    let bare = ds.without_profiles()?;
    let indices = split_indices(ds.len(), &cfg.split)?;
    let mut rows = Vec::new();
    for (name, d) in [("without_profiles", &bare), ("with_profiles", ds)] {
        let sp = Split {
            train: d.subset(&indices.train),
            test: d.subset(&indices.test),
            indices: indices.clone(),
        };
        let rf = fit_forest(&sp.train, &cfg.forest)?;
        let rep = evaluate(&rf, &sp.test)?;
        let mut r = row(name, 0, &sp, &rep);
        r.extra.insert("n_features".into(), d.n_features() as f64);
        rows.push(r);
    }
    Ok(ExperimentReport {
        rows,
        provenance: provenance("ablation", ds, &indices, cfg, serde_json::Value::Null),
        reference_values: vec![
            "published accuracy: 0.93 without profiles, 0.19 with profiles (input dimension 11)".into(),
        ],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    MaxDepth,
    NTrees,
    Lag,
}

impl SweepParam {
    pub fn name(self) -> &'static str {
        match self {
            SweepParam::MaxDepth => "max_depth",
            SweepParam::NTrees => "n_trees",
            SweepParam::Lag => "lag",
        }
    }

    /// Default grid: depth 2..=40 step 2, trees 1..=99 step 2, lags 1, 2, 3, 5.
    pub fn default_grid(self) -> Vec<usize> {
        match self {
            SweepParam::MaxDepth => (2..=40).step_by(2).collect(),
            SweepParam::NTrees => (1..=99).step_by(2).collect(),
            SweepParam::Lag => vec![1, 2, 3, 5],
        }
    }

    fn reference_values(self) -> Vec<String> {
        match self {
            SweepParam::MaxDepth => vec!["published: accuracy stops improving noticeably beyond depth 12".into()],
            SweepParam::NTrees => vec!["published grid: 1 to 100 trees in steps of 2".into()],
            SweepParam::Lag => vec![
                "published accuracy / balanced accuracy by lag: 1 0.93/0.87, 2 0.92/0.81, 3 0.93/0.84, 5 0.93/0.84".into(),
            ],
        }
    }
}

impl std::str::FromStr for SweepParam {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "max_depth" => Ok(SweepParam::MaxDepth),
            "n_trees" => Ok(SweepParam::NTrees),
            "lag" => Ok(SweepParam::Lag),
            other => Err(ExperimentError::InvalidSweep(format!(
                "unknown parameter {other:?}; expected max_depth, n_trees or lag"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParam,
    pub values: Vec<usize>,
    pub repetitions: usize,
    pub seed: u64,
}

impl SweepSpec {
    pub fn new(parameter: SweepParam, seed: u64) -> Self {
        SweepSpec {
            parameter,
            values: parameter.default_grid(),
            repetitions: 1,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: &str| Err(ExperimentError::InvalidSweep(m.into()));
        if self.values.is_empty() {
            return bad("values must not be empty");
        }
        if self.values.windows(2).any(|w| w[0] >= w[1]) {
            return bad("values must be strictly increasing");
        }
        if self.values[0] == 0 {
            return bad("values must be positive");
        }
        if self.repetitions == 0 {
            return bad("repetitions must be at least 1");
        }
        Ok(())
    }
}

/// Forest seed of repetition `r`; repetition 0 uses the sweep seed itself.
fn repetition_seed(seed: u64, r: usize) -> u64 {
    seed.wrapping_add(r as u64)
}

/// Retrains the forest at each grid value, other parameters from `cfg`.
/// The split is drawn once from the sweep seed and shared by every point.
/// For a lag sweep `ds` must carry at least the largest lag; smaller lags
/// are obtained by truncation.
pub fn sweep(ds: &Dataset, spec: &SweepSpec, cfg: &ExpConfig) -> Result<ExperimentReport, ExperimentError> {
    spec.validate()?;
    let split_cfg = SplitConfig {
        seed: spec.seed,
        ..cfg.split
    };
    let indices = split_indices(ds.len(), &split_cfg)?;
    let jobs: Vec<(usize, usize)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.repetitions).map(move |r| (v, r)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(v, r)| -> Result<ReportRow, ExperimentError> {
            let mut params = ForestParams {
                seed: repetition_seed(spec.seed, r),
                ..cfg.forest
            };
            let data = match spec.parameter {
                SweepParam::MaxDepth => {
                    params.max_depth = v;
                    None
                }
                SweepParam::NTrees => {
                    params.n_trees = v;
                    None
                }
                SweepParam::Lag => Some(ds.truncate_lag(v)?),
            };
            let d = data.as_ref().unwrap_or(ds);
            let sp = Split {
                train: d.subset(&indices.train),
                test: d.subset(&indices.test),
                indices: indices.clone(),
            };
            let rf = fit_forest(&sp.train, &params)?;
            let rep = evaluate(&rf, &sp.test)?;
            Ok(row(format!("{}={v}", spec.parameter.name()), r, &sp, &rep))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = ExpConfig {
        split: split_cfg,
        ..*cfg
    };
    Ok(ExperimentReport {
        rows,
        provenance: provenance(
            "sweep",
            ds,
            &indices,
            &cfg,
            serde_json::to_value(spec).expect("sweep spec serializes"),
        ),
        reference_values: spec.parameter.reference_values(),
    })
}

// ---------------------------------------------------------------- importance

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportanceReport {
    /// `(feature, split count)`, most used first, ties by feature order.
    pub fscore: Vec<(String, usize)>,
    /// Per tree, the feature names used at the root and the level below.
    pub top_levels: Vec<Vec<String>>,
}

pub fn importance_report(model: &RandomForestModel, feature_names: &[String]) -> ImportanceReport {
    let name = |i: usize| {
        feature_names
            .get(i)
            .cloned()
            .unwrap_or_else(|| format!("f{i}"))
    };
    let mut fscore: Vec<(usize, usize)> = feature_importance_fscore(model)
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c > 0)
        .collect();
    fscore.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    ImportanceReport {
        fscore: fscore.into_iter().map(|(i, c)| (name(i), c)).collect(),
        top_levels: top_nodes(model, 2)
            .into_iter()
            .map(|t| t.into_iter().map(name).collect())
            .collect(),
    }
}

impl ImportanceReport {
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("feature\tfscore\n");
        for (f, c) in &self.fscore {
            let _ = writeln!(out, "{f}\t{c}");
        }
        out.push_str("\ntree\ttop_two_levels\n");
        for (i, t) in self.top_levels.iter().enumerate() {
            let _ = writeln!(out, "{i}\t{}", t.join(","));
        }
        out
    }
}
