//! Dataset CSV plus its `<stem>.encoders.json` sidecar.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{lag_feature_names, Dataset, DatasetError, LabelEncoder, ProfileEncoders, Sample};
use super::{PROFILE_FIELDS, START_CODE};
use crate::textio::{csv_reader, csv_writer, read_json, write_json, FileError};

pub const DATASET_FORMAT: u32 = 1;

/// Everything needed to reproduce the encoding of a dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub dataset_format: u32,
    pub lag: usize,
    pub has_profiles: bool,
    pub start_code: f64,
    pub feature_names: Vec<String>,
    pub node_labels: LabelEncoder,
    pub profile_encoders: Option<ProfileEncoders>,
}

impl DatasetManifest {
    pub fn of(ds: &Dataset) -> Self {
        DatasetManifest {
            dataset_format: DATASET_FORMAT,
            lag: ds.lag,
            has_profiles: ds.has_profiles(),
            start_code: START_CODE,
            feature_names: ds.feature_names.clone(),
            node_labels: ds.node_encoder.clone(),
            profile_encoders: ds.profile_encoders.clone(),
        }
    }

    fn check(&self) -> Result<(), DatasetError> {
        let bad = |m: String| Err(DatasetError::Manifest(m));
        if self.dataset_format != DATASET_FORMAT {
            return bad(format!("unsupported dataset_format {}", self.dataset_format));
        }
        if self.start_code != START_CODE {
            return bad(format!("start_code {} is not {START_CODE}", self.start_code));
        }
        if self.lag == 0 {
            return Err(DatasetError::InvalidLag);
        }
        let mut expected = lag_feature_names(self.lag);
        if self.has_profiles {
            expected.extend(PROFILE_FIELDS.iter().map(|s| s.to_string()));
        }
        if self.feature_names != expected {
            return bad(format!("feature_names {:?} do not match lag/profile flags", self.feature_names));
        }
        if self.has_profiles != self.profile_encoders.is_some() {
            return bad("has_profiles disagrees with profile_encoders".into());
        }
        Ok(())
    }
}

/// `data.csv` → `data.encoders.json`.
pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    let stem = csv_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    csv_path.with_file_name(format!("{stem}.encoders.json"))
}

pub fn write_dataset(path: &Path, ds: &Dataset) -> Result<(), DatasetError> {
    let mut header = vec!["participant"];
    header.extend(ds.feature_names.iter().map(String::as_str));
    header.push("target");
    let mut w = csv_writer(path, &header)?;
    for s in &ds.samples {
        let mut rec = Vec::with_capacity(header.len());
        rec.push(s.participant.clone());
        rec.extend(s.features.iter().map(|v| v.to_string()));
        rec.push(s.target.to_string());
        w.write_record(&rec).map_err(|e| FileError::csv(path, e))?;
    }
    w.flush().map_err(|e| FileError::io(path, e))?;
    write_json(&sidecar_path(path), &DatasetManifest::of(ds))?;
    Ok(())
}

pub fn read_dataset(path: &Path) -> Result<Dataset, DatasetError> {
    let manifest: DatasetManifest = read_json(&sidecar_path(path))?;
    manifest.check()?;
    let mut rdr = csv_reader(path)?;
    let header = rdr.headers().map_err(|e| FileError::csv(path, e))?.clone();
    let n_feat = manifest.feature_names.len();
    let header_ok = header.len() == n_feat + 2
        && &header[0] == "participant"
        && &header[n_feat + 1] == "target"
        && header.iter().skip(1).zip(&manifest.feature_names).all(|(a, b)| a == b);
    if !header_ok {
        return Err(FileError::new(path, Some(1), "header does not match the encoder manifest").into());
    }
    let n_classes = manifest.node_labels.len();
    let mut samples = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| FileError::csv(path, e))?;
        let line = rec.position().map(|p| p.line());
        let err = |msg: String| DatasetError::from(FileError::new(path, line, msg));
        let features = (1..=n_feat)
            .map(|i| {
                rec[i]
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| err(format!("bad value {:?} in column {}", &rec[i], &header[i])))
            })
            .collect::<Result<Vec<f64>, _>>()?;
        let target: u32 = rec[n_feat + 1]
            .parse()
            .ok()
            .filter(|&t| (t as usize) < n_classes)
            .ok_or_else(|| err(format!("bad target {:?}", &rec[n_feat + 1])))?;
        let task = features[0];
        if !(1.0..=4.0).contains(&task) || task.fract() != 0.0 {
            return Err(err(format!("bad task {task}")));
        }
        samples.push(Sample {
            features,
            target,
            participant: rec[0].to_owned(),
            task: task as u8,
        });
    }
    Ok(Dataset {
        samples,
        node_encoder: manifest.node_labels,
        profile_encoders: manifest.profile_encoders,
        feature_names: manifest.feature_names,
        lag: manifest.lag,
    })
}
