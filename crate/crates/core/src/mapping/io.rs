//! Trajectory, control-point, transform and sequence files.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{check_task, ControlPointPair, DecisionSequence, FloorTransform, MappingError};
use super::{Trajectory, TrajectorySample, TransformSet};
use crate::network::{NodeId, Point};
use crate::textio::{csv_reader, csv_writer, read_json, write_json, FileError};

pub const TRANSFORMS_FORMAT: u32 = 1;

#[derive(Debug, Deserialize)]
struct TrajectoryRow {
    participant: String,
    task: i64,
    t_ms: u64,
    x: f64,
    y: f64,
    z: f64,
    yaw: f64,
    roll: f64,
    pitch: f64,
    gaze_x: f64,
    gaze_y: f64,
    gaze_z: f64,
}

const TRAJECTORY_HEADER: [&str; 12] = [
    "participant",
    "task",
    "t_ms",
    "x",
    "y",
    "z",
    "yaw",
    "roll",
    "pitch",
    "gaze_x",
    "gaze_y",
    "gaze_z",
];

/// Groups rows by `(participant, task)` in order of first appearance.
fn group_by_key<T>(rows: impl IntoIterator<Item = ((String, u8), T)>) -> Vec<((String, u8), Vec<T>)> {
    let mut index: HashMap<(String, u8), usize> = HashMap::new();
    let mut groups: Vec<((String, u8), Vec<T>)> = Vec::new();
    for (key, item) in rows {
        match index.get(&key) {
            Some(&i) => groups[i].1.push(item),
            None => {
                index.insert(key.clone(), groups.len());
                groups.push((key, vec![item]));
            }
        }
    }
    groups
}

pub fn read_trajectories(path: &Path) -> Result<Vec<Trajectory>, MappingError> {
    let mut rdr = csv_reader(path)?;
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<TrajectoryRow>() {
        let r = rec.map_err(|e| FileError::csv(path, e))?;
        let task = check_task(r.task)?;
        let sample = TrajectorySample {
            t_ms: r.t_ms,
            position: [r.x, r.y, r.z],
            head: [r.yaw, r.roll, r.pitch],
            gaze: [r.gaze_x, r.gaze_y, r.gaze_z],
        };
        rows.push(((r.participant, task), sample));
    }
    group_by_key(rows)
        .into_iter()
        .map(|((p, task), samples)| Trajectory::new(p, task, samples))
        .collect()
}

/// Reads trajectories one at a time. Rows of a trajectory must be
/// contiguous; a `(participant, task)` that reappears later is an error.
pub struct TrajectoryReader {
    rows: csv::DeserializeRecordsIntoIter<std::fs::File, TrajectoryRow>,
    path: std::path::PathBuf,
    pending: Option<((String, u8), TrajectorySample)>,
    seen: std::collections::HashSet<(String, u8)>,
    line: u64,
    done: bool,
}

impl TrajectoryReader {
    pub fn open(path: &Path) -> Result<Self, MappingError> {
        Ok(TrajectoryReader {
            rows: csv_reader(path)?.into_deserialize(),
            path: path.to_owned(),
            pending: None,
            seen: Default::default(),
            line: 1,
            done: false,
        })
    }

    fn next_row(&mut self) -> Result<Option<((String, u8), TrajectorySample)>, MappingError> {
        let Some(rec) = self.rows.next() else {
            return Ok(None);
        };
        let r = rec.map_err(|e| FileError::csv(&self.path, e))?;
        self.line += 1;
        let task = check_task(r.task)?;
        let sample = TrajectorySample {
            t_ms: r.t_ms,
            position: [r.x, r.y, r.z],
            head: [r.yaw, r.roll, r.pitch],
            gaze: [r.gaze_x, r.gaze_y, r.gaze_z],
        };
        Ok(Some(((r.participant, task), sample)))
    }

    fn read_one(&mut self) -> Result<Option<Trajectory>, MappingError> {
        let first = match self.pending.take() {
            Some(row) => row,
            None => match self.next_row()? {
                Some(row) => row,
                None => return Ok(None),
            },
        };
        let (key, sample) = first;
        if !self.seen.insert(key.clone()) {
            return Err(FileError::new(
                &self.path,
                Some(self.line),
                format!("rows of {}/{} are not contiguous", key.0, key.1),
            )
            .into());
        }
        let mut samples = vec![sample];
        while let Some((k, s)) = self.next_row()? {
            if k == key {
                samples.push(s);
            } else {
                self.pending = Some((k, s));
                break;
            }
        }
        Ok(Some(Trajectory::new(key.0, key.1, samples)?))
    }
}

impl Iterator for TrajectoryReader {
    type Item = Result<Trajectory, MappingError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let r = self.read_one().transpose();
        if !matches!(r, Some(Ok(_))) {
            self.done = true;
        }
        r
    }
}

/// Writes trajectories one at a time, so callers need not hold them all.
pub struct TrajectoryWriter {
    w: csv::Writer<std::fs::File>,
    path: std::path::PathBuf,
}

impl TrajectoryWriter {
    pub fn create(path: &Path) -> Result<Self, MappingError> {
        Ok(TrajectoryWriter {
            w: csv_writer(path, &TRAJECTORY_HEADER)?,
            path: path.to_owned(),
        })
    }

    pub fn write(&mut self, tr: &Trajectory) -> Result<(), MappingError> {
        let task = tr.task.to_string();
        let mut rec = Vec::with_capacity(12);
        for s in &tr.samples {
            rec.clear();
            rec.push(tr.participant.clone());
            rec.push(task.clone());
            rec.push(s.t_ms.to_string());
            rec.extend(s.position.iter().map(|v| format!("{v:.4}")));
            rec.extend(s.head.iter().map(|v| format!("{v:.2}")));
            rec.extend(s.gaze.iter().map(|v| format!("{v:.4}")));
            self.w
                .write_record(&rec)
                .map_err(|e| FileError::csv(&self.path, e))?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), MappingError> {
        self.w.flush().map_err(|e| FileError::io(&self.path, e))?;
        Ok(())
    }
}

pub fn write_trajectories(path: &Path, trajectories: &[Trajectory]) -> Result<(), MappingError> {
    let mut w = TrajectoryWriter::create(path)?;
    for tr in trajectories {
        w.write(tr)?;
    }
    w.finish()
}

pub fn read_control_points(path: &Path) -> Result<Vec<ControlPointPair>, MappingError> {
    let mut rdr = csv_reader(path)?;
    let pairs = rdr
        .deserialize::<ControlPointPair>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| FileError::csv(path, e))?;
    Ok(pairs)
}

pub fn write_control_points(path: &Path, pairs: &[ControlPointPair]) -> Result<(), MappingError> {
    let mut w = csv_writer(path, &["level", "vx", "vy", "vz", "mx", "my"])?;
    for p in pairs {
        w.serialize(p).map_err(|e| FileError::csv(path, e))?;
    }
    w.flush().map_err(|e| FileError::io(path, e))?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformDoc {
    level: i32,
    scale: f64,
    rotation: f64,
    tx: f64,
    ty: f64,
    /// `null` means unbounded.
    z_min: Option<f64>,
    z_max: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransformsFile {
    transforms_format: u32,
    transforms: Vec<TransformDoc>,
}

pub fn read_transforms(path: &Path) -> Result<TransformSet, MappingError> {
    let doc: TransformsFile = read_json(path)?;
    if doc.transforms_format != TRANSFORMS_FORMAT {
        return Err(FileError::new(
            path,
            None,
            format!("unsupported transforms_format {}", doc.transforms_format),
        )
        .into());
    }
    TransformSet::new(
        doc.transforms
            .into_iter()
            .map(|t| FloorTransform {
                level: t.level,
                scale: t.scale,
                rotation: t.rotation,
                translation: Point::new(t.tx, t.ty),
                z_min: t.z_min.unwrap_or(f64::NEG_INFINITY),
                z_max: t.z_max.unwrap_or(f64::INFINITY),
            })
            .collect(),
    )
}

pub fn write_transforms(path: &Path, set: &TransformSet) -> Result<(), MappingError> {
    let bound = |v: f64| v.is_finite().then_some(v);
    let doc = TransformsFile {
        transforms_format: TRANSFORMS_FORMAT,
        transforms: set
            .transforms()
            .iter()
            .map(|t| TransformDoc {
                level: t.level,
                scale: t.scale,
                rotation: t.rotation,
                tx: t.translation.x,
                ty: t.translation.y,
                z_min: bound(t.z_min),
                z_max: bound(t.z_max),
            })
            .collect(),
    };
    Ok(write_json(path, &doc)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct SequenceRow {
    participant: String,
    task: i64,
    ordinal: usize,
    node_id: String,
}

pub fn read_sequences(path: &Path) -> Result<Vec<DecisionSequence>, MappingError> {
    let mut rdr = csv_reader(path)?;
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<SequenceRow>() {
        let r = rec.map_err(|e| FileError::csv(path, e))?;
        let task = check_task(r.task)?;
        rows.push(((r.participant, task), (r.ordinal, NodeId::new(r.node_id))));
    }
    group_by_key(rows)
        .into_iter()
        .map(|((participant, task), mut visits)| {
            visits.sort_by_key(|v| v.0);
            let seq = DecisionSequence {
                participant,
                task,
                nodes: visits.into_iter().map(|v| v.1).collect(),
            };
            seq.validate(None)?;
            Ok(seq)
        })
        .collect()
}

pub fn write_sequences(path: &Path, sequences: &[DecisionSequence]) -> Result<(), MappingError> {
    let mut w = csv_writer(path, &["participant", "task", "ordinal", "node_id"])?;
    for seq in sequences {
        for (i, node) in seq.nodes.iter().enumerate() {
            w.serialize(SequenceRow {
                participant: seq.participant.clone(),
                task: seq.task as i64,
                ordinal: i,
                node_id: node.as_str().to_owned(),
            })
            .map_err(|e| FileError::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| FileError::io(path, e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streaming_reader_matches_bulk_reader() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let tr = |who: &str, task: u8, n: u64| {
            Trajectory::new(who.to_string(), task, (0..n).map(|i| TrajectorySample::at(i * 10, [i as f64, 0.0, 0.0])).collect()).unwrap()
        };
        let all = vec![tr("P01", 1, 3), tr("P01", 2, 1), tr("P02", 1, 4)];
        write_trajectories(&p, &all).unwrap();
        let streamed: Vec<_> = TrajectoryReader::open(&p).unwrap().collect::<Result<_, _>>().unwrap();
        assert_eq!(streamed, read_trajectories(&p).unwrap());
        assert_eq!(streamed.len(), 3);

        write_trajectories(&p, &[tr("P01", 1, 2), tr("P02", 1, 1), tr("P01", 1, 1)]).unwrap();
        let r: Result<Vec<_>, _> = TrajectoryReader::open(&p).unwrap().collect();
        assert!(r.unwrap_err().to_string().contains(":5:"));
    }

    #[test]
    fn sequences_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("seq.csv");
        let seqs = vec![
            DecisionSequence {
                participant: "P1".into(),
                task: 1,
                nodes: vec!["402".into(), "404".into(), "402".into()],
            },
            DecisionSequence {
                participant: "P2".into(),
                task: 4,
                nodes: vec!["418".into()],
            },
        ];
        write_sequences(&path, &seqs).unwrap();
        assert_eq!(read_sequences(&path).unwrap(), seqs);
    }

    #[test]
    fn trajectory_rows_group_by_participant_and_task() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("traj.csv");
        std::fs::write(
            &path,
            "participant,task,t_ms,x,y,z,yaw,roll,pitch,gaze_x,gaze_y,gaze_z\n\
             P1,1,0,0,0,0,90,0,0,1,2,3\n\
             P1,1,10,1,0,0,90,0,0,1,2,3\n\
             P1,2,0,5,5,0,0,0,0,0,0,0\n",
        )
        .unwrap();
        let t = read_trajectories(&path).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t[0].samples.len(), 2);
        assert_eq!(t[0].samples[0].head, [90.0, 0.0, 0.0]);
        assert_eq!(t[0].samples[1].gaze, [1.0, 2.0, 3.0]);

        std::fs::write(
            &path,
            "participant,task,t_ms,x,y,z,yaw,roll,pitch,gaze_x,gaze_y,gaze_z\nP1,9,0,0,0,0,0,0,0,0,0,0\n",
        )
        .unwrap();
        assert!(matches!(read_trajectories(&path), Err(MappingError::InvalidTask(9))));

        std::fs::write(&path, "participant,task,t_ms,x\nP1,1,0,zz\n").unwrap();
        match read_trajectories(&path) {
            Err(MappingError::File(e)) => assert_eq!(e.line, Some(2)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn transforms_round_trip_with_unbounded_bands() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.json");
        let set = TransformSet::new(vec![FloorTransform {
            scale: 0.5,
            rotation: 1.0,
            ..FloorTransform::identity(1)
        }])
        .unwrap();
        write_transforms(&path, &set).unwrap();
        assert_eq!(read_transforms(&path).unwrap(), set);
    }
}
