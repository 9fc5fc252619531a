//! Mapping raw virtual-environment trajectories onto decision-point sequences.
//!
//! Three steps: control points give per-level similarity transforms
//! ([`estimate_transform`]), samples are carried into the map frame
//! ([`map_point`]), and mapped samples are attributed to the nearest decision
//! point within a snap radius ([`snap_to_node`]). Runs of the same node
//! collapse to a single visit.

mod io;
mod transform;

use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use crate::network::{IndoorNetwork, NodeId, Point};
use crate::textio::FileError;

pub use io::{
    read_control_points, read_sequences, read_transforms, read_trajectories, write_control_points,
    write_sequences, write_trajectories, write_transforms, TrajectoryReader, TrajectoryWriter,
};
pub use transform::{
    assign_level, estimate_transform, map_point, ControlPointPair, FloorTransform, Residuals,
    TransformEstimate, TransformSet,
};

/// Default snap radius in meters.
pub const DEFAULT_SNAP_RADIUS: f64 = 2.0;

/// Wayfinding tasks are numbered 1 to 4; task 4 is the evacuation.
pub const TASKS: [u8; 4] = [1, 2, 3, 4];

#[derive(Debug, Error)]
pub enum MappingError {
    #[error("level {level} has {found} control points, at least 2 are required")]
    TooFewControlPoints { level: i32, found: usize },
    #[error("control points on level {level} are coincident; scale is undetermined")]
    DegenerateControlPoints { level: i32 },
    #[error("non-finite {0} coordinate")]
    NonFinite(&'static str),
    #[error("transform for level {level} has a non-positive scale")]
    InvalidScale { level: i32 },
    #[error("transform for level {level} has an empty or invalid z band")]
    InvalidBand { level: i32 },
    #[error("z bands of levels {a} and {b} overlap")]
    OverlappingBands { a: i32, b: i32 },
    #[error("z = {z} lies outside every level band")]
    OutsideBands { z: f64 },
    #[error("invalid mapping configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("trajectory {participant}/{task} has no samples")]
    EmptyTrajectory { participant: String, task: u8 },
    #[error("task {0} is not one of 1-4")]
    InvalidTask(i64),
    #[error("trajectory {participant}/{task}: time decreases at sample {index}")]
    TimeNotMonotone {
        participant: String,
        task: u8,
        index: usize,
    },
    #[error("sequence {participant}/{task}: {reason}")]
    InvalidSequence {
        participant: String,
        task: u8,
        reason: String,
    },
    #[error(transparent)]
    File(#[from] FileError),
}

pub fn check_task(task: i64) -> Result<u8, MappingError> {
    match task {
        1..=4 => Ok(task as u8),
        _ => Err(MappingError::InvalidTask(task)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t_ms: u64,
    /// Virtual-environment position.
    pub position: [f64; 3],
    /// Yaw, roll, pitch in degrees. Carried through, unused by the pipeline.
    pub head: [f64; 3],
    /// Gaze point. Carried through, unused by the pipeline.
    pub gaze: [f64; 3],
}

impl TrajectorySample {
    pub fn at(t_ms: u64, position: [f64; 3]) -> Self {
        TrajectorySample {
            t_ms,
            position,
            head: [0.0; 3],
            gaze: [0.0; 3],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub participant: String,
    pub task: u8,
    pub samples: Vec<TrajectorySample>,
}

impl Trajectory {
    pub fn new(
        participant: impl Into<String>,
        task: u8,
        samples: Vec<TrajectorySample>,
    ) -> Result<Self, MappingError> {
        let participant = participant.into();
        check_task(task as i64)?;
        if samples.is_empty() {
            return Err(MappingError::EmptyTrajectory { participant, task });
        }
        if let Some(i) = samples.windows(2).position(|w| w[1].t_ms < w[0].t_ms) {
            return Err(MappingError::TimeNotMonotone {
                participant,
                task,
                index: i + 1,
            });
        }
        Ok(Trajectory {
            participant,
            task,
            samples,
        })
    }
}

/// Ordered decision-point visits of one participant on one task.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct DecisionSequence {
    pub participant: String,
    pub task: u8,
    pub nodes: Vec<NodeId>,
}

impl DecisionSequence {
    /// Checks that consecutive entries differ and, given a network, that
    /// every entry exists in it.
    pub fn validate(&self, net: Option<&IndoorNetwork>) -> Result<(), MappingError> {
        let fail = |reason: String| MappingError::InvalidSequence {
            participant: self.participant.clone(),
            task: self.task,
            reason,
        };
        if let Some(w) = self.nodes.windows(2).find(|w| w[0] == w[1]) {
            return Err(fail(format!("node {} repeated consecutively", w[0])));
        }
        if let Some(net) = net {
            if let Some(n) = self.nodes.iter().find(|n| !net.contains(n)) {
                return Err(fail(format!("node {n} is not in the network")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MappingConfig {
    /// Meters.
    pub snap_radius: f64,
    pub warn_on_nonadjacent: bool,
}

impl Default for MappingConfig {
    fn default() -> Self {
        MappingConfig {
            snap_radius: DEFAULT_SNAP_RADIUS,
            warn_on_nonadjacent: true,
        }
    }
}

impl MappingConfig {
    pub fn validate(&self) -> Result<(), MappingError> {
        if self.snap_radius > 0.0 && self.snap_radius.is_finite() {
            Ok(())
        } else {
            Err(MappingError::InvalidConfig("snap radius must be positive"))
        }
    }
}

const TIE_EPS: f64 = 1e-12;

/// Nearest node on `level` within the snap radius; ties within 1e-12 m go to
/// the label-smallest node.
pub fn snap_to_node<'a>(
    p: Point,
    level: i32,
    net: &'a IndoorNetwork,
    cfg: &MappingConfig,
) -> Option<&'a NodeId> {
    nearest(
        net.nodes_on_level(level).map(|n| (n.position, &n.id)),
        p,
        cfg.snap_radius,
    )
}

fn nearest<'a>(
    candidates: impl Iterator<Item = (Point, &'a NodeId)>,
    p: Point,
    radius: f64,
) -> Option<&'a NodeId> {
    let mut best: Option<(f64, &NodeId)> = None;
    for (pos, id) in candidates {
        let d = pos.distance(&p);
        if d > radius {
            continue;
        }
        best = match best {
            None => Some((d, id)),
            Some((bd, bid)) if d < bd - TIE_EPS || ((d - bd).abs() <= TIE_EPS && id < bid) => {
                Some((d.min(bd), id))
            }
            keep => keep,
        };
    }
    best.map(|(_, id)| id)
}

/// Per-level node positions, so repeated snapping does not rescan the
/// whole network.
#[derive(Debug, Clone)]
pub struct Snapper<'a> {
    by_level: HashMap<i32, Vec<(Point, &'a NodeId)>>,
    cfg: MappingConfig,
}

impl<'a> Snapper<'a> {
    pub fn new(net: &'a IndoorNetwork, cfg: MappingConfig) -> Result<Self, MappingError> {
        cfg.validate()?;
        let mut by_level: HashMap<i32, Vec<(Point, &NodeId)>> = HashMap::new();
        for n in net.nodes() {
            by_level.entry(n.level).or_default().push((n.position, &n.id));
        }
        Ok(Snapper { by_level, cfg })
    }

    pub fn snap(&self, p: Point, level: i32) -> Option<&'a NodeId> {
        let nodes = self.by_level.get(&level)?;
        nearest(nodes.iter().copied(), p, self.cfg.snap_radius)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MappingWarning {
    /// No sample came within the snap radius of any node.
    EmptySequence,
    /// Consecutive visits are not linked in the network.
    NonAdjacent {
        index: usize,
        from: NodeId,
        to: NodeId,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub sequence: DecisionSequence,
    pub warnings: Vec<MappingWarning>,
    /// Samples outside every z band or beyond the snap radius.
    pub unmatched_samples: usize,
}

pub fn extract_decision_sequence(
    traj: &Trajectory,
    net: &IndoorNetwork,
    transforms: &TransformSet,
    cfg: &MappingConfig,
) -> Result<Extraction, MappingError> {
    let snapper = Snapper::new(net, *cfg)?;
    extract_with(traj, net, transforms, &snapper)
}

/// Like [`extract_decision_sequence`] with a prebuilt [`Snapper`].
pub fn extract_with(
    traj: &Trajectory,
    net: &IndoorNetwork,
    transforms: &TransformSet,
    snapper: &Snapper<'_>,
) -> Result<Extraction, MappingError> {
    if traj.samples.is_empty() {
        return Err(MappingError::EmptyTrajectory {
            participant: traj.participant.clone(),
            task: traj.task,
        });
    }
    let mut nodes: Vec<NodeId> = Vec::new();
    let mut unmatched = 0;
    for s in &traj.samples {
        // between-band samples are transitional (stairs) and snap to nothing
        let hit = map_point(s.position, transforms)
            .ok()
            .and_then(|(p, level)| snapper.snap(p, level));
        match hit {
            Some(id) if nodes.last() != Some(id) => nodes.push(id.clone()),
            Some(_) => {}
            None => unmatched += 1,
        }
    }

    let mut warnings = Vec::new();
    if nodes.is_empty() {
        warnings.push(MappingWarning::EmptySequence);
    }
    if snapper.cfg.warn_on_nonadjacent {
        for (i, w) in nodes.windows(2).enumerate() {
            if !net.are_adjacent(&w[0], &w[1]) {
                warnings.push(MappingWarning::NonAdjacent {
                    index: i + 1,
                    from: w[0].clone(),
                    to: w[1].clone(),
                });
            }
        }
    }
    Ok(Extraction {
        sequence: DecisionSequence {
            participant: traj.participant.clone(),
            task: traj.task,
            nodes,
        },
        warnings,
        unmatched_samples: unmatched,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{LinkDoc, LinkKind, NetworkDoc, NodeDoc, NodeKind};

    /// Corridor 402-404-406 at 10 m spacing plus staircase A4 off 402.
    fn corridor() -> IndoorNetwork {
        let node = |id: &str, kind, x, y| NodeDoc {
            id: id.into(),
            level: 4,
            kind,
            x,
            y,
            corridor: None,
        };
        let link = |a: &str, b: &str, kind| LinkDoc {
            a: a.into(),
            b: b.into(),
            kind,
        };
        IndoorNetwork::from_doc(&NetworkDoc {
            format: 1,
            levels: vec![4],
            nodes: vec![
                node("402", NodeKind::RoomAccess, 0.0, 0.0),
                node("404", NodeKind::RoomAccess, 10.0, 0.0),
                node("406", NodeKind::RoomAccess, 20.0, 0.0),
                node("A4", NodeKind::Staircase, 0.0, 6.0),
            ],
            links: vec![
                link("402", "404", LinkKind::SameLevel),
                link("404", "406", LinkKind::SameLevel),
                link("402", "A4", LinkKind::StairAccess),
            ],
        })
        .unwrap()
    }

    fn identity() -> TransformSet {
        TransformSet::new(vec![FloorTransform::identity(4)]).unwrap()
    }

    fn walk(points: &[(f64, f64)], step: f64) -> Trajectory {
        let mut samples = Vec::new();
        let mut t = 0;
        for w in points.windows(2) {
            let len = ((w[1].0 - w[0].0).powi(2) + (w[1].1 - w[0].1).powi(2)).sqrt();
            let n = (len / step).ceil() as usize;
            for k in 0..n {
                let f = k as f64 / n as f64;
                samples.push(TrajectorySample::at(
                    t,
                    [w[0].0 + f * (w[1].0 - w[0].0), w[0].1 + f * (w[1].1 - w[0].1), 0.0],
                ));
                t += 10;
            }
        }
        let last = points[points.len() - 1];
        samples.push(TrajectorySample::at(t, [last.0, last.1, 0.0]));
        Trajectory::new("P1", 1, samples).unwrap()
    }

    #[test]
    fn snapping_rules() {
        let net = corridor();
        let cfg = MappingConfig::default();
        assert_eq!(snap_to_node(Point::new(10.0, 0.0), 4, &net, &cfg).unwrap().as_str(), "404");
        assert!(snap_to_node(Point::new(5.0, 0.0), 4, &net, &cfg).is_none());
        assert!(snap_to_node(Point::new(10.0, 0.0), 3, &net, &cfg).is_none());
        let wide = MappingConfig {
            snap_radius: 6.0,
            ..cfg
        };
        // equidistant from 402 and 404
        assert_eq!(snap_to_node(Point::new(5.0, 0.0), 4, &net, &wide).unwrap().as_str(), "402");
        assert_eq!(
            snap_to_node(Point::new(5.0 + 1e-13, 0.0), 4, &net, &wide).unwrap().as_str(),
            "402"
        );
        assert_eq!(snap_to_node(Point::new(5.1, 0.0), 4, &net, &wide).unwrap().as_str(), "404");
    }

    #[test]
    fn standing_still_yields_single_visit() {
        let net = corridor();
        let samples = (0..100)
            .map(|i| TrajectorySample::at(i * 10, [0.0, 0.0, 0.0]))
            .collect();
        let traj = Trajectory::new("P1", 1, samples).unwrap();
        let ex = extract_decision_sequence(&traj, &net, &identity(), &MappingConfig::default())
            .unwrap();
        assert_eq!(ex.sequence.nodes, vec![NodeId::from("402")]);
        assert!(ex.warnings.is_empty());
    }

    #[test]
    fn corridor_walk_yields_visited_nodes() {
        let net = corridor();
        let traj = walk(&[(0.0, 0.0), (20.0, 0.0)], 0.014);
        let ex = extract_decision_sequence(&traj, &net, &identity(), &MappingConfig::default())
            .unwrap();
        let got: Vec<_> = ex.sequence.nodes.iter().map(NodeId::as_str).collect();
        assert_eq!(got, ["402", "404", "406"]);
    }

    #[test]
    fn revisits_are_kept() {
        let net = corridor();
        let traj = walk(&[(0.0, 0.0), (10.0, 0.0), (0.0, 0.0)], 0.05);
        let ex = extract_decision_sequence(&traj, &net, &identity(), &MappingConfig::default())
            .unwrap();
        let got: Vec<_> = ex.sequence.nodes.iter().map(NodeId::as_str).collect();
        assert_eq!(got, ["402", "404", "402"]);
    }

    #[test]
    fn open_space_gives_empty_sequence_with_warning() {
        let net = corridor();
        let traj = walk(&[(50.0, 50.0), (60.0, 50.0)], 0.1);
        let ex = extract_decision_sequence(&traj, &net, &identity(), &MappingConfig::default())
            .unwrap();
        assert!(ex.sequence.nodes.is_empty());
        assert_eq!(ex.warnings, vec![MappingWarning::EmptySequence]);
        assert_eq!(ex.unmatched_samples, traj.samples.len());
    }

    #[test]
    fn jumps_are_flagged_as_nonadjacent() {
        let net = corridor();
        // teleport from 402 straight to 406
        let samples = vec![
            TrajectorySample::at(0, [0.0, 0.0, 0.0]),
            TrajectorySample::at(10, [20.0, 0.0, 0.0]),
        ];
        let traj = Trajectory::new("P1", 2, samples).unwrap();
        let ex = extract_decision_sequence(&traj, &net, &identity(), &MappingConfig::default())
            .unwrap();
        assert_eq!(ex.warnings.len(), 1);
        assert!(matches!(ex.warnings[0], MappingWarning::NonAdjacent { index: 1, .. }));
        let quiet = MappingConfig {
            warn_on_nonadjacent: false,
            ..Default::default()
        };
        let ex = extract_decision_sequence(&traj, &net, &identity(), &quiet).unwrap();
        assert!(ex.warnings.is_empty());
    }

    #[test]
    fn trajectory_invariants() {
        assert!(matches!(
            Trajectory::new("P", 1, vec![]),
            Err(MappingError::EmptyTrajectory { .. })
        ));
        assert!(matches!(
            Trajectory::new("P", 5, vec![TrajectorySample::at(0, [0.0; 3])]),
            Err(MappingError::InvalidTask(5))
        ));
        let backwards = vec![
            TrajectorySample::at(10, [0.0; 3]),
            TrajectorySample::at(0, [0.0; 3]),
        ];
        assert!(matches!(
            Trajectory::new("P", 1, backwards),
            Err(MappingError::TimeNotMonotone { index: 1, .. })
        ));
        let bad = MappingConfig {
            snap_radius: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }
}
