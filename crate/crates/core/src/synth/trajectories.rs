//! Turning node sequences into sampled virtual-environment trajectories.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::mapping::{
    ControlPointPair, DecisionSequence, FloorTransform, Trajectory, TrajectorySample, TransformSet,
};
use crate::network::{IndoorNetwork, Point};
use crate::rng;

const TRAJ_STREAM: u64 = 0x7a1;

/// Band half-width as a fraction of the storey height.
pub const BAND_FRACTION: f64 = 0.25;

/// Planar similarity from the map frame back to the virtual environment,
/// shared by every level (the building is rigid), plus the virtual height
/// of one storey.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VirtualFrame {
    /// Map meters per virtual unit.
    pub scale: f64,
    /// Radians.
    pub rotation: f64,
    pub tx: f64,
    pub ty: f64,
    /// Virtual z of level `l` is `(l - ground) * storey_height`.
    pub storey_height: f64,
}

impl Default for VirtualFrame {
    fn default() -> Self {
        VirtualFrame {
            scale: 0.5,
            rotation: std::f64::consts::FRAC_PI_6,
            tx: 120.0,
            ty: -40.0,
            storey_height: 4.0,
        }
    }
}

impl VirtualFrame {
    pub fn identity() -> Self {
        VirtualFrame {
            scale: 1.0,
            rotation: 0.0,
            tx: 0.0,
            ty: 0.0,
            storey_height: 4.0,
        }
    }

    /// Map-to-virtual transform of `level`, without a z band.
    pub fn transform(&self, level: i32) -> FloorTransform {
        FloorTransform {
            level,
            scale: self.scale,
            rotation: self.rotation.rem_euclid(std::f64::consts::TAU),
            translation: Point::new(self.tx, self.ty),
            ..FloorTransform::identity(level)
        }
    }

    fn validate(&self) -> Result<(), SynthError> {
        let ok = self.scale > 0.0
            && self.storey_height > 0.0
            && [self.scale, self.rotation, self.tx, self.ty, self.storey_height]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(SynthError::InvalidConfig(
                "virtual frame needs finite values, positive scale and storey height".into(),
            ))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_agents: usize,
    pub sample_interval_ms: u64,
    pub walk_speed_mps: f64,
    /// Standard deviation of planar Gaussian noise, map meters.
    pub position_noise_m: f64,
    pub frame: VirtualFrame,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_agents: 70,
            sample_interval_ms: 10,
            walk_speed_mps: 1.4,
            position_noise_m: 0.3,
            frame: VirtualFrame::default(),
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.sample_interval_ms == 0 {
            return Err(SynthError::InvalidConfig("sample_interval_ms must be positive".into()));
        }
        if !(self.walk_speed_mps > 0.0 && self.walk_speed_mps.is_finite()) {
            return Err(SynthError::InvalidConfig("walk_speed_mps must be positive".into()));
        }
        if !(self.position_noise_m >= 0.0 && self.position_noise_m.is_finite()) {
            return Err(SynthError::InvalidConfig("position_noise_m must be >= 0".into()));
        }
        self.frame.validate()
    }
}

/// Map-frame waypoint: planar position plus height in meters.
#[derive(Debug, Clone, Copy)]
struct Waypoint {
    p: Point,
    z: f64,
    level: i32,
}

fn waypoints(
    seq: &DecisionSequence,
    net: &IndoorNetwork,
    storey_m: f64,
) -> Result<Vec<Waypoint>, SynthError> {
    let ground = net.ground_level().unwrap_or(1);
    seq.nodes
        .iter()
        .map(|id| {
            let n = net
                .node(id)
                .ok_or_else(|| SynthError::InvalidConfig(format!("node {id} not in network")))?;
            Ok(Waypoint {
                p: n.position,
                z: f64::from(n.level - ground) * storey_m,
                level: n.level,
            })
        })
        .collect()
}

/// Walks the node positions at constant speed, sampling every interval; the
/// last sample lands on the final node. `storey_m` is the map-frame storey
/// height used for the walking distance on stairs.
pub fn sequence_to_trajectory(
    seq: &DecisionSequence,
    net: &IndoorNetwork,
    cfg: &SynthConfig,
    storey_m: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Trajectory, SynthError> {
    cfg.validate()?;
    let wps = waypoints(seq, net, storey_m)?;
    if wps.is_empty() {
        return Err(SynthError::InvalidConfig("empty sequence".into()));
    }
    // cumulative arc length at each waypoint
    let mut cum = vec![0.0];
    for w in wps.windows(2) {
        let d = w[0].p.distance(&w[1].p).hypot(w[1].z - w[0].z);
        cum.push(cum.last().unwrap() + d);
    }
    let total_s = cum.last().unwrap() / cfg.walk_speed_mps;
    let dt = cfg.sample_interval_ms as f64 / 1000.0;
    let n_intervals = (total_s / dt - 1e-9).ceil().max(0.0) as u64;
    let noise = Normal::new(0.0, cfg.position_noise_m)
        .map_err(|e| SynthError::InvalidConfig(e.to_string()))?;
    let to_virtual = cfg.frame.transform(0);

    let mut samples = Vec::with_capacity(n_intervals as usize + 1);
    let mut seg = 0;
    for i in 0..=n_intervals {
        let s = ((i as f64 * dt) * cfg.walk_speed_mps).min(*cum.last().unwrap());
        while seg + 1 < wps.len() - 1 && cum[seg + 1] < s {
            seg += 1;
        }
        let (a, b) = if wps.len() == 1 {
            (wps[0], wps[0])
        } else {
            (wps[seg], wps[seg + 1])
        };
        let len = if wps.len() == 1 { 0.0 } else { cum[seg + 1] - cum[seg] };
        let f = if len > 0.0 { ((s - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        let mut p = Point::new(a.p.x + f * (b.p.x - a.p.x), a.p.y + f * (b.p.y - a.p.y));
        let z_m = a.z + f * (b.z - a.z);
        if cfg.position_noise_m > 0.0 {
            p.x += noise.sample(rng);
            p.y += noise.sample(rng);
        }
        let (vx, vy) = to_virtual.invert(p);
        let vz = z_m / storey_m * cfg.frame.storey_height;
        let heading = (b.p.y - a.p.y).atan2(b.p.x - a.p.x) - cfg.frame.rotation;
        let yaw = heading.to_degrees().rem_euclid(360.0);
        let (hs, hc) = heading.sin_cos();
        samples.push(TrajectorySample {
            t_ms: i * cfg.sample_interval_ms,
            position: [vx, vy, vz],
            head: [yaw, 0.0, if a.level != b.level { 20.0 } else { 0.0 }],
            gaze: [vx + 2.0 * hc, vy + 2.0 * hs, vz + 1.6],
        });
    }
    Ok(Trajectory::new(seq.participant.clone(), seq.task, samples)?)
}

/// Random stream for the `index`-th sequence of a run.
pub fn trajectory_stream(seed: u64, index: usize) -> ChaCha8Rng {
    rng::stream(seed, &[TRAJ_STREAM, index as u64])
}

/// Trajectory for every sequence; sequence `i` uses [`trajectory_stream`]`(seed, i)`.
pub fn sequences_to_trajectories(
    sequences: &[DecisionSequence],
    net: &IndoorNetwork,
    cfg: &SynthConfig,
    storey_m: f64,
) -> Result<Vec<Trajectory>, SynthError> {
    use rayon::prelude::*;
    sequences
        .par_iter()
        .enumerate()
        .map(|(i, s)| sequence_to_trajectory(s, net, cfg, storey_m, &mut trajectory_stream(cfg.seed, i)))
        .collect()
}

/// Four corners of the building footprint on every level, seen from both
/// frames.
pub fn control_points(net: &IndoorNetwork, frame: &VirtualFrame) -> Vec<ControlPointPair> {
    let ground = net.ground_level().unwrap_or(1);
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for n in net.nodes() {
        x0 = x0.min(n.position.x);
        y0 = y0.min(n.position.y);
        x1 = x1.max(n.position.x);
        y1 = y1.max(n.position.y);
    }
    let t = frame.transform(0);
    let mut out = Vec::new();
    for &level in net.levels() {
        let vz = f64::from(level - ground) * frame.storey_height;
        for (mx, my) in [(x0, y0), (x1, y0), (x1, y1), (x0, y1)] {
            let (vx, vy) = t.invert(Point::new(mx, my));
            out.push(ControlPointPair {
                level,
                vx,
                vy,
                vz,
                mx,
                my,
            });
        }
    }
    out
}

/// Transforms with z bands of ±[`BAND_FRACTION`] storey around each floor.
pub fn frame_transforms(net: &IndoorNetwork, frame: &VirtualFrame) -> Result<TransformSet, SynthError> {
    let ground = net.ground_level().unwrap_or(1);
    let half = BAND_FRACTION * frame.storey_height;
    let ts = net
        .levels()
        .iter()
        .map(|&l| {
            let z = f64::from(l - ground) * frame.storey_height;
            let t = frame.transform(l);
            if net.levels().len() == 1 {
                t
            } else {
                t.with_z_range(z - half, z + half)
            }
        })
        .collect();
    Ok(TransformSet::new(ts)?)
}
