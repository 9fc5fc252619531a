//! Synthetic building, participants and trajectories with known ground truth.

mod agents;
mod building;
mod profiles;
mod trajectories;

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{node_encoder_for, write_profiles, Dataset, DatasetError};
use crate::mapping::{
    write_control_points, write_sequences, write_transforms, MappingError, TrajectoryWriter,
};
use crate::network::{IndoorNetwork, NetworkError};
use crate::textio::{read_json, write_json, FileError};

pub use agents::{
    default_tasks, generate_sequences, participant_id, AgentPolicy, Destination, Generated,
    LostAgent, TaskSpec,
};
pub use building::{build_paper_building, even_label, exit_label, odd_label, stair_label, BuildingSpec};
pub use profiles::{generate_profile, generate_profiles};
pub use trajectories::{
    control_points, frame_transforms, sequence_to_trajectory, sequences_to_trajectories,
    trajectory_stream, SynthConfig, VirtualFrame, BAND_FRACTION,
};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid building spec: {0}")]
    InvalidSpec(String),
    #[error("cannot build {requested} nodes; achievable range is {min}..={max}")]
    NodeCount { requested: usize, min: usize, max: usize },
    #[error("task {0}: {1}")]
    InvalidTask(u8, String),
    #[error("invalid agent policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
    #[error("task {0}: destination unreachable from origin")]
    Unreachable(u8),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Mapping(#[from] MappingError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    File(#[from] FileError),
}

/// Everything a synthetic run depends on besides the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub building: BuildingSpec,
    pub tasks: Vec<TaskSpec>,
    pub policy: AgentPolicy,
    pub synth: SynthConfig,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            building: BuildingSpec::default(),
            tasks: default_tasks(),
            policy: AgentPolicy::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl SynthSpec {
    pub fn load(path: &Path) -> Result<Self, SynthError> {
        Ok(read_json(path)?)
    }

    /// Same spec with every seed replaced by `seed`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.policy.seed = seed;
        self.synth.seed = seed;
        self
    }
}

/// File names inside a synth output directory.
pub mod files {
    pub const NETWORK: &str = "network.json";
    pub const CONTROL_POINTS: &str = "control_points.csv";
    pub const TRANSFORMS: &str = "transforms.json";
    pub const TRAJECTORIES: &str = "trajectories.csv";
    pub const SEQUENCES: &str = "sequences.csv";
    pub const PROFILES: &str = "profiles.csv";
    pub const SUMMARY: &str = "synth_summary.json";
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskSummary {
    pub sequences: usize,
    pub mean_length: f64,
    pub shortest_length: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthSummary {
    pub nodes: usize,
    pub exits: usize,
    pub staircases: usize,
    pub agents: usize,
    pub sequences: usize,
    pub trajectory_samples: usize,
    pub lost: Vec<LostAgent>,
    pub per_task: BTreeMap<u8, TaskSummary>,
}

/// Per-task sequence counts and mean lengths.
pub fn task_summaries(
    net: &IndoorNetwork,
    tasks: &[TaskSpec],
    sequences: &[crate::mapping::DecisionSequence],
) -> BTreeMap<u8, TaskSummary> {
    tasks
        .iter()
        .map(|t| {
            let lens: Vec<usize> = sequences
                .iter()
                .filter(|s| s.task == t.task_id)
                .map(|s| s.nodes.len())
                .collect();
            let shortest = match &t.destination {
                Destination::Node(d) => net.shortest_path(&t.origin, d).ok().map(|p| p.len()),
                Destination::AnyExit => {
                    let exits: Vec<_> = net.exits().map(|n| n.id.clone()).collect();
                    net.hop_distances(exits.iter()).get(&t.origin).map(|d| d + 1)
                }
            };
            let mean = if lens.is_empty() {
                0.0
            } else {
                lens.iter().sum::<usize>() as f64 / lens.len() as f64
            };
            (
                t.task_id,
                TaskSummary {
                    sequences: lens.len(),
                    mean_length: mean,
                    shortest_length: shortest,
                },
            )
        })
        .collect()
}

/// Lagged dataset straight from the generated ground-truth sequences,
/// skipping trajectories. Agents lost on the way are left out.
pub fn ground_truth_dataset(spec: &SynthSpec, lag: usize, profiles: bool) -> Result<Dataset, SynthError> {
    let net = build_paper_building(&spec.building)?;
    let g = generate_sequences(&net, &spec.tasks, &spec.policy, spec.synth.n_agents)?;
    let ds = Dataset::from_sequences(&g.sequences, lag, node_encoder_for(&net)?)?;
    if profiles {
        Ok(ds.with_profiles(&generate_profiles(spec.synth.seed, spec.synth.n_agents))?)
    } else {
        Ok(ds)
    }
}

const WRITE_CHUNK: usize = 16;

/// Builds the building, walks every agent and writes the full bundle to
/// `out_dir`. Trajectories are produced and written in chunks.
pub fn run_synth(spec: &SynthSpec, out_dir: &Path) -> Result<SynthSummary, SynthError> {
    spec.synth.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| FileError::io(out_dir, e))?;
    let net = build_paper_building(&spec.building)?;
    let generated = generate_sequences(&net, &spec.tasks, &spec.policy, spec.synth.n_agents)?;
    let frame = spec.synth.frame;
    let cps = control_points(&net, &frame);

    let net_path = out_dir.join(files::NETWORK);
    std::fs::write(&net_path, net.to_doc().to_json_string())
        .map_err(|e| FileError::io(&net_path, e))?;
    write_control_points(&out_dir.join(files::CONTROL_POINTS), &cps)?;
    write_transforms(&out_dir.join(files::TRANSFORMS), &frame_transforms(&net, &frame)?)?;
    write_sequences(&out_dir.join(files::SEQUENCES), &generated.sequences)?;
    write_profiles(
        &out_dir.join(files::PROFILES),
        &generate_profiles(spec.synth.seed, spec.synth.n_agents),
    )?;

    let mut writer = TrajectoryWriter::create(&out_dir.join(files::TRAJECTORIES))?;
    let mut n_samples = 0;
    for (c, chunk) in generated.sequences.chunks(WRITE_CHUNK).enumerate() {
        let trs = chunk
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let mut rng = trajectory_stream(spec.synth.seed, c * WRITE_CHUNK + i);
                sequence_to_trajectory(s, &net, &spec.synth, spec.building.storey_height_m, &mut rng)
            })
            .collect::<Result<Vec<_>, _>>()?;
        for t in &trs {
            n_samples += t.samples.len();
            writer.write(t)?;
        }
    }
    writer.finish()?;

    let stats = net.stats();
    let summary = SynthSummary {
        nodes: stats.nodes,
        exits: stats.exits,
        staircases: stats.staircases,
        agents: spec.synth.n_agents,
        sequences: generated.sequences.len(),
        trajectory_samples: n_samples,
        per_task: task_summaries(&net, &spec.tasks, &generated.sequences),
        lost: generated.lost,
    };
    write_json(&out_dir.join(files::SUMMARY), &summary)?;
    Ok(summary)
}
