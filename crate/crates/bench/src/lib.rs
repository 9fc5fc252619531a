//! Shared fixtures for the benchmarks.

use wayfind_core::mapping::{MappingConfig, TransformSet, Trajectory};
use wayfind_core::synth::{
    build_paper_building, control_points, generate_sequences, sequences_to_trajectories,
    ground_truth_dataset, BAND_FRACTION,
};
use wayfind_core::{Dataset, IndoorNetwork, SynthSpec};

pub const SEED: u64 = 7;

pub fn spec(agents: usize) -> SynthSpec {
    let mut s = SynthSpec::default().with_seed(SEED);
    s.synth.n_agents = agents;
    s
}

pub fn dataset(agents: usize) -> Dataset {
    ground_truth_dataset(&spec(agents), 1, false).expect("synthetic dataset")
}

pub struct MappingFixture {
    pub net: IndoorNetwork,
    pub transforms: TransformSet,
    pub config: MappingConfig,
    pub trajectories: Vec<Trajectory>,
}

/// Noisy trajectories of `agents` walkers with their building and transforms.
pub fn mapping_fixture(agents: usize) -> MappingFixture {
    let s = spec(agents);
    let net = build_paper_building(&s.building).expect("building");
    let g = generate_sequences(&net, &s.tasks, &s.policy, agents).expect("sequences");
    let trajectories =
        sequences_to_trajectories(&g.sequences, &net, &s.synth, s.building.storey_height_m).expect("trajectories");
    let transforms =
        TransformSet::from_control_points(&control_points(&net, &s.synth.frame), BAND_FRACTION).expect("transforms");
    MappingFixture {
        net,
        transforms,
        config: MappingConfig::default(),
        trajectories,
    }
}
