use std::sync::OnceLock;

use proptest::prelude::*;
use wayfind_core::dataset::{node_encoder_for, read_dataset, split_indices, write_dataset};
use wayfind_core::mapping::{extract_decision_sequence, MappingConfig, TransformSet};
use wayfind_core::network::NodeKind;
use wayfind_core::synth::{
    build_paper_building, control_points, default_tasks, generate_sequences, sequence_to_trajectory,
    trajectory_stream, AgentPolicy, BuildingSpec, Destination, SynthConfig, VirtualFrame,
    BAND_FRACTION,
};
use wayfind_core::{Dataset, IndoorNetwork, SplitConfig};

fn building() -> &'static IndoorNetwork {
    static NET: OnceLock<IndoorNetwork> = OnceLock::new();
    NET.get_or_init(|| build_paper_building(&BuildingSpec::default()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn walks_follow_links_and_reach_goals(seed in any::<u64>(), agents in 1usize..4, dev in 0.0f64..0.5) {
        let net = building();
        let policy = AgentPolicy { deviation_prob: dev, seed, ..AgentPolicy::default() };
        let mut tasks = default_tasks();
        for t in &mut tasks {
            t.deviation_prob = None;
        }
        let g = generate_sequences(net, &tasks, &policy, agents).unwrap();
        prop_assert_eq!(g.sequences.len() + g.lost.len(), agents * tasks.len());
        for s in &g.sequences {
            let task = tasks.iter().find(|t| t.task_id == s.task).unwrap();
            prop_assert_eq!(&s.nodes[0], &task.origin);
            for w in s.nodes.windows(2) {
                prop_assert!(net.are_adjacent(&w[0], &w[1]), "{} -> {}", w[0].as_str(), w[1].as_str());
            }
            let last = net.node(s.nodes.last().unwrap()).unwrap();
            match &task.destination {
                Destination::Node(d) => prop_assert_eq!(&last.id, d),
                Destination::AnyExit => prop_assert_eq!(last.kind, NodeKind::Exit),
            }
        }
    }

    #[test]
    fn noiseless_trajectories_map_back_in_any_frame(
        seed in any::<u64>(),
        scale in 0.2f64..3.0,
        rotation in 0.0f64..std::f64::consts::TAU,
        tx in -500.0f64..500.0,
        ty in -500.0f64..500.0,
    ) {
        let net = building();
        let policy = AgentPolicy { seed, ..AgentPolicy::default() };
        let g = generate_sequences(net, &default_tasks(), &policy, 1).unwrap();
        let frame = VirtualFrame { scale, rotation, tx, ty, ..VirtualFrame::default() };
        let cfg = SynthConfig { position_noise_m: 0.0, frame, seed, ..SynthConfig::default() };
        let transforms = TransformSet::from_control_points(&control_points(net, &frame), BAND_FRACTION).unwrap();
        let storey = BuildingSpec::default().storey_height_m;
        for (i, seq) in g.sequences.iter().enumerate() {
            let traj = sequence_to_trajectory(seq, net, &cfg, storey, &mut trajectory_stream(seed, i)).unwrap();
            let got = extract_decision_sequence(&traj, net, &transforms, &MappingConfig::default()).unwrap();
            prop_assert_eq!(&got.sequence.nodes, &seq.nodes);
        }
    }

    #[test]
    fn splits_partition_the_indices(n in 2usize..500, frac in 0.05f64..0.95, seed in any::<u64>()) {
        let cfg = SplitConfig { train_fraction: frac, seed };
        match split_indices(n, &cfg) {
            Ok(s) => {
                let mut all: Vec<usize> = s.train.iter().chain(&s.test).copied().collect();
                all.sort_unstable();
                prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
                prop_assert_eq!(s.train.len(), (frac * n as f64).round() as usize);
                prop_assert_eq!(split_indices(n, &cfg).unwrap(), s);
            }
            Err(_) => {
                let k = (frac * n as f64).round() as usize;
                prop_assert!(k == 0 || k >= n);
            }
        }
    }

    #[test]
    fn dataset_dump_round_trips(seed in any::<u64>(), lag in 1usize..6) {
        let net = building();
        let policy = AgentPolicy { seed, ..AgentPolicy::default() };
        let g = generate_sequences(net, &default_tasks(), &policy, 2).unwrap();
        let ds = Dataset::from_sequences(&g.sequences, lag, node_encoder_for(net).unwrap()).unwrap();
        let expected: usize = g.sequences.iter().map(|s| s.nodes.len() - 1).sum();
        prop_assert_eq!(ds.len(), expected);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("d.csv");
        write_dataset(&path, &ds).unwrap();
        prop_assert_eq!(read_dataset(&path).unwrap(), ds);
    }
}

#[test]
fn network_document_round_trips() {
    let net = building();
    let back = IndoorNetwork::from_json_str(&net.to_doc().to_json_string()).unwrap();
    assert_eq!(back.stats(), net.stats());
    for l in net.links() {
        assert!(back.are_adjacent(&l.a, &l.b));
    }
}
