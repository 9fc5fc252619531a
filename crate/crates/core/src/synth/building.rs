//! A two-corridor multi-story building with level-prefixed room numbering.
//!
//! Every level has an even corridor along `y = 0` and an odd corridor along
//! `y = width`. Corridor position `k` sits at `x = length * k / (n - 1)`; the
//! even corridor has `n` nodes labelled `level, 2k + 2` and the odd corridor
//! `n - 1` nodes labelled `level, 2k + 1`. Staircase shafts stand midway
//! between the corridors, short cross corridors join the two between shafts,
//! and exits hang off the ground-floor even corridor.

use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::network::{
    Corridor, IndoorNetwork, LinkDoc, LinkKind, NodeDoc, NodeId, NodeKind, NetworkDoc,
    NETWORK_FORMAT,
};

const SHAFT_LETTERS: [char; 5] = ['A', 'B', 'C', 'D', 'E'];

/// Corridor positions offered to exits, in order of preference. Uneven on
/// purpose so exit usage is asymmetric.
const EXIT_PREFERENCE: [usize; 14] = [0, 13, 3, 9, 6, 1, 5, 8, 10, 12, 2, 4, 7, 11];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildingSpec {
    pub n_levels: usize,
    pub corridor_length_m: f64,
    pub corridor_width_m: f64,
    /// Nodes on the even corridor; the odd corridor has one fewer.
    pub nodes_per_corridor: usize,
    pub n_stair_shafts: usize,
    pub n_exits: usize,
    /// Trim ground-floor odd-corridor nodes from the far end to reach this
    /// total. `None` keeps the full grid.
    pub target_nodes: Option<usize>,
    pub storey_height_m: f64,
    /// Distance of exits from the even corridor.
    pub exit_offset_m: f64,
}

impl Default for BuildingSpec {
    fn default() -> Self {
        BuildingSpec {
            n_levels: 4,
            corridor_length_m: 214.0,
            corridor_width_m: 12.0,
            nodes_per_corridor: 14,
            n_stair_shafts: 5,
            n_exits: 8,
            target_nodes: Some(133),
            storey_height_m: 4.0,
            exit_offset_m: 8.0,
        }
    }
}

impl BuildingSpec {
    fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidSpec(m));
        if !(1..=9).contains(&self.n_levels) {
            return bad(format!("n_levels {} not in 1..=9", self.n_levels));
        }
        if !(2..=49).contains(&self.nodes_per_corridor) {
            return bad(format!(
                "nodes_per_corridor {} not in 2..=49",
                self.nodes_per_corridor
            ));
        }
        if self.n_levels > 1 && !(1..=5).contains(&self.n_stair_shafts) {
            return bad(format!("n_stair_shafts {} not in 1..=5", self.n_stair_shafts));
        }
        if self.n_stair_shafts > 5 {
            return bad(format!("n_stair_shafts {} exceeds 5", self.n_stair_shafts));
        }
        let max_exits = 10.min(self.nodes_per_corridor);
        if !(1..=max_exits).contains(&self.n_exits) {
            return bad(format!("n_exits {} not in 1..={max_exits}", self.n_exits));
        }
        for (name, v) in [
            ("corridor_length_m", self.corridor_length_m),
            ("corridor_width_m", self.corridor_width_m),
            ("storey_height_m", self.storey_height_m),
            ("exit_offset_m", self.exit_offset_m),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive"));
            }
        }
        Ok(())
    }

    /// Node count of the untrimmed grid.
    pub fn full_node_count(&self) -> usize {
        let n = self.nodes_per_corridor;
        let stairs = if self.n_levels > 1 { self.n_stair_shafts } else { 0 };
        self.n_levels * (2 * n - 1 + stairs) + self.n_exits
    }

    /// Smallest total reachable by trimming.
    pub fn min_node_count(&self) -> usize {
        self.full_node_count() - (self.nodes_per_corridor - 1)
    }

    /// Corridor positions of the staircase shafts.
    pub fn shaft_positions(&self) -> Vec<usize> {
        let last = self.nodes_per_corridor - 1;
        match self.n_stair_shafts {
            0 => vec![],
            1 => vec![0],
            s => (0..s).map(|i| i * last / (s - 1)).collect(),
        }
    }

    fn cross_positions(&self) -> Vec<usize> {
        let shafts = self.shaft_positions();
        let odd_len = self.nodes_per_corridor - 1;
        let mut out: Vec<usize> = shafts
            .windows(2)
            .map(|w| w[0] + 2 * (w[1] - w[0]) / 3)
            .filter(|k| *k < odd_len && !shafts.contains(k))
            .collect();
        if out.is_empty() && shafts.is_empty() {
            // single level without stairs still needs the corridors joined
            out.push(0);
        }
        out.dedup();
        out
    }

    fn exit_positions(&self) -> Vec<usize> {
        let n = self.nodes_per_corridor;
        let mut ks: Vec<usize> = EXIT_PREFERENCE
            .iter()
            .copied()
            .chain(14..n)
            .filter(|&k| k < n)
            .take(self.n_exits)
            .collect();
        ks.sort_unstable();
        ks
    }

    fn x_at(&self, k: usize) -> f64 {
        self.corridor_length_m * k as f64 / (self.nodes_per_corridor - 1) as f64
    }
}

pub fn even_label(level: usize, k: usize) -> NodeId {
    NodeId::new(format!("{level}{:02}", 2 * k + 2))
}

pub fn odd_label(level: usize, k: usize) -> NodeId {
    NodeId::new(format!("{level}{:02}", 2 * k + 1))
}

pub fn stair_label(shaft: usize, level: usize) -> NodeId {
    NodeId::new(format!("{}{level}", SHAFT_LETTERS[shaft]))
}

/// Exits are `11`, `12`, ... `19`, then `10`.
pub fn exit_label(i: usize) -> NodeId {
    NodeId::new(format!("1{}", (i + 1) % 10))
}

pub fn build_paper_building(spec: &BuildingSpec) -> Result<IndoorNetwork, SynthError> {
    spec.validate()?;
    let full = spec.full_node_count();
    let trim = match spec.target_nodes {
        None => 0,
        Some(t) if (spec.min_node_count()..=full).contains(&t) => full - t,
        Some(t) => {
            return Err(SynthError::NodeCount {
                requested: t,
                min: spec.min_node_count(),
                max: full,
            })
        }
    };
    let n = spec.nodes_per_corridor;
    let shafts = spec.shaft_positions();
    let crosses = spec.cross_positions();
    let exits = spec.exit_positions();
    let odd_len = |level: usize| if level == 1 { n - 1 - trim } else { n - 1 };
    let w = spec.corridor_width_m;

    let mut nodes = Vec::new();
    let mut links = Vec::new();
    let mut link = |a: &NodeId, b: &NodeId, kind| {
        links.push(LinkDoc {
            a: a.clone(),
            b: b.clone(),
            kind,
        })
    };

    for level in 1..=spec.n_levels {
        let junction = |k: usize, odd: bool| {
            shafts.contains(&k)
                || crosses.contains(&k)
                || (!odd && level == 1 && exits.contains(&k))
        };
        let kind_at = |k, odd| {
            if junction(k, odd) {
                NodeKind::CorridorJunction
            } else {
                NodeKind::RoomAccess
            }
        };
        for k in 0..n {
            nodes.push(NodeDoc {
                id: even_label(level, k),
                level: level as i32,
                kind: kind_at(k, false),
                x: spec.x_at(k),
                y: 0.0,
                corridor: Some(Corridor::Even),
            });
            if k + 1 < n {
                link(&even_label(level, k), &even_label(level, k + 1), LinkKind::SameLevel);
            }
        }
        let m = odd_len(level);
        for k in 0..m {
            nodes.push(NodeDoc {
                id: odd_label(level, k),
                level: level as i32,
                kind: kind_at(k, true),
                x: spec.x_at(k),
                y: w,
                corridor: Some(Corridor::Odd),
            });
            if k + 1 < m {
                link(&odd_label(level, k), &odd_label(level, k + 1), LinkKind::SameLevel);
            }
        }
        for &k in &crosses {
            if k < m {
                link(&even_label(level, k), &odd_label(level, k), LinkKind::SameLevel);
            }
        }
        if spec.n_levels > 1 {
            for (s, &k) in shafts.iter().enumerate() {
                let id = stair_label(s, level);
                nodes.push(NodeDoc {
                    id: id.clone(),
                    level: level as i32,
                    kind: NodeKind::Staircase,
                    x: spec.x_at(k),
                    y: w / 2.0,
                    corridor: None,
                });
                link(&id, &even_label(level, k), LinkKind::StairAccess);
                if k < m {
                    link(&id, &odd_label(level, k), LinkKind::StairAccess);
                }
                if level > 1 {
                    link(&stair_label(s, level - 1), &id, LinkKind::StairStair);
                }
            }
        }
    }
    for (i, &k) in exits.iter().enumerate() {
        let id = exit_label(i);
        nodes.push(NodeDoc {
            id: id.clone(),
            level: 1,
            kind: NodeKind::Exit,
            x: spec.x_at(k),
            y: -spec.exit_offset_m,
            corridor: None,
        });
        link(&id, &even_label(1, k), LinkKind::SameLevel);
    }
    if spec.n_levels == 1 && trim > 0 && crosses.iter().all(|&k| k >= odd_len(1)) {
        return Err(SynthError::InvalidSpec(
            "trimming disconnects the odd corridor of a single-level building".into(),
        ));
    }
    let doc = NetworkDoc {
        format: NETWORK_FORMAT,
        levels: (1..=spec.n_levels as i32).collect(),
        nodes,
        links,
    };
    Ok(IndoorNetwork::from_doc(&doc)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{validate_numbering, PathMetric};

    #[test]
    fn default_building_counts() {
        let net = build_paper_building(&BuildingSpec::default()).unwrap();
        let st = net.stats();
        assert_eq!(st.nodes, 133);
        assert_eq!(st.staircases, 20);
        assert_eq!(st.exits, 8);
        assert!(validate_numbering(&net).is_empty());
        assert_eq!(st.nodes_per_level[&1], 14 + 10 + 5 + 8);
    }

    #[test]
    fn shafts_times_levels() {
        for (levels, shafts) in [(2, 3), (3, 5), (4, 5)] {
            let spec = BuildingSpec {
                n_levels: levels,
                n_stair_shafts: shafts,
                target_nodes: None,
                ..Default::default()
            };
            let net = build_paper_building(&spec).unwrap();
            assert_eq!(net.stats().staircases, levels * shafts);
            assert_eq!(net.len(), spec.full_node_count());
        }
    }

    #[test]
    fn single_level_has_no_stair_links() {
        let spec = BuildingSpec {
            n_levels: 1,
            target_nodes: None,
            ..Default::default()
        };
        let net = build_paper_building(&spec).unwrap();
        assert!(net
            .links()
            .iter()
            .all(|l| l.kind == LinkKind::SameLevel));
        assert!(validate_numbering(&net).is_empty());
    }

    #[test]
    fn unreachable_target_reports_range() {
        let spec = BuildingSpec {
            target_nodes: Some(200),
            ..Default::default()
        };
        match build_paper_building(&spec) {
            Err(SynthError::NodeCount { min, max, .. }) => assert_eq!((min, max), (123, 136)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ten_exit_variant() {
        let spec = BuildingSpec {
            n_exits: 10,
            target_nodes: Some(133),
            ..Default::default()
        };
        let net = build_paper_building(&spec).unwrap();
        assert_eq!(net.stats().exits, 10);
        assert!(net.contains(&NodeId::from("10")));
        assert!(validate_numbering(&net).is_empty());
    }

    #[test]
    fn nodes_are_well_separated() {
        let net = build_paper_building(&BuildingSpec::default()).unwrap();
        for &level in net.levels() {
            let ns: Vec<_> = net.nodes_on_level(level).collect();
            for (i, a) in ns.iter().enumerate() {
                for b in &ns[i + 1..] {
                    assert!(a.position.distance(&b.position) >= 6.0 - 1e-9);
                }
            }
        }
        // hand-traced: 418 reaches an exit in 7 hops; 402 to 425 runs 11 hops
        // along the even corridor, across at k = 11, then one step
        let exits: Vec<_> = net.exits().map(|n| n.id.clone()).collect();
        let d = net.hop_distances(exits.iter());
        assert_eq!(d[&NodeId::from("418")], 7);
        let p = net.shortest_path_by(&"402".into(), &"425".into(), PathMetric::Hops).unwrap();
        assert_eq!(p.len(), 14);
    }
}
