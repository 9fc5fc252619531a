//! Hierarchical indoor network `G(V, E, L)`: decision points, links and levels.
//!
//! A network is built once from a [`NetworkDoc`] and is immutable afterwards.
//! Links are undirected; the direction of movement lives in a
//! [`DecisionSequence`](crate::mapping::DecisionSequence).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version tag accepted in the `format` field of a network document.
pub const NETWORK_FORMAT: u32 = 1;

/// Label of a decision point, e.g. `"402"`, `"16"` or `"A3"`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(label: impl Into<String>) -> Self {
        NodeId(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    fn is_numeric(&self) -> bool {
        !self.0.is_empty() && self.0.bytes().all(|b| b.is_ascii_digit())
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        NodeId(s.to_owned())
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    CorridorJunction,
    RoomAccess,
    Staircase,
    Exit,
}

/// Which major corridor a numbered node sits on; odd and even numbers are
/// reserved for one corridor each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corridor {
    Odd,
    Even,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: NodeId,
    pub level: i32,
    pub kind: NodeKind,
    /// Map-frame position in meters.
    pub position: Point,
    pub corridor: Option<Corridor>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    SameLevel,
    StairStair,
    StairAccess,
}

/// Undirected link; endpoints are stored in label order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Link {
    pub a: NodeId,
    pub b: NodeId,
    pub kind: LinkKind,
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("malformed network document at line {line}, column {column}: {msg}")]
    Parse { line: usize, column: usize, msg: String },
    #[error("unsupported network format {found} (expected {NETWORK_FORMAT})")]
    Format { found: u32 },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("empty node id")]
    EmptyId,
    #[error("duplicate node id {0}")]
    DuplicateId(NodeId),
    #[error("duplicate level {0} in level list")]
    DuplicateLevel(i32),
    #[error("node {node} declares level {level} which is not in the level list")]
    UnknownLevel { node: NodeId, level: i32 },
    #[error("node {0} has a non-finite position")]
    NonFinitePosition(NodeId),
    #[error("exit {node} is on level {level}, exits must be on the ground level {ground}")]
    ExitNotOnGround { node: NodeId, level: i32, ground: i32 },
    #[error("staircase {0} must be labeled with a shaft letter A-E")]
    StaircaseLabel(NodeId),
    #[error("link {a}-{b} references unknown node {missing}")]
    DanglingEndpoint { a: NodeId, b: NodeId, missing: NodeId },
    #[error("self link on node {0}")]
    SelfLink(NodeId),
    #[error("duplicate link {a}-{b}")]
    DuplicateLink { a: NodeId, b: NodeId },
    #[error("link {a}-{b} of kind {kind:?} is invalid: {reason}")]
    LinkKind {
        a: NodeId,
        b: NodeId,
        kind: LinkKind,
        reason: &'static str,
    },
    #[error("network is not connected: node {0} is unreachable")]
    Disconnected(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("no path from {from} to {to}")]
    NoPath { from: NodeId, to: NodeId },
}

/// Serialized form of a node in a network document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDoc {
    pub id: NodeId,
    pub level: i32,
    pub kind: NodeKind,
    pub x: f64,
    pub y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub corridor: Option<Corridor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkDoc {
    pub a: NodeId,
    pub b: NodeId,
    pub kind: LinkKind,
}

/// Network description document (`format: 1`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDoc {
    pub format: u32,
    pub levels: Vec<i32>,
    pub nodes: Vec<NodeDoc>,
    #[serde(default)]
    pub links: Vec<LinkDoc>,
}

impl NetworkDoc {
    pub fn from_json_str(text: &str) -> Result<Self, NetworkError> {
        let doc: NetworkDoc = serde_json::from_str(text).map_err(|e| NetworkError::Parse {
            line: e.line(),
            column: e.column(),
            msg: e.to_string(),
        })?;
        if doc.format != NETWORK_FORMAT {
            return Err(NetworkError::Format { found: doc.format });
        }
        Ok(doc)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("network document serializes")
    }
}

/// Path metric for [`IndoorNetwork::shortest_path_by`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PathMetric {
    /// Unit weight per link.
    #[default]
    Hops,
    /// Planar Euclidean length of each link.
    Geometric,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndoorNetwork {
    levels: Vec<i32>,
    nodes: BTreeMap<NodeId, Node>,
    links: Vec<Link>,
    adjacency: BTreeMap<NodeId, BTreeSet<NodeId>>,
}

/// Builds and validates a network from its document form.
pub fn build_network(doc: &NetworkDoc) -> Result<IndoorNetwork, NetworkError> {
    IndoorNetwork::from_doc(doc)
}

impl IndoorNetwork {
    pub fn from_doc(doc: &NetworkDoc) -> Result<Self, NetworkError> {
        if doc.format != NETWORK_FORMAT {
            return Err(NetworkError::Format { found: doc.format });
        }
        let mut levels = doc.levels.clone();
        levels.sort_unstable();
        if let Some(w) = levels.windows(2).find(|w| w[0] == w[1]) {
            return Err(NetworkError::DuplicateLevel(w[0]));
        }
        let ground = levels.first().copied();

        let mut nodes = BTreeMap::new();
        for nd in &doc.nodes {
            if nd.id.as_str().is_empty() {
                return Err(NetworkError::EmptyId);
            }
            if levels.binary_search(&nd.level).is_err() {
                return Err(NetworkError::UnknownLevel {
                    node: nd.id.clone(),
                    level: nd.level,
                });
            }
            if !nd.x.is_finite() || !nd.y.is_finite() {
                return Err(NetworkError::NonFinitePosition(nd.id.clone()));
            }
            if nd.kind == NodeKind::Exit && Some(nd.level) != ground {
                return Err(NetworkError::ExitNotOnGround {
                    node: nd.id.clone(),
                    level: nd.level,
                    ground: ground.unwrap_or_default(),
                });
            }
            if nd.kind == NodeKind::Staircase && shaft_letter(&nd.id).is_none() {
                return Err(NetworkError::StaircaseLabel(nd.id.clone()));
            }
            let node = Node {
                id: nd.id.clone(),
                level: nd.level,
                kind: nd.kind,
                position: Point::new(nd.x, nd.y),
                corridor: nd.corridor,
            };
            if nodes.insert(nd.id.clone(), node).is_some() {
                return Err(NetworkError::DuplicateId(nd.id.clone()));
            }
        }

        let mut adjacency: BTreeMap<NodeId, BTreeSet<NodeId>> =
            nodes.keys().map(|k| (k.clone(), BTreeSet::new())).collect();
        let mut links = Vec::with_capacity(doc.links.len());
        for ld in &doc.links {
            for end in [&ld.a, &ld.b] {
                if !nodes.contains_key(end) {
                    return Err(NetworkError::DanglingEndpoint {
                        a: ld.a.clone(),
                        b: ld.b.clone(),
                        missing: end.clone(),
                    });
                }
            }
            if ld.a == ld.b {
                return Err(NetworkError::SelfLink(ld.a.clone()));
            }
            check_link_kind(&nodes[&ld.a], &nodes[&ld.b], ld.kind)?;
            let (a, b) = if ld.a < ld.b {
                (ld.a.clone(), ld.b.clone())
            } else {
                (ld.b.clone(), ld.a.clone())
            };
            if !adjacency.get_mut(&a).expect("endpoint checked").insert(b.clone()) {
                return Err(NetworkError::DuplicateLink { a, b });
            }
            adjacency.get_mut(&b).expect("endpoint checked").insert(a.clone());
            links.push(Link { a, b, kind: ld.kind });
        }
        links.sort();

        let net = IndoorNetwork {
            levels,
            nodes,
            links,
            adjacency,
        };
        net.check_connected()?;
        Ok(net)
    }

    pub fn from_json_str(text: &str) -> Result<Self, NetworkError> {
        Self::from_doc(&NetworkDoc::from_json_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, NetworkError> {
        let text = std::fs::read_to_string(path).map_err(|source| NetworkError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn to_doc(&self) -> NetworkDoc {
        NetworkDoc {
            format: NETWORK_FORMAT,
            levels: self.levels.clone(),
            nodes: self
                .nodes
                .values()
                .map(|n| NodeDoc {
                    id: n.id.clone(),
                    level: n.level,
                    kind: n.kind,
                    x: n.position.x,
                    y: n.position.y,
                    corridor: n.corridor,
                })
                .collect(),
            links: self
                .links
                .iter()
                .map(|l| LinkDoc {
                    a: l.a.clone(),
                    b: l.b.clone(),
                    kind: l.kind,
                })
                .collect(),
        }
    }

    fn check_connected(&self) -> Result<(), NetworkError> {
        let Some(start) = self.nodes.keys().next() else {
            return Ok(());
        };
        let dist = self.hop_distances([start]);
        match self.nodes.keys().find(|k| !dist.contains_key(*k)) {
            Some(unreached) => Err(NetworkError::Disconnected(unreached.clone())),
            None => Ok(()),
        }
    }

    pub fn levels(&self) -> &[i32] {
        &self.levels
    }

    pub fn ground_level(&self) -> Option<i32> {
        self.levels.first().copied()
    }

    pub fn node(&self, id: &NodeId) -> Option<&Node> {
        self.nodes.get(id)
    }

    /// Nodes in label order.
    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.keys()
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes_on_level(&self, level: i32) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(move |n| n.level == level)
    }

    pub fn exits(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values().filter(|n| n.kind == NodeKind::Exit)
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn are_adjacent(&self, a: &NodeId, b: &NodeId) -> bool {
        self.adjacency.get(a).is_some_and(|s| s.contains(b))
    }

    pub fn neighbors(&self, id: &NodeId) -> Result<&BTreeSet<NodeId>, NetworkError> {
        self.adjacency
            .get(id)
            .ok_or_else(|| NetworkError::UnknownNode(id.clone()))
    }

    /// Multi-source breadth-first hop distances from `sources`.
    pub fn hop_distances<'a>(
        &self,
        sources: impl IntoIterator<Item = &'a NodeId>,
    ) -> HashMap<NodeId, usize> {
        let mut dist = HashMap::with_capacity(self.nodes.len());
        let mut queue = VecDeque::new();
        for s in sources {
            if self.nodes.contains_key(s) && !dist.contains_key(s) {
                dist.insert(s.clone(), 0usize);
                queue.push_back(s.clone());
            }
        }
        while let Some(cur) = queue.pop_front() {
            let d = dist[&cur];
            for nb in &self.adjacency[&cur] {
                if !dist.contains_key(nb) {
                    dist.insert(nb.clone(), d + 1);
                    queue.push_back(nb.clone());
                }
            }
        }
        dist
    }

    /// Next hop from `current` towards whichever target produced `dist`:
    /// the label-smallest neighbor one hop closer. `None` at a target or
    /// when the target is unreachable.
    pub fn next_hop<'a>(
        &'a self,
        dist: &HashMap<NodeId, usize>,
        current: &NodeId,
    ) -> Option<&'a NodeId> {
        let d = *dist.get(current)?;
        if d == 0 {
            return None;
        }
        self.adjacency
            .get(current)?
            .iter()
            .find(|nb| dist.get(*nb) == Some(&(d - 1)))
    }

    /// Minimum-hop path. Among equal-length paths the one taking the
    /// label-smallest next hop at every step is returned.
    pub fn shortest_path(&self, from: &NodeId, to: &NodeId) -> Result<Vec<NodeId>, NetworkError> {
        self.shortest_path_by(from, to, PathMetric::Hops)
    }

    pub fn shortest_path_by(
        &self,
        from: &NodeId,
        to: &NodeId,
        metric: PathMetric,
    ) -> Result<Vec<NodeId>, NetworkError> {
        for id in [from, to] {
            if !self.contains(id) {
                return Err(NetworkError::UnknownNode(id.clone()));
            }
        }
        let no_path = || NetworkError::NoPath {
            from: from.clone(),
            to: to.clone(),
        };
        match metric {
            PathMetric::Hops => {
                let dist = self.hop_distances([to]);
                if !dist.contains_key(from) {
                    return Err(no_path());
                }
                let mut path = vec![from.clone()];
                let mut cur = from;
                while let Some(next) = self.next_hop(&dist, cur) {
                    path.push(next.clone());
                    cur = next;
                }
                Ok(path)
            }
            PathMetric::Geometric => {
                let dist = self.geometric_distances(to);
                if !dist.contains_key(from) {
                    return Err(no_path());
                }
                let mut path = vec![from.clone()];
                let mut cur = from;
                while cur != to {
                    let here = dist[cur];
                    let pos = self.nodes[cur].position;
                    let next = self.adjacency[cur]
                        .iter()
                        .find(|nb| {
                            let w = pos.distance(&self.nodes[*nb].position);
                            dist.get(*nb)
                                .is_some_and(|d| (d + w - here).abs() <= 1e-9 * here.max(1.0))
                        })
                        .ok_or_else(no_path)?;
                    path.push(next.clone());
                    cur = next;
                }
                Ok(path)
            }
        }
    }

    fn geometric_distances(&self, target: &NodeId) -> HashMap<NodeId, f64> {
        #[derive(PartialEq)]
        struct Entry(f64, NodeId);
        impl Eq for Entry {}
        impl PartialOrd for Entry {
            fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Entry {
            fn cmp(&self, other: &Self) -> Ordering {
                other.0.total_cmp(&self.0).then_with(|| other.1.cmp(&self.1))
            }
        }

        let mut dist: HashMap<NodeId, f64> = HashMap::new();
        let mut heap = BinaryHeap::new();
        dist.insert(target.clone(), 0.0);
        heap.push(Entry(0.0, target.clone()));
        while let Some(Entry(d, cur)) = heap.pop() {
            if d > dist[&cur] {
                continue;
            }
            let pos = self.nodes[&cur].position;
            for nb in &self.adjacency[&cur] {
                let nd = d + pos.distance(&self.nodes[nb].position);
                if dist.get(nb).is_none_or(|&old| nd < old) {
                    dist.insert(nb.clone(), nd);
                    heap.push(Entry(nd, nb.clone()));
                }
            }
        }
        dist
    }

    pub fn stats(&self) -> NetworkStats {
        let mut stats = NetworkStats {
            nodes: self.nodes.len(),
            links: self.links.len(),
            ..Default::default()
        };
        for n in self.nodes.values() {
            *stats.nodes_per_level.entry(n.level).or_default() += 1;
            *stats.nodes_per_kind.entry(n.kind).or_default() += 1;
        }
        for l in &self.links {
            *stats.links_per_kind.entry(l.kind).or_default() += 1;
        }
        stats.exits = stats.nodes_per_kind.get(&NodeKind::Exit).copied().unwrap_or(0);
        stats.staircases = stats
            .nodes_per_kind
            .get(&NodeKind::Staircase)
            .copied()
            .unwrap_or(0);
        stats
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct NetworkStats {
    pub nodes: usize,
    pub links: usize,
    pub exits: usize,
    pub staircases: usize,
    pub nodes_per_level: BTreeMap<i32, usize>,
    pub nodes_per_kind: BTreeMap<NodeKind, usize>,
    pub links_per_kind: BTreeMap<LinkKind, usize>,
}

fn shaft_letter(id: &NodeId) -> Option<char> {
    id.as_str()
        .chars()
        .next()
        .filter(|c| ('A'..='E').contains(c))
}

fn check_link_kind(a: &Node, b: &Node, kind: LinkKind) -> Result<(), NetworkError> {
    let fail = |reason| {
        Err(NetworkError::LinkKind {
            a: a.id.clone(),
            b: b.id.clone(),
            kind,
            reason,
        })
    };
    let a_stair = a.kind == NodeKind::Staircase;
    let b_stair = b.kind == NodeKind::Staircase;
    match kind {
        LinkKind::SameLevel if a.level != b.level => fail("endpoints on different levels"),
        LinkKind::StairStair if !(a_stair && b_stair) => fail("both endpoints must be staircases"),
        LinkKind::StairAccess if a_stair == b_stair => {
            fail("exactly one endpoint must be a staircase")
        }
        LinkKind::StairAccess if (a.level - b.level).abs() > 1 => {
            fail("endpoints more than one level apart")
        }
        _ => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NumberingRule {
    /// Leading digit of a numeric label equals the level.
    LevelPrefix,
    /// Odd labels on the odd corridor, even labels on the even corridor.
    CorridorParity,
    /// Staircase label is a shaft letter followed by the level.
    StaircaseLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumberingViolation {
    pub node: NodeId,
    pub rule: NumberingRule,
    pub detail: String,
}

/// Checks the decision-point numbering convention; returns every violation.
pub fn validate_numbering(net: &IndoorNetwork) -> Vec<NumberingViolation> {
    let mut out = Vec::new();
    for n in net.nodes() {
        let label = n.id.as_str();
        let level_digits = n.level.to_string();
        if n.id.is_numeric() {
            if !label.starts_with(&level_digits) {
                out.push(NumberingViolation {
                    node: n.id.clone(),
                    rule: NumberingRule::LevelPrefix,
                    detail: format!("label does not start with level {}", n.level),
                });
            }
            if let Some(side) = n.corridor {
                let odd = label.as_bytes()[label.len() - 1] % 2 == 1;
                if odd != (side == Corridor::Odd) {
                    out.push(NumberingViolation {
                        node: n.id.clone(),
                        rule: NumberingRule::CorridorParity,
                        detail: format!("label parity does not match the {side:?} corridor"),
                    });
                }
            }
        }
        if n.kind == NodeKind::Staircase {
            let ok = shaft_letter(&n.id).is_some() && label[1..] == level_digits;
            if !ok {
                out.push(NumberingViolation {
                    node: n.id.clone(),
                    rule: NumberingRule::StaircaseLabel,
                    detail: format!("expected shaft letter A-E followed by {}", n.level),
                });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(id: &str, level: i32, kind: NodeKind, x: f64, y: f64) -> NodeDoc {
        NodeDoc {
            id: id.into(),
            level,
            kind,
            x,
            y,
            corridor: None,
        }
    }

    fn link(a: &str, b: &str, kind: LinkKind) -> LinkDoc {
        LinkDoc {
            a: a.into(),
            b: b.into(),
            kind,
        }
    }

    fn doc(levels: Vec<i32>, nodes: Vec<NodeDoc>, links: Vec<LinkDoc>) -> NetworkDoc {
        NetworkDoc {
            format: 1,
            levels,
            nodes,
            links,
        }
    }

    fn two_level() -> NetworkDoc {
        doc(
            vec![1, 2],
            vec![
                node("101", 1, NodeKind::RoomAccess, 0.0, 0.0),
                node("A1", 1, NodeKind::Staircase, 0.0, 6.0),
                node("A2", 2, NodeKind::Staircase, 0.0, 6.0),
                node("201", 2, NodeKind::RoomAccess, 0.0, 0.0),
                node("15", 1, NodeKind::Exit, 0.0, -8.0),
            ],
            vec![
                link("101", "A1", LinkKind::StairAccess),
                link("A1", "A2", LinkKind::StairStair),
                link("A2", "201", LinkKind::StairAccess),
                link("15", "101", LinkKind::SameLevel),
            ],
        )
    }

    #[test]
    fn single_node_network() {
        let net = build_network(&doc(
            vec![1],
            vec![node("101", 1, NodeKind::RoomAccess, 0.0, 0.0)],
            vec![],
        ))
        .unwrap();
        assert_eq!(net.len(), 1);
        assert!(net.links().is_empty());
        assert!(net.neighbors(&"101".into()).unwrap().is_empty());
    }

    #[test]
    fn builds_two_level_network() {
        let net = build_network(&two_level()).unwrap();
        assert_eq!(net.len(), 5);
        assert_eq!(net.links().len(), 4);
        assert_eq!(net.stats().staircases, 2);
        assert!(validate_numbering(&net).is_empty());
    }

    #[test]
    fn stair_access_between_plain_nodes_is_rejected() {
        let d = doc(
            vec![1, 2],
            vec![
                node("101", 1, NodeKind::RoomAccess, 0.0, 0.0),
                node("201", 2, NodeKind::RoomAccess, 0.0, 0.0),
            ],
            vec![link("101", "201", LinkKind::StairAccess)],
        );
        assert!(matches!(
            build_network(&d),
            Err(NetworkError::LinkKind { kind: LinkKind::StairAccess, .. })
        ));
        let d = doc(d.levels, d.nodes, vec![link("101", "201", LinkKind::SameLevel)]);
        assert!(matches!(
            build_network(&d),
            Err(NetworkError::LinkKind { kind: LinkKind::SameLevel, .. })
        ));
    }

    #[test]
    fn structural_errors_name_the_offender() {
        let mut d = two_level();
        d.nodes.push(node("101", 1, NodeKind::RoomAccess, 1.0, 1.0));
        assert!(matches!(build_network(&d), Err(NetworkError::DuplicateId(id)) if id.as_str() == "101"));

        let mut d = two_level();
        d.links.push(link("101", "999", LinkKind::SameLevel));
        assert!(
            matches!(build_network(&d), Err(NetworkError::DanglingEndpoint { missing, .. }) if missing.as_str() == "999")
        );

        let mut d = two_level();
        d.links.push(link("A1", "101", LinkKind::StairAccess));
        assert!(matches!(build_network(&d), Err(NetworkError::DuplicateLink { .. })));

        let mut d = two_level();
        d.links.push(link("101", "101", LinkKind::SameLevel));
        assert!(matches!(build_network(&d), Err(NetworkError::SelfLink(_))));

        let mut d = two_level();
        d.nodes[4].level = 2;
        assert!(matches!(build_network(&d), Err(NetworkError::ExitNotOnGround { .. })));

        let mut d = two_level();
        d.links.remove(1);
        assert!(matches!(build_network(&d), Err(NetworkError::Disconnected(_))));

        let mut d = two_level();
        d.nodes[0].level = 7;
        assert!(matches!(build_network(&d), Err(NetworkError::UnknownLevel { level: 7, .. })));
    }

    #[test]
    fn numbering_rules() {
        let mut d = two_level();
        d.nodes.push(node("402", 2, NodeKind::RoomAccess, 5.0, 0.0));
        d.links.push(link("402", "201", LinkKind::SameLevel));
        let v = validate_numbering(&build_network(&d).unwrap());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].node.as_str(), "402");
        assert_eq!(v[0].rule, NumberingRule::LevelPrefix);

        let mut d = two_level();
        d.levels = vec![1, 2, 3, 4];
        d.nodes.push(node("402", 4, NodeKind::RoomAccess, 5.0, 0.0));
        d.nodes.push(node("A3", 3, NodeKind::Staircase, 0.0, 6.0));
        d.nodes.push(node("A4", 4, NodeKind::Staircase, 0.0, 6.0));
        d.links.push(link("A2", "A3", LinkKind::StairStair));
        d.links.push(link("A3", "A4", LinkKind::StairStair));
        d.links.push(link("A4", "402", LinkKind::StairAccess));
        assert!(validate_numbering(&build_network(&d).unwrap()).is_empty());

        let mut d = two_level();
        d.nodes[0].corridor = Some(Corridor::Even);
        let v = validate_numbering(&build_network(&d).unwrap());
        assert_eq!(v[0].rule, NumberingRule::CorridorParity);

        let mut d = two_level();
        d.nodes[1].id = "A3".into();
        d.links[0].b = "A3".into();
        d.links[1].a = "A3".into();
        let v = validate_numbering(&build_network(&d).unwrap());
        assert_eq!(v[0].rule, NumberingRule::StaircaseLabel);
    }

    #[test]
    fn neighbors_and_paths() {
        let net = build_network(&two_level()).unwrap();
        let n = net.neighbors(&"101".into()).unwrap();
        assert_eq!(n.len(), 2);
        assert!(net.neighbors(&"nope".into()).is_err());

        let p = net.shortest_path(&"15".into(), &"201".into()).unwrap();
        let labels: Vec<_> = p.iter().map(NodeId::as_str).collect();
        assert_eq!(labels, ["15", "101", "A1", "A2", "201"]);
        assert_eq!(net.shortest_path(&"A1".into(), &"A1".into()).unwrap().len(), 1);
        let g = net
            .shortest_path_by(&"15".into(), &"201".into(), PathMetric::Geometric)
            .unwrap();
        assert_eq!(g, p);
    }

    #[test]
    fn line_graph_path() {
        let d = doc(
            vec![1],
            vec![
                node("101", 1, NodeKind::RoomAccess, 0.0, 0.0),
                node("103", 1, NodeKind::RoomAccess, 1.0, 0.0),
                node("105", 1, NodeKind::RoomAccess, 2.0, 0.0),
            ],
            vec![
                link("101", "103", LinkKind::SameLevel),
                link("103", "105", LinkKind::SameLevel),
            ],
        );
        let net = build_network(&d).unwrap();
        let p = net.shortest_path(&"101".into(), &"105".into()).unwrap();
        assert_eq!(p, vec!["101".into(), "103".into(), NodeId::from("105")]);
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = NetworkDoc::from_json_str("{\n \"format\": 1,\n \"levels\": [1,\n").unwrap_err();
        assert!(matches!(err, NetworkError::Parse { line: 4, .. }), "{err}");
        let err = NetworkDoc::from_json_str(r#"{"format": 2, "levels": [], "nodes": []}"#).unwrap_err();
        assert!(matches!(err, NetworkError::Format { found: 2 }));
    }

    #[test]
    fn document_round_trip() {
        let net = build_network(&two_level()).unwrap();
        let again = IndoorNetwork::from_json_str(&net.to_doc().to_json_string()).unwrap();
        assert_eq!(net, again);
    }
}
