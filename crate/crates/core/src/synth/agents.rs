//! Simulated participants walking the tasks on the network.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::building::{even_label, odd_label};
use super::SynthError;
use crate::mapping::DecisionSequence;
use crate::network::{IndoorNetwork, NodeId};
use crate::rng;

const AGENT_STREAM: u64 = 0xa9e7;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Destination {
    Node(NodeId),
    AnyExit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub task_id: u8,
    pub origin: NodeId,
    pub destination: Destination,
    /// Overrides the policy's deviation probability for this task.
    #[serde(default)]
    pub deviation_prob: Option<f64>,
}

impl TaskSpec {
    fn validate(&self, net: &IndoorNetwork) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidTask(self.task_id, m));
        if !(1..=4).contains(&self.task_id) {
            return bad("task id must be 1-4".into());
        }
        if (self.task_id == 4) != (self.destination == Destination::AnyExit) {
            return bad("task 4 and only task 4 targets any exit".into());
        }
        if !net.contains(&self.origin) {
            return bad(format!("origin {} not in network", self.origin));
        }
        if let Destination::Node(d) = &self.destination {
            if !net.contains(d) {
                return bad(format!("destination {d} not in network"));
            }
        }
        if let Some(p) = self.deviation_prob {
            if !(0.0..1.0).contains(&p) {
                return bad(format!("deviation_prob {p} not in [0, 1)"));
            }
        }
        Ok(())
    }
}

/// The four tasks on the default building: two long same-floor and
/// cross-floor searches, a return trip, and evacuation. Deviation
/// probabilities are tuned so mean sequence lengths land near 20, 26, 17
/// and 8 decision points.
pub fn default_tasks() -> Vec<TaskSpec> {
    let node = |id: NodeId| Destination::Node(id);
    vec![
        TaskSpec {
            task_id: 1,
            origin: even_label(4, 0),
            destination: node(odd_label(4, 12)),
            deviation_prob: Some(0.28),
        },
        TaskSpec {
            task_id: 2,
            origin: odd_label(4, 12),
            destination: node(odd_label(2, 0)),
            deviation_prob: Some(0.36),
        },
        TaskSpec {
            task_id: 3,
            origin: odd_label(2, 0),
            destination: node(even_label(4, 6)),
            deviation_prob: Some(0.35),
        },
        TaskSpec {
            task_id: 4,
            origin: even_label(4, 8),
            destination: Destination::AnyExit,
            deviation_prob: Some(0.03),
        },
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentPolicy {
    /// Chance of stepping to a random neighbor instead of the next hop.
    pub deviation_prob: f64,
    /// Down-weights already visited neighbors when deviating:
    /// weight `1 / (1 + penalty * visits)`. Zero keeps the walk Markov.
    pub revisit_penalty: f64,
    pub seed: u64,
    /// Moves after which an agent counts as lost.
    pub max_steps: usize,
}

impl Default for AgentPolicy {
    fn default() -> Self {
        AgentPolicy {
            deviation_prob: 0.2,
            revisit_penalty: 0.0,
            seed: 0,
            max_steps: 400,
        }
    }
}

pub fn participant_id(agent: usize) -> String {
    format!("P{:02}", agent + 1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LostAgent {
    pub participant: String,
    pub task: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    /// Completed walks, agent-major then task order.
    pub sequences: Vec<DecisionSequence>,
    pub lost: Vec<LostAgent>,
}

struct Route<'a> {
    task: &'a TaskSpec,
    dist: HashMap<NodeId, usize>,
    p: f64,
}

fn walk(
    net: &IndoorNetwork,
    route: &Route<'_>,
    policy: &AgentPolicy,
    agent: usize,
) -> Result<Option<Vec<NodeId>>, SynthError> {
    let mut rng = rng::stream(
        policy.seed,
        &[AGENT_STREAM, agent as u64, u64::from(route.task.task_id)],
    );
    let mut cur = route.task.origin.clone();
    let mut path = vec![cur.clone()];
    let mut visits: HashMap<NodeId, usize> = HashMap::from([(cur.clone(), 1)]);
    for _ in 0..policy.max_steps {
        if route.dist.get(&cur) == Some(&0) {
            return Ok(Some(path));
        }
        let deviate = route.p > 0.0 && rng.random::<f64>() < route.p;
        let next = if deviate {
            let nbs: Vec<&NodeId> = net.neighbors(&cur)?.iter().collect();
            let weights: Vec<f64> = nbs
                .iter()
                .map(|n| {
                    1.0 / (1.0 + policy.revisit_penalty * *visits.get(*n).unwrap_or(&0) as f64)
                })
                .collect();
            let mut u = rng.random::<f64>() * weights.iter().sum::<f64>();
            let mut pick = nbs[nbs.len() - 1];
            for (n, w) in nbs.iter().zip(&weights) {
                if u < *w {
                    pick = n;
                    break;
                }
                u -= w;
            }
            pick.clone()
        } else {
            net.next_hop(&route.dist, &cur)
                .ok_or(SynthError::Unreachable(route.task.task_id))?
                .clone()
        };
        *visits.entry(next.clone()).or_insert(0) += 1;
        path.push(next.clone());
        cur = next;
    }
    Ok((route.dist.get(&cur) == Some(&0)).then_some(path))
}

/// Walks every task for every agent. Walks that exceed the step cap are
/// left out and listed in [`Generated::lost`].
pub fn generate_sequences(
    net: &IndoorNetwork,
    tasks: &[TaskSpec],
    policy: &AgentPolicy,
    n_agents: usize,
) -> Result<Generated, SynthError> {
    if !(0.0..1.0).contains(&policy.deviation_prob) {
        return Err(SynthError::InvalidPolicy(format!(
            "deviation_prob {} not in [0, 1)",
            policy.deviation_prob
        )));
    }
    if !(policy.revisit_penalty >= 0.0) {
        return Err(SynthError::InvalidPolicy("revisit_penalty must be >= 0".into()));
    }
    let mut seen = HashSet::new();
    let mut routes = Vec::new();
    for t in tasks {
        t.validate(net)?;
        if !seen.insert(t.task_id) {
            return Err(SynthError::InvalidTask(t.task_id, "listed twice".into()));
        }
        let dist = match &t.destination {
            Destination::Node(d) => net.hop_distances([d]),
            Destination::AnyExit => {
                let exits: Vec<NodeId> = net.exits().map(|n| n.id.clone()).collect();
                net.hop_distances(exits.iter())
            }
        };
        if !dist.contains_key(&t.origin) {
            return Err(SynthError::Unreachable(t.task_id));
        }
        routes.push(Route {
            task: t,
            dist,
            p: t.deviation_prob.unwrap_or(policy.deviation_prob),
        });
    }
    let per_agent = (0..n_agents)
        .into_par_iter()
        .map(|a| {
            routes
                .iter()
                .map(|r| Ok((a, r.task.task_id, walk(net, r, policy, a)?)))
                .collect::<Result<Vec<_>, SynthError>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Generated {
        sequences: Vec::new(),
        lost: Vec::new(),
    };
    for (a, task, walked) in per_agent.into_iter().flatten() {
        let participant = participant_id(a);
        match walked {
            Some(nodes) => out.sequences.push(DecisionSequence {
                participant,
                task,
                nodes,
            }),
            None => out.lost.push(LostAgent { participant, task }),
        }
    }
    Ok(out)
}
