//! Dependent-task scheduling by layers.
//!
//! Tasks are grouped by longest-path depth from the sources, so tasks in the
//! same layer never depend on each other. Layers run one after another with a
//! barrier in between: every core's availability resets when a layer starts,
//! and each layer is scheduled as an independent batch by Min-Min or
//! Diff-Min. The total makespan is the sum of the layer makespans.
//!
//! HEFT upward ranks are computed for every task and reported. They can also
//! be used to break task ties inside a layer (see [`DagOptions`]).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::sched::{self, Schedule, TieBreaker, TiePolicy};
use crate::workload::{GraphError, TaskGraph};

/// Scheduler applied to each layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerAlgorithm {
    MinMin,
    DiffMin,
}

impl fmt::Display for InnerAlgorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InnerAlgorithm::MinMin => "min-min",
            InnerAlgorithm::DiffMin => "diff-min",
        })
    }
}

impl FromStr for InnerAlgorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "min-min" => Ok(InnerAlgorithm::MinMin),
            "diff-min" => Ok(InnerAlgorithm::DiffMin),
            _ => Err(format!("unknown layer algorithm `{s}` (expected min-min or diff-min)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DagOptions {
    /// Inside a layer, prefer the task with the higher upward rank before
    /// falling back to the [`TiePolicy`]. Off by default, which keeps an
    /// edge-free graph identical to scheduling its ETC table directly.
    pub rank_tiebreak: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayeredSchedule {
    /// Global task indices per layer, ascending within a layer.
    layers: Vec<Vec<usize>>,
    /// One schedule per layer; task indices are positions within that layer.
    schedules: Vec<Schedule>,
    total_makespan: f64,
    ranks: Vec<f64>,
}

impl LayeredSchedule {
    pub fn layers(&self) -> &[Vec<usize>] {
        &self.layers
    }

    pub fn layer_schedules(&self) -> &[Schedule] {
        &self.schedules
    }

    pub fn total_makespan(&self) -> f64 {
        self.total_makespan
    }

    pub fn ranks(&self) -> &[f64] {
        &self.ranks
    }

    /// Layer index of every task.
    pub fn layer_of(&self) -> Vec<usize> {
        let n = self.layers.iter().map(Vec::len).sum();
        let mut out = vec![0; n];
        for (l, layer) in self.layers.iter().enumerate() {
            for &t in layer {
                out[t] = l;
            }
        }
        out
    }

    /// Core of every task.
    pub fn core_of(&self) -> Vec<usize> {
        let n = self.layers.iter().map(Vec::len).sum();
        let mut out = vec![0; n];
        for (layer, schedule) in self.layers.iter().zip(&self.schedules) {
            for (local, &core) in schedule.assignment().iter().enumerate() {
                out[layer[local]] = core;
            }
        }
        out
    }

    /// Global tasks in dispatch order: layer by layer, in each layer's decision order.
    pub fn execution_order(&self) -> Vec<usize> {
        self.layers
            .iter()
            .zip(&self.schedules)
            .flat_map(|(layer, s)| s.decisions().iter().map(move |d| layer[d.task]))
            .collect()
    }
}

/// Layer of each task is its longest-path depth from a source.
pub fn topological_layers(graph: &TaskGraph) -> Result<Vec<Vec<usize>>, GraphError> {
    let order = graph.topological_order()?;
    let mut depth = vec![0usize; graph.len()];
    for &t in &order {
        for &(s, _) in graph.successors(t) {
            depth[s] = depth[s].max(depth[t] + 1);
        }
    }
    let count = depth.iter().max().map_or(0, |d| d + 1);
    let mut layers = vec![Vec::new(); count];
    for (t, &d) in depth.iter().enumerate() {
        layers[d].push(t);
    }
    Ok(layers)
}

/// `rank(t) = mean ETC(t) + max over successors s of (comm(t, s) + rank(s))`.
pub fn heft_upward_rank(graph: &TaskGraph) -> Result<Vec<f64>, GraphError> {
    let order = graph.topological_order()?;
    let mut rank = vec![0.0; graph.len()];
    for &t in order.iter().rev() {
        let tail = graph
            .successors(t)
            .iter()
            .map(|&(s, comm)| comm + rank[s])
            .fold(0.0, f64::max);
        rank[t] = graph.mean_etc(t) + tail;
    }
    Ok(rank)
}

/// Layer 0 keeps the caller's seed; later layers get derived streams.
fn layer_ties(ties: TiePolicy, layer: usize) -> TiePolicy {
    match ties {
        TiePolicy::Seeded(seed) if layer > 0 => {
            TiePolicy::Seeded(seed ^ (layer as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        }
        other => other,
    }
}

pub fn schedule_dag(
    graph: &TaskGraph,
    inner: InnerAlgorithm,
    ties: TiePolicy,
) -> Result<LayeredSchedule, GraphError> {
    schedule_dag_with(graph, inner, ties, DagOptions::default())
}

pub fn schedule_dag_with(
    graph: &TaskGraph,
    inner: InnerAlgorithm,
    ties: TiePolicy,
    options: DagOptions,
) -> Result<LayeredSchedule, GraphError> {
    let layers = topological_layers(graph)?;
    let ranks = heft_upward_rank(graph)?;
    let etc = graph.etc_table();

    let mut schedules = Vec::with_capacity(layers.len());
    let mut total = 0.0;
    for (index, layer) in layers.iter().enumerate() {
        let layer_etc = etc.select_tasks(layer)?;
        let layer_ranks: Vec<f64> = layer.iter().map(|&t| ranks[t]).collect();
        let priority = options.rank_tiebreak.then_some(layer_ranks.as_slice());
        let mut breaker = TieBreaker::new(layer_ties(ties, index), priority);
        let schedule = match inner {
            InnerAlgorithm::MinMin => sched::min_min_with(&layer_etc, &mut breaker),
            InnerAlgorithm::DiffMin => sched::diff_min_with(&layer_etc, &mut breaker),
        };
        total += schedule.makespan();
        schedules.push(schedule);
    }
    Ok(LayeredSchedule {
        layers,
        schedules,
        total_makespan: total,
        ranks,
    })
}
