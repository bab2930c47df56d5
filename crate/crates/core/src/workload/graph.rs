//! Dependent-task workloads: a DAG whose nodes carry an ETC row.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{EtcTable, WorkloadError};

#[derive(Debug, thiserror::Error)]
pub enum GraphError {
    #[error("graph has no tasks")]
    Empty,
    #[error("duplicate task id `{0}`")]
    DuplicateId(String),
    #[error("edge references unknown task `{0}`")]
    UnknownTask(String),
    #[error("task `{id}` has {found} ETC entries, graph declares {expected} cores")]
    RowWidth {
        id: String,
        expected: usize,
        found: usize,
    },
    #[error("task `{id}`: {message}")]
    BadEntry { id: String, message: String },
    #[error("edge {from} -> {to}: communication cost {comm} must be finite and non-negative")]
    BadComm { from: String, to: String, comm: f64 },
    #[error("dependency cycle: {}", .witness.join(" -> "))]
    Cycle { witness: Vec<String> },
    #[error("invalid graph json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Workload(#[from] WorkloadError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphTask {
    pub id: String,
    pub etc: Vec<Option<f64>>,
}

/// Dependency `from -> to` with a communication cost in time units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub from: usize,
    pub to: usize,
    pub comm: f64,
}

/// A task graph. Structure is validated on construction; acyclicity is
/// checked by the operations that need a topological order, which report a
/// [`GraphError::Cycle`].
#[derive(Debug, Clone, PartialEq)]
pub struct TaskGraph {
    cores: usize,
    tasks: Vec<GraphTask>,
    edges: Vec<Edge>,
    successors: Vec<Vec<(usize, f64)>>,
}

impl TaskGraph {
    pub fn new(cores: usize, tasks: Vec<GraphTask>, edges: Vec<Edge>) -> Result<Self, GraphError> {
        if tasks.is_empty() {
            return Err(GraphError::Empty);
        }
        let mut seen = HashMap::new();
        for (i, t) in tasks.iter().enumerate() {
            if seen.insert(t.id.as_str(), i).is_some() {
                return Err(GraphError::DuplicateId(t.id.clone()));
            }
            if t.etc.len() != cores {
                return Err(GraphError::RowWidth {
                    id: t.id.clone(),
                    expected: cores,
                    found: t.etc.len(),
                });
            }
            if let Some(v) = t.etc.iter().flatten().find(|v| !(v.is_finite() && **v > 0.0)) {
                return Err(GraphError::BadEntry {
                    id: t.id.clone(),
                    message: format!("entry {v} is not a strictly positive time"),
                });
            }
            if t.etc.iter().all(Option::is_none) {
                return Err(GraphError::BadEntry {
                    id: t.id.clone(),
                    message: "no feasible core".into(),
                });
            }
        }
        let mut successors = vec![Vec::new(); tasks.len()];
        for e in &edges {
            for end in [e.from, e.to] {
                if end >= tasks.len() {
                    return Err(GraphError::UnknownTask(format!("#{end}")));
                }
            }
            if !(e.comm.is_finite() && e.comm >= 0.0) {
                return Err(GraphError::BadComm {
                    from: tasks[e.from].id.clone(),
                    to: tasks[e.to].id.clone(),
                    comm: e.comm,
                });
            }
            successors[e.from].push((e.to, e.comm));
        }
        Ok(Self {
            cores,
            tasks,
            edges,
            successors,
        })
    }

    /// Convenience constructor: tasks named by position, all entries feasible.
    pub fn from_rows<R: AsRef<[f64]>>(
        rows: &[R],
        edges: &[(usize, usize)],
    ) -> Result<Self, GraphError> {
        let cores = rows.first().map_or(0, |r| r.as_ref().len());
        let tasks = rows
            .iter()
            .enumerate()
            .map(|(i, r)| GraphTask {
                id: i.to_string(),
                etc: r.as_ref().iter().copied().map(Some).collect(),
            })
            .collect();
        let edges = edges
            .iter()
            .map(|&(from, to)| Edge { from, to, comm: 0.0 })
            .collect();
        Self::new(cores, tasks, edges)
    }

    pub fn cores(&self) -> usize {
        self.cores
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn tasks(&self) -> &[GraphTask] {
        &self.tasks
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn successors(&self, task: usize) -> &[(usize, f64)] {
        &self.successors[task]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.tasks.iter().position(|t| t.id == id)
    }

    /// All task rows as one ETC table, in task order.
    pub fn etc_table(&self) -> EtcTable {
        EtcTable::new(self.tasks.iter().map(|t| t.etc.clone()).collect())
            .expect("rows validated on construction")
    }

    /// Mean ETC over the feasible cores of `task`.
    pub fn mean_etc(&self, task: usize) -> f64 {
        let (sum, n) = self.tasks[task]
            .etc
            .iter()
            .flatten()
            .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
        sum / n as f64
    }

    /// Kahn order; on failure returns a cycle witness.
    pub fn topological_order(&self) -> Result<Vec<usize>, GraphError> {
        let n = self.tasks.len();
        let mut indegree = vec![0usize; n];
        for e in &self.edges {
            indegree[e.to] += 1;
        }
        let mut ready: std::collections::VecDeque<usize> =
            (0..n).filter(|&t| indegree[t] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(t) = ready.pop_front() {
            order.push(t);
            for &(s, _) in &self.successors[t] {
                indegree[s] -= 1;
                if indegree[s] == 0 {
                    ready.push_back(s);
                }
            }
        }
        if order.len() == n {
            Ok(order)
        } else {
            let stuck: Vec<bool> = indegree.iter().map(|&d| d > 0).collect();
            Err(GraphError::Cycle {
                witness: self.cycle_witness(&stuck),
            })
        }
    }

    /// Walks predecessors inside the unresolved set until a node repeats.
    fn cycle_witness(&self, stuck: &[bool]) -> Vec<String> {
        let mut pred = vec![None; self.tasks.len()];
        for e in &self.edges {
            if stuck[e.from] && stuck[e.to] {
                pred[e.to] = Some(e.from);
            }
        }
        let start = stuck.iter().position(|&s| s).expect("cycle exists");
        let mut visited = vec![usize::MAX; self.tasks.len()];
        let mut path = Vec::new();
        let mut cur = start;
        while visited[cur] == usize::MAX {
            visited[cur] = path.len();
            path.push(cur);
            cur = pred[cur].expect("every stuck node has a stuck predecessor");
        }
        let mut cycle: Vec<usize> = path[visited[cur]..].to_vec();
        cycle.reverse();
        cycle.push(cycle[0]);
        cycle.iter().map(|&t| self.tasks[t].id.clone()).collect()
    }

    pub fn from_json(text: &str) -> Result<Self, GraphError> {
        let raw: GraphFile = serde_json::from_str(text)?;
        let tasks: Vec<GraphTask> = raw
            .tasks
            .into_iter()
            .map(|t| GraphTask {
                id: t.id.into_string(),
                etc: t.etc.into_iter().map(EtcCell::value).collect(),
            })
            .collect();
        let lookup = |id: &TaskId| -> Result<usize, GraphError> {
            let id = id.as_string();
            tasks
                .iter()
                .position(|t| t.id == id)
                .ok_or(GraphError::UnknownTask(id))
        };
        let edges = raw
            .edges
            .iter()
            .map(|e| {
                Ok(Edge {
                    from: lookup(&e.from)?,
                    to: lookup(&e.to)?,
                    comm: e.comm,
                })
            })
            .collect::<Result<Vec<_>, GraphError>>()?;
        Self::new(raw.cores, tasks, edges)
    }

    pub fn to_json(&self) -> String {
        let file = GraphFile {
            cores: self.cores,
            tasks: self
                .tasks
                .iter()
                .map(|t| TaskEntry {
                    id: TaskId::Name(t.id.clone()),
                    etc: t
                        .etc
                        .iter()
                        .map(|e| e.map_or(EtcCell::Infeasible(None), EtcCell::Time))
                        .collect(),
                })
                .collect(),
            edges: self
                .edges
                .iter()
                .map(|e| EdgeEntry {
                    from: TaskId::Name(self.tasks[e.from].id.clone()),
                    to: TaskId::Name(self.tasks[e.to].id.clone()),
                    comm: e.comm,
                })
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("graph serialises")
    }
}

#[derive(Serialize, Deserialize)]
struct GraphFile {
    cores: usize,
    tasks: Vec<TaskEntry>,
    #[serde(default)]
    edges: Vec<EdgeEntry>,
}

#[derive(Serialize, Deserialize)]
struct TaskEntry {
    id: TaskId,
    etc: Vec<EtcCell>,
}

#[derive(Serialize, Deserialize)]
struct EdgeEntry {
    from: TaskId,
    to: TaskId,
    #[serde(default)]
    comm: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TaskId {
    Name(String),
    Number(u64),
}

impl TaskId {
    fn as_string(&self) -> String {
        match self {
            TaskId::Name(s) => s.clone(),
            TaskId::Number(n) => n.to_string(),
        }
    }

    fn into_string(self) -> String {
        match self {
            TaskId::Name(s) => s,
            TaskId::Number(n) => n.to_string(),
        }
    }
}

/// A number, or `null` / `"inf"` for an infeasible core.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum EtcCell {
    Time(f64),
    Infeasible(Option<InfMarker>),
}

#[derive(Serialize, Deserialize)]
enum InfMarker {
    #[serde(rename = "inf")]
    Inf,
}

impl EtcCell {
    fn value(self) -> Option<f64> {
        match self {
            EtcCell::Time(v) => Some(v),
            EtcCell::Infeasible(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_json_layout() {
        let text = r#"{
            "cores": 2,
            "tasks": [
                {"id": "A", "etc": [1, 2]},
                {"id": "B", "etc": [3, null]},
                {"id": 7, "etc": ["inf", 4.5]}
            ],
            "edges": [{"from": "A", "to": "B", "comm": 0.5}, {"from": "A", "to": 7}]
        }"#;
        let g = TaskGraph::from_json(text).unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.tasks()[1].etc, vec![Some(3.0), None]);
        assert_eq!(g.tasks()[2].id, "7");
        assert_eq!(g.tasks()[2].etc, vec![None, Some(4.5)]);
        assert_eq!(g.edges()[0], Edge { from: 0, to: 1, comm: 0.5 });
        assert_eq!(g.edges()[1].comm, 0.0);
        assert_eq!(TaskGraph::from_json(&g.to_json()).unwrap(), g);
    }

    #[test]
    fn rejects_structural_errors() {
        let bad_edge = r#"{"cores":1,"tasks":[{"id":"A","etc":[1]}],"edges":[{"from":"A","to":"Z"}]}"#;
        assert!(matches!(TaskGraph::from_json(bad_edge), Err(GraphError::UnknownTask(id)) if id == "Z"));
        let dup = r#"{"cores":1,"tasks":[{"id":"A","etc":[1]},{"id":"A","etc":[2]}]}"#;
        assert!(matches!(TaskGraph::from_json(dup), Err(GraphError::DuplicateId(_))));
        let width = r#"{"cores":2,"tasks":[{"id":"A","etc":[1]}]}"#;
        assert!(matches!(TaskGraph::from_json(width), Err(GraphError::RowWidth { .. })));
        let neg = r#"{"cores":1,"tasks":[{"id":"A","etc":[-1]}]}"#;
        assert!(matches!(TaskGraph::from_json(neg), Err(GraphError::BadEntry { .. })));
        let comm = r#"{"cores":1,"tasks":[{"id":"A","etc":[1]},{"id":"B","etc":[1]}],"edges":[{"from":"A","to":"B","comm":-2}]}"#;
        assert!(matches!(TaskGraph::from_json(comm), Err(GraphError::BadComm { .. })));
        assert!(matches!(TaskGraph::from_json("{"), Err(GraphError::Json(_))));
        assert!(matches!(
            TaskGraph::from_json(r#"{"cores":1,"tasks":[]}"#),
            Err(GraphError::Empty)
        ));
    }

    #[test]
    fn cycle_witness_is_a_real_cycle() {
        // 0 -> 1 -> 2 -> 3 -> 1, plus a tail 3 -> 4
        let g = TaskGraph::from_rows(&[[1.0]; 5], &[(0, 1), (1, 2), (2, 3), (3, 1), (3, 4)]).unwrap();
        match g.topological_order() {
            Err(GraphError::Cycle { witness }) => {
                assert_eq!(witness.first(), witness.last());
                assert_eq!(witness.len(), 4);
                for pair in witness.windows(2) {
                    let from = g.index_of(&pair[0]).unwrap();
                    let to = g.index_of(&pair[1]).unwrap();
                    assert!(g.successors(from).iter().any(|&(s, _)| s == to));
                }
            }
            other => panic!("expected cycle, got {other:?}"),
        }
        let self_loop = TaskGraph::from_rows(&[[1.0]], &[(0, 0)]).unwrap();
        assert!(matches!(self_loop.topological_order(), Err(GraphError::Cycle { .. })));
    }

    #[test]
    fn mean_etc_ignores_infeasible() {
        let g = TaskGraph::new(
            3,
            vec![GraphTask {
                id: "x".into(),
                etc: vec![Some(2.0), None, Some(4.0)],
            }],
            vec![],
        )
        .unwrap();
        assert_eq!(g.mean_etc(0), 3.0);
    }
}
