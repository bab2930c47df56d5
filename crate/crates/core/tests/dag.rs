use edgekit_core::dag::{heft_upward_rank, schedule_dag, topological_layers, InnerAlgorithm};
use edgekit_core::sched::{diff_min, min_min, TiePolicy};
use edgekit_core::workload::{Edge, GraphTask, TaskGraph};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random DAG: edges only from lower to higher index, so it is acyclic by
/// construction. Integer ETC rows, optional communication costs.
fn random_dag(seed: u64, max_nodes: usize, with_comm: bool) -> TaskGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_nodes);
    let cores = rng.gen_range(1..=4);
    let density = rng.gen_range(0.0..0.5);
    let tasks = (0..n)
        .map(|i| GraphTask {
            id: format!("t{i}"),
            etc: (0..cores).map(|_| Some(rng.gen_range(1..20) as f64)).collect(),
        })
        .collect();
    let mut edges = Vec::new();
    for from in 0..n {
        for to in from + 1..n {
            if rng.gen_bool(density) {
                let comm = if with_comm { rng.gen_range(0..5) as f64 } else { 0.0 };
                edges.push(Edge { from, to, comm });
            }
        }
    }
    TaskGraph::new(cores, tasks, edges).unwrap()
}

fn random_chain(seed: u64) -> TaskGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=15);
    let cores = rng.gen_range(1..=5);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..cores).map(|_| rng.gen_range(1.0..30.0)).collect())
        .collect();
    let edges: Vec<(usize, usize)> = (1..n).map(|i| (i - 1, i)).collect();
    TaskGraph::from_rows(&rows, &edges).unwrap()
}

#[test]
fn precedence_is_never_violated() {
    for seed in 0..500 {
        let g = random_dag(seed, 20, seed % 2 == 0);
        for inner in [InnerAlgorithm::MinMin, InnerAlgorithm::DiffMin] {
            let s = schedule_dag(&g, inner, TiePolicy::Seeded(seed)).unwrap();
            let layer = s.layer_of();
            for e in g.edges() {
                assert!(layer[e.from] < layer[e.to], "seed {seed}: edge {e:?}");
            }
            let pos: Vec<usize> = {
                let order = s.execution_order();
                let mut p = vec![0; g.len()];
                for (i, &t) in order.iter().enumerate() {
                    p[t] = i;
                }
                p
            };
            for e in g.edges() {
                assert!(pos[e.from] < pos[e.to]);
            }
            let sum: f64 = s.layer_schedules().iter().map(|l| l.makespan()).sum();
            assert_eq!(s.total_makespan(), sum);
            for (layer_tasks, sched) in s.layers().iter().zip(s.layer_schedules()) {
                sched
                    .validate(&g.etc_table().select_tasks(layer_tasks).unwrap())
                    .unwrap();
            }
        }
    }
}

#[test]
fn layers_hold_no_internal_dependencies() {
    for seed in 0..300 {
        let g = random_dag(seed, 20, false);
        let layers = topological_layers(&g).unwrap();
        let mut layer_of = vec![usize::MAX; g.len()];
        for (l, tasks) in layers.iter().enumerate() {
            assert!(!tasks.is_empty());
            for &t in tasks {
                layer_of[t] = l;
            }
        }
        for e in g.edges() {
            assert!(layer_of[e.from] < layer_of[e.to]);
        }
        // Longest-path depth: every non-source task has a predecessor one layer up.
        for t in 0..g.len() {
            if layer_of[t] > 0 {
                assert!(g
                    .edges()
                    .iter()
                    .any(|e| e.to == t && layer_of[e.from] + 1 == layer_of[t]));
            }
        }
    }
}

#[test]
fn chain_total_is_sum_of_fastest_entries() {
    for seed in 0..300 {
        let g = random_chain(seed);
        let expected: f64 = g
            .tasks()
            .iter()
            .map(|t| t.etc.iter().flatten().copied().fold(f64::INFINITY, f64::min))
            .sum();
        for inner in [InnerAlgorithm::MinMin, InnerAlgorithm::DiffMin] {
            let s = schedule_dag(&g, inner, TiePolicy::LowestIndex).unwrap();
            assert_eq!(s.total_makespan(), expected, "seed {seed}");
        }
    }
}

#[test]
fn edge_free_graph_reduces_to_independent_scheduling() {
    for seed in 0..300 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.gen_range(1..=20);
        let cores = rng.gen_range(1..=5);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..cores).map(|_| rng.gen_range(1..10) as f64).collect())
            .collect();
        let g = TaskGraph::from_rows(&rows, &[]).unwrap();
        let etc = g.etc_table();
        for ties in [TiePolicy::LowestIndex, TiePolicy::Seeded(seed)] {
            let s = schedule_dag(&g, InnerAlgorithm::MinMin, ties).unwrap();
            assert_eq!(s.layer_schedules(), &[min_min(&etc, ties)]);
            let s = schedule_dag(&g, InnerAlgorithm::DiffMin, ties).unwrap();
            assert_eq!(s.layer_schedules(), &[diff_min(&etc, ties)]);
        }
    }
}

proptest! {
    #[test]
    fn ranks_decrease_along_edges(seed in any::<u64>(), comm in any::<bool>()) {
        let g = random_dag(seed, 20, comm);
        let rank = heft_upward_rank(&g).unwrap();
        for e in g.edges() {
            prop_assert!(rank[e.from] > rank[e.to]);
            prop_assert!(rank[e.from] >= g.mean_etc(e.from) + e.comm + rank[e.to] - 1e-9);
        }
    }
}
