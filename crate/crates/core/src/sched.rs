//! Independent-task scheduling on heterogeneous cores.
//!
//! All heuristics share the same bookkeeping: `mat[j]` is the accumulated
//! execution time already assigned to core `j`, and the completion time of
//! task `i` on core `j` is `mat[j] + ETC(i, j)`. The makespan is the largest
//! `mat` once every task is placed.
//!
//! * [`min_min`] picks, each round, the unscheduled task whose best completion
//!   time is smallest.
//! * [`max_min`] picks the task whose best completion time is largest.
//! * [`diff_min`] orders tasks once by heterogeneity (max/min ETC ratio, then
//!   max−min difference) and places each on the core minimising `mat + ETC`.
//! * [`optimal_bruteforce`] enumerates every assignment; it is the test oracle.
//!
//! Core ties always go to the lowest core index. Task ties follow [`TiePolicy`].

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::workload::{div_of_row, sub_of_row, EtcTable};

/// Default limit on `cores^tasks` for [`optimal_bruteforce`].
pub const DEFAULT_BRUTEFORCE_CAP: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SchedError {
    #[error("task {task} cannot run on core {core}")]
    Infeasible { task: usize, core: usize },
    #[error("index out of range: task {task}, core {core} (table is {tasks}x{cores})")]
    OutOfRange {
        task: usize,
        core: usize,
        tasks: usize,
        cores: usize,
    },
    #[error("{tasks} tasks on {cores} cores gives {combinations} assignments, above the cap of {cap}")]
    TooLarge {
        tasks: usize,
        cores: usize,
        combinations: String,
        cap: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    MinMin,
    MaxMin,
    DiffMin,
    Optimal,
}

impl Algorithm {
    pub const ALL: [Algorithm; 4] = [
        Algorithm::MinMin,
        Algorithm::MaxMin,
        Algorithm::DiffMin,
        Algorithm::Optimal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::MinMin => "min-min",
            Algorithm::MaxMin => "max-min",
            Algorithm::DiffMin => "diff-min",
            Algorithm::Optimal => "optimal",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown algorithm `{s}` (expected min-min, max-min, diff-min or optimal)"))
    }
}

/// How ties between tasks of equal priority are broken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiePolicy {
    /// Lowest task index wins.
    #[default]
    LowestIndex,
    /// Uniform choice among tied tasks, reproducible from the seed.
    Seeded(u64),
}

/// One placement, in the order the algorithm made it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decision {
    pub task: usize,
    pub core: usize,
    pub completion: f64,
}

/// Task→core mapping with per-core availability times.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Schedule {
    algorithm: Algorithm,
    assignment: Vec<usize>,
    core_queues: Vec<Vec<usize>>,
    mat: Vec<f64>,
    makespan: f64,
    decisions: Vec<Decision>,
    core_scans: u64,
}

impl Schedule {
    /// A schedule with no tasks; its makespan is 0.
    pub fn empty(algorithm: Algorithm, cores: usize) -> Self {
        Self {
            algorithm,
            assignment: Vec::new(),
            core_queues: vec![Vec::new(); cores],
            mat: vec![0.0; cores],
            makespan: 0.0,
            decisions: Vec::new(),
            core_scans: 0,
        }
    }

    fn with_tasks(algorithm: Algorithm, tasks: usize, cores: usize) -> Self {
        let mut s = Self::empty(algorithm, cores);
        s.assignment = vec![usize::MAX; tasks];
        s.decisions.reserve(tasks);
        s
    }

    fn place(&mut self, task: usize, core: usize, etc: f64) {
        self.mat[core] += etc;
        self.assignment[task] = core;
        self.core_queues[core].push(task);
        self.decisions.push(Decision {
            task,
            core,
            completion: self.mat[core],
        });
        self.makespan = self.makespan.max(self.mat[core]);
    }

    pub fn algorithm(&self) -> Algorithm {
        self.algorithm
    }

    /// Core of each task, indexed by task.
    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn core_queues(&self) -> &[Vec<usize>] {
        &self.core_queues
    }

    /// Accumulated execution time per core.
    pub fn mat(&self) -> &[f64] {
        &self.mat
    }

    pub fn makespan(&self) -> f64 {
        self.makespan
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    /// Number of completion-time evaluations the algorithm performed.
    pub fn core_scans(&self) -> u64 {
        self.core_scans
    }

    /// Checks the structural invariants against the table the schedule came from.
    pub fn validate(&self, etc: &EtcTable) -> Result<(), String> {
        if self.assignment.len() != etc.tasks() || self.mat.len() != etc.cores() {
            return Err("schedule dimensions do not match the table".into());
        }
        let mut loads = vec![0.0; etc.cores()];
        let mut seen = vec![false; etc.tasks()];
        for (core, queue) in self.core_queues.iter().enumerate() {
            for &task in queue {
                if std::mem::replace(&mut seen[task], true) {
                    return Err(format!("task {task} queued twice"));
                }
                if self.assignment[task] != core {
                    return Err(format!("task {task} queued on {core} but assigned elsewhere"));
                }
                loads[core] += etc
                    .get(task, core)
                    .ok_or_else(|| format!("task {task} on infeasible core {core}"))?;
            }
        }
        if let Some(t) = seen.iter().position(|s| !s) {
            return Err(format!("task {t} not assigned"));
        }
        for (core, (&got, &want)) in self.mat.iter().zip(&loads).enumerate() {
            if (got - want).abs() > 1e-9 * want.max(1.0) {
                return Err(format!("mat[{core}] = {got}, expected {want}"));
            }
        }
        if self.makespan != makespan(self) {
            return Err(format!(
                "stored makespan {} differs from max mat {}",
                self.makespan,
                makespan(self)
            ));
        }
        Ok(())
    }
}

/// Largest per-core availability time; 0 for an empty schedule.
pub fn makespan(schedule: &Schedule) -> f64 {
    schedule.mat.iter().copied().fold(0.0, f64::max)
}

/// `mat[core] + ETC(task, core)`.
pub fn completion_time(
    etc: &EtcTable,
    task: usize,
    core: usize,
    mat: &[f64],
) -> Result<f64, SchedError> {
    if task >= etc.tasks() || core >= etc.cores() || core >= mat.len() {
        return Err(SchedError::OutOfRange {
            task,
            core,
            tasks: etc.tasks(),
            cores: etc.cores(),
        });
    }
    etc.get(task, core)
        .map(|e| mat[core] + e)
        .ok_or(SchedError::Infeasible { task, core })
}

/// Resolves task ties: optional external priority first (higher wins), then
/// the [`TiePolicy`].
pub(crate) struct TieBreaker<'a> {
    rng: Option<ChaCha8Rng>,
    priority: Option<&'a [f64]>,
}

impl<'a> TieBreaker<'a> {
    pub(crate) fn new(policy: TiePolicy, priority: Option<&'a [f64]>) -> Self {
        let rng = match policy {
            TiePolicy::LowestIndex => None,
            TiePolicy::Seeded(seed) => Some(ChaCha8Rng::seed_from_u64(seed)),
        };
        Self { rng, priority }
    }

    /// `candidates` must be non-empty and sorted ascending.
    fn pick(&mut self, candidates: &mut Vec<usize>) -> usize {
        if let Some(prio) = self.priority {
            let best = candidates
                .iter()
                .map(|&t| prio[t])
                .fold(f64::NEG_INFINITY, f64::max);
            candidates.retain(|&t| prio[t] == best);
        }
        match (&mut self.rng, candidates.len()) {
            (_, 1) | (None, _) => candidates[0],
            (Some(rng), n) => candidates[rng.gen_range(0..n)],
        }
    }

    /// Shuffles runs of equal keys so a later stable sort leaves random tie order.
    fn prepare_order(&mut self, order: &mut [usize]) {
        if let Some(rng) = &mut self.rng {
            order.shuffle(rng);
        }
    }
}

/// Cheapest feasible core for `task` given the current loads; lowest index on ties.
fn best_core(etc: &EtcTable, task: usize, mat: &[f64], scans: &mut u64) -> (usize, f64) {
    let mut best: Option<(usize, f64)> = None;
    for (core, entry) in etc.row(task).iter().enumerate() {
        if let Some(e) = entry {
            *scans += 1;
            let ct = mat[core] + e;
            if best.is_none_or(|(_, b)| ct < b) {
                best = Some((core, ct));
            }
        }
    }
    best.expect("EtcTable guarantees a feasible core per task")
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Pick {
    Smallest,
    Largest,
}

fn greedy_rounds(
    algorithm: Algorithm,
    etc: &EtcTable,
    pick: Pick,
    ties: &mut TieBreaker<'_>,
) -> Schedule {
    let mut schedule = Schedule::with_tasks(algorithm, etc.tasks(), etc.cores());
    let mut unscheduled: Vec<usize> = (0..etc.tasks()).collect();
    let mut scans = 0u64;
    let mut tied = Vec::new();
    let mut best_cores = vec![0usize; etc.tasks()];
    while !unscheduled.is_empty() {
        let mut extreme = match pick {
            Pick::Smallest => f64::INFINITY,
            Pick::Largest => f64::NEG_INFINITY,
        };
        tied.clear();
        for &task in &unscheduled {
            let (core, ct) = best_core(etc, task, &schedule.mat, &mut scans);
            best_cores[task] = core;
            let better = match pick {
                Pick::Smallest => ct < extreme,
                Pick::Largest => ct > extreme,
            };
            if better {
                extreme = ct;
                tied.clear();
                tied.push(task);
            } else if ct == extreme {
                tied.push(task);
            }
        }
        let task = ties.pick(&mut tied);
        let core = best_cores[task];
        schedule.place(task, core, etc.get(task, core).expect("feasible"));
        unscheduled.retain(|&t| t != task);
    }
    schedule.core_scans = scans;
    schedule
}

pub(crate) fn min_min_with(etc: &EtcTable, ties: &mut TieBreaker<'_>) -> Schedule {
    greedy_rounds(Algorithm::MinMin, etc, Pick::Smallest, ties)
}

pub(crate) fn max_min_with(etc: &EtcTable, ties: &mut TieBreaker<'_>) -> Schedule {
    greedy_rounds(Algorithm::MaxMin, etc, Pick::Largest, ties)
}

/// Diff-Min dispatch order: Div descending, then Sub descending, then the tie rules.
pub(crate) fn diff_min_order(etc: &EtcTable, ties: &mut TieBreaker<'_>) -> Vec<usize> {
    let keys: Vec<(f64, f64)> = etc
        .rows()
        .map(|row| {
            let div = div_of_row(row).expect("feasible row");
            let sub = sub_of_row(row).expect("feasible row");
            (div, sub)
        })
        .collect();
    let mut order: Vec<usize> = (0..etc.tasks()).collect();
    ties.prepare_order(&mut order);
    let priority = ties.priority;
    // Stable: equal keys keep the (possibly shuffled) prior order.
    order.sort_by(|&a, &b| {
        let (da, sa) = keys[a];
        let (db, sb) = keys[b];
        db.total_cmp(&da)
            .then(sb.total_cmp(&sa))
            .then_with(|| match priority {
                Some(p) => p[b].total_cmp(&p[a]),
                None => std::cmp::Ordering::Equal,
            })
    });
    order
}

pub(crate) fn diff_min_with(etc: &EtcTable, ties: &mut TieBreaker<'_>) -> Schedule {
    let order = diff_min_order(etc, ties);
    let mut schedule = Schedule::with_tasks(Algorithm::DiffMin, etc.tasks(), etc.cores());
    let mut scans = 0u64;
    for task in order {
        let (core, _) = best_core(etc, task, &schedule.mat, &mut scans);
        schedule.place(task, core, etc.get(task, core).expect("feasible"));
    }
    schedule.core_scans = scans;
    schedule
}

/// Min-Min: each round, schedule the task with the smallest best completion time.
pub fn min_min(etc: &EtcTable, ties: TiePolicy) -> Schedule {
    min_min_with(etc, &mut TieBreaker::new(ties, None))
}

/// Max-Min: each round, schedule the task with the largest best completion time.
pub fn max_min(etc: &EtcTable, ties: TiePolicy) -> Schedule {
    max_min_with(etc, &mut TieBreaker::new(ties, None))
}

/// Diff-Min: tasks in order of decreasing Div, then Sub; each goes to the core
/// minimising accumulated load plus its execution time.
pub fn diff_min(etc: &EtcTable, ties: TiePolicy) -> Schedule {
    diff_min_with(etc, &mut TieBreaker::new(ties, None))
}

/// Exhaustive search with the default cap.
pub fn optimal_bruteforce(etc: &EtcTable) -> Result<Schedule, SchedError> {
    optimal_bruteforce_capped(etc, DEFAULT_BRUTEFORCE_CAP)
}

/// Enumerates all `cores^tasks` assignments and keeps the first one (in
/// lexicographic order of the assignment vector) with the minimum makespan.
pub fn optimal_bruteforce_capped(etc: &EtcTable, cap: u64) -> Result<Schedule, SchedError> {
    let (tasks, cores) = (etc.tasks(), etc.cores());
    let combinations = (cores as u128).checked_pow(tasks as u32);
    if combinations.is_none_or(|c| c > cap as u128) {
        return Err(SchedError::TooLarge {
            tasks,
            cores,
            combinations: combinations.map_or_else(
                || format!("{cores}^{tasks}"),
                |c| c.to_string(),
            ),
            cap,
        });
    }

    let mut current = vec![0usize; tasks];
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut scans = 0u64;
    'outer: loop {
        let mut loads = vec![0.0; cores];
        let mut feasible = true;
        for (task, &core) in current.iter().enumerate() {
            scans += 1;
            match etc.get(task, core) {
                Some(e) => loads[core] += e,
                None => {
                    feasible = false;
                    break;
                }
            }
        }
        if feasible {
            let span = loads.iter().copied().fold(0.0, f64::max);
            if best.as_ref().is_none_or(|(b, _)| span < *b) {
                best = Some((span, current.clone()));
            }
        }
        // Odometer increment, last task fastest.
        for digit in (0..tasks).rev() {
            current[digit] += 1;
            if current[digit] < cores {
                continue 'outer;
            }
            current[digit] = 0;
        }
        break;
    }

    let (_, assignment) = best.expect("every task has a feasible core");
    let mut schedule = Schedule::with_tasks(Algorithm::Optimal, tasks, cores);
    for (task, &core) in assignment.iter().enumerate() {
        schedule.place(task, core, etc.get(task, core).expect("feasible"));
    }
    schedule.core_scans = scans;
    Ok(schedule)
}

/// Runs `algorithm` on `etc`. Only [`Algorithm::Optimal`] can fail (size cap).
pub fn run(algorithm: Algorithm, etc: &EtcTable, ties: TiePolicy) -> Result<Schedule, SchedError> {
    Ok(match algorithm {
        Algorithm::MinMin => min_min(etc, ties),
        Algorithm::MaxMin => max_min(etc, ties),
        Algorithm::DiffMin => diff_min(etc, ties),
        Algorithm::Optimal => optimal_bruteforce(etc)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::workload::{generate_etc, GenSpec, ValueKind};

    fn f1() -> EtcTable {
        EtcTable::from_rows(&[[1.0, 10.0], [2.0, 20.0], [1.0, 2.0]]).unwrap()
    }

    fn f2() -> EtcTable {
        EtcTable::from_rows(&[[3.0, 5.0], [4.0, 2.0]]).unwrap()
    }

    fn placements(s: &Schedule) -> Vec<(usize, usize)> {
        s.decisions().iter().map(|d| (d.task, d.core)).collect()
    }

    #[test]
    fn completion_time_cases() {
        let etc = EtcTable::from_rows(&[[1.0, 1.0], [9.0, 5.0]]).unwrap();
        assert_eq!(completion_time(&etc, 1, 1, &[0.0, 2.0]).unwrap(), 7.0);
        assert_eq!(completion_time(&etc, 1, 0, &[0.0, 0.0]).unwrap(), 9.0);
        let with_inf = EtcTable::new(vec![vec![Some(1.0), None]]).unwrap();
        assert_eq!(
            completion_time(&with_inf, 0, 1, &[0.0, 0.0]),
            Err(SchedError::Infeasible { task: 0, core: 1 })
        );
        assert!(matches!(
            completion_time(&etc, 2, 0, &[0.0, 0.0]),
            Err(SchedError::OutOfRange { .. })
        ));
    }

    #[test]
    fn min_min_traces() {
        let s = min_min(&f2(), TiePolicy::LowestIndex);
        assert_eq!(placements(&s), vec![(1, 1), (0, 0)]);
        assert_eq!(s.makespan(), 3.0);

        let s = min_min(&f1(), TiePolicy::LowestIndex);
        assert_eq!(placements(&s), vec![(0, 0), (2, 0), (1, 0)]);
        assert_eq!(s.makespan(), 4.0);

        let one = EtcTable::from_rows(&[[4.0, 9.0]]).unwrap();
        let s = min_min(&one, TiePolicy::LowestIndex);
        assert_eq!(s.assignment(), &[0]);
        assert_eq!(s.makespan(), 4.0);
    }

    #[test]
    fn max_min_traces() {
        let s = max_min(&f1(), TiePolicy::LowestIndex);
        assert_eq!(placements(&s), vec![(1, 0), (0, 0), (2, 1)]);
        assert_eq!(s.makespan(), 3.0);

        let s = max_min(&f2(), TiePolicy::LowestIndex);
        assert_eq!(s.assignment(), &[0, 1]);
        assert_eq!(s.makespan(), 3.0);

        let uniform = EtcTable::from_rows(&[[7.0; 4]; 3]).unwrap();
        assert_eq!(max_min(&uniform, TiePolicy::LowestIndex).makespan(), 7.0);
    }

    #[test]
    fn diff_min_traces() {
        let s = diff_min(&f1(), TiePolicy::LowestIndex);
        assert_eq!(placements(&s), vec![(1, 0), (0, 0), (2, 1)]);
        assert_eq!(s.makespan(), 3.0);
        assert_eq!(makespan(&s), 3.0);

        let s = diff_min(&f2(), TiePolicy::LowestIndex);
        assert_eq!(placements(&s), vec![(1, 1), (0, 0)]);
        assert_eq!(s.makespan(), 3.0);

        let row = EtcTable::from_rows(&[[8.0, 3.0, 5.0]]).unwrap();
        assert_eq!(diff_min(&row, TiePolicy::Seeded(9)).assignment(), &[1]);
    }

    #[test]
    fn bruteforce_fixtures() {
        assert_eq!(optimal_bruteforce(&f1()).unwrap().makespan(), 3.0);
        assert_eq!(optimal_bruteforce(&f2()).unwrap().makespan(), 3.0);
        let uniform = EtcTable::from_rows(&[[5.0; 3]; 3]).unwrap();
        assert_eq!(optimal_bruteforce(&uniform).unwrap().makespan(), 5.0);
    }

    #[test]
    fn bruteforce_respects_infeasible_entries() {
        let etc = EtcTable::new(vec![
            vec![Some(1.0), None],
            vec![Some(1.0), None],
            vec![None, Some(10.0)],
        ])
        .unwrap();
        let s = optimal_bruteforce(&etc).unwrap();
        assert_eq!(s.assignment(), &[0, 0, 1]);
        assert_eq!(s.makespan(), 10.0);
        s.validate(&etc).unwrap();
    }

    #[test]
    fn heuristics_avoid_infeasible_cores() {
        let etc = EtcTable::new(vec![
            vec![None, Some(3.0), Some(9.0)],
            vec![Some(2.0), None, Some(1.0)],
            vec![Some(4.0), Some(4.0), None],
        ])
        .unwrap();
        for s in [
            min_min(&etc, TiePolicy::LowestIndex),
            max_min(&etc, TiePolicy::LowestIndex),
            diff_min(&etc, TiePolicy::LowestIndex),
        ] {
            s.validate(&etc).unwrap();
        }
    }

    #[test]
    fn bruteforce_refuses_large_instances() {
        let big = generate_etc(&GenSpec::new(30, 3, 1)).unwrap();
        match optimal_bruteforce(&big) {
            Err(SchedError::TooLarge { tasks, cores, cap, .. }) => {
                assert_eq!((tasks, cores, cap), (30, 3, DEFAULT_BRUTEFORCE_CAP));
            }
            other => panic!("expected refusal, got {other:?}"),
        }
        let edge = generate_etc(&GenSpec::new(6, 10, 1)).unwrap();
        assert!(optimal_bruteforce(&edge).is_ok());
        assert!(optimal_bruteforce_capped(&edge, 999_999).is_err());
    }

    #[test]
    fn empty_schedule_has_zero_makespan() {
        let s = Schedule::empty(Algorithm::MinMin, 3);
        assert_eq!(makespan(&s), 0.0);
        let s = Schedule::empty(Algorithm::MinMin, 0);
        assert_eq!(makespan(&s), 0.0);
    }

    #[test]
    fn core_ties_go_to_lowest_index() {
        let etc = EtcTable::from_rows(&[[4.0, 4.0, 4.0]]).unwrap();
        for alg in [Algorithm::MinMin, Algorithm::MaxMin, Algorithm::DiffMin] {
            let s = run(alg, &etc, TiePolicy::Seeded(3)).unwrap();
            assert_eq!(s.assignment(), &[0], "{alg}");
        }
    }

    #[test]
    fn seeded_ties_are_reproducible_and_vary() {
        // Ten identical tasks: every choice is a tie.
        let etc = EtcTable::from_rows(&[[3.0, 5.0]; 10]).unwrap();
        let a = diff_min(&etc, TiePolicy::Seeded(1));
        assert_eq!(a, diff_min(&etc, TiePolicy::Seeded(1)));
        let orders: std::collections::HashSet<Vec<usize>> = (0..20)
            .map(|seed| {
                min_min(&etc, TiePolicy::Seeded(seed))
                    .decisions()
                    .iter()
                    .map(|d| d.task)
                    .collect()
            })
            .collect();
        assert!(orders.len() > 1);
        let det: Vec<usize> = min_min(&etc, TiePolicy::LowestIndex)
            .decisions()
            .iter()
            .map(|d| d.task)
            .collect();
        assert_eq!(det, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn operation_counts_reflect_complexity() {
        for (tasks, cores) in [(10, 3), (25, 4), (50, 6)] {
            let etc = generate_etc(&GenSpec::new(tasks, cores, 5)).unwrap();
            let (g, c) = (tasks as u64, cores as u64);
            assert_eq!(diff_min(&etc, TiePolicy::LowestIndex).core_scans(), g * c);
            assert_eq!(
                min_min(&etc, TiePolicy::LowestIndex).core_scans(),
                c * g * (g + 1) / 2
            );
            assert_eq!(
                max_min(&etc, TiePolicy::LowestIndex).core_scans(),
                c * g * (g + 1) / 2
            );
        }
    }

    #[test]
    fn validate_catches_corruption() {
        let etc = f1();
        let mut s = diff_min(&etc, TiePolicy::LowestIndex);
        s.validate(&etc).unwrap();
        s.mat[1] += 1.0;
        assert!(s.validate(&etc).is_err());
        let mut s = diff_min(&etc, TiePolicy::LowestIndex);
        s.makespan = 99.0;
        assert!(s.validate(&etc).is_err());
        let other = generate_etc(&GenSpec::new(3, 3, 1).with_kind(ValueKind::Integer)).unwrap();
        assert!(s.validate(&other).is_err());
    }

    #[test]
    fn algorithm_names_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.name().parse::<Algorithm>().unwrap(), a);
        }
        assert!("fifo".parse::<Algorithm>().is_err());
    }
}
