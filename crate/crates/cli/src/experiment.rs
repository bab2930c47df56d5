//! Randomised comparison of scheduling heuristics over a grid of
//! (tasks, cores) cells.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use anyhow::{bail, Context, Result};
use edgekit_core::sched::{self, DEFAULT_BRUTEFORCE_CAP};
use edgekit_core::workload::generate_etc;
use edgekit_core::{Algorithm, GenSpec, TiePolicy, ValueKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentGrid {
    pub task_counts: Vec<usize>,
    pub core_counts: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub algorithms: Vec<Algorithm>,
    pub kind: ValueKind,
    pub low: f64,
    pub high: f64,
    /// Break ties randomly, seeded per trial, instead of by lowest index.
    pub seeded_ties: bool,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        Self {
            task_counts: vec![10, 20, 30, 40, 50],
            core_counts: vec![3, 4, 5, 6],
            trials: 100,
            seed: 0,
            algorithms: vec![Algorithm::MinMin, Algorithm::MaxMin, Algorithm::DiffMin],
            kind: ValueKind::Continuous,
            low: 1.0,
            high: 30.0,
            seeded_ties: false,
        }
    }
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.task_counts.is_empty() || self.core_counts.is_empty() {
            bail!("task and core lists must not be empty");
        }
        if self.task_counts.contains(&0) || self.core_counts.contains(&0) {
            bail!("task and core counts must be at least 1");
        }
        if self.trials == 0 {
            bail!("trials must be at least 1");
        }
        if self.algorithms.is_empty() {
            bail!("at least one algorithm is required");
        }
        if self.algorithms.contains(&Algorithm::Optimal) {
            for &t in &self.task_counts {
                for &c in &self.core_counts {
                    let combos = (c as f64).powi(t as i32);
                    if combos > DEFAULT_BRUTEFORCE_CAP as f64 {
                        bail!(
                            "optimal is limited to {DEFAULT_BRUTEFORCE_CAP} assignments per \
                             instance, but {t} tasks on {c} cores gives {c}^{t}"
                        );
                    }
                }
            }
        }
        GenSpec::new(1, 1, 0)
            .with_range(self.low, self.high)
            .with_kind(self.kind)
            .validate()?;
        Ok(())
    }

    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.task_counts
            .iter()
            .flat_map(move |&t| self.core_counts.iter().map(move |&c| (t, c)))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for one trial, so any cell can be regenerated on its own.
pub fn trial_seed(grid_seed: u64, tasks: usize, cores: usize, trial: usize) -> u64 {
    [tasks as u64, cores as u64, trial as u64]
        .iter()
        .fold(splitmix64(grid_seed), |h, &x| splitmix64(h ^ x))
}

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub tasks: usize,
    pub cores: usize,
    pub trial: usize,
    pub algorithm: Algorithm,
    pub makespan: f64,
    /// Makespan divided by the Min-Min makespan of the same instance.
    pub normalized_makespan: f64,
}

fn run_trial(grid: &ExperimentGrid, tasks: usize, cores: usize, trial: usize) -> Result<Vec<Row>> {
    let seed = trial_seed(grid.seed, tasks, cores, trial);
    let etc = generate_etc(
        &GenSpec::new(tasks, cores, seed)
            .with_range(grid.low, grid.high)
            .with_kind(grid.kind),
    )?;
    let ties = if grid.seeded_ties {
        TiePolicy::Seeded(seed)
    } else {
        TiePolicy::LowestIndex
    };
    let baseline = sched::min_min(&etc, ties).makespan();
    grid.algorithms
        .iter()
        .map(|&alg| {
            let makespan = if alg == Algorithm::MinMin {
                baseline
            } else {
                sched::run(alg, &etc, ties)?.makespan()
            };
            Ok(Row {
                tasks,
                cores,
                trial,
                algorithm: alg,
                makespan,
                normalized_makespan: makespan / baseline,
            })
        })
        .collect()
}

/// Runs every trial of every cell. Rows come back sorted by
/// (tasks, cores, trial, algorithm) whatever the thread count.
pub fn run_grid(grid: &ExperimentGrid) -> Result<Vec<Row>> {
    grid.validate()?;
    let jobs: Vec<(usize, usize, usize)> = grid
        .cells()
        .flat_map(|(t, c)| (0..grid.trials).map(move |k| (t, c, k)))
        .collect();
    let per_trial: Vec<Vec<Row>> = jobs
        .par_iter()
        .map(|&(t, c, k)| run_trial(grid, t, c, k))
        .collect::<Result<_>>()?;
    let mut rows: Vec<Row> = per_trial.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        (a.tasks, a.cores, a.trial, a.algorithm).cmp(&(b.tasks, b.cores, b.trial, b.algorithm))
    });
    Ok(rows)
}

pub fn write_csv<W: Write>(rows: &[Row], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(source: R) -> Result<Vec<Row>> {
    csv::Reader::from_reader(source)
        .deserialize()
        .collect::<Result<_, _>>()
        .context("reading results csv")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub tasks: usize,
    pub cores: usize,
    pub trials: usize,
    /// Mean normalized makespan per algorithm.
    pub means: BTreeMap<Algorithm, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub cells: Vec<CellSummary>,
    /// Mean normalized makespan per algorithm over all rows.
    pub grid_means: BTreeMap<Algorithm, f64>,
}

impl Summary {
    /// Fractional makespan reduction of `alg` against Min-Min.
    pub fn improvement(&self, alg: Algorithm) -> Option<f64> {
        self.grid_means.get(&alg).map(|m| 1.0 - m)
    }

    /// Cells where `alg` has a mean normalized makespan below 1.
    pub fn cells_improved(&self, alg: Algorithm) -> usize {
        self.cells
            .iter()
            .filter(|c| c.means.get(&alg).is_some_and(|&m| m < 1.0))
            .count()
    }

    pub fn write_text<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let algs: Vec<Algorithm> = self.grid_means.keys().copied().collect();
        write!(out, "{:>6} {:>6}", "tasks", "cores")?;
        for a in &algs {
            write!(out, " {:>9}", a.name())?;
        }
        writeln!(out)?;
        for c in &self.cells {
            write!(out, "{:>6} {:>6}", c.tasks, c.cores)?;
            for a in &algs {
                write!(out, " {:>9.4}", c.means[a])?;
            }
            writeln!(out)?;
        }
        write!(out, "{:>13}", "grid mean")?;
        for a in &algs {
            write!(out, " {:>9.4}", self.grid_means[a])?;
        }
        writeln!(out)?;
        for a in algs.iter().filter(|&&a| a != Algorithm::MinMin) {
            writeln!(
                out,
                "{} vs min-min: mean improvement {:+.2}%, {} of {} cells improved",
                a.name(),
                100.0 * self.improvement(*a).unwrap_or(0.0),
                self.cells_improved(*a),
                self.cells.len()
            )?;
        }
        Ok(())
    }
}

/// Recomputes the summary from raw rows.
pub fn summarize(rows: &[Row]) -> Summary {
    let mut cells: BTreeMap<(usize, usize), BTreeMap<Algorithm, (f64, usize)>> = BTreeMap::new();
    let mut totals: BTreeMap<Algorithm, (f64, usize)> = BTreeMap::new();
    for r in rows {
        let acc = cells
            .entry((r.tasks, r.cores))
            .or_default()
            .entry(r.algorithm)
            .or_default();
        acc.0 += r.normalized_makespan;
        acc.1 += 1;
        let t = totals.entry(r.algorithm).or_default();
        t.0 += r.normalized_makespan;
        t.1 += 1;
    }
    let mean = |(s, n): (f64, usize)| s / n as f64;
    Summary {
        cells: cells
            .into_iter()
            .map(|((tasks, cores), by_alg)| CellSummary {
                tasks,
                cores,
                trials: by_alg.values().map(|v| v.1).max().unwrap_or(0),
                means: by_alg.into_iter().map(|(a, v)| (a, mean(v))).collect(),
            })
            .collect(),
        grid_means: totals.into_iter().map(|(a, v)| (a, mean(v))).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trial_seeds_differ_across_coordinates() {
        let mut seen = std::collections::HashSet::new();
        for t in [10, 20] {
            for c in [3, 4] {
                for k in 0..50 {
                    assert!(seen.insert(trial_seed(7, t, c, k)));
                }
            }
        }
        assert_ne!(trial_seed(1, 10, 3, 0), trial_seed(2, 10, 3, 0));
        assert_eq!(trial_seed(1, 10, 3, 0), trial_seed(1, 10, 3, 0));
    }

    #[test]
    fn grid_validation() {
        assert!(ExperimentGrid::default().validate().is_ok());
        let g = ExperimentGrid {
            algorithms: vec![Algorithm::Optimal],
            ..ExperimentGrid::default()
        };
        assert!(g.validate().is_err());
        let g = ExperimentGrid {
            task_counts: vec![6],
            core_counts: vec![3],
            algorithms: vec![Algorithm::Optimal],
            ..ExperimentGrid::default()
        };
        assert!(g.validate().is_ok());
        let g = ExperimentGrid {
            trials: 0,
            ..ExperimentGrid::default()
        };
        assert!(g.validate().is_err());
        let g = ExperimentGrid {
            core_counts: vec![],
            ..ExperimentGrid::default()
        };
        assert!(g.validate().is_err());
    }

    #[test]
    fn min_min_rows_normalize_to_one() {
        let g = ExperimentGrid {
            task_counts: vec![5],
            core_counts: vec![2],
            trials: 3,
            ..ExperimentGrid::default()
        };
        let rows = run_grid(&g).unwrap();
        assert_eq!(rows.len(), 9);
        for r in rows.iter().filter(|r| r.algorithm == Algorithm::MinMin) {
            assert_eq!(r.normalized_makespan, 1.0);
        }
    }
}
