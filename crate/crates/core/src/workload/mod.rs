//! ETC tables (expected time to compute), random instance generation and the
//! per-task heterogeneity metrics used by Diff-Min.
//!
//! An [`EtcTable`] is a `tasks × cores` matrix. Entry `(i, j)` is the expected
//! execution time of task `i` on core `j`, including any staging of code and
//! data to that core. A task that cannot run on a core holds an explicit
//! infeasible marker (`None`) rather than a sentinel number.

mod graph;

pub use graph::{Edge, GraphError, GraphTask, TaskGraph};

use std::fmt;
use std::io::{Read, Write};

use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Errors raised while building, generating or parsing workloads.
#[derive(Debug, thiserror::Error)]
pub enum WorkloadError {
    #[error("table must have at least one task and one core (got {tasks}x{cores})")]
    EmptyDimension { tasks: usize, cores: usize },
    #[error("row {row} has {found} entries, expected {expected}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("entry ({task}, {core}) = {value} is not a strictly positive finite time")]
    NonPositive { task: usize, core: usize, value: f64 },
    #[error("task {task} has no feasible core")]
    NoFeasibleCore { task: usize },
    #[error("task index {task} out of range (table has {tasks} tasks)")]
    TaskOutOfRange { task: usize, tasks: usize },
    #[error("invalid value range ({low}, {high}): {reason}")]
    InvalidRange { low: f64, high: f64, reason: &'static str },
    #[error("csv line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = WorkloadError> = std::result::Result<T, E>;

/// Matrix of expected execution times, row-major by task.
#[derive(Debug, Clone, PartialEq)]
pub struct EtcTable {
    tasks: usize,
    cores: usize,
    entries: Vec<Option<f64>>,
}

impl EtcTable {
    /// Builds a table from rows; `None` marks an infeasible (task, core) pair.
    pub fn new(rows: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let tasks = rows.len();
        let cores = rows.first().map_or(0, Vec::len);
        if tasks == 0 || cores == 0 {
            return Err(WorkloadError::EmptyDimension { tasks, cores });
        }
        let mut entries = Vec::with_capacity(tasks * cores);
        for (task, row) in rows.into_iter().enumerate() {
            if row.len() != cores {
                return Err(WorkloadError::RaggedRow {
                    row: task,
                    expected: cores,
                    found: row.len(),
                });
            }
            let mut feasible = false;
            for (core, entry) in row.iter().enumerate() {
                if let Some(value) = *entry {
                    if !(value.is_finite() && value > 0.0) {
                        return Err(WorkloadError::NonPositive { task, core, value });
                    }
                    feasible = true;
                }
            }
            if !feasible {
                return Err(WorkloadError::NoFeasibleCore { task });
            }
            entries.extend(row);
        }
        Ok(Self {
            tasks,
            cores,
            entries,
        })
    }

    /// Builds a table where every entry is feasible.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        Self::new(
            rows.iter()
                .map(|r| r.as_ref().iter().copied().map(Some).collect())
                .collect(),
        )
    }

    pub fn tasks(&self) -> usize {
        self.tasks
    }

    pub fn cores(&self) -> usize {
        self.cores
    }

    /// Entry `(task, core)`, or `None` when infeasible.
    ///
    /// Panics if either index is out of range.
    #[inline]
    pub fn get(&self, task: usize, core: usize) -> Option<f64> {
        assert!(core < self.cores, "core index {core} out of range");
        self.entries[task * self.cores + core]
    }

    pub fn row(&self, task: usize) -> &[Option<f64>] {
        &self.entries[task * self.cores..(task + 1) * self.cores]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Option<f64>]> {
        self.entries.chunks(self.cores)
    }

    /// Sub-table made of the given tasks, in the given order.
    pub fn select_tasks(&self, tasks: &[usize]) -> Result<Self> {
        let rows = tasks
            .iter()
            .map(|&t| {
                if t >= self.tasks {
                    Err(WorkloadError::TaskOutOfRange {
                        task: t,
                        tasks: self.tasks,
                    })
                } else {
                    Ok(self.row(t).to_vec())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows)
    }

    /// Same table with every finite entry multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.rows()
                .map(|r| r.iter().map(|e| e.map(|v| v * factor)).collect())
                .collect(),
        )
    }

    /// Ratio of the worst to the best feasible execution time of `task`.
    pub fn div_metric(&self, task: usize) -> Result<f64> {
        self.check_task(task)?;
        div_of_row(self.row(task)).ok_or(WorkloadError::NoFeasibleCore { task })
    }

    /// Difference between the worst and the best feasible execution time of `task`.
    pub fn sub_metric(&self, task: usize) -> Result<f64> {
        self.check_task(task)?;
        sub_of_row(self.row(task)).ok_or(WorkloadError::NoFeasibleCore { task })
    }

    fn check_task(&self, task: usize) -> Result<()> {
        if task >= self.tasks {
            return Err(WorkloadError::TaskOutOfRange {
                task,
                tasks: self.tasks,
            });
        }
        Ok(())
    }

    /// Writes the table as CSV: header `task,core_0..core_{n-1}`, one row per
    /// task, `inf` for infeasible entries.
    pub fn save_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(sink);
        let mut header = Vec::with_capacity(self.cores + 1);
        header.push("task".to_string());
        header.extend((0..self.cores).map(|c| format!("core_{c}")));
        writer.write_record(&header)?;
        for (task, row) in self.rows().enumerate() {
            let mut record = Vec::with_capacity(self.cores + 1);
            record.push(task.to_string());
            record.extend(row.iter().map(|e| match e {
                Some(v) => v.to_string(),
                None => "inf".to_string(),
            }));
            writer.write_record(&record)?;
        }
        writer.flush()?;
        Ok(())
    }

    /// Parses the CSV layout written by [`EtcTable::save_csv`].
    pub fn load_csv<R: Read>(source: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(source);
        let header = reader.headers()?.clone();
        if header.get(0) != Some("task") {
            return Err(WorkloadError::Parse {
                line: 1,
                column: 0,
                message: "first header column must be `task`".into(),
            });
        }
        let cores = header.len() - 1;
        for (c, name) in header.iter().skip(1).enumerate() {
            if name != format!("core_{c}") {
                return Err(WorkloadError::Parse {
                    line: 1,
                    column: c + 1,
                    message: format!("expected header `core_{c}`, found `{name}`"),
                });
            }
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record?;
            let line = record.position().map_or(0, |p| p.line());
            let parse_err = |column: usize, message: String| WorkloadError::Parse {
                line,
                column,
                message,
            };
            if record.len() != cores + 1 {
                return Err(parse_err(
                    0,
                    format!("expected {} fields, found {}", cores + 1, record.len()),
                ));
            }
            let index: usize = record[0]
                .parse()
                .map_err(|_| parse_err(0, format!("bad task index `{}`", &record[0])))?;
            if index != rows.len() {
                return Err(parse_err(
                    0,
                    format!("task index {index} out of sequence, expected {}", rows.len()),
                ));
            }
            let mut row = Vec::with_capacity(cores);
            for (c, cell) in record.iter().skip(1).enumerate() {
                let entry = if cell.eq_ignore_ascii_case("inf") {
                    None
                } else {
                    let value: f64 = cell
                        .parse()
                        .map_err(|_| parse_err(c + 1, format!("cannot parse `{cell}`")))?;
                    if !(value.is_finite() && value > 0.0) {
                        return Err(parse_err(
                            c + 1,
                            format!("entry `{cell}` must be a strictly positive time"),
                        ));
                    }
                    Some(value)
                };
                row.push(entry);
            }
            if row.iter().all(Option::is_none) {
                return Err(parse_err(1, format!("task {index} has no feasible core")));
            }
            rows.push(row);
        }
        Self::new(rows)
    }
}

impl fmt::Display for EtcTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.rows() {
            let cells: Vec<String> = row
                .iter()
                .map(|e| e.map_or_else(|| "inf".to_string(), |v| format!("{v:.3}")))
                .collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

fn feasible_extremes(row: &[Option<f64>]) -> Option<(f64, f64)> {
    row.iter().flatten().fold(None, |acc, &v| match acc {
        None => Some((v, v)),
        Some((lo, hi)) => Some((lo.min(v), hi.max(v))),
    })
}

/// Worst/best ratio over the feasible entries of one row; `None` if all are infeasible.
pub fn div_of_row(row: &[Option<f64>]) -> Option<f64> {
    feasible_extremes(row).map(|(lo, hi)| hi / lo)
}

/// Worst minus best over the feasible entries of one row; `None` if all are infeasible.
pub fn sub_of_row(row: &[Option<f64>]) -> Option<f64> {
    feasible_extremes(row).map(|(lo, hi)| hi - lo)
}

/// Distribution of generated entries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValueKind {
    /// Real values drawn uniformly from the open interval `(low, high)`.
    #[default]
    Continuous,
    /// Integers drawn uniformly from those strictly inside `(low, high)`.
    Integer,
}

/// Parameters for a random ETC instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenSpec {
    pub tasks: usize,
    pub cores: usize,
    pub low: f64,
    pub high: f64,
    pub kind: ValueKind,
    pub seed: u64,
}

impl GenSpec {
    /// Default range `(1, 30)`, continuous values.
    pub fn new(tasks: usize, cores: usize, seed: u64) -> Self {
        Self {
            tasks,
            cores,
            low: 1.0,
            high: 30.0,
            kind: ValueKind::Continuous,
            seed,
        }
    }

    pub fn with_range(mut self, low: f64, high: f64) -> Self {
        self.low = low;
        self.high = high;
        self
    }

    pub fn with_kind(mut self, kind: ValueKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasks == 0 || self.cores == 0 {
            return Err(WorkloadError::EmptyDimension {
                tasks: self.tasks,
                cores: self.cores,
            });
        }
        let range_err = |reason| WorkloadError::InvalidRange {
            low: self.low,
            high: self.high,
            reason,
        };
        if !(self.low.is_finite() && self.high.is_finite()) {
            return Err(range_err("bounds must be finite"));
        }
        if self.low < 0.0 {
            return Err(range_err("low must be non-negative"));
        }
        if self.low >= self.high {
            return Err(range_err("low must be below high"));
        }
        if self.kind == ValueKind::Integer && self.integer_bounds().is_none() {
            return Err(range_err("no integer lies strictly inside the range"));
        }
        Ok(())
    }

    fn integer_bounds(&self) -> Option<(i64, i64)> {
        let lo = self.low.floor() as i64 + 1;
        let hi = self.high.ceil() as i64 - 1;
        (lo <= hi && lo >= 1).then_some((lo, hi))
    }
}

/// Generates a random table; deterministic in `spec.seed`.
pub fn generate_etc(spec: &GenSpec) -> Result<EtcTable> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.tasks * spec.cores;
    let entries: Vec<Option<f64>> = match spec.kind {
        ValueKind::Continuous => {
            let dist = Uniform::new(spec.low, spec.high);
            (0..n)
                .map(|_| loop {
                    // Uniform is half-open; reject the lower bound to keep the interval open.
                    let v = dist.sample(&mut rng);
                    if v > spec.low {
                        break Some(v);
                    }
                })
                .collect()
        }
        ValueKind::Integer => {
            let (lo, hi) = spec.integer_bounds().expect("validated");
            let dist = Uniform::new_inclusive(lo, hi);
            (0..n).map(|_| Some(dist.sample(&mut rng) as f64)).collect()
        }
    };
    Ok(EtcTable {
        tasks: spec.tasks,
        cores: spec.cores,
        entries,
    })
}
