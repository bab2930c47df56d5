use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::anyhow;
use clap::{Args, Parser, Subcommand, ValueEnum};
use edgekit_bus::bench::{bench_latency, bench_throughput, Transport};
use edgekit_bus::tcp::{TcpNode, TcpOptions, DEFAULT_ADDR};
use edgekit_bus::{Bus, FanoutMode, ADDR_ENV};
use edgekit_cli::experiment::{run_grid, summarize, write_csv, ExperimentGrid};
use edgekit_core::offload::{Scenario, SelectConfig};
use edgekit_core::workload::generate_etc;
use edgekit_core::{Algorithm, GenSpec, ValueKind};

#[derive(Parser)]
#[command(name = "edgekit", version, about = "Edge scheduling, offloading and bus experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random ETC table as CSV.
    Gen(GenArgs),
    /// Compare scheduling heuristics over a grid of random instances.
    SchedCompare(CompareArgs),
    /// Decide where to run a task for a vehicle scenario (JSON in, JSON out).
    Offload(OffloadArgs),
    /// Benchmark bus throughput or latency.
    BusBench(BenchArgs),
    /// Run a TCP bus endpoint.
    BusServe(ServeArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Continuous,
    Integer,
}

impl From<Kind> for ValueKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Continuous => ValueKind::Continuous,
            Kind::Integer => ValueKind::Integer,
        }
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    tasks: u64,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    cores: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Exclusive lower bound of the value range.
    #[arg(long, default_value_t = 1.0)]
    low: f64,
    /// Exclusive upper bound of the value range.
    #[arg(long, default_value_t = 30.0)]
    high: f64,
    #[arg(long, value_enum, default_value = "continuous")]
    kind: Kind,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long, value_delimiter = ',', default_value = "10,20,30,40,50")]
    tasks: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "3,4,5,6")]
    cores: Vec<usize>,
    #[arg(long, default_value_t = 100, value_parser = clap::value_parser!(u64).range(1..))]
    trials: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "min-min,max-min,diff-min")]
    algorithms: Vec<Algorithm>,
    #[arg(long, default_value_t = 1.0)]
    low: f64,
    #[arg(long, default_value_t = 30.0)]
    high: f64,
    #[arg(long, value_enum, default_value = "continuous")]
    kind: Kind,
    /// Break ties randomly with a per-trial seed.
    #[arg(long)]
    seeded_ties: bool,
    /// CSV output file; rows go to stdout and the summary to stderr when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct OffloadArgs {
    /// Scenario JSON file.
    scenario: PathBuf,
    /// Accept nodes the vehicle leaves before the task finishes.
    #[arg(long)]
    allow_uncovered: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    ZeroCopy,
    PerSubscriberCopy,
    Both,
}

#[derive(Args)]
struct BenchArgs {
    /// Subscriber count for a single throughput run.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    subscribers: u64,
    /// Subscriber counts to sweep, overriding --subscribers.
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u64).range(1..))]
    sweep_subscribers: Vec<u64>,
    /// Payload size in bytes for throughput runs.
    #[arg(long, default_value_t = 65536)]
    size: usize,
    #[arg(long, value_enum, default_value = "both")]
    mode: ModeArg,
    /// Duration of each throughput run in milliseconds.
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(1..=30_000))]
    duration_ms: u64,
    /// Measure latency instead of throughput.
    #[arg(long)]
    latency: bool,
    /// Payload sizes for latency runs.
    #[arg(long, value_delimiter = ',', default_value = "1024,1048576")]
    sizes: Vec<usize>,
    #[arg(long, default_value = "in-process")]
    transport: Transport,
    #[arg(long, default_value_t = 1000, value_parser = clap::value_parser!(u64).range(100..))]
    samples: u64,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, env = ADDR_ENV, default_value = DEFAULT_ADDR)]
    addr: String,
    /// Send received frames back to their sender instead of relaying them.
    #[arg(long)]
    echo: bool,
    /// Do not forward frames between peers.
    #[arg(long)]
    no_relay: bool,
    /// Stop after this many seconds; runs until killed when omitted.
    #[arg(long)]
    duration_s: Option<u64>,
}

enum Failure {
    Usage(anyhow::Error),
    Validation(anyhow::Error),
    Io(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Validation(_) => 2,
            Failure::Io(_) => 3,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Usage(e) | Failure::Validation(e) | Failure::Io(e) => e,
        }
    }
}

fn io_err(path: &Path, e: io::Error) -> Failure {
    Failure::Io(anyhow!("{}: {e}", path.display()))
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::SchedCompare(a) => cmd_sched_compare(a),
        Command::Offload(a) => cmd_offload(a),
        Command::BusBench(a) => cmd_bus_bench(a),
        Command::BusServe(a) => cmd_bus_serve(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}

/// Opens `path` for writing, or stdout.
fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| io_err(p, e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn cmd_gen(a: GenArgs) -> Outcome {
    let spec = GenSpec::new(a.tasks as usize, a.cores as usize, a.seed)
        .with_range(a.low, a.high)
        .with_kind(a.kind.into());
    spec.validate().map_err(|e| Failure::Usage(e.into()))?;
    let etc = generate_etc(&spec).map_err(|e| Failure::Validation(e.into()))?;
    let mut out = sink(a.out.as_deref())?;
    let target = a.out.as_deref().unwrap_or(Path::new("<stdout>"));
    etc.save_csv(&mut out)
        .map_err(|e| Failure::Io(anyhow!("{}: {e}", target.display())))?;
    out.flush().map_err(|e| io_err(target, e))?;
    if let Some(p) = &a.out {
        println!("{}", p.display());
    }
    Ok(())
}

fn cmd_sched_compare(a: CompareArgs) -> Outcome {
    let grid = ExperimentGrid {
        task_counts: a.tasks,
        core_counts: a.cores,
        trials: a.trials as usize,
        seed: a.seed,
        algorithms: a.algorithms,
        kind: a.kind.into(),
        low: a.low,
        high: a.high,
        seeded_ties: a.seeded_ties,
    };
    grid.validate().map_err(Failure::Validation)?;
    let rows = run_grid(&grid).map_err(Failure::Validation)?;
    let target = a.out.as_deref().unwrap_or(Path::new("<stdout>"));
    let mut out = sink(a.out.as_deref())?;
    write_csv(&rows, &mut out).map_err(|e| Failure::Io(e.context(target.display().to_string())))?;
    out.flush().map_err(|e| io_err(target, e))?;
    drop(out);
    let summary = summarize(&rows);
    let written = if a.out.is_some() {
        summary.write_text(io::stdout().lock())
    } else {
        summary.write_text(io::stderr().lock())
    };
    written.map_err(|e| Failure::Io(e.into()))
}

fn cmd_offload(a: OffloadArgs) -> Outcome {
    let text = std::fs::read_to_string(&a.scenario).map_err(|e| io_err(&a.scenario, e))?;
    let scenario = Scenario::from_json(&text).map_err(|e| Failure::Validation(e.into()))?;
    let decision = scenario.decide(SelectConfig {
        require_coverage: !a.allow_uncovered,
    });
    let json = serde_json::to_string_pretty(&decision).map_err(|e| Failure::Validation(e.into()))?;
    println!("{json}");
    Ok(())
}

fn cmd_bus_bench(a: BenchArgs) -> Outcome {
    let mut out = io::stdout().lock();
    let w = |r: io::Result<()>| r.map_err(|e| Failure::Io(e.into()));
    if a.latency {
        w(writeln!(out, "msg_size,transport,samples,mean_us,p50_us,p99_us,max_us"))?;
        for &size in &a.sizes {
            let r = bench_latency(size, a.transport, a.samples as usize)
                .map_err(|e| Failure::Io(e.into()))?;
            w(writeln!(
                out,
                "{},{},{},{:.3},{:.3},{:.3},{:.3}",
                r.msg_size, r.transport, r.samples, r.mean_us, r.p50_us, r.p99_us, r.max_us
            ))?;
        }
        return Ok(());
    }
    let counts = if a.sweep_subscribers.is_empty() {
        vec![a.subscribers]
    } else {
        a.sweep_subscribers
    };
    let modes: &[FanoutMode] = match a.mode {
        ModeArg::ZeroCopy => &[FanoutMode::ZeroCopy],
        ModeArg::PerSubscriberCopy => &[FanoutMode::PerSubscriberCopy],
        ModeArg::Both => &[FanoutMode::ZeroCopy, FanoutMode::PerSubscriberCopy],
    };
    w(writeln!(out, "n_subscribers,msg_size,mode,msgs_per_s,bytes_per_s"))?;
    for &mode in modes {
        for &n in &counts {
            let r = bench_throughput(n as usize, a.size, mode, Duration::from_millis(a.duration_ms))
                .map_err(|e| Failure::Io(e.into()))?;
            w(writeln!(
                out,
                "{},{},{},{:.1},{:.1}",
                r.n_subscribers, r.msg_size, r.mode, r.msgs_per_s, r.bytes_per_s
            ))?;
        }
    }
    Ok(())
}

fn cmd_bus_serve(a: ServeArgs) -> Outcome {
    let options = TcpOptions {
        relay: !a.no_relay && !a.echo,
        echo: a.echo,
        ..TcpOptions::default()
    };
    let node = TcpNode::listen(a.addr.as_str(), Bus::default(), options)
        .map_err(|e| Failure::Io(anyhow!("{}: {e}", a.addr)))?;
    let addr = node.local_addr().expect("listening node has an address");
    println!("listening on {addr}");
    io::stdout().flush().map_err(|e| Failure::Io(e.into()))?;
    match a.duration_s {
        Some(s) => std::thread::sleep(Duration::from_secs(s)),
        None => loop {
            std::thread::park();
        },
    }
    println!(
        "received {} frames from {} connected peers",
        node.frames_received(),
        node.peer_count()
    );
    node.shutdown();
    Ok(())
}
