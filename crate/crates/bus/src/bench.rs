//! Throughput and latency benchmarks.

use std::fmt;
use std::io::Write;
use std::net::TcpStream;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use bytes::Bytes;

use crate::tcp::{TcpNode, TcpOptions};
use crate::wire::{self, DEFAULT_MAX_FRAME};
use crate::{Bus, BusConfig, BusError, FanoutMode, Topic};

impl FanoutMode {
    pub fn name(self) -> &'static str {
        match self {
            FanoutMode::ZeroCopy => "zero-copy",
            FanoutMode::PerSubscriberCopy => "per-subscriber-copy",
        }
    }
}

impl fmt::Display for FanoutMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FanoutMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero-copy" => Ok(FanoutMode::ZeroCopy),
            "per-subscriber-copy" | "copy" => Ok(FanoutMode::PerSubscriberCopy),
            _ => Err(format!(
                "unknown mode {s:?}, expected zero-copy or per-subscriber-copy"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Transport {
    InProcess,
    TcpLoopback,
}

impl Transport {
    pub fn name(self) -> &'static str {
        match self {
            Transport::InProcess => "in-process",
            Transport::TcpLoopback => "tcp-loopback",
        }
    }
}

impl fmt::Display for Transport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Transport {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "in-process" | "inproc" => Ok(Transport::InProcess),
            "tcp-loopback" | "tcp" => Ok(Transport::TcpLoopback),
            _ => Err(format!(
                "unknown transport {s:?}, expected in-process or tcp-loopback"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct ThroughputReport {
    pub n_subscribers: usize,
    pub msg_size: usize,
    pub mode: FanoutMode,
    pub messages: u64,
    pub elapsed_s: f64,
    pub msgs_per_s: f64,
    /// Payload bytes published per second.
    pub bytes_per_s: f64,
    /// Envelopes received across all subscribers.
    pub delivered: u64,
    pub dropped: u64,
    pub payload_buffers: u64,
}

/// Subscriber queue depth used by the throughput benchmark.
const BENCH_QUEUE: usize = 64;

/// Publishes `msg_size`-byte messages to `n_subscribers` consumer threads for
/// about `duration`. Every publish first copies the payload out of a source
/// buffer, as a producer filling a fresh message would.
pub fn bench_throughput(
    n_subscribers: usize,
    msg_size: usize,
    mode: FanoutMode,
    duration: Duration,
) -> Result<ThroughputReport, BusError> {
    let n_subscribers = n_subscribers.max(1);
    let bus = Bus::new(BusConfig {
        fanout: mode,
        max_payload: msg_size.max(crate::DEFAULT_MAX_PAYLOAD),
    });
    let topic = Topic::new("bench/throughput")?;
    let stop = Arc::new(AtomicBool::new(false));
    let delivered = Arc::new(AtomicU64::new(0));
    let mut consumers = Vec::with_capacity(n_subscribers);
    for _ in 0..n_subscribers {
        let sub = bus.subscribe(&topic, BENCH_QUEUE)?;
        let stop = Arc::clone(&stop);
        let delivered = Arc::clone(&delivered);
        consumers.push(thread::spawn(move || {
            let mut n = 0u64;
            loop {
                match sub.next_message(Duration::from_millis(20)) {
                    Ok(_) => n += 1,
                    Err(BusError::Timeout) if !stop.load(Ordering::Acquire) => {}
                    Err(_) => break,
                }
            }
            n += sub.drain().len() as u64;
            delivered.fetch_add(n, Ordering::Relaxed);
            sub.dropped()
        }));
    }

    let source = vec![0xA5u8; msg_size];
    let publisher = bus.publisher(&topic);
    let start = Instant::now();
    let mut messages = 0u64;
    while start.elapsed() < duration {
        for _ in 0..8 {
            publisher.publish(Bytes::copy_from_slice(&source))?;
            messages += 1;
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    stop.store(true, Ordering::Release);
    bus.shutdown();
    let mut dropped = 0;
    for c in consumers {
        dropped += c.join().expect("consumer thread panicked");
    }
    Ok(ThroughputReport {
        n_subscribers,
        msg_size,
        mode,
        messages,
        elapsed_s: elapsed,
        msgs_per_s: messages as f64 / elapsed,
        bytes_per_s: (messages as f64 * msg_size as f64) / elapsed,
        delivered: delivered.load(Ordering::Relaxed),
        dropped,
        payload_buffers: bus.payload_buffers(),
    })
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LatencyReport {
    pub msg_size: usize,
    pub transport: Transport,
    pub samples: usize,
    /// One-way latency, taken as half the round trip, in microseconds.
    pub mean_us: f64,
    pub p50_us: f64,
    pub p99_us: f64,
    pub max_us: f64,
}

impl LatencyReport {
    fn from_round_trips(msg_size: usize, transport: Transport, mut rtt: Vec<Duration>) -> Self {
        rtt.sort_unstable();
        let us: Vec<f64> = rtt.iter().map(|d| d.as_secs_f64() * 1e6 / 2.0).collect();
        let n = us.len();
        let pct = |p: f64| us[(((n as f64) * p).ceil() as usize).clamp(1, n) - 1];
        Self {
            msg_size,
            transport,
            samples: n,
            mean_us: us.iter().sum::<f64>() / n as f64,
            p50_us: pct(0.50),
            p99_us: pct(0.99),
            max_us: us[n - 1],
        }
    }
}

/// Smallest sample count accepted by [`bench_latency`].
pub const MIN_SAMPLES: usize = 100;

/// Measures ping-pong latency for one message size.
pub fn bench_latency(
    msg_size: usize,
    transport: Transport,
    samples: usize,
) -> Result<LatencyReport, BusError> {
    let samples = samples.max(MIN_SAMPLES);
    let warmup = (samples / 10).max(10);
    let rtt = match transport {
        Transport::InProcess => in_process_round_trips(msg_size, samples, warmup)?,
        Transport::TcpLoopback => tcp_round_trips(msg_size, samples, warmup)?,
    };
    Ok(LatencyReport::from_round_trips(msg_size, transport, rtt))
}

const RTT_TIMEOUT: Duration = Duration::from_secs(10);

fn in_process_round_trips(
    msg_size: usize,
    samples: usize,
    warmup: usize,
) -> Result<Vec<Duration>, BusError> {
    let bus = Bus::new(BusConfig {
        max_payload: msg_size.max(crate::DEFAULT_MAX_PAYLOAD),
        ..BusConfig::default()
    });
    let ping = Topic::new("bench/ping")?;
    let pong = Topic::new("bench/pong")?;
    let ping_sub = bus.subscribe(&ping, 1)?;
    let pong_sub = bus.subscribe(&pong, 1)?;
    let echo_bus = bus.clone();
    let echo_topic = pong.clone();
    let echo = thread::spawn(move || {
        while let Ok(env) = ping_sub.next_message(RTT_TIMEOUT) {
            if echo_bus.publish(&echo_topic, env.payload.clone()).is_err() {
                break;
            }
        }
    });

    let payload = Bytes::from(vec![0x5Au8; msg_size]);
    let mut rtt = Vec::with_capacity(samples);
    let result = (|| {
        for i in 0..warmup + samples {
            let start = Instant::now();
            bus.publish(&ping, payload.clone())?;
            let env = pong_sub.next_message(RTT_TIMEOUT)?;
            let elapsed = start.elapsed();
            debug_assert_eq!(env.payload.len(), msg_size);
            if i >= warmup {
                rtt.push(elapsed);
            }
        }
        Ok(())
    })();
    bus.shutdown();
    let _ = echo.join();
    result.map(|()| rtt)
}

fn tcp_round_trips(
    msg_size: usize,
    samples: usize,
    warmup: usize,
) -> Result<Vec<Duration>, BusError> {
    let server = TcpNode::listen(
        "127.0.0.1:0",
        Bus::default(),
        TcpOptions {
            echo: true,
            ..TcpOptions::default()
        },
    )?;
    let addr = server.local_addr().expect("listener has an address");
    let mut stream = TcpStream::connect(addr)?;
    stream.set_nodelay(true)?;
    stream.set_read_timeout(Some(RTT_TIMEOUT))?;
    wire::write_magic(&mut stream)?;
    wire::read_magic(&mut stream)?;

    let frame = wire::encode_frame("bench/echo", &vec![0x5Au8; msg_size])?;
    let mut buf = Vec::with_capacity(frame.len());
    let mut rtt = Vec::with_capacity(samples);
    for i in 0..warmup + samples {
        let start = Instant::now();
        stream.write_all(&frame)?;
        if !wire::read_frame_into(&mut stream, &mut buf, DEFAULT_MAX_FRAME)? {
            return Err(BusError::Closed);
        }
        let elapsed = start.elapsed();
        if i >= warmup {
            rtt.push(elapsed);
        }
    }
    Ok(rtt)
}
