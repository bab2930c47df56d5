//! Framed TCP transport.
//!
//! A node owns one connection per peer. Frames received from a peer are
//! published on the node's local [`Bus`], optionally echoed back to the
//! sender and optionally relayed to every other peer.

use std::io::{self, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::Arc;
use std::thread;

use bytes::Bytes;
use parking_lot::Mutex;

use crate::wire::{self, DEFAULT_MAX_FRAME};
use crate::{Bus, BusError, Topic, ADDR_ENV};

/// Address used when neither a flag nor the environment names one.
pub const DEFAULT_ADDR: &str = "127.0.0.1:7447";

/// Address from the environment, or [`DEFAULT_ADDR`].
pub fn default_addr() -> String {
    std::env::var(ADDR_ENV).unwrap_or_else(|_| DEFAULT_ADDR.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TcpOptions {
    /// Forward received frames to all other peers.
    pub relay: bool,
    /// Send received frames back to the peer they came from.
    pub echo: bool,
    pub max_frame: usize,
}

impl Default for TcpOptions {
    fn default() -> Self {
        Self {
            relay: false,
            echo: false,
            max_frame: DEFAULT_MAX_FRAME,
        }
    }
}

struct Peer {
    id: u64,
    addr: SocketAddr,
    writer: Mutex<TcpStream>,
}

struct Shared {
    bus: Bus,
    options: TcpOptions,
    peers: Mutex<Vec<Arc<Peer>>>,
    next_peer: AtomicU64,
    closed: AtomicBool,
    frames_in: AtomicU64,
}

impl Shared {
    fn add_peer(self: &Arc<Self>, stream: TcpStream) -> io::Result<()> {
        stream.set_nodelay(true)?;
        let mut writer = stream.try_clone()?;
        wire::write_magic(&mut writer)?;
        let peer = Arc::new(Peer {
            id: self.next_peer.fetch_add(1, Ordering::Relaxed),
            addr: stream.peer_addr()?,
            writer: Mutex::new(writer),
        });
        self.peers.lock().push(Arc::clone(&peer));
        let shared = Arc::clone(self);
        thread::Builder::new()
            .name(format!("tcp-peer:{}", peer.addr))
            .spawn(move || {
                let _ = shared.read_loop(stream, &peer);
                shared.peers.lock().retain(|p| p.id != peer.id);
            })?;
        Ok(())
    }

    fn read_loop(&self, mut stream: TcpStream, from: &Peer) -> io::Result<()> {
        wire::read_magic(&mut stream)?;
        let mut buf = Vec::new();
        while wire::read_frame_into(&mut stream, &mut buf, self.options.max_frame)? {
            self.frames_in.fetch_add(1, Ordering::Relaxed);
            if self.options.echo {
                from.writer.lock().write_all(&buf)?;
            }
            if self.options.relay {
                self.write_all_peers(&buf, Some(from.id));
            }
            let (topic, payload, _) = wire::split_frame(&buf)?;
            if self.bus.subscriber_count(topic) > 0 {
                if let Ok(topic) = Topic::new(topic) {
                    let _ = self.bus.publish(&topic, Bytes::copy_from_slice(payload));
                }
            }
        }
        Ok(())
    }

    /// Writes an encoded frame to every peer except `skip`; returns how many
    /// writes succeeded.
    fn write_all_peers(&self, frame: &[u8], skip: Option<u64>) -> usize {
        let peers: Vec<Arc<Peer>> = self.peers.lock().clone();
        let mut sent = 0;
        for p in peers.iter().filter(|p| Some(p.id) != skip) {
            if p.writer.lock().write_all(frame).is_ok() {
                sent += 1;
            } else {
                let _ = p.writer.lock().shutdown(Shutdown::Both);
            }
        }
        sent
    }
}

/// A TCP endpoint of the bus: a listener, a client, or both.
pub struct TcpNode {
    shared: Arc<Shared>,
    local_addr: Option<SocketAddr>,
}

impl TcpNode {
    /// Creates a node with no connections.
    pub fn new(bus: Bus, options: TcpOptions) -> Self {
        Self {
            shared: Arc::new(Shared {
                bus,
                options,
                peers: Mutex::new(Vec::new()),
                next_peer: AtomicU64::new(0),
                closed: AtomicBool::new(false),
                frames_in: AtomicU64::new(0),
            }),
            local_addr: None,
        }
    }

    /// Binds `addr` and accepts peers on a background thread.
    pub fn listen(addr: impl ToSocketAddrs, bus: Bus, options: TcpOptions) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let mut node = Self::new(bus, options);
        node.local_addr = Some(listener.local_addr()?);
        let shared = Arc::clone(&node.shared);
        thread::Builder::new()
            .name("tcp-accept".into())
            .spawn(move || {
                for stream in listener.incoming() {
                    if shared.closed.load(Ordering::Acquire) {
                        break;
                    }
                    if let Ok(s) = stream {
                        let _ = shared.add_peer(s);
                    }
                }
            })?;
        Ok(node)
    }

    /// Connects to a listening node.
    pub fn connect(addr: impl ToSocketAddrs, bus: Bus, options: TcpOptions) -> io::Result<Self> {
        let node = Self::new(bus, options);
        node.add_connection(addr)?;
        Ok(node)
    }

    /// Opens one more outgoing connection.
    pub fn add_connection(&self, addr: impl ToSocketAddrs) -> io::Result<()> {
        self.shared.add_peer(TcpStream::connect(addr)?)
    }

    pub fn local_addr(&self) -> Option<SocketAddr> {
        self.local_addr
    }

    pub fn bus(&self) -> &Bus {
        &self.shared.bus
    }

    pub fn peer_count(&self) -> usize {
        self.shared.peers.lock().len()
    }

    /// Frames received from all peers so far.
    pub fn frames_received(&self) -> u64 {
        self.shared.frames_in.load(Ordering::Relaxed)
    }

    /// Encodes the frame once and writes it to every connected peer.
    /// Returns the number of peers written to.
    pub fn publish(&self, topic: &Topic, payload: &[u8]) -> Result<usize, BusError> {
        if self.shared.closed.load(Ordering::Acquire) {
            return Err(BusError::Closed);
        }
        let max = self.shared.bus.config().max_payload;
        if payload.len() > max {
            return Err(BusError::PayloadTooLarge {
                size: payload.len(),
                max,
            });
        }
        let frame = wire::encode_frame(topic.as_str(), payload)?;
        Ok(self.shared.write_all_peers(&frame, None))
    }

    /// Closes all connections and stops accepting.
    pub fn shutdown(&self) {
        if self.shared.closed.swap(true, Ordering::AcqRel) {
            return;
        }
        for p in self.shared.peers.lock().drain(..) {
            let _ = p.writer.lock().shutdown(Shutdown::Both);
        }
        if let Some(addr) = self.local_addr {
            // Wake the accept loop so it sees the flag.
            let _ = TcpStream::connect(addr);
        }
    }
}

impl Drop for TcpNode {
    fn drop(&mut self) {
        self.shutdown();
    }
}

impl std::fmt::Debug for TcpNode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TcpNode")
            .field("local_addr", &self.local_addr)
            .field("peers", &self.peer_count())
            .finish()
    }
}
