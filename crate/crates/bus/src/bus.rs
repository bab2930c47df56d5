//! In-process publish/subscribe.
//!
//! A publish stores the payload once and hands every matching subscription
//! a reference-counted [`Envelope`]. Each subscription owns a bounded queue;
//! when it is full the oldest envelope is dropped and counted.

use std::collections::{HashMap, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Weak};
use std::time::{Duration, Instant};

use bytes::Bytes;
use parking_lot::{Condvar, Mutex, RwLock};

use crate::rpc::Registry;
use crate::{BusError, Topic};

/// Default upper bound on a single payload.
pub const DEFAULT_MAX_PAYLOAD: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FanoutMode {
    /// One buffer shared by all subscribers.
    #[default]
    ZeroCopy,
    /// Every subscriber beyond the first gets its own copy of the payload,
    /// the way a unicast loop would deliver it.
    PerSubscriberCopy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BusConfig {
    pub max_payload: usize,
    pub fanout: FanoutMode,
}

impl Default for BusConfig {
    fn default() -> Self {
        Self {
            max_payload: DEFAULT_MAX_PAYLOAD,
            fanout: FanoutMode::ZeroCopy,
        }
    }
}

/// A delivered message. Shared between subscribers in zero-copy mode.
#[derive(Debug)]
pub struct Envelope {
    pub topic: Topic,
    pub publisher: u64,
    /// Per-publisher counter starting at 1.
    pub sequence: u64,
    pub payload: Bytes,
    pub published_at: Instant,
}

#[derive(Debug, Default)]
struct QueueState {
    items: VecDeque<Arc<Envelope>>,
    dropped: u64,
    closed: bool,
}

#[derive(Debug)]
struct SubQueue {
    capacity: usize,
    state: Mutex<QueueState>,
    ready: Condvar,
}

impl SubQueue {
    fn push(&self, env: Arc<Envelope>) {
        let mut st = self.state.lock();
        if st.items.len() == self.capacity {
            st.items.pop_front();
            st.dropped += 1;
        }
        st.items.push_back(env);
        drop(st);
        self.ready.notify_one();
    }

    fn close(&self) {
        self.state.lock().closed = true;
        self.ready.notify_all();
    }
}

pub(crate) struct Inner {
    config: BusConfig,
    topics: RwLock<HashMap<Topic, Vec<Weak<SubQueue>>>>,
    closed: AtomicBool,
    next_publisher: AtomicU64,
    payload_buffers: AtomicU64,
    default_publisher: PublisherState,
    pub(crate) registry: Registry,
}

#[derive(Debug)]
struct PublisherState {
    id: u64,
    sequence: Mutex<u64>,
}

/// Handle to a bus. Clones share the same bus.
#[derive(Clone)]
pub struct Bus {
    pub(crate) inner: Arc<Inner>,
}

impl Default for Bus {
    fn default() -> Self {
        Self::new(BusConfig::default())
    }
}

impl std::fmt::Debug for Bus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Bus")
            .field("config", &self.inner.config)
            .field("closed", &self.is_closed())
            .finish()
    }
}

impl Bus {
    pub fn new(config: BusConfig) -> Self {
        Self {
            inner: Arc::new(Inner {
                config,
                topics: RwLock::new(HashMap::new()),
                closed: AtomicBool::new(false),
                next_publisher: AtomicU64::new(1),
                payload_buffers: AtomicU64::new(0),
                default_publisher: PublisherState {
                    id: 0,
                    sequence: Mutex::new(0),
                },
                registry: Registry::default(),
            }),
        }
    }

    pub fn config(&self) -> BusConfig {
        self.inner.config
    }

    pub fn is_closed(&self) -> bool {
        self.inner.closed.load(Ordering::Acquire)
    }

    /// Payload buffers created by publishes so far: one per publish in
    /// zero-copy mode, one per delivered subscriber in copy mode.
    pub fn payload_buffers(&self) -> u64 {
        self.inner.payload_buffers.load(Ordering::Relaxed)
    }

    /// Creates a subscription that sees messages published from now on.
    pub fn subscribe(&self, topic: &Topic, capacity: usize) -> Result<Subscription, BusError> {
        if capacity == 0 {
            return Err(BusError::InvalidCapacity);
        }
        if self.is_closed() {
            return Err(BusError::Closed);
        }
        let queue = Arc::new(SubQueue {
            capacity,
            state: Mutex::new(QueueState::default()),
            ready: Condvar::new(),
        });
        let mut topics = self.inner.topics.write();
        let subs = topics.entry(topic.clone()).or_default();
        subs.retain(|w| w.strong_count() > 0);
        subs.push(Arc::downgrade(&queue));
        Ok(Subscription {
            topic: topic.clone(),
            queue,
        })
    }

    /// Number of live subscriptions on `topic`.
    pub fn subscriber_count(&self, topic: &str) -> usize {
        self.inner
            .topics
            .read()
            .get(topic)
            .map_or(0, |subs| subs.iter().filter(|w| w.strong_count() > 0).count())
    }

    /// A publisher with its own sequence counter.
    pub fn publisher(&self, topic: &Topic) -> Publisher {
        Publisher {
            bus: self.clone(),
            topic: topic.clone(),
            state: PublisherState {
                id: self.inner.next_publisher.fetch_add(1, Ordering::Relaxed),
                sequence: Mutex::new(0),
            },
        }
    }

    /// Publishes through the bus-wide default publisher. Returns how many
    /// subscriptions the message was queued to.
    pub fn publish(&self, topic: &Topic, payload: impl Into<Bytes>) -> Result<usize, BusError> {
        self.publish_as(&self.inner.default_publisher, topic, payload.into())
    }

    fn publish_as(
        &self,
        publisher: &PublisherState,
        topic: &Topic,
        payload: Bytes,
    ) -> Result<usize, BusError> {
        if self.is_closed() {
            return Err(BusError::Closed);
        }
        let max = self.inner.config.max_payload;
        if payload.len() > max {
            return Err(BusError::PayloadTooLarge {
                size: payload.len(),
                max,
            });
        }
        let targets: Vec<Arc<SubQueue>> = match self.inner.topics.read().get(topic) {
            Some(subs) => subs.iter().filter_map(Weak::upgrade).collect(),
            None => Vec::new(),
        };

        // Holding the sequence lock across delivery keeps each publisher FIFO.
        let mut seq = publisher.sequence.lock();
        *seq += 1;
        let now = Instant::now();
        let make = |payload: Bytes| {
            Arc::new(Envelope {
                topic: topic.clone(),
                publisher: publisher.id,
                sequence: *seq,
                payload,
                published_at: now,
            })
        };
        if targets.is_empty() {
            return Ok(0);
        }
        match self.inner.config.fanout {
            FanoutMode::ZeroCopy => {
                let env = make(payload);
                self.inner.payload_buffers.fetch_add(1, Ordering::Relaxed);
                for q in &targets {
                    q.push(Arc::clone(&env));
                }
            }
            FanoutMode::PerSubscriberCopy => {
                let (first, rest) = targets.split_first().expect("non-empty");
                for q in rest {
                    q.push(make(Bytes::copy_from_slice(&payload)));
                }
                first.push(make(payload));
                self.inner
                    .payload_buffers
                    .fetch_add(targets.len() as u64, Ordering::Relaxed);
            }
        }
        Ok(targets.len())
    }

    /// Closes the bus: later publishes fail, blocked receivers wake with
    /// [`BusError::Closed`] once their queues are empty, and services stop.
    pub fn shutdown(&self) {
        if self.inner.closed.swap(true, Ordering::AcqRel) {
            return;
        }
        for subs in self.inner.topics.read().values() {
            for q in subs.iter().filter_map(Weak::upgrade) {
                q.close();
            }
        }
        self.inner.registry.clear();
    }
}

/// Publisher with its own monotonically increasing sequence numbers.
pub struct Publisher {
    bus: Bus,
    topic: Topic,
    state: PublisherState,
}

impl Publisher {
    pub fn id(&self) -> u64 {
        self.state.id
    }

    pub fn topic(&self) -> &Topic {
        &self.topic
    }

    pub fn publish(&self, payload: impl Into<Bytes>) -> Result<usize, BusError> {
        self.bus.publish_as(&self.state, &self.topic, payload.into())
    }
}

/// Receiving end of a topic. Dropping it unsubscribes.
#[derive(Debug)]
pub struct Subscription {
    topic: Topic,
    queue: Arc<SubQueue>,
}

impl Subscription {
    pub fn topic(&self) -> &Topic {
        &self.topic
    }

    pub fn capacity(&self) -> usize {
        self.queue.capacity
    }

    /// Messages discarded because the queue was full.
    pub fn dropped(&self) -> u64 {
        self.queue.state.lock().dropped
    }

    pub fn len(&self) -> usize {
        self.queue.state.lock().items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Waits up to `timeout` for the oldest queued envelope.
    pub fn next_message(&self, timeout: Duration) -> Result<Arc<Envelope>, BusError> {
        let deadline = Instant::now() + timeout;
        let mut st = self.queue.state.lock();
        loop {
            if let Some(env) = st.items.pop_front() {
                return Ok(env);
            }
            if st.closed {
                return Err(BusError::Closed);
            }
            if self.queue.ready.wait_until(&mut st, deadline).timed_out() {
                return match st.items.pop_front() {
                    Some(env) => Ok(env),
                    None if st.closed => Err(BusError::Closed),
                    None => Err(BusError::Timeout),
                };
            }
        }
    }

    pub fn try_next(&self) -> Option<Arc<Envelope>> {
        self.queue.state.lock().items.pop_front()
    }

    /// Takes everything currently queued.
    pub fn drain(&self) -> Vec<Arc<Envelope>> {
        self.queue.state.lock().items.drain(..).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn topic(name: &str) -> Topic {
        Topic::new(name).unwrap()
    }

    const SHORT: Duration = Duration::from_millis(10);

    #[test]
    fn no_subscribers_is_not_an_error() {
        let bus = Bus::default();
        assert_eq!(bus.publish(&topic("a"), &b"x"[..]).unwrap(), 0);
        assert_eq!(bus.payload_buffers(), 0);
    }

    #[test]
    fn subscribe_then_publish_delivers() {
        let bus = Bus::default();
        let t = topic("a");
        let s = bus.subscribe(&t, 4).unwrap();
        assert_eq!(bus.publish(&t, &b"hello"[..]).unwrap(), 1);
        let env = s.next_message(SHORT).unwrap();
        assert_eq!(&env.payload[..], b"hello");
        assert_eq!(env.topic, t);
        assert_eq!(env.sequence, 1);
    }

    #[test]
    fn no_replay_for_late_subscribers() {
        let bus = Bus::default();
        let t = topic("a");
        bus.publish(&t, &b"early"[..]).unwrap();
        let s = bus.subscribe(&t, 4).unwrap();
        assert_eq!(s.next_message(SHORT).unwrap_err(), BusError::Timeout);
    }

    #[test]
    fn fanout_to_all_subscribers() {
        let bus = Bus::default();
        let t = topic("a");
        let subs: Vec<_> = (0..2).map(|_| bus.subscribe(&t, 8).unwrap()).collect();
        for i in 0..3u8 {
            assert_eq!(bus.publish(&t, vec![i]).unwrap(), 2);
        }
        for s in &subs {
            let got: Vec<u8> = s.drain().iter().map(|e| e.payload[0]).collect();
            assert_eq!(got, vec![0, 1, 2]);
        }
    }

    #[test]
    fn full_queue_drops_oldest() {
        let bus = Bus::default();
        let t = topic("a");
        let s = bus.subscribe(&t, 4).unwrap();
        for i in 1..=5u8 {
            bus.publish(&t, vec![i]).unwrap();
        }
        assert_eq!(s.dropped(), 1);
        assert_eq!(s.len(), 4);
        let got: Vec<u8> = s.drain().iter().map(|e| e.payload[0]).collect();
        assert_eq!(got, vec![2, 3, 4, 5]);
    }

    #[test]
    fn topics_are_isolated() {
        let bus = Bus::default();
        let a = bus.subscribe(&topic("a"), 4).unwrap();
        let _ab = bus.subscribe(&topic("ab"), 4).unwrap();
        bus.publish(&topic("ab"), &b"x"[..]).unwrap();
        bus.publish(&topic("A"), &b"x"[..]).unwrap();
        assert!(a.is_empty());
    }

    #[test]
    fn oversized_payload_and_closed_bus_are_rejected() {
        let bus = Bus::new(BusConfig {
            max_payload: 8,
            ..BusConfig::default()
        });
        let t = topic("a");
        assert!(matches!(
            bus.publish(&t, vec![0; 9]),
            Err(BusError::PayloadTooLarge { size: 9, max: 8 })
        ));
        assert_eq!(bus.subscribe(&t, 0).unwrap_err(), BusError::InvalidCapacity);
        bus.shutdown();
        assert_eq!(bus.publish(&t, vec![0]).unwrap_err(), BusError::Closed);
        assert_eq!(bus.subscribe(&t, 1).unwrap_err(), BusError::Closed);
    }

    #[test]
    fn shutdown_wakes_blocked_receivers() {
        let bus = Bus::default();
        let s = bus.subscribe(&topic("a"), 4).unwrap();
        let waiter = std::thread::spawn(move || {
            let start = Instant::now();
            (s.next_message(Duration::from_secs(10)), start.elapsed())
        });
        std::thread::sleep(Duration::from_millis(50));
        bus.shutdown();
        let (res, waited) = waiter.join().unwrap();
        assert_eq!(res.unwrap_err(), BusError::Closed);
        assert!(waited < Duration::from_secs(5));
    }

    #[test]
    fn queued_messages_survive_shutdown() {
        let bus = Bus::default();
        let t = topic("a");
        let s = bus.subscribe(&t, 4).unwrap();
        bus.publish(&t, &b"last"[..]).unwrap();
        bus.shutdown();
        assert_eq!(&s.next_message(SHORT).unwrap().payload[..], b"last");
        assert_eq!(s.next_message(SHORT).unwrap_err(), BusError::Closed);
    }

    #[test]
    fn dropped_subscription_unsubscribes() {
        let bus = Bus::default();
        let t = topic("a");
        let s = bus.subscribe(&t, 4).unwrap();
        assert_eq!(bus.subscriber_count("a"), 1);
        drop(s);
        assert_eq!(bus.subscriber_count("a"), 0);
        assert_eq!(bus.publish(&t, vec![1]).unwrap(), 0);
    }

    #[test]
    fn zero_copy_shares_one_buffer() {
        let bus = Bus::default();
        let t = topic("a");
        let subs: Vec<_> = (0..3).map(|_| bus.subscribe(&t, 200).unwrap()).collect();
        for i in 0..100u32 {
            bus.publish(&t, i.to_be_bytes().to_vec()).unwrap();
        }
        assert_eq!(bus.payload_buffers(), 100);
        let received: Vec<Vec<Arc<Envelope>>> = subs.iter().map(Subscription::drain).collect();
        for r in &received {
            assert_eq!(r.len(), 100);
            let seqs: Vec<u64> = r.iter().map(|e| e.sequence).collect();
            assert_eq!(seqs, (1..=100).collect::<Vec<_>>());
        }
        for i in 0..100 {
            let p = received[0][i].payload.as_ptr();
            assert!(received.iter().all(|r| r[i].payload.as_ptr() == p));
        }
    }

    #[test]
    fn copy_mode_gives_each_subscriber_its_own_buffer() {
        let bus = Bus::new(BusConfig {
            fanout: FanoutMode::PerSubscriberCopy,
            ..BusConfig::default()
        });
        let t = topic("a");
        let subs: Vec<_> = (0..3).map(|_| bus.subscribe(&t, 4).unwrap()).collect();
        bus.publish(&t, vec![9; 16]).unwrap();
        assert_eq!(bus.payload_buffers(), 3);
        let ptrs: Vec<_> = subs
            .iter()
            .map(|s| s.try_next().unwrap().payload.as_ptr())
            .collect();
        assert!(ptrs[0] != ptrs[1] && ptrs[1] != ptrs[2] && ptrs[0] != ptrs[2]);
    }

    #[test]
    fn publishers_number_independently() {
        let bus = Bus::default();
        let t = topic("a");
        let s = bus.subscribe(&t, 16).unwrap();
        let p1 = bus.publisher(&t);
        let p2 = bus.publisher(&t);
        assert_ne!(p1.id(), p2.id());
        p1.publish(vec![1]).unwrap();
        p2.publish(vec![2]).unwrap();
        p1.publish(vec![3]).unwrap();
        let seen: Vec<(u64, u64)> = s.drain().iter().map(|e| (e.publisher, e.sequence)).collect();
        assert_eq!(seen, vec![(p1.id(), 1), (p2.id(), 1), (p1.id(), 2)]);
    }

    #[test]
    fn timeout_is_roughly_honoured() {
        let bus = Bus::default();
        let s = bus.subscribe(&topic("a"), 1).unwrap();
        let start = Instant::now();
        assert_eq!(s.next_message(SHORT).unwrap_err(), BusError::Timeout);
        let waited = start.elapsed();
        assert!(waited >= SHORT && waited < Duration::from_millis(500), "{waited:?}");
    }
}
