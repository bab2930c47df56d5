//! Request/response services and action servers.
//!
//! Each registered handler runs on its own worker thread and takes requests
//! from a channel, one at a time. Replies travel back on a channel owned by
//! the caller, so a response only ever reaches the call that asked for it.

use std::any::Any;
use std::collections::HashMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::{Arc, Weak};
use std::thread;
use std::time::{Duration, Instant};

use bytes::Bytes;
use crossbeam_channel::{bounded, unbounded, Receiver, RecvTimeoutError, Sender};
use parking_lot::Mutex;

use crate::bus::{Bus, Inner};
use crate::{BusError, Topic};

type ServiceReply = Result<Bytes, String>;

struct ServiceRequest {
    body: Bytes,
    reply: Sender<ServiceReply>,
}

enum ActionEvent {
    Feedback(Bytes),
    Done(Result<Bytes, String>),
}

struct ActionRequest {
    goal: Bytes,
    events: Sender<ActionEvent>,
}

enum Endpoint {
    Service(Sender<ServiceRequest>),
    Action(Sender<ActionRequest>),
}

#[derive(Default)]
pub(crate) struct Registry {
    endpoints: Mutex<HashMap<Topic, (u64, Endpoint)>>,
    next_id: Mutex<u64>,
}

impl Registry {
    fn insert(&self, topic: &Topic, endpoint: Endpoint) -> Result<u64, BusError> {
        let mut map = self.endpoints.lock();
        if map.contains_key(topic) {
            return Err(BusError::AlreadyRegistered(topic.to_string()));
        }
        let id = {
            let mut next = self.next_id.lock();
            *next += 1;
            *next
        };
        map.insert(topic.clone(), (id, endpoint));
        Ok(id)
    }

    fn remove(&self, topic: &Topic, id: u64) {
        let mut map = self.endpoints.lock();
        if map.get(topic).is_some_and(|(cur, _)| *cur == id) {
            map.remove(topic);
        }
    }

    /// Drops every request sender so the workers exit.
    pub(crate) fn clear(&self) {
        self.endpoints.lock().clear();
    }
}

/// Keeps a service or action registered. Dropping it unregisters the
/// handler; a request already being handled still completes.
pub struct ServiceHandle {
    bus: Weak<Inner>,
    topic: Topic,
    id: u64,
}

impl ServiceHandle {
    pub fn topic(&self) -> &Topic {
        &self.topic
    }
}

impl Drop for ServiceHandle {
    fn drop(&mut self) {
        if let Some(inner) = self.bus.upgrade() {
            inner.registry.remove(&self.topic, self.id);
        }
    }
}

impl std::fmt::Debug for ServiceHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ServiceHandle").field("topic", &self.topic).finish()
    }
}

/// Passed to action handlers for streaming progress to the caller.
pub struct FeedbackSender {
    events: Sender<ActionEvent>,
}

impl FeedbackSender {
    /// Sends one feedback message. Returns false once the caller has gone away.
    pub fn send(&self, feedback: impl Into<Bytes>) -> bool {
        self.events.send(ActionEvent::Feedback(feedback.into())).is_ok()
    }
}

fn panic_message(p: Box<dyn Any + Send>) -> String {
    let what = p
        .downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown panic".into());
    format!("handler panicked: {what}")
}

fn remaining(deadline: Instant) -> Duration {
    deadline.saturating_duration_since(Instant::now())
}

impl Bus {
    fn handle(&self, topic: &Topic, id: u64) -> ServiceHandle {
        ServiceHandle {
            bus: Arc::downgrade(&self.inner),
            topic: topic.clone(),
            id,
        }
    }

    /// Registers a request/response handler on `topic`.
    pub fn serve<F>(&self, topic: &Topic, handler: F) -> Result<ServiceHandle, BusError>
    where
        F: Fn(Bytes) -> Result<Bytes, String> + Send + 'static,
    {
        if self.is_closed() {
            return Err(BusError::Closed);
        }
        let (tx, rx) = unbounded::<ServiceRequest>();
        let id = self.inner.registry.insert(topic, Endpoint::Service(tx))?;
        thread::Builder::new()
            .name(format!("service:{topic}"))
            .spawn(move || {
                for req in rx {
                    let out = catch_unwind(AssertUnwindSafe(|| handler(req.body)))
                        .unwrap_or_else(|p| Err(panic_message(p)));
                    let _ = req.reply.send(out);
                }
            })
            .map_err(BusError::from)?;
        Ok(self.handle(topic, id))
    }

    /// Sends `request` to the service on `topic` and waits for its response.
    pub fn call_service(
        &self,
        topic: &Topic,
        request: impl Into<Bytes>,
        timeout: Duration,
    ) -> Result<Bytes, BusError> {
        if self.is_closed() {
            return Err(BusError::Closed);
        }
        let sender = match self.inner.registry.endpoints.lock().get(topic) {
            Some((_, Endpoint::Service(tx))) => tx.clone(),
            _ => return Err(BusError::NotFound(topic.to_string())),
        };
        let (reply, rx) = bounded(1);
        sender
            .send(ServiceRequest {
                body: request.into(),
                reply,
            })
            .map_err(|_| BusError::NotFound(topic.to_string()))?;
        match rx.recv_timeout(timeout) {
            Ok(Ok(body)) => Ok(body),
            Ok(Err(msg)) => Err(BusError::HandlerFailed(msg)),
            Err(RecvTimeoutError::Timeout) => Err(BusError::Timeout),
            Err(RecvTimeoutError::Disconnected) => Err(BusError::Closed),
        }
    }

    /// Registers an action handler on `topic`. The handler may send any
    /// number of feedback messages before returning its final result.
    pub fn serve_action<F>(&self, topic: &Topic, handler: F) -> Result<ServiceHandle, BusError>
    where
        F: Fn(Bytes, &FeedbackSender) -> Result<Bytes, String> + Send + 'static,
    {
        if self.is_closed() {
            return Err(BusError::Closed);
        }
        let (tx, rx) = unbounded::<ActionRequest>();
        let id = self.inner.registry.insert(topic, Endpoint::Action(tx))?;
        thread::Builder::new()
            .name(format!("action:{topic}"))
            .spawn(move || {
                for req in rx {
                    let feedback = FeedbackSender {
                        events: req.events.clone(),
                    };
                    let out = catch_unwind(AssertUnwindSafe(|| handler(req.goal, &feedback)))
                        .unwrap_or_else(|p| Err(panic_message(p)));
                    let _ = req.events.send(ActionEvent::Done(out));
                }
            })
            .map_err(BusError::from)?;
        Ok(self.handle(topic, id))
    }

    /// Runs the action on `topic`, passing each feedback message to `sink` in
    /// the order it was sent, and returns the final result.
    pub fn action_execute(
        &self,
        topic: &Topic,
        goal: impl Into<Bytes>,
        mut sink: impl FnMut(Bytes),
        timeout: Duration,
    ) -> Result<Bytes, BusError> {
        if self.is_closed() {
            return Err(BusError::Closed);
        }
        let sender = match self.inner.registry.endpoints.lock().get(topic) {
            Some((_, Endpoint::Action(tx))) => tx.clone(),
            _ => return Err(BusError::NotFound(topic.to_string())),
        };
        let (events, rx): (Sender<ActionEvent>, Receiver<ActionEvent>) = unbounded();
        sender
            .send(ActionRequest {
                goal: goal.into(),
                events,
            })
            .map_err(|_| BusError::NotFound(topic.to_string()))?;
        let deadline = Instant::now() + timeout;
        loop {
            match rx.recv_timeout(remaining(deadline)) {
                Ok(ActionEvent::Feedback(f)) => sink(f),
                Ok(ActionEvent::Done(Ok(result))) => return Ok(result),
                Ok(ActionEvent::Done(Err(msg))) => return Err(BusError::HandlerFailed(msg)),
                Err(RecvTimeoutError::Timeout) => return Err(BusError::Timeout),
                Err(RecvTimeoutError::Disconnected) => return Err(BusError::Closed),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WAIT: Duration = Duration::from_secs(5);

    fn topic(name: &str) -> Topic {
        Topic::new(name).unwrap()
    }

    #[test]
    fn echo_service() {
        let bus = Bus::default();
        let t = topic("echo");
        let _h = bus.serve(&t, Ok).unwrap();
        assert_eq!(&bus.call_service(&t, &b"ping"[..], WAIT).unwrap()[..], b"ping");
    }

    #[test]
    fn missing_and_duplicate_handlers() {
        let bus = Bus::default();
        let t = topic("svc");
        assert_eq!(
            bus.call_service(&t, Bytes::new(), WAIT).unwrap_err(),
            BusError::NotFound("svc".into())
        );
        let h = bus.serve(&t, Ok).unwrap();
        assert!(matches!(bus.serve(&t, Ok), Err(BusError::AlreadyRegistered(_))));
        // A service is not an action.
        assert!(matches!(
            bus.action_execute(&t, Bytes::new(), |_| {}, WAIT),
            Err(BusError::NotFound(_))
        ));
        drop(h);
        assert!(matches!(
            bus.call_service(&t, Bytes::new(), WAIT),
            Err(BusError::NotFound(_))
        ));
        let _again = bus.serve(&t, Ok).unwrap();
    }

    #[test]
    fn slow_service_times_out() {
        let bus = Bus::default();
        let t = topic("slow");
        let _h = bus
            .serve(&t, |b| {
                thread::sleep(Duration::from_millis(200));
                Ok(b)
            })
            .unwrap();
        let err = bus
            .call_service(&t, Bytes::new(), Duration::from_millis(20))
            .unwrap_err();
        assert_eq!(err, BusError::Timeout);
    }

    #[test]
    fn service_errors_and_panics_are_reported() {
        let bus = Bus::default();
        let t = topic("fail");
        let _h = bus
            .serve(&t, |b| {
                if b.is_empty() {
                    panic!("boom");
                }
                Err("bad request".into())
            })
            .unwrap();
        assert_eq!(
            bus.call_service(&t, &b"x"[..], WAIT).unwrap_err(),
            BusError::HandlerFailed("bad request".into())
        );
        let err = bus.call_service(&t, Bytes::new(), WAIT).unwrap_err();
        assert!(matches!(err, BusError::HandlerFailed(m) if m.contains("boom")));
        // The worker survives a panic.
        assert!(bus.call_service(&t, &b"y"[..], WAIT).is_err());
    }

    #[test]
    fn concurrent_callers_get_their_own_responses() {
        let bus = Bus::default();
        let t = topic("double");
        let _h = bus
            .serve(&t, |b| Ok(Bytes::from(b.iter().map(|x| x * 2).collect::<Vec<u8>>())))
            .unwrap();
        let workers: Vec<_> = (0..8u8)
            .map(|i| {
                let bus = bus.clone();
                let t = t.clone();
                thread::spawn(move || {
                    for j in 0..20u8 {
                        let r = bus.call_service(&t, vec![i, j], WAIT).unwrap();
                        assert_eq!(&r[..], &[i * 2, j * 2]);
                    }
                })
            })
            .collect();
        for w in workers {
            w.join().unwrap();
        }
    }

    #[test]
    fn action_feedback_arrives_in_order() {
        let bus = Bus::default();
        let t = topic("nav");
        let _h = bus
            .serve_action(&t, |_goal, fb| {
                for p in ["25%", "50%", "75%"] {
                    fb.send(p.as_bytes().to_vec());
                }
                Ok(Bytes::from_static(b"done"))
            })
            .unwrap();
        let mut seen = Vec::new();
        let result = bus
            .action_execute(&t, Bytes::new(), |f| seen.push(f), WAIT)
            .unwrap();
        assert_eq!(&result[..], b"done");
        assert_eq!(seen, vec!["25%", "50%", "75%"]);
    }

    #[test]
    fn action_without_feedback() {
        let bus = Bus::default();
        let t = topic("quick");
        let _h = bus.serve_action(&t, |goal, _| Ok(goal)).unwrap();
        let mut count = 0;
        let result = bus.action_execute(&t, &b"g"[..], |_| count += 1, WAIT).unwrap();
        assert_eq!((&result[..], count), (&b"g"[..], 0));
    }

    #[test]
    fn aborted_action_stops_feedback() {
        let bus = Bus::default();
        let t = topic("abort");
        let _h = bus
            .serve_action(&t, |_, fb| {
                fb.send(&b"started"[..]);
                Err("obstacle".into())
            })
            .unwrap();
        let mut seen = Vec::new();
        let err = bus
            .action_execute(&t, Bytes::new(), |f| seen.push(f), WAIT)
            .unwrap_err();
        assert_eq!(err, BusError::HandlerFailed("obstacle".into()));
        assert_eq!(seen, vec!["started"]);
    }

    #[test]
    fn shutdown_stops_services() {
        let bus = Bus::default();
        let t = topic("echo");
        let _h = bus.serve(&t, Ok).unwrap();
        bus.shutdown();
        assert_eq!(bus.call_service(&t, Bytes::new(), WAIT).unwrap_err(), BusError::Closed);
        assert_eq!(bus.serve(&topic("other"), Ok).unwrap_err(), BusError::Closed);
    }
}
