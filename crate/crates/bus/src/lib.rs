//! Lightweight publish/subscribe bus with services, actions and a framed
//! TCP transport.
//!
//! ```
//! use edgekit_bus::{Bus, Topic};
//! use std::time::Duration;
//!
//! let bus = Bus::default();
//! let imu = Topic::new("imu").unwrap();
//! let sub = bus.subscribe(&imu, 16).unwrap();
//! bus.publish(&imu, &b"sample"[..]).unwrap();
//! let env = sub.next_message(Duration::from_millis(100)).unwrap();
//! assert_eq!(&env.payload[..], b"sample");
//! ```

pub mod bench;
mod bus;
pub mod rpc;
pub mod tcp;
mod topic;
pub mod wire;

use std::io;

pub use bus::{
    Bus, BusConfig, Envelope, FanoutMode, Publisher, Subscription, DEFAULT_MAX_PAYLOAD,
};
pub use bytes::Bytes;
pub use rpc::{FeedbackSender, ServiceHandle};
pub use tcp::TcpNode;
pub use topic::{Topic, MAX_TOPIC_LEN};
pub use wire::FrameError;

/// Environment variable naming the default TCP bus address.
pub const ADDR_ENV: &str = "PIEDGE_BUS_ADDR";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BusError {
    #[error("bus is shut down")]
    Closed,
    #[error("payload of {size} bytes exceeds the limit of {max}")]
    PayloadTooLarge { size: usize, max: usize },
    #[error("invalid topic: {0}")]
    InvalidTopic(String),
    #[error("subscription capacity must be at least 1")]
    InvalidCapacity,
    #[error("timed out")]
    Timeout,
    #[error("no handler registered on topic {0}")]
    NotFound(String),
    #[error("a handler is already registered on topic {0}")]
    AlreadyRegistered(String),
    #[error("handler failed: {0}")]
    HandlerFailed(String),
    #[error("i/o error ({kind:?}): {message}")]
    Io { kind: io::ErrorKind, message: String },
    #[error(transparent)]
    Frame(#[from] FrameError),
}

impl From<io::Error> for BusError {
    fn from(e: io::Error) -> Self {
        BusError::Io {
            kind: e.kind(),
            message: e.to_string(),
        }
    }
}
