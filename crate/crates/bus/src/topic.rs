use std::borrow::Borrow;
use std::fmt;
use std::sync::Arc;

use crate::BusError;

/// Longest topic name in bytes; the wire format reserves 16 bits but names
/// are capped at 255.
pub const MAX_TOPIC_LEN: usize = 255;

/// A non-empty UTF-8 topic name of at most 255 bytes. Cheap to clone.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Topic(Arc<str>);

impl Topic {
    pub fn new(name: &str) -> Result<Self, BusError> {
        if name.is_empty() {
            return Err(BusError::InvalidTopic("topic must not be empty".into()));
        }
        if name.len() > MAX_TOPIC_LEN {
            return Err(BusError::InvalidTopic(format!(
                "topic is {} bytes, limit is {MAX_TOPIC_LEN}",
                name.len()
            )));
        }
        Ok(Self(Arc::from(name)))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl Borrow<str> for Topic {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl AsRef<str> for Topic {
    fn as_ref(&self) -> &str {
        &self.0
    }
}

impl TryFrom<&str> for Topic {
    type Error = BusError;

    fn try_from(s: &str) -> Result<Self, Self::Error> {
        Topic::new(s)
    }
}

impl fmt::Display for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Debug for Topic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Topic({:?})", &*self.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn length_limits() {
        assert!(Topic::new("").is_err());
        assert!(Topic::new(&"x".repeat(255)).is_ok());
        assert!(Topic::new(&"x".repeat(256)).is_err());
        // 2-byte characters count as two.
        assert!(Topic::new(&"é".repeat(128)).is_err());
        assert_eq!(Topic::new("imu").unwrap().as_str(), "imu");
    }
}
