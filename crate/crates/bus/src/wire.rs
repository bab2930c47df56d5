//! Length-prefixed frames for the TCP transport.
//!
//! ```text
//! +-----------------+-----------------+-------------+---------------+
//! | frame_len: u32  | topic_len: u16  | topic bytes | payload bytes |
//! +-----------------+-----------------+-------------+---------------+
//! ```
//!
//! All integers are big-endian. `frame_len` counts the bytes after itself,
//! so `frame_len = 2 + topic_len + payload_len`. Each side of a connection
//! writes the 2-byte [`MAGIC`] once before its first frame.

use std::io::{self, Read, Write};

use crate::topic::{Topic, MAX_TOPIC_LEN};

pub const MAGIC: [u8; 2] = [0xED, 0x6E];

/// Bytes before the topic: length prefix plus topic length.
pub const HEADER_LEN: usize = 6;

/// Largest frame a reader accepts by default (64 MiB payload plus headers).
pub const DEFAULT_MAX_FRAME: usize = 64 * 1024 * 1024 + 2 + MAX_TOPIC_LEN;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("frame truncated: need {needed} bytes, have {available}")]
    Truncated { needed: usize, available: usize },
    #[error("frame length {0} is too short to hold a topic length")]
    TooShort(u32),
    #[error("topic length {topic_len} exceeds frame body of {body} bytes")]
    TopicOverrun { topic_len: usize, body: usize },
    #[error("topic length {0} exceeds the 255-byte limit")]
    TopicTooLong(usize),
    #[error("invalid topic: {0}")]
    BadTopic(String),
    #[error("frame of {size} bytes exceeds the limit of {max}")]
    TooLarge { size: usize, max: usize },
    #[error("{0} trailing bytes after frame")]
    Trailing(usize),
    #[error("bad connection magic {0:02x?}")]
    BadMagic([u8; 2]),
}

impl From<FrameError> for io::Error {
    fn from(e: FrameError) -> Self {
        io::Error::new(io::ErrorKind::InvalidData, e)
    }
}

/// Total encoded size of a frame.
pub fn encoded_len(topic: &str, payload_len: usize) -> usize {
    HEADER_LEN + topic.len() + payload_len
}

/// Appends one encoded frame to `out`.
pub fn encode_frame_into(out: &mut Vec<u8>, topic: &str, payload: &[u8]) -> Result<(), FrameError> {
    if topic.is_empty() {
        return Err(FrameError::BadTopic("empty topic".into()));
    }
    if topic.len() > MAX_TOPIC_LEN {
        return Err(FrameError::TopicTooLong(topic.len()));
    }
    let body = 2 + topic.len() + payload.len();
    let frame_len = u32::try_from(body).map_err(|_| FrameError::TooLarge {
        size: body,
        max: u32::MAX as usize,
    })?;
    out.reserve(4 + body);
    out.extend_from_slice(&frame_len.to_be_bytes());
    out.extend_from_slice(&(topic.len() as u16).to_be_bytes());
    out.extend_from_slice(topic.as_bytes());
    out.extend_from_slice(payload);
    Ok(())
}

pub fn encode_frame(topic: &str, payload: &[u8]) -> Result<Vec<u8>, FrameError> {
    let mut out = Vec::with_capacity(encoded_len(topic, payload.len()));
    encode_frame_into(&mut out, topic, payload)?;
    Ok(out)
}

/// Parses the body that follows the length prefix.
fn parse_body(body: &[u8]) -> Result<(&str, &[u8]), FrameError> {
    if body.len() < 2 {
        return Err(FrameError::TooShort(body.len() as u32));
    }
    let topic_len = u16::from_be_bytes([body[0], body[1]]) as usize;
    if topic_len > MAX_TOPIC_LEN {
        return Err(FrameError::TopicTooLong(topic_len));
    }
    if 2 + topic_len > body.len() {
        return Err(FrameError::TopicOverrun {
            topic_len,
            body: body.len(),
        });
    }
    let topic = std::str::from_utf8(&body[2..2 + topic_len])
        .map_err(|e| FrameError::BadTopic(e.to_string()))?;
    if topic.is_empty() {
        return Err(FrameError::BadTopic("empty topic".into()));
    }
    Ok((topic, &body[2 + topic_len..]))
}

/// Splits the first complete frame off `buf`. Returns the topic, payload
/// and the number of bytes consumed, or a `Truncated` error if more input
/// is needed.
pub fn split_frame(buf: &[u8]) -> Result<(&str, &[u8], usize), FrameError> {
    if buf.len() < 4 {
        return Err(FrameError::Truncated {
            needed: 4,
            available: buf.len(),
        });
    }
    let frame_len = u32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]) as usize;
    let total = 4 + frame_len;
    if buf.len() < total {
        return Err(FrameError::Truncated {
            needed: total,
            available: buf.len(),
        });
    }
    let (topic, payload) = parse_body(&buf[4..total])?;
    Ok((topic, payload, total))
}

/// Decodes exactly one frame occupying all of `buf`.
pub fn decode_frame(buf: &[u8]) -> Result<(Topic, Vec<u8>), FrameError> {
    let (topic, payload, used) = split_frame(buf)?;
    if used != buf.len() {
        return Err(FrameError::Trailing(buf.len() - used));
    }
    let topic = Topic::new(topic).map_err(|e| FrameError::BadTopic(e.to_string()))?;
    Ok((topic, payload.to_vec()))
}

pub fn write_magic<W: Write>(w: &mut W) -> io::Result<()> {
    w.write_all(&MAGIC)
}

pub fn read_magic<R: Read>(r: &mut R) -> io::Result<()> {
    let mut m = [0u8; 2];
    r.read_exact(&mut m)?;
    if m != MAGIC {
        return Err(FrameError::BadMagic(m).into());
    }
    Ok(())
}

/// Reads one whole frame (prefix included) into `buf`, reusing its
/// allocation. Returns `Ok(false)` on a clean end of stream before a frame.
pub fn read_frame_into<R: Read>(r: &mut R, buf: &mut Vec<u8>, max_frame: usize) -> io::Result<bool> {
    let mut prefix = [0u8; 4];
    match r.read_exact(&mut prefix) {
        Ok(()) => {}
        Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(false),
        Err(e) => return Err(e),
    }
    let frame_len = u32::from_be_bytes(prefix) as usize;
    if frame_len > max_frame {
        return Err(FrameError::TooLarge {
            size: frame_len,
            max: max_frame,
        }
        .into());
    }
    buf.clear();
    buf.extend_from_slice(&prefix);
    buf.resize(4 + frame_len, 0);
    r.read_exact(&mut buf[4..])?;
    parse_body(&buf[4..])?;
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn imu_frame_layout() {
        let f = encode_frame("imu", b"abcdef").unwrap();
        assert_eq!(f.len(), 15);
        assert_eq!(&f[..4], &11u32.to_be_bytes());
        assert_eq!(&f[4..6], &3u16.to_be_bytes());
        assert_eq!(&f[6..9], b"imu");
        assert_eq!(&f[9..], b"abcdef");
        let (t, p) = decode_frame(&f).unwrap();
        assert_eq!((t.as_str(), p.as_slice()), ("imu", &b"abcdef"[..]));
    }

    #[test]
    fn empty_payload() {
        let f = encode_frame("cam/left", b"").unwrap();
        assert_eq!(u32::from_be_bytes(f[..4].try_into().unwrap()), 2 + 8);
        assert!(decode_frame(&f).unwrap().1.is_empty());
    }

    #[test]
    fn decode_errors() {
        let f = encode_frame("imu", b"abcdef").unwrap();
        assert!(matches!(
            decode_frame(&f[..10]),
            Err(FrameError::Truncated { needed: 15, available: 10 })
        ));
        assert!(matches!(decode_frame(&f[..2]), Err(FrameError::Truncated { .. })));

        let mut overrun = f.clone();
        overrun[4..6].copy_from_slice(&50u16.to_be_bytes());
        assert!(matches!(decode_frame(&overrun), Err(FrameError::TopicOverrun { .. })));

        let mut long = f.clone();
        long[4..6].copy_from_slice(&300u16.to_be_bytes());
        assert!(matches!(decode_frame(&long), Err(FrameError::TopicTooLong(300))));

        let mut extra = f.clone();
        extra.push(0);
        assert_eq!(decode_frame(&extra), Err(FrameError::Trailing(1)));

        let short = [0, 0, 0, 1, 0];
        assert!(matches!(decode_frame(&short), Err(FrameError::TooShort(1))));

        let mut bad_utf8 = f.clone();
        bad_utf8[6] = 0xff;
        assert!(matches!(decode_frame(&bad_utf8), Err(FrameError::BadTopic(_))));

        let empty_topic = [0, 0, 0, 2, 0, 0];
        assert!(matches!(decode_frame(&empty_topic), Err(FrameError::BadTopic(_))));
    }

    #[test]
    fn encode_rejects_bad_topics() {
        assert!(encode_frame("", b"x").is_err());
        assert_eq!(
            encode_frame(&"t".repeat(256), b"x"),
            Err(FrameError::TopicTooLong(256))
        );
    }

    #[test]
    fn split_frames_from_a_stream() {
        let mut buf = encode_frame("a", b"1").unwrap();
        buf.extend(encode_frame("bb", b"22").unwrap());
        let (t, p, used) = split_frame(&buf).unwrap();
        assert_eq!((t, p), ("a", &b"1"[..]));
        let (t, p, rest) = split_frame(&buf[used..]).unwrap();
        assert_eq!((t, p), ("bb", &b"22"[..]));
        assert_eq!(used + rest, buf.len());
    }

    #[test]
    fn stream_reader() {
        let mut stream = MAGIC.to_vec();
        stream.extend(encode_frame("x", &[7; 300]).unwrap());
        stream.extend(encode_frame("y", b"").unwrap());
        let mut r = stream.as_slice();
        read_magic(&mut r).unwrap();
        let mut buf = Vec::new();
        assert!(read_frame_into(&mut r, &mut buf, DEFAULT_MAX_FRAME).unwrap());
        assert_eq!(split_frame(&buf).unwrap().1.len(), 300);
        assert!(read_frame_into(&mut r, &mut buf, DEFAULT_MAX_FRAME).unwrap());
        assert_eq!(split_frame(&buf).unwrap().0, "y");
        assert!(!read_frame_into(&mut r, &mut buf, DEFAULT_MAX_FRAME).unwrap());

        let big = encode_frame("z", &[0; 100]).unwrap();
        assert!(read_frame_into(&mut big.as_slice(), &mut buf, 50).is_err());
        assert!(read_magic(&mut &[0u8, 1][..]).is_err());
    }
}
