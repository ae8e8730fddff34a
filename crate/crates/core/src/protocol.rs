//! Message schema, node identities, and the canonical wire encoding.
//!
//! A [`Message`] is the unit of communication: a type tag, a per-sender
//! monotone sequence number, a [`Content`] body, and sender/receiver
//! identities. `(sender, seq)` identifies one logical broadcast; all
//! copies of an honest broadcast carry identical content.
//!
//! The encoding is canonical (one valid byte string per message) so that
//! golden traces diff cleanly and decode errors are testable. It is an
//! artifact of this simulator, not an interoperability format.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// Opaque identity of a network endpoint.
///
/// Identities carry no role information: nothing about the numeric value
/// reveals whether an id belongs to a parent or a child, or which ids
/// form a pair. The simulator assigns ids as a seeded permutation, so
/// even the ordering of ids is uncorrelated with roles.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct NodeId(u32);

impl NodeId {
    pub const fn new(raw: u32) -> Self {
        NodeId(raw)
    }

    pub const fn as_u32(self) -> u32 {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Globally unique transaction identifier.
///
/// Assigned by the originating node as its own id plus the sequence
/// number the transaction was first broadcast under, so transactions are
/// identifiable without any coordination.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct TxId {
    pub origin: NodeId,
    pub nonce: u64,
}

impl fmt::Display for TxId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tx({}:{})", self.origin, self.nonce)
    }
}

/// A vote verdict on one transaction.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Verdict {
    Valid,
    NotValid,
}

/// The three wire-level message kinds.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum MessageType {
    Transaction,
    Vote,
    Blacklist,
}

impl fmt::Display for MessageType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MessageType::Transaction => "transaction",
            MessageType::Vote => "vote",
            MessageType::Blacklist => "blacklist",
        };
        f.write_str(s)
    }
}

/// Message body. The variant always matches the wire type tag; the pair
/// is kept in one enum so a mismatch is unrepresentable in memory.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Content {
    /// A transaction: payload symbol drawn from an alphabet of size `k`.
    Transaction { tx: TxId, payload: u32 },
    /// A verdict on a previously seen transaction.
    Vote { tx: TxId, verdict: Verdict },
    /// A full blacklist snapshot (never a delta).
    Blacklist { members: BTreeSet<NodeId> },
}

impl Content {
    pub fn msg_type(&self) -> MessageType {
        match self {
            Content::Transaction { .. } => MessageType::Transaction,
            Content::Vote { .. } => MessageType::Vote,
            Content::Blacklist { .. } => MessageType::Blacklist,
        }
    }
}

/// One point-to-point copy of a broadcast.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Message {
    pub seq: u64,
    pub content: Content,
    pub sender: NodeId,
    pub receiver: NodeId,
}

impl Message {
    pub fn msg_type(&self) -> MessageType {
        self.content.msg_type()
    }
}

/// Errors produced by [`decode_message`].
#[derive(Clone, PartialEq, Eq, Debug, Error)]
pub enum DecodeError {
    #[error("truncated input: needed {needed} more bytes")]
    Truncated { needed: usize },
    #[error("unknown message type tag {0}")]
    UnknownType(u8),
    #[error("unknown verdict tag {0}")]
    UnknownVerdict(u8),
    #[error("content does not match message type: {0}")]
    ContentMismatch(&'static str),
    #[error("{0} trailing bytes after message end")]
    TrailingBytes(usize),
}

const TAG_TRANSACTION: u8 = 0;
const TAG_VOTE: u8 = 1;
const TAG_BLACKLIST: u8 = 2;

const VERDICT_VALID: u8 = 1;
const VERDICT_NOT_VALID: u8 = 0;

/// Canonically encodes a message.
///
/// Layout (all integers big-endian): type tag (1), seq (8), content
/// length (4), content body, sender (4), receiver (4). Blacklist members
/// are emitted in strictly ascending id order.
pub fn encode_message(m: &Message) -> Vec<u8> {
    let mut body = Vec::with_capacity(16);
    match &m.content {
        Content::Transaction { tx, payload } => {
            body.extend_from_slice(&tx.origin.0.to_be_bytes());
            body.extend_from_slice(&tx.nonce.to_be_bytes());
            body.extend_from_slice(&payload.to_be_bytes());
        }
        Content::Vote { tx, verdict } => {
            body.extend_from_slice(&tx.origin.0.to_be_bytes());
            body.extend_from_slice(&tx.nonce.to_be_bytes());
            body.push(match verdict {
                Verdict::Valid => VERDICT_VALID,
                Verdict::NotValid => VERDICT_NOT_VALID,
            });
        }
        Content::Blacklist { members } => {
            body.extend_from_slice(&(members.len() as u32).to_be_bytes());
            for id in members {
                body.extend_from_slice(&id.0.to_be_bytes());
            }
        }
    }

    let mut out = Vec::with_capacity(1 + 8 + 4 + body.len() + 8);
    out.push(match m.msg_type() {
        MessageType::Transaction => TAG_TRANSACTION,
        MessageType::Vote => TAG_VOTE,
        MessageType::Blacklist => TAG_BLACKLIST,
    });
    out.extend_from_slice(&m.seq.to_be_bytes());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out.extend_from_slice(&m.sender.0.to_be_bytes());
    out.extend_from_slice(&m.receiver.0.to_be_bytes());
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], DecodeError> {
        if self.buf.len() - self.pos < n {
            return Err(DecodeError::Truncated {
                needed: n - (self.buf.len() - self.pos),
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, DecodeError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, DecodeError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, DecodeError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Decodes the unique message encoding to `b`, rejecting anything that
/// [`encode_message`] could not have produced.
pub fn decode_message(b: &[u8]) -> Result<Message, DecodeError> {
    let mut cur = Cursor { buf: b, pos: 0 };
    let tag = cur.u8()?;
    let seq = cur.u64()?;
    let body_len = cur.u32()? as usize;
    let body_end = cur
        .pos
        .checked_add(body_len)
        .filter(|&e| e <= b.len())
        .ok_or(DecodeError::Truncated {
            needed: body_len.saturating_sub(b.len() - cur.pos),
        })?;

    let content = match tag {
        TAG_TRANSACTION => {
            if body_len != 16 {
                return Err(DecodeError::ContentMismatch(
                    "transaction body must be exactly 16 bytes",
                ));
            }
            let origin = NodeId(cur.u32()?);
            let nonce = cur.u64()?;
            let payload = cur.u32()?;
            Content::Transaction {
                tx: TxId { origin, nonce },
                payload,
            }
        }
        TAG_VOTE => {
            if body_len != 13 {
                return Err(DecodeError::ContentMismatch(
                    "vote body must be exactly 13 bytes",
                ));
            }
            let origin = NodeId(cur.u32()?);
            let nonce = cur.u64()?;
            let verdict = match cur.u8()? {
                VERDICT_VALID => Verdict::Valid,
                VERDICT_NOT_VALID => Verdict::NotValid,
                other => return Err(DecodeError::UnknownVerdict(other)),
            };
            Content::Vote {
                tx: TxId { origin, nonce },
                verdict,
            }
        }
        TAG_BLACKLIST => {
            let count = cur.u32()? as usize;
            if body_len != 4 + count * 4 {
                return Err(DecodeError::ContentMismatch(
                    "blacklist body length does not match member count",
                ));
            }
            let mut members = BTreeSet::new();
            let mut prev: Option<u32> = None;
            for _ in 0..count {
                let id = cur.u32()?;
                if prev.is_some_and(|p| p >= id) {
                    return Err(DecodeError::ContentMismatch(
                        "blacklist members must be strictly ascending",
                    ));
                }
                prev = Some(id);
                members.insert(NodeId(id));
            }
            Content::Blacklist { members }
        }
        other => return Err(DecodeError::UnknownType(other)),
    };

    if cur.pos != body_end {
        return Err(DecodeError::ContentMismatch(
            "content body length does not match declared length",
        ));
    }
    let sender = NodeId(cur.u32()?);
    let receiver = NodeId(cur.u32()?);
    if cur.pos != b.len() {
        return Err(DecodeError::TrailingBytes(b.len() - cur.pos));
    }
    Ok(Message {
        seq,
        content,
        sender,
        receiver,
    })
}

/// Key under which deliveries are deduplicated: two deliveries to the
/// same receiver with equal keys are duplicates and the second one is
/// suppressed by the network. Pure function of `(sender, seq)`.
pub fn dedupe_key(m: &Message) -> (NodeId, u64) {
    (m.sender, m.seq)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_tx() -> Message {
        Message {
            seq: 3,
            content: Content::Transaction {
                tx: TxId {
                    origin: NodeId(1),
                    nonce: 7,
                },
                payload: 1,
            },
            sender: NodeId(1),
            receiver: NodeId(2),
        }
    }

    fn sample_vote() -> Message {
        Message {
            seq: 9,
            content: Content::Vote {
                tx: TxId {
                    origin: NodeId(4),
                    nonce: 2,
                },
                verdict: Verdict::NotValid,
            },
            sender: NodeId(5),
            receiver: NodeId(0),
        }
    }

    fn sample_blacklist() -> Message {
        Message {
            seq: 11,
            content: Content::Blacklist {
                members: [NodeId(3), NodeId(8), NodeId(12)].into_iter().collect(),
            },
            sender: NodeId(6),
            receiver: NodeId(7),
        }
    }

    #[test]
    fn round_trip_all_variants() {
        for m in [sample_tx(), sample_vote(), sample_blacklist()] {
            assert_eq!(decode_message(&encode_message(&m)).unwrap(), m);
        }
    }

    /// Golden snapshot of the canonical encoding, frozen from the first
    /// canonical run. Any change to the wire layout must fail here.
    #[test]
    fn golden_transaction_bytes() {
        let m = sample_tx();
        let expected: &[u8] = &[
            0x00, // type: transaction
            0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x03, // seq = 3
            0x00, 0x00, 0x00, 0x10, // content length = 16
            0x00, 0x00, 0x00, 0x01, // tx origin = n1
            0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00, 0x07, // tx nonce = 7
            0x00, 0x00, 0x00, 0x01, // payload = 1
            0x00, 0x00, 0x00, 0x01, // sender = n1
            0x00, 0x00, 0x00, 0x02, // receiver = n2
        ];
        assert_eq!(encode_message(&m), expected);
    }

    #[test]
    fn encoding_is_injective_in_seq() {
        let a = sample_tx();
        let mut b = sample_tx();
        b.seq += 1;
        assert_ne!(encode_message(&a), encode_message(&b));
    }

    #[test]
    fn empty_input_rejected() {
        assert!(matches!(
            decode_message(&[]),
            Err(DecodeError::Truncated { .. })
        ));
    }

    #[test]
    fn unknown_type_tag_rejected() {
        let mut bytes = encode_message(&sample_tx());
        bytes[0] = 250;
        assert_eq!(decode_message(&bytes), Err(DecodeError::UnknownType(250)));
    }

    #[test]
    fn unknown_verdict_rejected() {
        let mut bytes = encode_message(&sample_vote());
        // Verdict is the last content byte, just before sender/receiver.
        let idx = bytes.len() - 9;
        bytes[idx] = 7;
        assert_eq!(decode_message(&bytes), Err(DecodeError::UnknownVerdict(7)));
    }

    #[test]
    fn truncation_at_every_prefix_rejected() {
        let bytes = encode_message(&sample_blacklist());
        for n in 0..bytes.len() {
            let err = decode_message(&bytes[..n]).unwrap_err();
            assert!(
                matches!(
                    err,
                    DecodeError::Truncated { .. } | DecodeError::ContentMismatch(_)
                ),
                "prefix of {n} bytes gave {err:?}"
            );
        }
    }

    #[test]
    fn trailing_bytes_rejected() {
        let mut bytes = encode_message(&sample_tx());
        bytes.push(0);
        assert_eq!(decode_message(&bytes), Err(DecodeError::TrailingBytes(1)));
    }

    #[test]
    fn wrong_body_length_rejected() {
        let mut bytes = encode_message(&sample_tx());
        // Claim a vote body (13 bytes) while carrying a 16-byte one.
        bytes[0] = TAG_VOTE;
        assert!(matches!(
            decode_message(&bytes),
            Err(DecodeError::ContentMismatch(_))
        ));
    }

    #[test]
    fn unsorted_blacklist_rejected() {
        let mut bytes = encode_message(&sample_blacklist());
        // Swap the first two member ids (offsets 17.. and 21..).
        bytes.swap(20, 24);
        assert!(matches!(
            decode_message(&bytes),
            Err(DecodeError::ContentMismatch(_))
        ));
    }

    #[test]
    fn dedupe_key_ignores_everything_but_sender_and_seq() {
        let a = sample_tx();
        let mut b = sample_tx();
        b.receiver = NodeId(9);
        b.content = Content::Transaction {
            tx: TxId {
                origin: NodeId(1),
                nonce: 7,
            },
            payload: 0,
        };
        assert_eq!(dedupe_key(&a), dedupe_key(&b));

        let mut c = sample_tx();
        c.sender = NodeId(2);
        assert_ne!(dedupe_key(&a), dedupe_key(&c));
        let mut d = sample_tx();
        d.seq = 4;
        assert_ne!(dedupe_key(&a), dedupe_key(&d));
    }
}
