//! Pluggable Byzantine sender strategies.
//!
//! A strategy decides, for one broadcast, which transaction content each
//! recipient receives (or whether a recipient receives anything at all).
//! Strategies are deliberately starved of information: they see their
//! own identity, a flat recipient list in which parents and children are
//! indistinguishable, the iteration number, and a private RNG stream.
//! They never see pair links or anyone's blacklist.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::protocol::{Content, NodeId, TxId};

/// What a Byzantine node does with each broadcast opportunity.
#[derive(Clone, Copy, PartialEq, Debug)]
pub enum AdversaryStrategy {
    /// Independent uniform payload per recipient. For a binary alphabet
    /// each parent–child pair receives equal copies with probability
    /// one half, which is the canonical randomizing equivocator the
    /// detection analysis assumes.
    UniformRandom,
    /// Payload `a` to a `split` fraction of the (shuffled) recipients,
    /// a different payload `b` to the rest.
    Equivocator { split: f64 },
    /// Identical payload to every recipient. Indistinguishable from an
    /// honest sender, hence never detected in any run.
    Consistent,
    /// No message to anyone. Absence compares as absence, so a silent
    /// node is never detected either; the difference detector only fires
    /// on conflicting copies. Surfaced by tests as a known limitation.
    Silent,
}

impl fmt::Display for AdversaryStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AdversaryStrategy::UniformRandom => f.write_str("uniform-random"),
            AdversaryStrategy::Equivocator { split } => write!(f, "equivocator:{split}"),
            AdversaryStrategy::Consistent => f.write_str("consistent"),
            AdversaryStrategy::Silent => f.write_str("silent"),
        }
    }
}

impl FromStr for AdversaryStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "uniform-random" => Ok(AdversaryStrategy::UniformRandom),
            "consistent" => Ok(AdversaryStrategy::Consistent),
            "silent" => Ok(AdversaryStrategy::Silent),
            other => {
                if let Some(frac) = other.strip_prefix("equivocator:") {
                    let split: f64 = frac
                        .parse()
                        .map_err(|_| format!("bad equivocator split {frac:?}"))?;
                    Ok(AdversaryStrategy::Equivocator { split })
                } else if other == "equivocator" {
                    Ok(AdversaryStrategy::Equivocator { split: 0.5 })
                } else {
                    Err(format!(
                        "unknown strategy {other:?} \
                         (expected uniform-random, equivocator[:SPLIT], consistent, silent)"
                    ))
                }
            }
        }
    }
}

/// Broadcast-local inputs handed to a strategy.
///
/// `seq` is the sender's own sequence counter for this broadcast; it is
/// included so strategies can form the canonical transaction id for the
/// content they emit.
#[derive(Clone, Copy, Debug)]
pub struct EmitCtx {
    pub self_id: NodeId,
    pub iteration: u64,
    pub seq: u64,
    pub alphabet: u32,
}

/// Produces per-recipient transaction contents for one broadcast.
///
/// Recipients absent from the returned map receive nothing. The output
/// is a deterministic function of the declared inputs: replaying with an
/// identical RNG stream reproduces it exactly.
pub fn emit(
    strategy: AdversaryStrategy,
    ctx: EmitCtx,
    recipients: &[NodeId],
    rng: &mut ChaCha8Rng,
) -> BTreeMap<NodeId, Content> {
    let tx = TxId {
        origin: ctx.self_id,
        nonce: ctx.seq,
    };
    let content = |payload: u32| Content::Transaction { tx, payload };
    match strategy {
        AdversaryStrategy::UniformRandom => recipients
            .iter()
            .map(|&r| (r, content(rng.random_range(0..ctx.alphabet))))
            .collect(),
        AdversaryStrategy::Equivocator { split } => {
            let a = rng.random_range(0..ctx.alphabet);
            let b = (a + 1 + rng.random_range(0..ctx.alphabet - 1)) % ctx.alphabet;
            let mut order: Vec<NodeId> = recipients.to_vec();
            order.shuffle(rng);
            let cut = ((split * order.len() as f64).ceil() as usize).min(order.len());
            order
                .iter()
                .enumerate()
                .map(|(i, &r)| (r, content(if i < cut { a } else { b })))
                .collect()
        }
        AdversaryStrategy::Consistent => {
            let payload = rng.random_range(0..ctx.alphabet);
            recipients.iter().map(|&r| (r, content(payload))).collect()
        }
        AdversaryStrategy::Silent => BTreeMap::new(),
    }
}
