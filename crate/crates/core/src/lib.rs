//! # twinbft
//!
//! A deterministic discrete-event simulator and protocol library for
//! twin-node Byzantine equivocation detection.
//!
//! Every protocol participant (a *parent*) covertly operates a second
//! network identity (its *child*, or twin). The child re-broadcasts the
//! parent's transactions under its own identity and relays every
//! transaction it receives back to the parent over a private pair
//! channel. The parent compares the copy it received directly from a
//! sender against the copy observed by its child: a mismatch proves the
//! sender equivocated, so the sender is added to a blacklist that is
//! gossiped to all other parents. Blacklists are periodically cleared so
//! that nodes which stop misbehaving can be reintegrated.
//!
//! The crate is organized as:
//!
//! * [`protocol`] - message schema, node identities, canonical encoding.
//! * [`node`] - the parent and child state machines as deterministic
//!   transition functions.
//! * [`adversary`] - pluggable Byzantine sender strategies.
//! * [`simnet`] - the deterministic discrete-event network: reliable
//!   broadcast delivery, iteration structure, hidden pair channels.
//! * [`analysis`] - closed-form detection probability oracle, truth-table
//!   enumeration, and replicate aggregation.
//! * [`config`] - scenario parameters shared by the simulator and the
//!   command-line front end.
//!
//! All randomness flows through seeded [`rand_chacha`] streams: two runs
//! with the same [`config::ScenarioConfig`] produce bit-identical
//! [`analysis::RunMetrics`].

pub mod adversary;
pub mod analysis;
pub mod config;
pub mod node;
pub mod protocol;
pub mod simnet;

pub use adversary::AdversaryStrategy;
pub use analysis::{aggregate, detection_probability, enumerate_outcomes, RunMetrics, Summary};
pub use config::{ConfigError, ScenarioConfig};
pub use node::{ChildState, CommitDecision, DetectOutcome, ParentState};
pub use protocol::{
    decode_message, dedupe_key, encode_message, Content, DecodeError, Message, MessageType,
    NodeId, TxId, Verdict,
};
pub use simnet::{run_scenario, IterationReport, Network};
