//! Deterministic discrete-event network.
//!
//! The network delivers every broadcast reliably: each enqueued copy
//! arrives after a uniform delay in `[1, delay_max]` ticks, no
//! `(sender, seq)` key is delivered twice to the same receiver, and an
//! iteration drains the queue to quiescence before it ends, so all
//! triggered handlers (including blacklist gossip cascades) run inside
//! the iteration that caused them.
//!
//! One iteration is: every active parent originates one transaction and
//! syncs its child over the private pair channel; children re-broadcast;
//! the queue drains; pending vote tallies settle; blacklists are
//! snapshotted (and cleared when the reset interval divides the
//! iteration number).
//!
//! Metric conventions: `messages_sent` counts broadcast operations (one
//! multicast counted once; pair-channel traffic never counted), while
//! `messages_delivered` counts point-to-point deliveries processed by
//! recipients. Per-transaction vote broadcasts make deliveries scale
//! with N³ per iteration; the broadcast-operation count is the quantity
//! that scales with N².

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};
use std::fmt::Write as _;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::adversary::{emit, AdversaryStrategy, EmitCtx};
use crate::analysis::RunMetrics;
use crate::config::{ConfigError, ScenarioConfig};
use crate::node::{
    Action, Body, ChildAction, ChildState, CommitDecision, Delivery, NodeSet, PairInstruction,
    ParentState, Roster, TxContent,
};
use crate::protocol::{encode_message, Content, Message, NodeId, TxId, Verdict};

/// Everything observed about one iteration.
#[derive(Clone, PartialEq, Debug)]
pub struct IterationReport {
    /// 1-based iteration index.
    pub iteration: u64,
    /// Broadcast operations performed (multicasts, counted once each).
    pub messages_sent: u64,
    /// Point-to-point deliveries processed by recipients.
    pub messages_delivered: u64,
    /// Difference-detector events as `(detector, detected)` pairs.
    pub detections: Vec<(NodeId, NodeId)>,
    /// Blacklist snapshot of every honest parent at quiescence, taken
    /// before any reset.
    pub blacklists: BTreeMap<NodeId, Arc<Vec<NodeId>>>,
    /// Transactions committed by every honest parent this iteration.
    pub commits: Vec<TxId>,
    /// Share of Byzantine parents on the intersection of all honest
    /// blacklists at quiescence (1.0 when there are none to detect).
    pub detection_fraction: f64,
    /// Whether the blacklists were cleared at the end of this iteration.
    pub reset_performed: bool,
}

impl IterationReport {
    /// Intersection of the snapshotted honest blacklists.
    pub fn blacklist_intersection(&self) -> Vec<NodeId> {
        let mut sets = self.blacklists.values();
        let Some(first) = sets.next() else {
            return Vec::new();
        };
        let mut out: Vec<NodeId> = (**first).clone();
        for s in sets {
            out.retain(|id| s.binary_search(id).is_ok());
        }
        out
    }
}

enum NodeSlot {
    Parent(Box<HonestParent>),
    Child(ChildState),
    ByzantineParent(ByzantineNode),
    ByzantineChild(ByzantineNode),
}

struct HonestParent {
    state: ParentState,
    rng: ChaCha8Rng,
}

struct ByzantineNode {
    id: NodeId,
    strategy: AdversaryStrategy,
    next_seq: u64,
    rng: ChaCha8Rng,
}

/// Content carried by one in-flight delivery bucket.
#[derive(Clone, Debug)]
enum FlightBody {
    /// Same transaction content for every recipient in the bucket.
    Tx(TxContent),
    /// Per-recipient transaction contents; the bucket's i-th recipient
    /// takes `tx_arena[tx_base + i]`.
    TxPerRecipient { tx_base: u32 },
    Vote { tx: TxId, verdict: Verdict },
    Blacklist(Arc<Vec<NodeId>>),
}

/// One delay bucket of one multicast.
#[derive(Debug)]
struct Flight {
    sender: NodeId,
    seq: u64,
    rcpt_base: u32,
    rcpt_len: u32,
    body: FlightBody,
    /// Engine-originated multicasts draw a fresh sequence number and
    /// enqueue each recipient exactly once, so they are duplicate-free
    /// by construction; only externally injected messages carry keys
    /// that may repeat and need the delivery-time ledger.
    dedupe: bool,
}

#[derive(Debug)]
struct Scheduled {
    tick: u64,
    order: u64,
    flight: Flight,
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        (self.tick, self.order) == (other.tick, other.order)
    }
}
impl Eq for Scheduled {}
impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.tick, self.order).cmp(&(other.tick, other.order))
    }
}

/// Per-(receiver, sender) bitmap of sequence numbers delivered this
/// iteration, with generation stamps instead of per-iteration clearing.
/// Allocated up to a size cap; beyond it delivery uniqueness rests on
/// the engine's structural guarantee (each multicast enqueues one copy
/// per recipient and sequence numbers never repeat).
struct DedupeLedger {
    total_ids: usize,
    words_per_pair: usize,
    generation: u32,
    gens: Vec<u32>,
    bits: Vec<u64>,
}

/// Ledger memory is roughly `4N² · (4 + 8W)` bytes; this cap covers
/// every test and desk-scale experiment while keeping larger runs lean.
const LEDGER_MAX_PARENTS: u32 = 512;

impl DedupeLedger {
    fn new(parents: u32) -> Option<Self> {
        if parents > LEDGER_MAX_PARENTS {
            return None;
        }
        let total = 2 * parents as usize;
        // A sender issues at most 1 transaction + (N-1) votes + gossip
        // re-broadcasts per iteration; 2N + 64 bits of window is ample.
        let words_per_pair = (2 * parents as usize + 64).div_ceil(64);
        Some(DedupeLedger {
            total_ids: total,
            words_per_pair,
            generation: 0,
            gens: vec![0; total * total],
            bits: vec![0; total * total * words_per_pair],
        })
    }

    fn begin_iteration(&mut self) {
        self.generation += 1;
    }

    /// Returns true when `(sender, seq)` was already delivered to
    /// `receiver` this iteration; otherwise records it.
    fn seen(&mut self, receiver: NodeId, sender: NodeId, seq_offset: u64) -> bool {
        let bit = seq_offset as usize;
        if bit >= self.words_per_pair * 64 {
            return false; // out of window; cannot occur for engine traffic
        }
        let pair = receiver.as_u32() as usize * self.total_ids + sender.as_u32() as usize;
        let base = pair * self.words_per_pair;
        if self.gens[pair] != self.generation {
            self.gens[pair] = self.generation;
            self.bits[base..base + self.words_per_pair].fill(0);
        }
        let word = &mut self.bits[base + bit / 64];
        let mask = 1u64 << (bit % 64);
        if *word & mask != 0 {
            return true;
        }
        *word |= mask;
        false
    }
}

/// Queue, arenas, metrics, and RNG streams: the parts of the network
/// that must stay borrowable while a node slot is being mutated.
struct Engine {
    roster: Arc<Roster>,
    delay_max: u64,
    tick: u64,
    order: u64,
    queue: BinaryHeap<Reverse<Scheduled>>,
    rcpt_arena: Vec<NodeId>,
    tx_arena: Vec<TxContent>,
    bucket_rcpts: Vec<Vec<NodeId>>,
    bucket_txs: Vec<Vec<TxContent>>,
    delay_rng: ChaCha8Rng,
    ledger: Option<DedupeLedger>,
    iter_base_seq: Vec<u64>,
    messages_sent: u64,
    messages_delivered: u64,
    duplicates_suppressed: u64,
    detections: Vec<(NodeId, NodeId)>,
    commits_now: Vec<Vec<TxId>>,
    trace: Option<Vec<String>>,
}

impl Engine {
    fn draw_delay(&mut self) -> u64 {
        if self.delay_max == 1 {
            1
        } else if self.delay_max.is_power_of_two() {
            1 + (self.delay_rng.random::<u64>() & (self.delay_max - 1))
        } else {
            self.delay_rng.random_range(1..=self.delay_max)
        }
    }

    /// Enqueues one multicast with a shared body: one broadcast
    /// operation, independent per-recipient delays.
    fn enqueue_shared(&mut self, sender: NodeId, seq: u64, body: FlightBody, recipients: &[NodeId]) {
        if recipients.is_empty() {
            return;
        }
        self.messages_sent += 1;
        for bucket in &mut self.bucket_rcpts {
            bucket.clear();
        }
        for &r in recipients {
            let d = (self.draw_delay() - 1) as usize;
            self.bucket_rcpts[d].push(r);
        }
        for d in 0..self.delay_max as usize {
            if self.bucket_rcpts[d].is_empty() {
                continue;
            }
            let rcpt_base = self.rcpt_arena.len() as u32;
            self.rcpt_arena.extend_from_slice(&self.bucket_rcpts[d]);
            let rcpt_len = self.rcpt_arena.len() as u32 - rcpt_base;
            let scheduled = Scheduled {
                tick: self.tick + d as u64 + 1,
                order: self.order,
                flight: Flight {
                    sender,
                    seq,
                    rcpt_base,
                    rcpt_len,
                    body: body.clone(),
                    dedupe: false,
                },
            };
            self.order += 1;
            self.queue.push(Reverse(scheduled));
        }
    }

    /// Enqueues one multicast with per-recipient transaction contents.
    fn enqueue_per_recipient(
        &mut self,
        sender: NodeId,
        seq: u64,
        pairs: &BTreeMap<NodeId, Content>,
    ) {
        if pairs.is_empty() {
            return;
        }
        self.messages_sent += 1;
        for bucket in &mut self.bucket_rcpts {
            bucket.clear();
        }
        for bucket in &mut self.bucket_txs {
            bucket.clear();
        }
        for (&r, content) in pairs {
            let tx_content = match content {
                Content::Transaction { tx, payload } => TxContent {
                    tx: *tx,
                    payload: *payload,
                },
                other => unreachable!("adversary strategies emit transactions, got {other:?}"),
            };
            let d = (self.draw_delay() - 1) as usize;
            self.bucket_rcpts[d].push(r);
            self.bucket_txs[d].push(tx_content);
        }
        for d in 0..self.delay_max as usize {
            if self.bucket_rcpts[d].is_empty() {
                continue;
            }
            let rcpt_base = self.rcpt_arena.len() as u32;
            let tx_base = self.tx_arena.len() as u32;
            self.rcpt_arena.extend_from_slice(&self.bucket_rcpts[d]);
            self.tx_arena.extend_from_slice(&self.bucket_txs[d]);
            let rcpt_len = self.rcpt_arena.len() as u32 - rcpt_base;
            let scheduled = Scheduled {
                tick: self.tick + d as u64 + 1,
                order: self.order,
                flight: Flight {
                    sender,
                    seq,
                    rcpt_base,
                    rcpt_len,
                    body: FlightBody::TxPerRecipient { tx_base },
                    dedupe: false,
                },
            };
            self.order += 1;
            self.queue.push(Reverse(scheduled));
        }
    }

    /// Vote and gossip fan-out: every non-blacklisted parent except the
    /// sender itself.
    fn parent_recipients(&self, owner: &ParentState, out: &mut Vec<NodeId>) {
        out.clear();
        for &p in self.roster.parents() {
            if p != owner.self_id() && !owner.blacklist_contains(p) {
                out.push(p);
            }
        }
    }

    /// Applies the outgoing actions of one parent transition.
    fn process_parent_actions(
        &mut self,
        owner: &mut ParentState,
        actions: Vec<Action>,
        scratch: &mut Vec<NodeId>,
    ) {
        for action in actions {
            match action {
                Action::BroadcastVote { tx, verdict } => {
                    let seq = owner.alloc_seq();
                    let recipients = std::mem::take(scratch);
                    let mut recipients = recipients;
                    self.parent_recipients(owner, &mut recipients);
                    self.enqueue_shared(
                        owner.self_id(),
                        seq,
                        FlightBody::Vote { tx, verdict },
                        &recipients,
                    );
                    *scratch = recipients;
                }
                Action::BroadcastBlacklist { members } => {
                    let seq = owner.alloc_seq();
                    let recipients = std::mem::take(scratch);
                    let mut recipients = recipients;
                    self.parent_recipients(owner, &mut recipients);
                    self.enqueue_shared(
                        owner.self_id(),
                        seq,
                        FlightBody::Blacklist(members),
                        &recipients,
                    );
                    *scratch = recipients;
                }
                Action::Detected { sender } => {
                    self.detections.push((owner.self_id(), sender));
                }
                Action::Decided { tx, decision } => {
                    if decision == CommitDecision::Commit {
                        let idx = self
                            .roster
                            .parent_index(owner.self_id())
                            .expect("owner is a parent");
                        self.commits_now[idx].push(tx);
                    }
                }
            }
        }
    }

    fn trace_delivery(&mut self, sender: NodeId, seq: u64, receiver: NodeId, content: Content) {
        let Some(trace) = self.trace.as_mut() else {
            return;
        };
        let message = Message {
            seq,
            content,
            sender,
            receiver,
        };
        let bytes = encode_message(&message);
        let mut line = String::with_capacity(bytes.len() * 2 + 8);
        let _ = write!(line, "{:06} ", self.tick);
        for b in bytes {
            let _ = write!(line, "{b:02x}");
        }
        trace.push(line);
    }
}

/// A fully built network of `2N` identities with hidden pair links.
pub struct Network {
    cfg: ScenarioConfig,
    roster: Arc<Roster>,
    nodes: Vec<NodeSlot>,
    pair: Vec<u32>,
    byzantine_parents: Vec<NodeId>,
    iteration: u64,
    engine: Engine,
    deliver_rcpts: Vec<NodeId>,
    deliver_txs: Vec<TxContent>,
    action_scratch: Vec<NodeId>,
}

/// Builds the network for replicate 0 of `cfg`.
pub fn build_network(cfg: &ScenarioConfig) -> Result<Network, ConfigError> {
    Network::for_replicate(cfg, 0)
}

/// Runs replicate 0 of `cfg` to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunMetrics, ConfigError> {
    run_replicate(cfg, 0)
}

/// Runs one replicate of `cfg` to completion.
pub fn run_replicate(cfg: &ScenarioConfig, replicate: u32) -> Result<RunMetrics, ConfigError> {
    Ok(Network::for_replicate(cfg, replicate)?.run_to_completion())
}

const STREAM_TOPOLOGY: u64 = 0;
const STREAM_DELAYS: u64 = 1;
const STREAM_NODE_BASE: u64 = 2;

enum FollowUp {
    HonestChild(NodeId, PairInstruction),
    ByzantineChild(NodeId),
}

impl Network {
    /// Builds the network for one replicate: `N` parents with `N`
    /// hidden-paired children, `t` of the parents (with their children)
    /// Byzantine. Identities are a seeded permutation of `0..2N`, so an
    /// id value betrays neither role nor pairing.
    pub fn for_replicate(cfg: &ScenarioConfig, replicate: u32) -> Result<Network, ConfigError> {
        cfg.validate()?;
        let seed = cfg.replicate_seed(replicate);
        let stream = |s: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(s);
            rng
        };

        let n = cfg.parents;
        let total = 2 * n;
        let mut topo_rng = stream(STREAM_TOPOLOGY);
        let mut ids: Vec<NodeId> = (0..total).map(NodeId::new).collect();
        ids.shuffle(&mut topo_rng);
        let parent_ids = &ids[..n as usize];
        let child_ids = &ids[n as usize..];

        let mut byz_pick: Vec<usize> = (0..n as usize).collect();
        byz_pick.shuffle(&mut topo_rng);
        let byz_pick = &byz_pick[..cfg.byzantine as usize];

        let roster = Arc::new(Roster::new(parent_ids.to_vec(), total));

        let mut nodes: Vec<Option<NodeSlot>> = (0..total).map(|_| None).collect();
        let mut pair = vec![u32::MAX; total as usize];
        let mut byzantine_parents = Vec::new();
        for i in 0..n as usize {
            let pid = parent_ids[i];
            let cid = child_ids[i];
            pair[pid.as_u32() as usize] = cid.as_u32();
            pair[cid.as_u32() as usize] = pid.as_u32();
            if byz_pick.contains(&i) {
                byzantine_parents.push(pid);
                nodes[pid.as_u32() as usize] = Some(NodeSlot::ByzantineParent(ByzantineNode {
                    id: pid,
                    strategy: cfg.strategy,
                    next_seq: 0,
                    rng: stream(STREAM_NODE_BASE + u64::from(pid.as_u32())),
                }));
                nodes[cid.as_u32() as usize] = Some(NodeSlot::ByzantineChild(ByzantineNode {
                    id: cid,
                    strategy: cfg.strategy,
                    next_seq: 0,
                    rng: stream(STREAM_NODE_BASE + u64::from(cid.as_u32())),
                }));
            } else {
                nodes[pid.as_u32() as usize] = Some(NodeSlot::Parent(Box::new(HonestParent {
                    state: ParentState::new(pid, cid, Arc::clone(&roster)),
                    rng: stream(STREAM_NODE_BASE + u64::from(pid.as_u32())),
                })));
                nodes[cid.as_u32() as usize] =
                    Some(NodeSlot::Child(ChildState::new(cid, pid, total)));
            }
        }
        byzantine_parents.sort_unstable();

        let engine = Engine {
            roster: Arc::clone(&roster),
            delay_max: cfg.delay_max,
            tick: 0,
            order: 0,
            queue: BinaryHeap::new(),
            rcpt_arena: Vec::new(),
            tx_arena: Vec::new(),
            bucket_rcpts: (0..cfg.delay_max).map(|_| Vec::new()).collect(),
            bucket_txs: (0..cfg.delay_max).map(|_| Vec::new()).collect(),
            delay_rng: stream(STREAM_DELAYS),
            ledger: None,
            iter_base_seq: vec![0; total as usize],
            messages_sent: 0,
            messages_delivered: 0,
            duplicates_suppressed: 0,
            detections: Vec::new(),
            commits_now: (0..n).map(|_| Vec::new()).collect(),
            trace: None,
        };

        Ok(Network {
            cfg: cfg.clone(),
            roster,
            nodes: nodes.into_iter().map(Option::unwrap).collect(),
            pair,
            byzantine_parents,
            iteration: 0,
            engine,
            deliver_rcpts: Vec::new(),
            deliver_txs: Vec::new(),
            action_scratch: Vec::new(),
        })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// Byzantine parent identities, ascending.
    pub fn byzantine_parents(&self) -> &[NodeId] {
        &self.byzantine_parents
    }

    /// The hidden pair partner of `id`. Harness-only: this mapping is
    /// never exposed to strategies or encoded into messages.
    pub fn pair_of(&self, id: NodeId) -> Option<NodeId> {
        match self.pair.get(id.as_u32() as usize) {
            Some(&p) if p != u32::MAX => Some(NodeId::new(p)),
            _ => None,
        }
    }

    pub fn honest_parents(&self) -> impl Iterator<Item = &ParentState> {
        self.nodes.iter().filter_map(|slot| match slot {
            NodeSlot::Parent(hp) => Some(&hp.state),
            _ => None,
        })
    }

    pub fn parent_state(&self, id: NodeId) -> Option<&ParentState> {
        match self.nodes.get(id.as_u32() as usize)? {
            NodeSlot::Parent(hp) => Some(&hp.state),
            _ => None,
        }
    }

    pub fn child_state(&self, id: NodeId) -> Option<&ChildState> {
        match self.nodes.get(id.as_u32() as usize)? {
            NodeSlot::Child(c) => Some(c),
            _ => None,
        }
    }

    /// Swaps the strategy of one Byzantine pair; used by scripted
    /// scenarios. Returns false if `id` is not a Byzantine parent.
    pub fn set_strategy(&mut self, id: NodeId, strategy: AdversaryStrategy) -> bool {
        let Some(child) = self.pair_of(id) else {
            return false;
        };
        let mut changed = false;
        for slot_id in [id, child] {
            if let NodeSlot::ByzantineParent(b) | NodeSlot::ByzantineChild(b) =
                &mut self.nodes[slot_id.as_u32() as usize]
            {
                b.strategy = strategy;
                changed = true;
            }
        }
        changed
    }

    /// Enables trace collection: every processed delivery is recorded as
    /// one hex-encoded message per line, prefixed with its tick.
    pub fn set_trace(&mut self, enabled: bool) {
        self.engine.trace = enabled.then(Vec::new);
    }

    pub fn take_trace(&mut self) -> Vec<String> {
        match self.engine.trace.as_mut() {
            Some(t) => std::mem::take(t),
            None => Vec::new(),
        }
    }

    /// Intersection of all honest parents' blacklists.
    pub fn intersection_blacklist(&self) -> Vec<NodeId> {
        let mut honest = self.honest_parents();
        let Some(first) = honest.next() else {
            return Vec::new();
        };
        let mut members: Vec<NodeId> = (0..self.roster.total_ids())
            .map(NodeId::new)
            .filter(|&id| first.blacklist_contains(id))
            .collect();
        for p in honest {
            members.retain(|&id| p.blacklist_contains(id));
        }
        members
    }

    /// Share of Byzantine parents on every honest blacklist. With no
    /// Byzantine nodes the fraction is 1.0 by (vacuous) convention.
    pub fn detection_fraction(&self) -> f64 {
        if self.byzantine_parents.is_empty() {
            return 1.0;
        }
        let intersection = self.intersection_blacklist();
        let detected = self
            .byzantine_parents
            .iter()
            .filter(|b| intersection.binary_search(b).is_ok())
            .count();
        detected as f64 / self.byzantine_parents.len() as f64
    }

    /// Enqueues one broadcast from `from` with explicit per-recipient
    /// contents, consuming the sender's next sequence number. This is
    /// the crafted-delivery entry point for tests and tools; regular
    /// traffic flows through [`Self::run_iteration`].
    pub fn broadcast(&mut self, from: NodeId, per_recipient: &BTreeMap<NodeId, Content>) {
        if per_recipient.is_empty() {
            return;
        }
        let seq = self.alloc_seq_for(from);
        let uniform = {
            let mut values = per_recipient.values();
            let first = values.next().unwrap();
            values.all(|c| c == first)
        };
        if uniform {
            let content = per_recipient.values().next().unwrap().clone();
            let recipients: Vec<NodeId> = per_recipient.keys().copied().collect();
            self.engine
                .enqueue_shared(from, seq, flight_body(content), &recipients);
        } else if per_recipient
            .values()
            .all(|c| matches!(c, Content::Transaction { .. }))
        {
            self.engine.enqueue_per_recipient(from, seq, per_recipient);
        } else {
            // Mixed non-transaction contents: deliver each copy as its
            // own single-recipient bucket, still one broadcast op.
            let before = self.engine.messages_sent;
            for (&r, content) in per_recipient {
                self.engine
                    .enqueue_shared(from, seq, flight_body(content.clone()), &[r]);
            }
            self.engine.messages_sent = before + 1;
        }
    }

    /// Injects a single already-formed message with a fresh delay.
    /// A delivery whose `(sender, seq)` key was already delivered to the
    /// receiver this iteration is suppressed by the dedupe ledger.
    pub fn inject_message(&mut self, m: &Message) {
        if self.engine.ledger.is_none() {
            self.engine.ledger = DedupeLedger::new(self.cfg.parents);
        }
        self.engine.messages_sent += 1;
        let rcpt_base = self.engine.rcpt_arena.len() as u32;
        self.engine.rcpt_arena.push(m.receiver);
        let d = self.engine.draw_delay();
        let scheduled = Scheduled {
            tick: self.engine.tick + d,
            order: self.engine.order,
            flight: Flight {
                sender: m.sender,
                seq: m.seq,
                rcpt_base,
                rcpt_len: 1,
                body: flight_body(m.content.clone()),
                dedupe: true,
            },
        };
        self.engine.order += 1;
        self.engine.queue.push(Reverse(scheduled));
    }

    /// Drains the delivery queue to quiescence.
    pub fn drain(&mut self) {
        while let Some(Reverse(scheduled)) = self.engine.queue.pop() {
            self.engine.tick = scheduled.tick;
            self.deliver(scheduled.flight);
        }
    }

    pub fn duplicates_suppressed(&self) -> u64 {
        self.engine.duplicates_suppressed
    }

    fn alloc_seq_for(&mut self, id: NodeId) -> u64 {
        match &mut self.nodes[id.as_u32() as usize] {
            NodeSlot::Parent(hp) => hp.state.alloc_seq(),
            NodeSlot::Child(_) => {
                unreachable!("children broadcast only via pair instructions")
            }
            NodeSlot::ByzantineParent(b) | NodeSlot::ByzantineChild(b) => {
                let s = b.next_seq;
                b.next_seq += 1;
                s
            }
        }
    }

    fn deliver(&mut self, flight: Flight) {
        let mut rcpts = std::mem::take(&mut self.deliver_rcpts);
        rcpts.clear();
        let base = flight.rcpt_base as usize;
        let len = flight.rcpt_len as usize;
        rcpts.extend_from_slice(&self.engine.rcpt_arena[base..base + len]);

        let mut txs = std::mem::take(&mut self.deliver_txs);
        txs.clear();
        if let FlightBody::TxPerRecipient { tx_base } = flight.body {
            let tb = tx_base as usize;
            txs.extend_from_slice(&self.engine.tx_arena[tb..tb + len]);
        }

        let seq_offset = flight
            .seq
            .wrapping_sub(self.engine.iter_base_seq[flight.sender.as_u32() as usize]);

        for (i, &receiver) in rcpts.iter().enumerate() {
            if flight.dedupe {
                if let Some(ledger) = self.engine.ledger.as_mut() {
                    if ledger.seen(receiver, flight.sender, seq_offset) {
                        self.engine.duplicates_suppressed += 1;
                        continue;
                    }
                }
            }
            self.engine.messages_delivered += 1;

            let body = match &flight.body {
                FlightBody::Tx(c) => Body::Transaction {
                    tx: c.tx,
                    payload: c.payload,
                },
                FlightBody::TxPerRecipient { .. } => Body::Transaction {
                    tx: txs[i].tx,
                    payload: txs[i].payload,
                },
                FlightBody::Vote { tx, verdict } => Body::Vote {
                    tx: *tx,
                    verdict: *verdict,
                },
                FlightBody::Blacklist(members) => Body::Blacklist { members },
            };
            if self.engine.trace.is_some() {
                let content = match &body {
                    Body::Transaction { tx, payload } => Content::Transaction {
                        tx: *tx,
                        payload: *payload,
                    },
                    Body::Vote { tx, verdict } => Content::Vote {
                        tx: *tx,
                        verdict: *verdict,
                    },
                    Body::Blacklist { members } => Content::Blacklist {
                        members: members.iter().copied().collect(),
                    },
                };
                self.engine
                    .trace_delivery(flight.sender, flight.seq, receiver, content);
            }
            let delivery = Delivery {
                sender: flight.sender,
                seq: flight.seq,
                body,
            };

            let ridx = receiver.as_u32() as usize;
            enum Route {
                Parent,
                Child(NodeId),
                Ignore,
            }
            let route = match &self.nodes[ridx] {
                NodeSlot::Parent(_) => Route::Parent,
                NodeSlot::Child(c) => Route::Child(c.parent_id()),
                // Byzantine identities consume deliveries without
                // reacting; their behavior is entirely strategy-driven.
                NodeSlot::ByzantineParent(_) | NodeSlot::ByzantineChild(_) => Route::Ignore,
            };
            match route {
                Route::Parent => {
                    let NodeSlot::Parent(hp) = &mut self.nodes[ridx] else {
                        unreachable!()
                    };
                    let actions = hp.state.handle(&delivery);
                    if !actions.is_empty() {
                        self.engine.process_parent_actions(
                            &mut hp.state,
                            actions,
                            &mut self.action_scratch,
                        );
                    }
                }
                Route::Child(parent_id) => {
                    let relay = {
                        let NodeSlot::Child(child) = &mut self.nodes[ridx] else {
                            unreachable!()
                        };
                        child.handle(&delivery)
                    };
                    if let Some(ChildAction::RelayToParent {
                        observed_sender,
                        seq,
                        content,
                    }) = relay
                    {
                        let NodeSlot::Parent(hp) = &mut self.nodes[parent_id.as_u32() as usize]
                        else {
                            unreachable!("honest child is paired with an honest parent")
                        };
                        let actions = hp.state.handle_pair_relay(observed_sender, seq, content);
                        if !actions.is_empty() {
                            self.engine.process_parent_actions(
                                &mut hp.state,
                                actions,
                                &mut self.action_scratch,
                            );
                        }
                    }
                }
                Route::Ignore => {}
            }
        }

        self.deliver_rcpts = rcpts;
        self.deliver_txs = txs;
    }

    /// Runs one full iteration: origination, drain to quiescence, final
    /// vote settlement, snapshot, and (when due) blacklist reset.
    pub fn run_iteration(&mut self) -> IterationReport {
        self.iteration += 1;
        self.engine.messages_sent = 0;
        self.engine.messages_delivered = 0;
        self.engine.duplicates_suppressed = 0;
        self.engine.detections.clear();
        self.engine.rcpt_arena.clear();
        self.engine.tx_arena.clear();
        for c in &mut self.engine.commits_now {
            c.clear();
        }
        if let Some(ledger) = self.engine.ledger.as_mut() {
            ledger.begin_iteration();
        }
        for (id, slot) in self.nodes.iter().enumerate() {
            self.engine.iter_base_seq[id] = match slot {
                NodeSlot::Parent(hp) => hp.state.next_seq(),
                NodeSlot::Child(c) => c.next_seq(),
                NodeSlot::ByzantineParent(b) | NodeSlot::ByzantineChild(b) => b.next_seq,
            };
        }

        // Nodes on every honest parent's blacklist are excluded from
        // communication entirely; skipping their origination is what
        // makes message counts fall after detection.
        let universally_blacklisted = self.universal_blacklist();

        for slot in self.nodes.iter_mut() {
            if let NodeSlot::Parent(hp) = slot {
                hp.state.begin_iteration();
            }
        }

        // Phase 1: origination in ascending parent-id order.
        let parent_ids: Vec<NodeId> = self.roster.parents().to_vec();
        for pid in parent_ids {
            if universally_blacklisted.contains(pid) {
                continue;
            }
            self.originate(pid);
        }

        // Phase 2: drain to quiescence.
        self.drain();

        // Settle every pending tally now that no vote can arrive.
        for idx in 0..self.nodes.len() {
            if let NodeSlot::Parent(hp) = &mut self.nodes[idx] {
                let actions = hp.state.finalize_iteration();
                if !actions.is_empty() {
                    self.engine.process_parent_actions(
                        &mut hp.state,
                        actions,
                        &mut self.action_scratch,
                    );
                }
            }
        }

        // Snapshot before any reset.
        let mut blacklists = BTreeMap::new();
        for slot in self.nodes.iter_mut() {
            if let NodeSlot::Parent(hp) = slot {
                blacklists.insert(hp.state.self_id(), hp.state.blacklist_snapshot());
            }
        }
        let detection_fraction = self.detection_fraction();
        let commits = self.agreed_commits();

        let reset_due =
            self.cfg.reset_interval > 0 && self.iteration.is_multiple_of(self.cfg.reset_interval);
        if reset_due {
            for slot in self.nodes.iter_mut() {
                if let NodeSlot::Parent(hp) = slot {
                    hp.state.reset_blacklist();
                }
            }
        }

        IterationReport {
            iteration: self.iteration,
            messages_sent: self.engine.messages_sent,
            messages_delivered: self.engine.messages_delivered,
            detections: std::mem::take(&mut self.engine.detections),
            blacklists,
            commits,
            detection_fraction,
            reset_performed: reset_due,
        }
    }

    /// Runs up to the configured iteration cap, stopping early when
    /// resets are disabled and every Byzantine parent is already on
    /// every honest blacklist.
    pub fn run_to_completion(&mut self) -> RunMetrics {
        let mut reports: Vec<IterationReport> = Vec::new();
        let mut pre_reset_fractions = Vec::new();
        let mut detection_latency: BTreeMap<NodeId, u64> = BTreeMap::new();
        let mut committed = Vec::new();
        let mut total_messages = 0;
        let mut total_deliveries = 0;

        for _ in 0..self.cfg.iterations {
            let report = self.run_iteration();
            total_messages += report.messages_sent;
            total_deliveries += report.messages_delivered;
            if report.reset_performed {
                pre_reset_fractions.push(report.detection_fraction);
            }
            committed.extend(report.commits.iter().copied());
            if !self.byzantine_parents.is_empty() {
                let intersection = report.blacklist_intersection();
                for b in &self.byzantine_parents {
                    if intersection.binary_search(b).is_ok() {
                        detection_latency.entry(*b).or_insert(report.iteration);
                    }
                }
            }
            let stop_early = self.cfg.reset_interval == 0
                && !self.byzantine_parents.is_empty()
                && report.detection_fraction >= 1.0;
            reports.push(report);
            if stop_early {
                break;
            }
        }

        let final_detection_fraction = pre_reset_fractions.last().copied().unwrap_or_else(|| {
            reports
                .last()
                .map(|r| r.detection_fraction)
                .unwrap_or(1.0)
        });
        let never_detected = self
            .byzantine_parents
            .iter()
            .filter(|b| !detection_latency.contains_key(b))
            .copied()
            .collect();

        RunMetrics {
            reports,
            final_detection_fraction,
            pre_reset_fractions,
            total_messages,
            total_deliveries,
            detection_latency,
            never_detected,
            committed,
        }
    }

    fn universal_blacklist(&self) -> NodeSet {
        let mut out = NodeSet::with_id_capacity(self.roster.total_ids());
        let mut honest = self.honest_parents();
        let Some(first) = honest.next() else {
            return out;
        };
        for raw in 0..self.roster.total_ids() {
            let id = NodeId::new(raw);
            if first.blacklist_contains(id)
                && self.honest_parents().all(|p| p.blacklist_contains(id))
            {
                out.insert(id);
            }
        }
        out
    }

    fn agreed_commits(&self) -> Vec<TxId> {
        let honest_indices: Vec<usize> = self
            .roster
            .parents()
            .iter()
            .enumerate()
            .filter(|(_, id)| matches!(self.nodes[id.as_u32() as usize], NodeSlot::Parent(_)))
            .map(|(i, _)| i)
            .collect();
        let Some((&first, rest)) = honest_indices.split_first() else {
            return Vec::new();
        };
        let mut commits = self.engine.commits_now[first].clone();
        commits.sort_unstable();
        for &idx in rest {
            let mut other = self.engine.commits_now[idx].clone();
            other.sort_unstable();
            commits.retain(|tx| other.binary_search(tx).is_ok());
        }
        commits
    }

    fn originate(&mut self, pid: NodeId) {
        let follow_up = match &mut self.nodes[pid.as_u32() as usize] {
            NodeSlot::Parent(hp) => {
                let (seq, content) = hp.state.prepare_transaction(&mut hp.rng, self.cfg.alphabet);
                let instruction = hp.state.pair_sync();
                let Content::Transaction { tx, payload } = content else {
                    unreachable!("prepare_transaction yields a transaction")
                };
                // Broadcast to every identity except self and own child
                // (the child gets the content over the pair channel),
                // excluding blacklist members.
                let self_id = hp.state.self_id();
                let child_id = hp.state.child_id();
                let mut recipients = std::mem::take(&mut self.action_scratch);
                recipients.clear();
                for raw in 0..self.roster.total_ids() {
                    let id = NodeId::new(raw);
                    if id != self_id && id != child_id && !hp.state.blacklist_contains(id) {
                        recipients.push(id);
                    }
                }
                self.engine.enqueue_shared(
                    self_id,
                    seq,
                    FlightBody::Tx(TxContent { tx, payload }),
                    &recipients,
                );
                self.action_scratch = recipients;
                FollowUp::HonestChild(child_id, instruction)
            }
            NodeSlot::ByzantineParent(b) => {
                let child_id = NodeId::new(self.pair[b.id.as_u32() as usize]);
                let mut recipients = std::mem::take(&mut self.action_scratch);
                recipients.clear();
                for raw in 0..self.roster.total_ids() {
                    let id = NodeId::new(raw);
                    if id != b.id && id != child_id {
                        recipients.push(id);
                    }
                }
                let ctx = EmitCtx {
                    self_id: b.id,
                    iteration: self.iteration,
                    seq: b.next_seq,
                    alphabet: self.cfg.alphabet,
                };
                let out = emit(b.strategy, ctx, &recipients, &mut b.rng);
                self.action_scratch = recipients;
                if !out.is_empty() {
                    let seq = b.next_seq;
                    b.next_seq += 1;
                    self.engine.enqueue_per_recipient(b.id, seq, &out);
                }
                FollowUp::ByzantineChild(child_id)
            }
            _ => unreachable!("originate is called for parent ids only"),
        };
        match follow_up {
            FollowUp::HonestChild(child_id, instruction) => {
                self.deliver_pair_instruction(child_id, instruction);
            }
            FollowUp::ByzantineChild(child_id) => {
                self.originate_byzantine_child(child_id);
            }
        }
    }

    fn deliver_pair_instruction(&mut self, child_id: NodeId, instruction: PairInstruction) {
        let NodeSlot::Child(child) = &mut self.nodes[child_id.as_u32() as usize] else {
            unreachable!("honest parent is paired with an honest child")
        };
        let ChildAction::Broadcast { seq, content } = child.on_pair_instruction(&instruction)
        else {
            unreachable!("pair instructions always yield a broadcast")
        };
        let Content::Transaction { tx, payload } = content else {
            unreachable!("pair instructions carry transactions")
        };
        // Child fan-out: every parent except its own, excluding members
        // of the freshly mirrored blacklist.
        let own_parent = child.parent_id();
        let self_id = child.self_id();
        let mut recipients = std::mem::take(&mut self.action_scratch);
        recipients.clear();
        for &p in self.roster.parents() {
            if p != own_parent && !child.blacklist_contains(p) {
                recipients.push(p);
            }
        }
        self.engine.enqueue_shared(
            self_id,
            seq,
            FlightBody::Tx(TxContent { tx, payload }),
            &recipients,
        );
        self.action_scratch = recipients;
    }

    fn originate_byzantine_child(&mut self, child_id: NodeId) {
        let own_parent = NodeId::new(self.pair[child_id.as_u32() as usize]);
        let NodeSlot::ByzantineChild(b) = &mut self.nodes[child_id.as_u32() as usize] else {
            unreachable!("byzantine parent is paired with a byzantine child")
        };
        let mut recipients = std::mem::take(&mut self.action_scratch);
        recipients.clear();
        for &p in self.roster.parents() {
            if p != own_parent {
                recipients.push(p);
            }
        }
        let ctx = EmitCtx {
            self_id: b.id,
            iteration: self.iteration,
            seq: b.next_seq,
            alphabet: self.cfg.alphabet,
        };
        let out = emit(b.strategy, ctx, &recipients, &mut b.rng);
        self.action_scratch = recipients;
        if !out.is_empty() {
            let seq = b.next_seq;
            b.next_seq += 1;
            self.engine.enqueue_per_recipient(b.id, seq, &out);
        }
    }
}

fn flight_body(content: Content) -> FlightBody {
    match content {
        Content::Transaction { tx, payload } => FlightBody::Tx(TxContent { tx, payload }),
        Content::Vote { tx, verdict } => FlightBody::Vote { tx, verdict },
        Content::Blacklist { members } => {
            FlightBody::Blacklist(Arc::new(members.into_iter().collect()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::decode_message;

    fn cfg(parents: u32, byzantine: u32) -> ScenarioConfig {
        ScenarioConfig {
            parents,
            byzantine,
            seed: 11,
            iterations: 4,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn build_network_shapes() {
        let net = build_network(&cfg(100, 30)).unwrap();
        assert_eq!(net.roster.total_ids(), 200);
        assert_eq!(net.byzantine_parents().len(), 30);
        assert_eq!(net.honest_parents().count(), 70);

        // The worked five-node scenario: one Byzantine sender, four
        // honest parent-child pairs observing it.
        let net = build_network(&cfg(5, 1)).unwrap();
        assert_eq!(net.roster.total_ids(), 10);
        assert_eq!(net.byzantine_parents().len(), 1);

        let net = build_network(&cfg(5, 0)).unwrap();
        assert!(net.byzantine_parents().is_empty());

        assert!(matches!(
            build_network(&cfg(5, 5)),
            Err(ConfigError::TooManyByzantine { .. })
        ));
    }

    #[test]
    fn every_identity_has_exactly_one_hidden_pair() {
        let net = build_network(&cfg(8, 2)).unwrap();
        for raw in 0..16 {
            let id = NodeId::new(raw);
            let partner = net.pair_of(id).unwrap();
            assert_ne!(partner, id);
            assert_eq!(net.pair_of(partner), Some(id));
        }
    }

    #[test]
    fn honest_iteration_commits_everything_with_no_detections() {
        let mut net = build_network(&cfg(5, 0)).unwrap();
        let report = net.run_iteration();
        assert!(report.detections.is_empty());
        assert!(report.blacklists.values().all(|b| b.is_empty()));
        assert_eq!(report.detection_fraction, 1.0);
        // Every parent commits all five transactions of the iteration
        // (four foreign plus its own, committed via incoming votes).
        assert_eq!(report.commits.len(), 5);
        for p in net.honest_parents() {
            assert_eq!(p.committed().len(), 5);
            assert!(p.rejected().is_empty());
        }
    }

    #[test]
    fn honest_message_count_follows_the_quadratic_formula() {
        // N tx multicasts + N child multicasts + N(N-1) vote multicasts.
        for n in [3u32, 5, 10, 17] {
            let mut net = build_network(&cfg(n, 0)).unwrap();
            let report = net.run_iteration();
            assert_eq!(report.messages_sent, u64::from(n * n + n), "N = {n}");
        }
    }

    #[test]
    fn crafted_equivocation_is_detected_by_every_pair() {
        // Hand the adversary the worst possible move: a different
        // payload to each parent half and child half, so every honest
        // pair observes a mismatch.
        let mut net = build_network(&cfg(5, 1)).unwrap();
        let byz = net.byzantine_parents()[0];
        let tx = TxId {
            origin: byz,
            nonce: 0,
        };
        let mut per_recipient = BTreeMap::new();
        let honest: Vec<NodeId> = net.honest_parents().map(|p| p.self_id()).collect();
        for &p in &honest {
            per_recipient.insert(
                p,
                Content::Transaction { tx, payload: 0 },
            );
            per_recipient.insert(
                net.pair_of(p).unwrap(),
                Content::Transaction { tx, payload: 1 },
            );
        }
        net.broadcast(byz, &per_recipient);
        net.drain();
        assert!(!net.intersection_blacklist().is_empty());
        for p in net.honest_parents() {
            assert!(p.blacklist_contains(byz));
            assert!(!p.blacklist_contains(p.self_id()));
        }
        assert_eq!(net.detection_fraction(), 1.0);
    }

    #[test]
    fn consistent_adversary_is_never_detected() {
        let mut net = build_network(&ScenarioConfig {
            strategy: AdversaryStrategy::Consistent,
            iterations: 6,
            ..cfg(6, 2)
        })
        .unwrap();
        let metrics = net.run_to_completion();
        assert_eq!(metrics.final_detection_fraction, 0.0);
        for report in &metrics.reports {
            assert!(report.detections.is_empty());
            assert!(report.blacklists.values().all(|b| b.is_empty()));
        }
    }

    #[test]
    fn silent_adversary_is_never_detected_and_never_sends() {
        let mut net = build_network(&ScenarioConfig {
            strategy: AdversaryStrategy::Silent,
            iterations: 2,
            ..cfg(4, 1)
        })
        .unwrap();
        let report = net.run_iteration();
        assert!(report.detections.is_empty());
        // The silent pair sends nothing at all: 3 honest parents and
        // their 3 children broadcast, and each honest parent votes on
        // the 2 foreign honest transactions.
        assert_eq!(report.messages_sent, 3 + 3 + 3 * 2);
    }

    #[test]
    fn duplicate_injections_are_suppressed_at_delivery() {
        let mut net = build_network(&cfg(3, 0)).unwrap();
        net.run_iteration();
        let sender = net.roster.parents()[0];
        let receiver = net.roster.parents()[1];
        let m = Message {
            seq: net.parent_state(sender).unwrap().next_seq(),
            content: Content::Transaction {
                tx: TxId {
                    origin: sender,
                    nonce: 99,
                },
                payload: 1,
            },
            sender,
            receiver,
        };
        net.inject_message(&m);
        net.inject_message(&m);
        net.drain();
        assert_eq!(net.duplicates_suppressed(), 1);

        // Same seq from a different sender is not a duplicate.
        let other = Message {
            sender: net.roster.parents()[2],
            ..m.clone()
        };
        net.inject_message(&other);
        net.drain();
        assert_eq!(net.duplicates_suppressed(), 1);
    }

    #[test]
    fn broadcast_map_excludes_whoever_is_absent() {
        let mut net = build_network(&cfg(4, 0)).unwrap();
        net.run_iteration();
        let parents: Vec<NodeId> = net.roster.parents().to_vec();
        let excluded = parents[3];
        let tx = TxId {
            origin: parents[0],
            nonce: 77,
        };
        let mut per_recipient = BTreeMap::new();
        for &p in &parents[1..3] {
            per_recipient.insert(p, Content::Transaction { tx, payload: 0 });
        }
        let delivered_before = net.engine.messages_delivered;
        net.broadcast(parents[0], &per_recipient);
        net.drain();
        assert_eq!(net.engine.messages_delivered - delivered_before, 2);
        assert!(net.parent_state(excluded).unwrap().inbox_entry(parents[0]).is_none());
    }

    #[test]
    fn blacklist_reset_fires_on_the_interval() {
        let mut net = build_network(&ScenarioConfig {
            reset_interval: 3,
            iterations: 7,
            ..cfg(5, 1)
        })
        .unwrap();
        for expect_reset in [false, false, true, false, false, true, false] {
            let report = net.run_iteration();
            assert_eq!(report.reset_performed, expect_reset, "iteration {}", report.iteration);
        }
    }

    #[test]
    fn early_stop_without_resets_once_all_byzantine_are_blacklisted() {
        let metrics = run_scenario(&ScenarioConfig {
            reset_interval: 0,
            iterations: 50,
            seed: 3,
            ..cfg(6, 1)
        })
        .unwrap();
        assert!(metrics.reports.len() < 50);
        assert_eq!(metrics.final_detection_fraction, 1.0);
        assert!(metrics.never_detected.is_empty());
    }

    #[test]
    fn identical_seeds_reproduce_identical_metrics() {
        let c = ScenarioConfig {
            strategy: AdversaryStrategy::UniformRandom,
            iterations: 5,
            seed: 1234,
            ..cfg(8, 3)
        };
        let a = run_scenario(&c).unwrap();
        let b = run_scenario(&c).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn trace_lines_decode_to_wire_messages() {
        let mut net = build_network(&cfg(3, 1)).unwrap();
        net.set_trace(true);
        net.run_iteration();
        let trace = net.take_trace();
        assert!(!trace.is_empty());
        for line in &trace {
            let (tick, hex) = line.split_once(' ').unwrap();
            assert!(tick.parse::<u64>().is_ok());
            let bytes: Vec<u8> = (0..hex.len())
                .step_by(2)
                .map(|i| u8::from_str_radix(&hex[i..i + 2], 16).unwrap())
                .collect();
            let m = decode_message(&bytes).unwrap();
            assert!(m.sender.as_u32() < 6 && m.receiver.as_u32() < 6);
        }
    }

    #[test]
    fn traffic_shrinks_once_a_byzantine_node_is_fully_blacklisted() {
        let mut net = build_network(&ScenarioConfig {
            reset_interval: 0,
            iterations: 3,
            seed: 3,
            ..cfg(6, 1)
        })
        .unwrap();
        let first = net.run_iteration();
        assert_eq!(net.detection_fraction(), 1.0, "seed must detect in iteration 1");
        let second = net.run_iteration();
        assert!(
            second.messages_sent < first.messages_sent,
            "{} !< {}",
            second.messages_sent,
            first.messages_sent
        );
    }

    #[test]
    fn monte_carlo_detection_frequency_small() {
        // 1500 single-iteration runs of the five-node scenario; the
        // detection event frequency sits near 15/16 (binomial 3-sigma
        // band is about +-0.019).
        let mut detected = 0u32;
        for seed in 0..1500 {
            let metrics = run_scenario(&ScenarioConfig {
                iterations: 1,
                reset_interval: 0,
                seed,
                ..cfg(5, 1)
            })
            .unwrap();
            if metrics.final_detection_fraction == 1.0 {
                detected += 1;
            }
        }
        let freq = f64::from(detected) / 1500.0;
        assert!((0.915..=0.96).contains(&freq), "frequency {freq}");
    }
}
