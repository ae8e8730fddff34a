//! Parent and child state machines.
//!
//! Both machines are deterministic transition functions: an event plus
//! the current state yields a new state and a list of outgoing actions.
//! All nondeterminism (payload choice, delivery delays) lives in the
//! network layer; given the same event sequence and RNG stream, a state
//! machine replays identically.
//!
//! The parent runs the dispatch ladder on every network delivery:
//! blacklisted senders are dropped, blacklist messages are merged,
//! transactions are staged for comparison against the copy relayed by
//! the parent's own child, and votes are tallied toward commit
//! decisions. The child originates nothing: it re-broadcasts exactly
//! what its parent instructs and relays every transaction it receives
//! back over the private pair channel.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::protocol::{Content, Message, NodeId, TxId, Verdict};

/// Compact membership set over dense node ids.
#[derive(Clone, PartialEq, Eq, Debug, Default)]
pub struct NodeSet {
    words: Vec<u64>,
    len: u32,
}

impl NodeSet {
    pub fn with_id_capacity(ids: u32) -> Self {
        NodeSet {
            words: vec![0; (ids as usize).div_ceil(64)],
            len: 0,
        }
    }

    pub fn contains(&self, id: NodeId) -> bool {
        let bit = id.as_u32() as usize;
        self.words
            .get(bit / 64)
            .is_some_and(|w| w & (1 << (bit % 64)) != 0)
    }

    /// Inserts `id`, returning true if it was not already present.
    pub fn insert(&mut self, id: NodeId) -> bool {
        let bit = id.as_u32() as usize;
        if bit / 64 >= self.words.len() {
            self.words.resize(bit / 64 + 1, 0);
        }
        let word = &mut self.words[bit / 64];
        let mask = 1 << (bit % 64);
        if *word & mask != 0 {
            return false;
        }
        *word |= mask;
        self.len += 1;
        true
    }

    pub fn clear(&mut self) {
        self.words.fill(0);
        self.len = 0;
    }

    pub fn len(&self) -> u32 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn iter(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            (0..64)
                .filter(move |b| w & (1 << b) != 0)
                .map(move |b| NodeId::new((wi * 64 + b) as u32))
        })
    }

    pub fn to_sorted_vec(&self) -> Vec<NodeId> {
        self.iter().collect()
    }
}

/// Static facts about the network membership: which ids exist and which
/// of them are consensus participants (parents). Shared read-only by all
/// states of one network.
#[derive(Debug)]
pub struct Roster {
    total_ids: u32,
    parents: Vec<NodeId>,
    parent_index: Vec<u32>,
}

const NOT_A_PARENT: u32 = u32::MAX;

impl Roster {
    /// `parents` must be sorted and id values must lie in `0..total_ids`.
    pub fn new(mut parents: Vec<NodeId>, total_ids: u32) -> Self {
        parents.sort_unstable();
        let mut parent_index = vec![NOT_A_PARENT; total_ids as usize];
        for (i, id) in parents.iter().enumerate() {
            parent_index[id.as_u32() as usize] = i as u32;
        }
        Roster {
            total_ids,
            parents,
            parent_index,
        }
    }

    pub fn total_ids(&self) -> u32 {
        self.total_ids
    }

    pub fn parents(&self) -> &[NodeId] {
        &self.parents
    }

    pub fn parent_count(&self) -> u32 {
        self.parents.len() as u32
    }

    pub fn is_parent(&self, id: NodeId) -> bool {
        self.parent_index(id).is_some()
    }

    pub fn parent_index(&self, id: NodeId) -> Option<usize> {
        match self.parent_index.get(id.as_u32() as usize) {
            Some(&idx) if idx != NOT_A_PARENT => Some(idx as usize),
            _ => None,
        }
    }
}

/// Transaction content as staged for comparison.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct TxContent {
    pub tx: TxId,
    pub payload: u32,
}

/// One sender's transaction awaiting the two-copy comparison.
/// `direct` is the copy received straight from the sender, `relayed`
/// the copy observed and forwarded by the parent's own child.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct InboxEntry {
    pub seq: u64,
    pub direct: Option<TxContent>,
    pub relayed: Option<TxContent>,
}

/// Result of comparing the two copies of one broadcast.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum DetectOutcome {
    Match,
    Mismatch,
}

/// Compares the directly received copy against the child-relayed copy.
/// Equality covers the full content: transaction id and payload.
pub fn compare_and_detect(direct: &TxContent, relayed: &TxContent) -> DetectOutcome {
    if direct == relayed {
        DetectOutcome::Match
    } else {
        DetectOutcome::Mismatch
    }
}

/// Commit state of one transaction at one parent.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub enum CommitDecision {
    #[default]
    Pending,
    Commit,
    Reject,
}

/// A network delivery as seen by a state machine. Borrowed view so the
/// hot path never clones blacklist bodies.
#[derive(Clone, Copy, Debug)]
pub struct Delivery<'a> {
    pub sender: NodeId,
    pub seq: u64,
    pub body: Body<'a>,
}

#[derive(Clone, Copy, Debug)]
pub enum Body<'a> {
    Transaction { tx: TxId, payload: u32 },
    Vote { tx: TxId, verdict: Verdict },
    Blacklist { members: &'a [NodeId] },
}

impl<'a> Delivery<'a> {
    /// Borrows a wire message as a delivery. Blacklist bodies are copied
    /// into `scratch` (sorted order is preserved from the set).
    pub fn from_message(m: &'a Message, scratch: &'a mut Vec<NodeId>) -> Self {
        let body = match &m.content {
            Content::Transaction { tx, payload } => Body::Transaction {
                tx: *tx,
                payload: *payload,
            },
            Content::Vote { tx, verdict } => Body::Vote {
                tx: *tx,
                verdict: *verdict,
            },
            Content::Blacklist { members } => {
                scratch.clear();
                scratch.extend(members.iter().copied());
                Body::Blacklist { members: scratch }
            }
        };
        Delivery {
            sender: m.sender,
            seq: m.seq,
            body,
        }
    }
}

/// Outgoing effects of one parent transition.
#[derive(Clone, PartialEq, Debug)]
pub enum Action {
    /// Broadcast a verdict on a compared transaction.
    BroadcastVote { tx: TxId, verdict: Verdict },
    /// Broadcast the full current blacklist.
    BroadcastBlacklist { members: Arc<Vec<NodeId>> },
    /// The difference detector proved `sender` equivocated.
    Detected { sender: NodeId },
    /// A transaction reached its commit decision at this parent.
    Decided { tx: TxId, decision: CommitDecision },
}

/// The instruction a parent pushes to its child each iteration: the
/// content to re-broadcast and the current blacklist. The pair channel
/// carrying it is invisible to every other node.
#[derive(Clone, PartialEq, Debug)]
pub struct PairInstruction {
    pub content: Content,
    pub blacklist: Arc<Vec<NodeId>>,
}

/// Vote bookkeeping for one transaction. Voter identity and verdict are
/// kept as two parent-indexed bitsets, so the ledger stays compact at
/// any network size.
#[derive(Clone, Debug, Default)]
struct TxTally {
    nonce: Option<u64>,
    valid: u32,
    not_valid: u32,
    voted: Vec<u64>,
    valid_bits: Vec<u64>,
    decision: CommitDecision,
}

impl TxTally {
    fn reset(&mut self) {
        self.nonce = None;
        self.valid = 0;
        self.not_valid = 0;
        self.voted.fill(0);
        self.valid_bits.fill(0);
        self.decision = CommitDecision::Pending;
    }

    /// Records a verdict from parent `voter_idx`; the first verdict per
    /// voter wins. Returns false for repeat votes.
    fn record(&mut self, voter_idx: usize, verdict: Verdict) -> bool {
        let (w, mask) = (voter_idx / 64, 1u64 << (voter_idx % 64));
        if self.voted[w] & mask != 0 {
            return false;
        }
        self.voted[w] |= mask;
        match verdict {
            Verdict::Valid => {
                self.valid_bits[w] |= mask;
                self.valid += 1;
            }
            Verdict::NotValid => self.not_valid += 1,
        }
        true
    }
}

/// State of one honest parent.
#[derive(Clone, Debug)]
pub struct ParentState {
    self_id: NodeId,
    child_id: NodeId,
    roster: Arc<Roster>,
    blacklist: NodeSet,
    blacklisted_parents: u32,
    blacklist_snapshot: Option<Arc<Vec<NodeId>>>,
    inbox: Vec<Option<InboxEntry>>,
    tallies: Vec<TxTally>,
    committed: Vec<TxId>,
    rejected: Vec<TxId>,
    next_seq: u64,
    iteration: u64,
    pending_pair_content: Option<Content>,
    dropped_from_blacklisted: u64,
    protocol_violations: u64,
}

impl ParentState {
    pub fn new(self_id: NodeId, child_id: NodeId, roster: Arc<Roster>) -> Self {
        let total = roster.total_ids();
        let parent_words = (roster.parent_count() as usize).div_ceil(64);
        let tallies = (0..roster.parent_count())
            .map(|_| TxTally {
                voted: vec![0; parent_words],
                valid_bits: vec![0; parent_words],
                ..TxTally::default()
            })
            .collect();
        ParentState {
            self_id,
            child_id,
            roster,
            blacklist: NodeSet::with_id_capacity(total),
            blacklisted_parents: 0,
            blacklist_snapshot: None,
            inbox: vec![None; total as usize],
            tallies,
            committed: Vec::new(),
            rejected: Vec::new(),
            next_seq: 0,
            iteration: 0,
            pending_pair_content: None,
            dropped_from_blacklisted: 0,
            protocol_violations: 0,
        }
    }

    pub fn self_id(&self) -> NodeId {
        self.self_id
    }

    pub fn child_id(&self) -> NodeId {
        self.child_id
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn blacklist_contains(&self, id: NodeId) -> bool {
        self.blacklist.contains(id)
    }

    pub fn blacklist_len(&self) -> u32 {
        self.blacklist.len()
    }

    /// Current blacklist as a shared sorted snapshot.
    pub fn blacklist_snapshot(&mut self) -> Arc<Vec<NodeId>> {
        if self.blacklist_snapshot.is_none() {
            self.blacklist_snapshot = Some(Arc::new(self.blacklist.to_sorted_vec()));
        }
        Arc::clone(self.blacklist_snapshot.as_ref().unwrap())
    }

    /// Number of eligible voters from this parent's perspective: every
    /// currently non-blacklisted parent other than itself.
    pub fn electorate(&self) -> u32 {
        self.roster.parent_count() - 1 - self.blacklisted_parents
    }

    pub fn committed(&self) -> &[TxId] {
        &self.committed
    }

    pub fn rejected(&self) -> &[TxId] {
        &self.rejected
    }

    pub fn inbox_entry(&self, sender: NodeId) -> Option<&InboxEntry> {
        self.inbox
            .get(sender.as_u32() as usize)
            .and_then(|e| e.as_ref())
    }

    pub fn dropped_from_blacklisted(&self) -> u64 {
        self.dropped_from_blacklisted
    }

    pub fn protocol_violations(&self) -> u64 {
        self.protocol_violations
    }

    /// Decision currently recorded for `tx`, if its tally is live.
    pub fn decision(&self, tx: TxId) -> CommitDecision {
        match self.roster.parent_index(tx.origin) {
            Some(idx) if self.tallies[idx].nonce == Some(tx.nonce) => self.tallies[idx].decision,
            _ => CommitDecision::Pending,
        }
    }

    /// The per-iteration vote ledger: transaction id to voter verdicts.
    pub fn vote_ledger(&self) -> BTreeMap<TxId, BTreeMap<NodeId, Verdict>> {
        let mut out = BTreeMap::new();
        for (origin_idx, tally) in self.tallies.iter().enumerate() {
            let Some(nonce) = tally.nonce else { continue };
            let tx = TxId {
                origin: self.roster.parents()[origin_idx],
                nonce,
            };
            let mut votes = BTreeMap::new();
            for (i, voter) in self.roster.parents().iter().enumerate() {
                let (w, mask) = (i / 64, 1u64 << (i % 64));
                if tally.voted[w] & mask != 0 {
                    let verdict = if tally.valid_bits[w] & mask != 0 {
                        Verdict::Valid
                    } else {
                        Verdict::NotValid
                    };
                    votes.insert(*voter, verdict);
                }
            }
            out.insert(tx, votes);
        }
        out
    }

    /// Starts a new iteration: bumps the counter, clears the vote ledger
    /// and prunes inbox entries whose comparison can no longer complete.
    pub fn begin_iteration(&mut self) {
        self.iteration += 1;
        for tally in &mut self.tallies {
            tally.reset();
        }
        for slot in &mut self.inbox {
            *slot = None;
        }
    }

    /// Produces this iteration's transaction broadcast: fresh sequence
    /// number, payload drawn from this node's own RNG stream.
    pub fn prepare_transaction(&mut self, rng: &mut ChaCha8Rng, alphabet: u32) -> (u64, Content) {
        let seq = self.next_seq;
        self.next_seq += 1;
        let content = Content::Transaction {
            tx: TxId {
                origin: self.self_id,
                nonce: seq,
            },
            payload: rng.random_range(0..alphabet),
        };
        self.pending_pair_content = Some(content.clone());
        (seq, content)
    }

    /// Emits the pair-channel instruction carrying the content prepared
    /// by [`Self::prepare_transaction`] and the current blacklist.
    pub fn pair_sync(&mut self) -> PairInstruction {
        let content = self
            .pending_pair_content
            .take()
            .expect("pair_sync must follow prepare_transaction");
        PairInstruction {
            content,
            blacklist: self.blacklist_snapshot(),
        }
    }

    /// Allocates a sequence number for a follow-up broadcast (vote or
    /// blacklist gossip).
    pub fn alloc_seq(&mut self) -> u64 {
        let seq = self.next_seq;
        self.next_seq += 1;
        seq
    }

    /// Dispatch ladder for one network delivery.
    pub fn handle(&mut self, delivery: &Delivery<'_>) -> Vec<Action> {
        if self.blacklist.contains(delivery.sender) {
            self.dropped_from_blacklisted += 1;
            return Vec::new();
        }
        match delivery.body {
            Body::Blacklist { members } => self.merge_blacklist(members),
            Body::Transaction { tx, payload } => {
                self.store_copy(delivery.sender, delivery.seq, TxContent { tx, payload }, true)
            }
            Body::Vote { tx, verdict } => self.record_vote(delivery.sender, tx, verdict),
        }
    }

    /// Convenience entry point over the wire message type.
    pub fn handle_message(&mut self, m: &Message) -> Vec<Action> {
        let mut scratch = Vec::new();
        let delivery = Delivery::from_message(m, &mut scratch);
        self.handle(&delivery)
    }

    /// Receives the copy of `(observed_sender, seq)` that this parent's
    /// child observed on the network.
    pub fn handle_pair_relay(
        &mut self,
        observed_sender: NodeId,
        seq: u64,
        content: TxContent,
    ) -> Vec<Action> {
        if self.blacklist.contains(observed_sender) {
            self.dropped_from_blacklisted += 1;
            return Vec::new();
        }
        self.store_copy(observed_sender, seq, content, false)
    }

    /// A malformed message was attributed to `sender`; treated exactly
    /// like a detection event minus the vote.
    pub fn note_protocol_violation(&mut self, sender: NodeId) -> Vec<Action> {
        self.protocol_violations += 1;
        if self.blacklist.contains(sender) || sender == self.self_id || sender == self.child_id {
            return Vec::new();
        }
        self.blacklist_insert(sender);
        vec![Action::BroadcastBlacklist {
            members: self.blacklist_snapshot(),
        }]
    }

    /// End-of-iteration pass: no further votes can arrive, so every
    /// still-pending transaction either commits, rejects, or stays
    /// pending forever.
    pub fn finalize_iteration(&mut self) -> Vec<Action> {
        let mut actions = Vec::new();
        let electorate = self.electorate();
        for origin_idx in 0..self.tallies.len() {
            let tally = &self.tallies[origin_idx];
            let Some(nonce) = tally.nonce else { continue };
            if tally.decision != CommitDecision::Pending {
                continue;
            }
            let tx = TxId {
                origin: self.roster.parents()[origin_idx],
                nonce,
            };
            if 2 * tally.valid > electorate {
                self.settle(origin_idx, tx, CommitDecision::Commit, &mut actions);
            } else if 2 * tally.not_valid >= electorate {
                self.settle(origin_idx, tx, CommitDecision::Reject, &mut actions);
            }
        }
        actions
    }

    /// Clears the blacklist wholesale. The caller (the network layer)
    /// is responsible for the reset-interval precondition; the empty
    /// list reaches the child with the next pair sync.
    pub fn reset_blacklist(&mut self) {
        self.blacklist.clear();
        self.blacklisted_parents = 0;
        self.blacklist_snapshot = None;
    }

    fn blacklist_insert(&mut self, id: NodeId) -> bool {
        debug_assert!(id != self.self_id && id != self.child_id);
        if !self.blacklist.insert(id) {
            return false;
        }
        if self.roster.is_parent(id) {
            self.blacklisted_parents += 1;
        }
        self.blacklist_snapshot = None;
        // A pending comparison involving a now-blacklisted sender can
        // never be trusted; drop it.
        self.inbox[id.as_u32() as usize] = None;
        true
    }

    fn merge_blacklist(&mut self, members: &[NodeId]) -> Vec<Action> {
        let mut grew = false;
        for &id in members {
            if id == self.self_id || id == self.child_id || self.blacklist.contains(id) {
                continue;
            }
            grew |= self.blacklist_insert(id);
        }
        // Re-gossip only on strict growth, so gossip cascades terminate.
        if grew {
            vec![Action::BroadcastBlacklist {
                members: self.blacklist_snapshot(),
            }]
        } else {
            Vec::new()
        }
    }

    fn store_copy(
        &mut self,
        sender: NodeId,
        seq: u64,
        content: TxContent,
        direct: bool,
    ) -> Vec<Action> {
        let slot = &mut self.inbox[sender.as_u32() as usize];
        let entry = match slot {
            Some(e) if e.seq == seq => e,
            // A different in-flight sequence from the same sender
            // replaces the stale entry; at most one comparison per
            // sender is pending at a time.
            _ => slot.insert(InboxEntry {
                seq,
                direct: None,
                relayed: None,
            }),
        };
        if direct {
            entry.direct = Some(content);
        } else {
            entry.relayed = Some(content);
        }
        let (Some(d), Some(r)) = (entry.direct, entry.relayed) else {
            return Vec::new();
        };
        *slot = None;

        match compare_and_detect(&d, &r) {
            DetectOutcome::Match => {
                let mut actions = vec![Action::BroadcastVote {
                    tx: d.tx,
                    verdict: Verdict::Valid,
                }];
                self.record_own_vote(d.tx, Verdict::Valid, &mut actions);
                actions
            }
            DetectOutcome::Mismatch => {
                // Vote against whichever transaction the direct copy
                // claimed, then blacklist and gossip.
                let mut actions = vec![
                    Action::Detected { sender },
                    Action::BroadcastVote {
                        tx: d.tx,
                        verdict: Verdict::NotValid,
                    },
                ];
                self.record_own_vote(d.tx, Verdict::NotValid, &mut actions);
                self.blacklist_insert(sender);
                actions.push(Action::BroadcastBlacklist {
                    members: self.blacklist_snapshot(),
                });
                actions
            }
        }
    }

    fn record_own_vote(&mut self, tx: TxId, verdict: Verdict, actions: &mut Vec<Action>) {
        if let Some(action) = self.record_verdict(self.self_id, tx, verdict) {
            actions.push(action);
        }
    }

    fn record_vote(&mut self, voter: NodeId, tx: TxId, verdict: Verdict) -> Vec<Action> {
        match self.record_verdict(voter, tx, verdict) {
            Some(action) => vec![action],
            None => Vec::new(),
        }
    }

    fn record_verdict(&mut self, voter: NodeId, tx: TxId, verdict: Verdict) -> Option<Action> {
        let voter_idx = self.roster.parent_index(voter)?;
        let origin_idx = self.roster.parent_index(tx.origin)?;
        let electorate = self.electorate();
        let tally = &mut self.tallies[origin_idx];
        match tally.nonce {
            None => tally.nonce = Some(tx.nonce),
            // First-seen nonce wins; a second concurrent transaction
            // from the same origin would itself be Byzantine behavior.
            Some(n) if n != tx.nonce => return None,
            Some(_) => {}
        }
        if !tally.record(voter_idx, verdict) {
            return None;
        }
        if tally.decision == CommitDecision::Pending && 2 * tally.valid > electorate {
            let mut actions = Vec::new();
            self.settle(origin_idx, tx, CommitDecision::Commit, &mut actions);
            return actions.pop();
        }
        None
    }

    fn settle(
        &mut self,
        origin_idx: usize,
        tx: TxId,
        decision: CommitDecision,
        actions: &mut Vec<Action>,
    ) {
        let tally = &mut self.tallies[origin_idx];
        debug_assert_eq!(tally.decision, CommitDecision::Pending);
        tally.decision = decision;
        match decision {
            CommitDecision::Commit => self.committed.push(tx),
            CommitDecision::Reject => self.rejected.push(tx),
            CommitDecision::Pending => unreachable!(),
        }
        actions.push(Action::Decided { tx, decision });
    }
}

/// Effects of one child transition.
#[derive(Clone, PartialEq, Debug)]
pub enum ChildAction {
    /// Re-broadcast the parent's content under the child's own identity.
    Broadcast { seq: u64, content: Content },
    /// Forward an observed transaction to the parent over the pair
    /// channel.
    RelayToParent {
        observed_sender: NodeId,
        seq: u64,
        content: TxContent,
    },
}

/// State of one honest child. The child never originates content; its
/// blacklist is a mirror of the parent's, refreshed by each pair sync.
#[derive(Clone, Debug)]
pub struct ChildState {
    self_id: NodeId,
    parent_id: NodeId,
    blacklist: NodeSet,
    next_seq: u64,
    dropped_from_blacklisted: u64,
}

impl ChildState {
    pub fn new(self_id: NodeId, parent_id: NodeId, total_ids: u32) -> Self {
        ChildState {
            self_id,
            parent_id,
            blacklist: NodeSet::with_id_capacity(total_ids),
            next_seq: 0,
            dropped_from_blacklisted: 0,
        }
    }

    pub fn self_id(&self) -> NodeId {
        self.self_id
    }

    pub fn parent_id(&self) -> NodeId {
        self.parent_id
    }

    pub fn next_seq(&self) -> u64 {
        self.next_seq
    }

    pub fn blacklist_contains(&self, id: NodeId) -> bool {
        self.blacklist.contains(id)
    }

    pub fn dropped_from_blacklisted(&self) -> u64 {
        self.dropped_from_blacklisted
    }

    /// Adopts the parent's blacklist and re-broadcasts the instructed
    /// content, byte-identical, under the child's own identity and
    /// sequence counter.
    pub fn on_pair_instruction(&mut self, instruction: &PairInstruction) -> ChildAction {
        self.blacklist.clear();
        for &id in instruction.blacklist.iter() {
            self.blacklist.insert(id);
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        ChildAction::Broadcast {
            seq,
            content: instruction.content.clone(),
        }
    }

    /// Network dispatch: transactions from non-blacklisted senders are
    /// relayed to the parent; votes and blacklist messages are dropped
    /// (the child consumes only transactions).
    pub fn handle(&mut self, delivery: &Delivery<'_>) -> Option<ChildAction> {
        if self.blacklist.contains(delivery.sender) {
            self.dropped_from_blacklisted += 1;
            return None;
        }
        match delivery.body {
            Body::Transaction { tx, payload } => Some(ChildAction::RelayToParent {
                observed_sender: delivery.sender,
                seq: delivery.seq,
                content: TxContent { tx, payload },
            }),
            Body::Vote { .. } | Body::Blacklist { .. } => None,
        }
    }
}
