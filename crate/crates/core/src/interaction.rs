//! Structured interaction logs and the running statistics of their prefixes.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense integer id of a first-component constituent (sender, subject).
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SenderId(pub u32);

/// Dense integer id of a second-component constituent (receiver, author).
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct ReceiverId(pub u32);

impl SenderId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl ReceiverId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for SenderId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for ReceiverId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bijection between constituent names and dense ids `0..len`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl From<Vec<String>> for Vocab {
    fn from(names: Vec<String>) -> Self {
        let index = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i as u32))
            .collect();
        Vocab { names, index }
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.names
    }
}

impl PartialEq for Vocab {
    fn eq(&self, other: &Self) -> bool {
        self.names == other.names
    }
}

impl Eq for Vocab {}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id of `name`, registering it if unseen.
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// One structured interaction: a sender multiset and a receiver list.
///
/// Senders are kept sorted, so the multiset has a single encoding. Receivers
/// keep draw order; equality compares them as multisets.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Interaction {
    senders: Vec<SenderId>,
    receivers: Vec<ReceiverId>,
}

impl Interaction {
    pub fn new(mut senders: Vec<SenderId>, receivers: Vec<ReceiverId>) -> Result<Self> {
        if senders.is_empty() {
            return Err(Error::InvalidParams("empty sender multiset".into()));
        }
        if receivers.is_empty() {
            return Err(Error::InvalidParams("empty receiver multiset".into()));
        }
        senders.sort_unstable();
        Ok(Interaction { senders, receivers })
    }

    pub fn senders(&self) -> &[SenderId] {
        &self.senders
    }

    pub fn receivers(&self) -> &[ReceiverId] {
        &self.receivers
    }

    /// Distinct senders in increasing id order.
    pub fn distinct_senders(&self) -> Vec<SenderId> {
        let mut out = self.senders.clone();
        out.dedup();
        out
    }

    /// Sender whose local statistics absorb the receivers when no latent
    /// attribution is supplied.
    pub fn lead_sender(&self) -> SenderId {
        self.senders[0]
    }

    pub fn sender_arity(&self) -> usize {
        self.senders.len()
    }

    pub fn receiver_arity(&self) -> usize {
        self.receivers.len()
    }

    fn sorted_receivers(&self) -> Vec<ReceiverId> {
        let mut r = self.receivers.clone();
        r.sort_unstable();
        r
    }
}

impl PartialEq for Interaction {
    fn eq(&self, other: &Self) -> bool {
        self.senders == other.senders && self.sorted_receivers() == other.sorted_receivers()
    }
}

impl Eq for Interaction {}

/// An ordered sequence of structured interactions over integer-coded
/// vocabularies. Record order is the interaction labeling.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionLog {
    records: Vec<Interaction>,
    sender_vocab: Vocab,
    receiver_vocab: Vocab,
    /// Senders and receivers are drawn from one population and share ids.
    shared: bool,
}

impl InteractionLog {
    pub fn new(shared: bool) -> Self {
        InteractionLog {
            shared,
            ..Default::default()
        }
    }

    /// Builds a log from raw ids, naming constituents `s<id>` / `r<id>`
    /// (or `v<id>` for a shared population).
    pub fn from_ids(records: Vec<Interaction>, shared: bool) -> Result<Self> {
        let mut n_s = 0u32;
        let mut n_r = 0u32;
        for rec in &records {
            for s in rec.senders() {
                n_s = n_s.max(s.0 + 1);
            }
            for r in rec.receivers() {
                n_r = n_r.max(r.0 + 1);
            }
        }
        let (sender_vocab, receiver_vocab) = if shared {
            let n = n_s.max(n_r);
            let v = Vocab::from((0..n).map(|i| format!("v{i}")).collect::<Vec<_>>());
            (v.clone(), v)
        } else {
            (
                Vocab::from((0..n_s).map(|i| format!("s{i}")).collect::<Vec<_>>()),
                Vocab::from((0..n_r).map(|i| format!("r{i}")).collect::<Vec<_>>()),
            )
        };
        Ok(InteractionLog {
            records,
            sender_vocab,
            receiver_vocab,
            shared,
        })
    }

    /// Appends an interaction given by constituent names.
    pub fn push_named<S: AsRef<str>, R: AsRef<str>>(
        &mut self,
        senders: &[S],
        receivers: &[R],
    ) -> Result<()> {
        let s: Vec<SenderId> = senders
            .iter()
            .map(|n| SenderId(self.intern_sender(n.as_ref())))
            .collect();
        let r: Vec<ReceiverId> = receivers
            .iter()
            .map(|n| ReceiverId(self.intern_receiver(n.as_ref())))
            .collect();
        self.records.push(Interaction::new(s, r)?);
        Ok(())
    }

    /// Appends an interaction given by ids already registered in the vocabularies.
    pub fn push(&mut self, rec: Interaction) -> Result<()> {
        self.check_record(&rec)?;
        self.records.push(rec);
        Ok(())
    }

    fn intern_sender(&mut self, name: &str) -> u32 {
        let id = self.sender_vocab.intern(name);
        if self.shared {
            self.receiver_vocab.intern(name);
        }
        id
    }

    fn intern_receiver(&mut self, name: &str) -> u32 {
        let id = self.receiver_vocab.intern(name);
        if self.shared {
            self.sender_vocab.intern(name);
        }
        id
    }

    fn check_record(&self, rec: &Interaction) -> Result<()> {
        for s in rec.senders() {
            if s.index() >= self.sender_vocab.len() {
                return Err(Error::InvalidParams(format!("unregistered sender id {s}")));
            }
        }
        for r in rec.receivers() {
            if r.index() >= self.receiver_vocab.len() {
                return Err(Error::InvalidParams(format!(
                    "unregistered receiver id {r}"
                )));
            }
        }
        Ok(())
    }

    /// Checks the structural invariants of the log.
    pub fn validate(&self) -> Result<()> {
        for rec in &self.records {
            self.check_record(rec)?;
        }
        if self.shared && self.sender_vocab != self.receiver_vocab {
            return Err(Error::InvalidParams(
                "shared population with diverging vocabularies".into(),
            ));
        }
        Ok(())
    }

    pub fn records(&self) -> &[Interaction] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn is_shared(&self) -> bool {
        self.shared
    }

    pub fn sender_vocab(&self) -> &Vocab {
        &self.sender_vocab
    }

    pub fn receiver_vocab(&self) -> &Vocab {
        &self.receiver_vocab
    }

    pub fn sender_name(&self, s: SenderId) -> &str {
        self.sender_vocab.name(s.0).unwrap_or("?")
    }

    pub fn receiver_name(&self, r: ReceiverId) -> &str {
        self.receiver_vocab.name(r.0).unwrap_or("?")
    }

    pub fn num_senders(&self) -> usize {
        self.sender_vocab.len()
    }

    pub fn num_receivers(&self) -> usize {
        self.receiver_vocab.len()
    }

    /// Total number of receiver slots across all interactions.
    pub fn receiver_slots(&self) -> usize {
        self.records.iter().map(Interaction::receiver_arity).sum()
    }

    /// Whether any interaction lists more than one sender.
    pub fn has_multi_sender(&self) -> bool {
        self.records.iter().any(|r| r.sender_arity() > 1)
    }

    /// Flat sender sequence (each interaction's senders in stored order).
    pub fn sender_sequence(&self) -> impl Iterator<Item = SenderId> + '_ {
        self.records.iter().flat_map(|r| r.senders().iter().copied())
    }

    /// Default attribution of each interaction to one of its senders.
    pub fn lead_senders(&self) -> Vec<SenderId> {
        self.records.iter().map(Interaction::lead_sender).collect()
    }
}

/// Relabels constituents to their order of first appearance.
///
/// Senders and receivers are relabeled jointly when the log has a shared
/// population, separately otherwise. Names travel with their ids, so the
/// output describes the same network. Coinciding canonical records imply
/// equivalence under a constituent bijection. The converse holds when every
/// interaction has one sender: multi-sender records are stored sorted by id,
/// so a relabeling can change the order in which their senders are first
/// seen.
pub fn canonicalize_labels(log: &InteractionLog) -> InteractionLog {
    let n_s = log.sender_vocab.len();
    let n_r = log.receiver_vocab.len();
    let mut senders_map = Relabel::new(if log.shared { n_s.max(n_r) } else { n_s });
    let mut receivers_map = Relabel::new(if log.shared { 0 } else { n_r });

    let mut records = Vec::with_capacity(log.len());
    for rec in &log.records {
        let senders: Vec<SenderId> = rec
            .senders
            .iter()
            .map(|s| SenderId(senders_map.get(s.0)))
            .collect();
        let rmap = if log.shared {
            &mut senders_map
        } else {
            &mut receivers_map
        };
        let receivers: Vec<ReceiverId> = rec
            .receivers
            .iter()
            .map(|r| ReceiverId(rmap.get(r.0)))
            .collect();
        records.push(Interaction::new(senders, receivers).expect("non-empty by construction"));
    }

    let (sender_vocab, receiver_vocab) = if log.shared {
        let v = senders_map.vocab(&log.sender_vocab);
        (v.clone(), v)
    } else {
        (
            senders_map.vocab(&log.sender_vocab),
            receivers_map.vocab(&log.receiver_vocab),
        )
    };
    InteractionLog {
        records,
        sender_vocab,
        receiver_vocab,
        shared: log.shared,
    }
}

struct Relabel {
    map: Vec<Option<u32>>,
    next: u32,
}

impl Relabel {
    fn new(n: usize) -> Self {
        Relabel {
            map: vec![None; n],
            next: 0,
        }
    }

    fn get(&mut self, old: u32) -> u32 {
        let next = &mut self.next;
        *self.map[old as usize].get_or_insert_with(|| {
            *next += 1;
            *next - 1
        })
    }

    fn vocab(&self, old: &Vocab) -> Vocab {
        let mut names = vec![String::new(); self.next as usize];
        for (o, new) in self.map.iter().enumerate() {
            if let (Some(new), Some(name)) = (new, old.name(o as u32)) {
                names[*new as usize] = name.to_owned();
            }
        }
        Vocab::from(names)
    }
}

/// Whether two logs differ only by a relabeling of constituents.
pub fn label_equivalent(a: &InteractionLog, b: &InteractionLog) -> bool {
    a.shared == b.shared
        && canonicalize_labels(a).records.iter().zip(canonicalize_labels(b).records.iter()).all(
            |(x, y)| x.senders == y.senders && x.receivers == y.receivers,
        )
        && a.len() == b.len()
}

/// Sub-log of the selected interactions (0-based indices, in the given
/// order), with vocabularies pruned to referenced constituents. Surviving ids
/// keep their relative order.
pub fn restrict(log: &InteractionLog, indices: &[usize]) -> Result<InteractionLog> {
    for &i in indices {
        if i >= log.len() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: log.len(),
            });
        }
    }
    let width = if log.shared {
        log.sender_vocab.len().max(log.receiver_vocab.len())
    } else {
        0
    };
    let mut s_used = vec![false; log.sender_vocab.len().max(width)];
    let mut r_used = vec![false; log.receiver_vocab.len().max(width)];
    for &i in indices {
        let rec = &log.records[i];
        for s in &rec.senders {
            s_used[s.index()] = true;
        }
        for r in &rec.receivers {
            r_used[r.index()] = true;
        }
    }
    if log.shared {
        for (s, r) in s_used.iter_mut().zip(r_used.iter_mut()) {
            let u = *s || *r;
            *s = u;
            *r = u;
        }
    }
    let dense = |used: &[bool]| {
        let mut map = vec![u32::MAX; used.len()];
        let mut next = 0u32;
        for (i, &u) in used.iter().enumerate() {
            if u {
                map[i] = next;
                next += 1;
            }
        }
        map
    };
    let s_map = dense(&s_used);
    let r_map = dense(&r_used);
    let records = indices
        .iter()
        .map(|&i| {
            let rec = &log.records[i];
            Interaction {
                senders: rec.senders.iter().map(|s| SenderId(s_map[s.index()])).collect(),
                receivers: rec
                    .receivers
                    .iter()
                    .map(|r| ReceiverId(r_map[r.index()]))
                    .collect(),
            }
        })
        .collect();
    let prune = |vocab: &Vocab, used: &[bool]| {
        Vocab::from(
            vocab
                .names()
                .iter()
                .enumerate()
                .filter(|(i, _)| used[*i])
                .map(|(_, n)| n.clone())
                .collect::<Vec<_>>(),
        )
    };
    Ok(InteractionLog {
        records,
        sender_vocab: prune(&log.sender_vocab, &s_used),
        receiver_vocab: prune(&log.receiver_vocab, &r_used),
        shared: log.shared,
    })
}

/// One step of the sequential reading of a log.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HistoryEvent {
    /// A sender slot of the next interaction. `first` marks the first sender
    /// of a new interaction.
    Sender { sender: SenderId, first: bool },
    /// A receiver drawn under the local statistics of `attributed`.
    Receiver {
        attributed: SenderId,
        receiver: ReceiverId,
    },
}

/// Flattens a log into its event sequence. Receivers of interaction `i` are
/// attributed to `z[i]` when given, to the lead sender otherwise.
pub fn history_events(log: &InteractionLog, z: Option<&[SenderId]>) -> Vec<HistoryEvent> {
    let mut out = Vec::with_capacity(log.len() * 2 + log.receiver_slots());
    for (i, rec) in log.records().iter().enumerate() {
        for (k, &s) in rec.senders().iter().enumerate() {
            out.push(HistoryEvent::Sender {
                sender: s,
                first: k == 0,
            });
        }
        let attributed = z.map_or(rec.lead_sender(), |z| z[i]);
        for &r in rec.receivers() {
            out.push(HistoryEvent::Receiver {
                attributed,
                receiver: r,
            });
        }
    }
    out
}

/// Running statistics of an observed prefix.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HistoryState {
    interactions: usize,
    out_degree: Vec<u64>,
    seen_senders: usize,
    sender_slots: u64,
    local_in_degree: HashMap<(SenderId, ReceiverId), u64>,
    local_total: Vec<u64>,
    local_receivers: Vec<Vec<ReceiverId>>,
    local_draws: Vec<Vec<ReceiverId>>,
    in_degree: Vec<u64>,
    seen_receivers: usize,
    receiver_slots: u64,
}

impl HistoryState {
    pub fn new() -> Self {
        Self::default()
    }

    fn grow_sender(&mut self, s: SenderId) {
        let need = s.index() + 1;
        if self.out_degree.len() < need {
            self.out_degree.resize(need, 0);
            self.local_total.resize(need, 0);
            self.local_receivers.resize_with(need, Vec::new);
            self.local_draws.resize_with(need, Vec::new);
        }
    }

    pub fn apply(&mut self, ev: HistoryEvent) {
        match ev {
            HistoryEvent::Sender { sender, first } => self.observe_sender(sender, first),
            HistoryEvent::Receiver {
                attributed,
                receiver,
            } => self.observe_receiver(attributed, receiver),
        }
    }

    pub fn observe_sender(&mut self, s: SenderId, starts_interaction: bool) {
        self.grow_sender(s);
        if starts_interaction {
            self.interactions += 1;
        }
        if self.out_degree[s.index()] == 0 {
            self.seen_senders += 1;
        }
        self.out_degree[s.index()] += 1;
        self.sender_slots += 1;
    }

    pub fn observe_receiver(&mut self, s: SenderId, r: ReceiverId) {
        self.grow_sender(s);
        if self.in_degree.len() <= r.index() {
            self.in_degree.resize(r.index() + 1, 0);
        }
        if self.in_degree[r.index()] == 0 {
            self.seen_receivers += 1;
        }
        self.in_degree[r.index()] += 1;
        let d = self.local_in_degree.entry((s, r)).or_insert(0);
        if *d == 0 {
            self.local_receivers[s.index()].push(r);
        }
        *d += 1;
        self.local_total[s.index()] += 1;
        self.local_draws[s.index()].push(r);
        self.receiver_slots += 1;
    }

    /// Number of interactions whose first sender has been observed.
    pub fn interactions(&self) -> usize {
        self.interactions
    }

    /// D^out(s).
    pub fn out_degree(&self, s: SenderId) -> u64 {
        self.out_degree.get(s.index()).copied().unwrap_or(0)
    }

    /// |S_n|.
    pub fn num_seen_senders(&self) -> usize {
        self.seen_senders
    }

    /// Total sender slots observed (the sender urn's normalizer offset).
    pub fn sender_slots(&self) -> u64 {
        self.sender_slots
    }

    /// Senders with positive out-degree, in id order.
    pub fn seen_senders(&self) -> impl Iterator<Item = SenderId> + '_ {
        self.out_degree
            .iter()
            .enumerate()
            .filter(|(_, &d)| d > 0)
            .map(|(i, _)| SenderId(i as u32))
    }

    /// D(s, r).
    pub fn local_in_degree(&self, s: SenderId, r: ReceiverId) -> u64 {
        self.local_in_degree.get(&(s, r)).copied().unwrap_or(0)
    }

    /// m(s).
    pub fn local_total(&self, s: SenderId) -> u64 {
        self.local_total.get(s.index()).copied().unwrap_or(0)
    }

    /// R(s), in order of first local appearance.
    pub fn local_receivers(&self, s: SenderId) -> &[ReceiverId] {
        self.local_receivers
            .get(s.index())
            .map_or(&[][..], Vec::as_slice)
    }

    /// Receivers drawn under `s`, with multiplicity, in draw order.
    pub fn local_draws(&self, s: SenderId) -> &[ReceiverId] {
        self.local_draws.get(s.index()).map_or(&[][..], Vec::as_slice)
    }

    /// Global observed in-degree of `r`.
    pub fn in_degree(&self, r: ReceiverId) -> u64 {
        self.in_degree.get(r.index()).copied().unwrap_or(0)
    }

    pub fn receiver_seen(&self, r: ReceiverId) -> bool {
        self.in_degree(r) > 0
    }

    /// K = |R|.
    pub fn num_seen_receivers(&self) -> usize {
        self.seen_receivers
    }

    /// Total receiver slots consumed.
    pub fn receiver_slots(&self) -> u64 {
        self.receiver_slots
    }

    /// Number of sender ids with allocated statistics.
    pub fn sender_capacity(&self) -> usize {
        self.out_degree.len()
    }

    /// Checks the internal conservation identities.
    pub fn check_invariants(&self) -> Result<()> {
        let mut per_sender = vec![0u64; self.local_total.len()];
        for (&(s, _), &d) in &self.local_in_degree {
            per_sender[s.index()] += d;
        }
        if per_sender != self.local_total {
            return Err(Error::InconsistentState(
                "local totals disagree with local in-degrees".into(),
            ));
        }
        let seen = self.out_degree.iter().filter(|&&d| d > 0).count();
        if seen != self.seen_senders {
            return Err(Error::InconsistentState("seen-sender count".into()));
        }
        if self.local_total.iter().sum::<u64>() != self.receiver_slots {
            return Err(Error::InconsistentState("receiver slot total".into()));
        }
        Ok(())
    }
}

/// Statistics of the prefix ending before receiver `within` of interaction
/// `upto` (0-based). With `within = None` the first `upto` interactions are
/// included in full; with `Some(j)` the senders of interaction `upto` and its
/// first `j` receivers are included as well.
pub fn replay_history(
    log: &InteractionLog,
    upto: usize,
    within: Option<usize>,
    z: Option<&[SenderId]>,
) -> Result<HistoryState> {
    if upto > log.len() || (upto == log.len() && within.is_some()) {
        return Err(Error::InvalidPosition(format!(
            "interaction {upto} of {}",
            log.len()
        )));
    }
    if let Some(j) = within {
        let k = log.records()[upto].receiver_arity();
        if j > k {
            return Err(Error::InvalidPosition(format!(
                "receiver {j} of interaction {upto} with {k} receivers"
            )));
        }
    }
    if let Some(z) = z {
        if z.len() != log.len() {
            return Err(Error::LengthMismatch(format!(
                "{} attributions for {} interactions",
                z.len(),
                log.len()
            )));
        }
    }
    let mut h = HistoryState::new();
    for (i, rec) in log.records()[..upto].iter().enumerate() {
        feed(&mut h, rec, z.map_or(rec.lead_sender(), |z| z[i]), rec.receiver_arity());
    }
    if let Some(j) = within {
        let rec = &log.records()[upto];
        feed(&mut h, rec, z.map_or(rec.lead_sender(), |z| z[upto]), j);
    }
    Ok(h)
}

fn feed(h: &mut HistoryState, rec: &Interaction, attributed: SenderId, receivers: usize) {
    for (k, &s) in rec.senders().iter().enumerate() {
        h.observe_sender(s, k == 0);
    }
    for &r in &rec.receivers()[..receivers] {
        h.observe_receiver(attributed, r);
    }
}
