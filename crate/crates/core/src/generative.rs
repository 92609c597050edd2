//! Forward simulation of the canonical sequential process.
//!
//! Senders come from a Pitman-Yor urn over out-degrees. Receivers come from a
//! per-sender urn that escapes to a shared global urn; the number of escapes
//! recorded for a pair is its latent degree. Interactions with several senders
//! pick the sender whose local statistics drive the receivers through a
//! restricted attribution urn.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::interaction::{HistoryState, Interaction, InteractionLog, ReceiverId, SenderId};
use crate::params::{Categorical, HvcmParams};

/// Outcome of an urn draw: a previously seen item, or a fresh one.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UrnDraw<T> {
    Seen(T),
    Fresh,
}

/// Draws from a Pitman-Yor urn described by its past draws.
///
/// `slots` lists every past draw (so a uniform pick is proportional to the
/// count), `count` returns an item's count and `distinct` lists the distinct
/// items. Existing items have weight `count - discount`, a fresh item
/// `concentration + discount * distinct.len()`.
fn draw_urn<T: Copy, R: Rng + ?Sized>(
    slots: &[T],
    count: impl Fn(T) -> u64,
    distinct: &[T],
    discount: f64,
    concentration: f64,
    rng: &mut R,
) -> UrnDraw<T> {
    let n = slots.len() as f64;
    if slots.is_empty() {
        return UrnDraw::Fresh;
    }
    let k = distinct.len() as f64;
    let seen_mass = n - discount * k;
    let fresh_mass = (concentration + discount * k).max(0.0);
    if rng.random::<f64>() * (seen_mass + fresh_mass) >= seen_mass {
        return UrnDraw::Fresh;
    }
    if discount >= 0.0 {
        // Weight (c - d) / c <= 1 relative to a count-proportional pick.
        loop {
            let item = slots[rng.random_range(0..slots.len())];
            let c = count(item) as f64;
            if rng.random::<f64>() * c < c - discount {
                return UrnDraw::Seen(item);
            }
        }
    }
    // Weight c + |d|: mixture of count-proportional and uniform picks.
    if rng.random::<f64>() * seen_mass < n {
        UrnDraw::Seen(slots[rng.random_range(0..slots.len())])
    } else {
        UrnDraw::Seen(distinct[rng.random_range(0..distinct.len())])
    }
}

/// Flat sender-draw bookkeeping for the sender urn.
#[derive(Clone, Debug, Default)]
pub struct SenderUrn {
    draws: Vec<SenderId>,
    distinct: Vec<SenderId>,
    counts: HashMap<SenderId, u64>,
}

impl SenderUrn {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, s: SenderId) {
        let c = self.counts.entry(s).or_insert(0);
        if *c == 0 {
            self.distinct.push(s);
        }
        *c += 1;
        self.draws.push(s);
    }

    pub fn count(&self, s: SenderId) -> u64 {
        self.counts.get(&s).copied().unwrap_or(0)
    }

    pub fn num_distinct(&self) -> usize {
        self.distinct.len()
    }

    pub fn num_draws(&self) -> usize {
        self.draws.len()
    }
}

/// Unnormalized sender weights: `(seen senders with weights, fresh weight)`.
/// The weights sum to `n + θ̃` where `n` counts past sender slots.
pub fn sender_weights(hist: &HistoryState, params: &HvcmParams) -> (Vec<(SenderId, f64)>, f64) {
    let seen: Vec<(SenderId, f64)> = hist
        .seen_senders()
        .map(|s| (s, hist.out_degree(s) as f64 - params.sender_alpha))
        .collect();
    let fresh = params.sender_theta + params.sender_alpha * hist.num_seen_senders() as f64;
    (seen, fresh.max(0.0))
}

/// Draws the next sender slot given the sender history.
pub fn sample_sender<R: Rng + ?Sized>(
    urn: &SenderUrn,
    params: &HvcmParams,
    rng: &mut R,
) -> UrnDraw<SenderId> {
    if let Some(w) = &params.sender_weights {
        let i = crate::math::sample_weighted(w, rng);
        let s = SenderId(i as u32);
        return if urn.count(s) > 0 {
            UrnDraw::Seen(s)
        } else {
            UrnDraw::Fresh
        };
    }
    let draw = draw_urn(
        &urn.draws,
        |s| urn.count(s),
        &urn.distinct,
        params.sender_alpha,
        params.sender_theta,
        rng,
    );
    if draw == UrnDraw::Fresh && params.sender_alpha < 0.0 {
        let cap = -params.sender_theta / params.sender_alpha;
        assert!(
            (urn.num_distinct() as f64) < cap.round(),
            "finite sender population exhausted"
        );
    }
    draw
}

/// Latent degrees of the canonical process.
#[derive(Clone, Debug, Default)]
pub struct LatentDegreeState {
    latent: HashMap<(SenderId, ReceiverId), u64>,
    sender_tables: Vec<u64>,
    receiver_tables: Vec<u64>,
    total: u64,
    table_labels: Vec<ReceiverId>,
    distinct: Vec<ReceiverId>,
}

impl LatentDegreeState {
    pub fn new() -> Self {
        Self::default()
    }

    /// V(s, r).
    pub fn latent(&self, s: SenderId, r: ReceiverId) -> u64 {
        self.latent.get(&(s, r)).copied().unwrap_or(0)
    }

    /// V(s, ·).
    pub fn sender_total(&self, s: SenderId) -> u64 {
        self.sender_tables.get(s.index()).copied().unwrap_or(0)
    }

    /// V(·, r).
    pub fn receiver_total(&self, r: ReceiverId) -> u64 {
        self.receiver_tables.get(r.index()).copied().unwrap_or(0)
    }

    /// m = Σ_r V(·, r).
    pub fn grand_total(&self) -> u64 {
        self.total
    }

    /// K: receivers with positive latent degree.
    pub fn num_distinct(&self) -> usize {
        self.distinct.len()
    }

    pub fn distinct_receivers(&self) -> &[ReceiverId] {
        &self.distinct
    }

    /// Records one escape of `s` to the global level landing on `r`.
    pub fn increment(&mut self, s: SenderId, r: ReceiverId) {
        *self.latent.entry((s, r)).or_insert(0) += 1;
        if self.sender_tables.len() <= s.index() {
            self.sender_tables.resize(s.index() + 1, 0);
        }
        self.sender_tables[s.index()] += 1;
        if self.receiver_tables.len() <= r.index() {
            self.receiver_tables.resize(r.index() + 1, 0);
        }
        if self.receiver_tables[r.index()] == 0 {
            self.distinct.push(r);
        }
        self.receiver_tables[r.index()] += 1;
        self.total += 1;
        self.table_labels.push(r);
    }

    /// Checks the totals against the pair map and, if given, against the
    /// observed history (`1 <= V(s,r) <= D(s,r)` for every seen pair).
    pub fn check_invariants(&self, hist: Option<&HistoryState>) -> Result<()> {
        let mut by_receiver = vec![0u64; self.receiver_tables.len()];
        let mut by_sender = vec![0u64; self.sender_tables.len()];
        for (&(s, r), &v) in &self.latent {
            by_receiver[r.index()] += v;
            by_sender[s.index()] += v;
            if let Some(h) = hist {
                let d = h.local_in_degree(s, r);
                if v < 1 || v > d {
                    return Err(Error::InconsistentState(format!(
                        "V({s},{r}) = {v} with D = {d}"
                    )));
                }
            }
        }
        if by_receiver != self.receiver_tables || by_sender != self.sender_tables {
            return Err(Error::InconsistentState("latent totals".into()));
        }
        if self.receiver_tables.iter().sum::<u64>() != self.total {
            return Err(Error::InconsistentState("latent grand total".into()));
        }
        Ok(())
    }
}

/// Global-level probability of label `r` (or of a fresh label when `None`)
/// given the latent state.
fn global_label_prob(lat: &LatentDegreeState, r: Option<ReceiverId>, params: &HvcmParams) -> f64 {
    let m = lat.grand_total() as f64;
    if lat.grand_total() == 0 {
        return if r.is_none() { 1.0 } else { 0.0 };
    }
    let denom = m + params.global_theta;
    match r {
        Some(r) if lat.receiver_total(r) > 0 => {
            (lat.receiver_total(r) as f64 - params.global_alpha) / denom
        }
        Some(_) => 0.0,
        None => {
            ((params.global_theta + params.global_alpha * lat.num_distinct() as f64) / denom)
                .max(0.0)
        }
    }
}

/// Receiver distribution for sender `s`, normalized.
#[derive(Clone, Debug, PartialEq)]
pub struct ReceiverWeights {
    /// Probability of each receiver already seen somewhere.
    pub seen: Vec<(ReceiverId, f64)>,
    /// Probability of a receiver never seen before.
    pub fresh: f64,
}

impl ReceiverWeights {
    pub fn total(&self) -> f64 {
        self.seen.iter().map(|x| x.1).sum::<f64>() + self.fresh
    }

    pub fn prob(&self, r: ReceiverId) -> f64 {
        self.seen
            .iter()
            .find(|x| x.0 == r)
            .map_or(0.0, |x| x.1)
    }
}

/// Escape mass of sender `s`: `θ_s + α_s V(s,·)`.
fn escape_mass(lat: &LatentDegreeState, s: SenderId, params: &HvcmParams) -> f64 {
    let lp = params.local_params(s);
    lp.theta + lp.alpha * lat.sender_total(s) as f64
}

/// Full receiver distribution for sender `s`.
///
/// A receiver seen locally has weight
/// `D(s,r) - α_s V(s,r) + (θ_s + α_s V(s,·)) (V(·,r) - α) / (m + θ)`, any other
/// receiver `(θ_s + α_s V(s,·)) g(r)` with `g` the global label probability;
/// all weights are divided by `m(s) + θ_s`.
pub fn receiver_weights(
    hist: &HistoryState,
    lat: &LatentDegreeState,
    s: SenderId,
    params: &HvcmParams,
) -> ReceiverWeights {
    let lp = params.local_params(s);
    let local_norm = hist.local_total(s) as f64 + lp.theta;
    let escape = escape_mass(lat, s, params);
    let seen = lat
        .distinct_receivers()
        .iter()
        .map(|&r| {
            let d = hist.local_in_degree(s, r) as f64;
            let v = lat.latent(s, r) as f64;
            let local = if d > 0.0 { d - lp.alpha * v } else { 0.0 };
            let w = (local + escape * global_label_prob(lat, Some(r), params)) / local_norm;
            (r, w)
        })
        .collect();
    let fresh = escape * global_label_prob(lat, None, params) / local_norm;
    ReceiverWeights { seen, fresh }
}

/// Unconditional escape probability `τ(s) = (θ_s + α_s V(s,·)) / (m(s) + θ_s)`.
pub fn escape_probability(
    hist: &HistoryState,
    lat: &LatentDegreeState,
    s: SenderId,
    params: &HvcmParams,
) -> f64 {
    let lp = params.local_params(s);
    (escape_mass(lat, s, params) / (hist.local_total(s) as f64 + lp.theta)).min(1.0)
}

/// Draws a receiver for sender `s`. Returns the draw and whether it passed
/// through the global level.
pub fn sample_receiver<R: Rng + ?Sized>(
    hist: &HistoryState,
    lat: &LatentDegreeState,
    s: SenderId,
    params: &HvcmParams,
    rng: &mut R,
) -> (UrnDraw<ReceiverId>, bool) {
    let lp = params.local_params(s);
    let escape = escape_mass(lat, s, params);
    let local_mass = hist.local_total(s) as f64 - lp.alpha * lat.sender_total(s) as f64;
    if local_mass > 0.0 && rng.random::<f64>() * (local_mass + escape) < local_mass {
        let draws = hist.local_draws(s);
        loop {
            let r = draws[rng.random_range(0..draws.len())];
            let d = hist.local_in_degree(s, r) as f64;
            if rng.random::<f64>() * d < d - lp.alpha * lat.latent(s, r) as f64 {
                return (UrnDraw::Seen(r), false);
            }
        }
    }
    let draw = draw_urn(
        &lat.table_labels,
        |r| lat.receiver_total(r),
        &lat.distinct,
        params.global_alpha,
        params.global_theta,
        rng,
    );
    (draw, true)
}

/// Updates the latent degree after `r` was drawn for `s`; call before the
/// draw enters `hist`.
///
/// A pair seen for the first time always escapes. Otherwise `escaped`
/// decides; with `None` the latent degree grows with the unconditional
/// escape probability. Returns whether the latent degree grew.
pub fn update_latent<R: Rng + ?Sized>(
    lat: &mut LatentDegreeState,
    hist: &HistoryState,
    s: SenderId,
    r: ReceiverId,
    params: &HvcmParams,
    escaped: Option<bool>,
    rng: &mut R,
) -> bool {
    let grow = if hist.local_in_degree(s, r) == 0 {
        true
    } else {
        match escaped {
            Some(e) => e,
            None => rng.random::<f64>() < escape_probability(hist, lat, s, params),
        }
    };
    if grow {
        lat.increment(s, r);
    }
    grow
}

/// History of the latent attribution variables.
#[derive(Clone, Debug, Default)]
pub struct AttributionUrn {
    counts: HashMap<SenderId, u64>,
    distinct: usize,
}

impl AttributionUrn {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self, s: SenderId) -> u64 {
        self.counts.get(&s).copied().unwrap_or(0)
    }

    pub fn num_distinct(&self) -> usize {
        self.distinct
    }

    pub fn observe(&mut self, s: SenderId) {
        let c = self.counts.entry(s).or_insert(0);
        if *c == 0 {
            self.distinct += 1;
        }
        *c += 1;
    }

    pub fn forget(&mut self, s: SenderId) {
        let c = self.counts.get_mut(&s).expect("forgetting unseen attribution");
        *c -= 1;
        if *c == 0 {
            self.counts.remove(&s);
            self.distinct -= 1;
        }
    }

    /// Normalized attribution probabilities over the distinct members of
    /// `candidates` (membership semantics: multiplicity is ignored).
    pub fn weights(&self, candidates: &[SenderId], params: &HvcmParams) -> Vec<(SenderId, f64)> {
        let mut distinct: Vec<SenderId> = candidates.to_vec();
        distinct.sort_unstable();
        distinct.dedup();
        let fresh = params.z_theta + params.z_alpha * self.distinct as f64;
        let mut w: Vec<(SenderId, f64)> = distinct
            .into_iter()
            .map(|s| {
                let c = self.count(s);
                let w = if c > 0 {
                    c as f64 - params.z_alpha
                } else {
                    fresh
                };
                (s, w.max(0.0))
            })
            .collect();
        let total: f64 = w.iter().map(|x| x.1).sum();
        if total > 0.0 {
            for x in &mut w {
                x.1 /= total;
            }
        } else {
            let u = 1.0 / w.len() as f64;
            for x in &mut w {
                x.1 = u;
            }
        }
        w
    }

    /// Draws the attribution among `candidates` and records it.
    pub fn sample<R: Rng + ?Sized>(
        &mut self,
        candidates: &[SenderId],
        params: &HvcmParams,
        rng: &mut R,
    ) -> SenderId {
        let w = self.weights(candidates, params);
        let s = if w.len() == 1 {
            w[0].0
        } else {
            let probs: Vec<f64> = w.iter().map(|x| x.1).collect();
            w[crate::math::sample_weighted(&probs, rng)].0
        };
        self.observe(s);
        s
    }
}

/// Everything produced by a forward simulation.
#[derive(Clone, Debug)]
pub struct Simulation {
    pub log: InteractionLog,
    /// Sender whose local statistics generated each interaction's receivers.
    pub attribution: Vec<SenderId>,
    /// Per receiver slot: whether the draw passed through the global level.
    pub escaped: Vec<Vec<bool>>,
    pub latent: LatentDegreeState,
    pub history: HistoryState,
}

struct Simulator<'a> {
    params: &'a HvcmParams,
    hist: HistoryState,
    lat: LatentDegreeState,
    senders: SenderUrn,
    z: AttributionUrn,
    next_receiver: u32,
    records: Vec<Interaction>,
    attribution: Vec<SenderId>,
    escaped: Vec<Vec<bool>>,
}

impl<'a> Simulator<'a> {
    fn new(params: &'a HvcmParams) -> Self {
        Simulator {
            params,
            hist: HistoryState::new(),
            lat: LatentDegreeState::new(),
            senders: SenderUrn::new(),
            z: AttributionUrn::new(),
            next_receiver: 0,
            records: Vec::new(),
            attribution: Vec::new(),
            escaped: Vec::new(),
        }
    }

    fn emit<R: Rng + ?Sized>(
        &mut self,
        senders: Vec<SenderId>,
        k2: Option<usize>,
        rng: &mut R,
    ) -> Result<()> {
        for (k, &s) in senders.iter().enumerate() {
            self.hist.observe_sender(s, k == 0);
        }
        let z = if senders.len() == 1 {
            self.z.observe(senders[0]);
            senders[0]
        } else {
            self.z.sample(&senders, self.params, rng)
        };
        let k2 = k2.unwrap_or_else(|| self.params.local_size(z).sample(rng));
        let mut receivers = Vec::with_capacity(k2);
        let mut esc = Vec::with_capacity(k2);
        for _ in 0..k2 {
            let (draw, escaped) = sample_receiver(&self.hist, &self.lat, z, self.params, rng);
            let r = match draw {
                UrnDraw::Seen(r) => r,
                UrnDraw::Fresh => {
                    self.next_receiver += 1;
                    ReceiverId(self.next_receiver - 1)
                }
            };
            update_latent(
                &mut self.lat,
                &self.hist,
                z,
                r,
                self.params,
                Some(escaped),
                rng,
            );
            self.hist.observe_receiver(z, r);
            receivers.push(r);
            esc.push(escaped);
        }
        self.records.push(Interaction::new(senders, receivers)?);
        self.attribution.push(z);
        self.escaped.push(esc);
        Ok(())
    }

    fn finish(self, shared: bool) -> Result<Simulation> {
        Ok(Simulation {
            log: InteractionLog::from_ids(self.records, shared)?,
            attribution: self.attribution,
            escaped: self.escaped,
            latent: self.lat,
            history: self.hist,
        })
    }
}

/// Simulates `n` interactions, returning the full generation record.
pub fn simulate_traced<R: Rng + ?Sized>(
    n: usize,
    params: &HvcmParams,
    rng: &mut R,
) -> Result<Simulation> {
    params.validate()?;
    let mut sim = Simulator::new(params);
    let mut next_sender = 0u32;
    for _ in 0..n {
        let k1 = params.size_dist.sample(rng);
        let mut senders = Vec::with_capacity(k1);
        for _ in 0..k1 {
            let s = match (&params.sender_weights, sample_sender(&sim.senders, params, rng)) {
                (Some(w), _) => SenderId(crate::math::sample_weighted(w, rng) as u32),
                (None, UrnDraw::Seen(s)) => s,
                (None, UrnDraw::Fresh) => {
                    next_sender += 1;
                    SenderId(next_sender - 1)
                }
            };
            sim.senders.observe(s);
            senders.push(s);
        }
        sim.emit(senders, None, rng)?;
    }
    sim.finish(false)
}

/// Simulates `n` interactions of the canonical process.
pub fn simulate<R: Rng + ?Sized>(
    n: usize,
    params: &HvcmParams,
    rng: &mut R,
) -> Result<InteractionLog> {
    Ok(simulate_traced(n, params, rng)?.log)
}

/// Simulates receivers only, conditioning on the given sender multisets and
/// receiver counts.
pub fn simulate_conditional<R: Rng + ?Sized>(
    senders: &[Vec<SenderId>],
    sizes: &[usize],
    params: &HvcmParams,
    rng: &mut R,
) -> Result<Simulation> {
    if senders.len() != sizes.len() {
        return Err(Error::LengthMismatch(format!(
            "{} sender multisets for {} sizes",
            senders.len(),
            sizes.len()
        )));
    }
    if let Some(i) = sizes.iter().position(|&k| k == 0) {
        return Err(Error::InvalidParams(format!(
            "interaction {i} has no receivers"
        )));
    }
    if let Some(i) = senders.iter().position(Vec::is_empty) {
        return Err(Error::InvalidParams(format!("interaction {i} has no senders")));
    }
    params.validate()?;
    let mut sim = Simulator::new(params);
    for (s, &k) in senders.iter().zip(sizes) {
        sim.emit(s.clone(), Some(k), rng)?;
    }
    sim.finish(false)
}

/// Flat Pitman-Yor urn over one population, every slot of every interaction
/// drawn from it. Each interaction is recorded under a single placeholder
/// sender with all its slots as receivers.
pub fn hollywood_simulate<R: Rng + ?Sized>(
    n: usize,
    alpha: f64,
    theta: f64,
    sizes: &Categorical,
    rng: &mut R,
) -> Result<InteractionLog> {
    let arities: Vec<usize> = (0..n).map(|_| sizes.sample(rng)).collect();
    let senders = vec![vec![SenderId(0)]; n];
    hollywood_conditional(&senders, &arities, alpha, theta, rng)
}

/// Flat-urn receivers for the given sender multisets and receiver counts
/// (sender labels attached after the fact).
pub fn hollywood_conditional<R: Rng + ?Sized>(
    senders: &[Vec<SenderId>],
    sizes: &[usize],
    alpha: f64,
    theta: f64,
    rng: &mut R,
) -> Result<InteractionLog> {
    crate::params::validate_urn("flat urn", alpha, theta)?;
    if senders.len() != sizes.len() {
        return Err(Error::LengthMismatch(format!(
            "{} sender multisets for {} sizes",
            senders.len(),
            sizes.len()
        )));
    }
    let mut slots: Vec<ReceiverId> = Vec::new();
    let mut distinct: Vec<ReceiverId> = Vec::new();
    let mut counts: Vec<u64> = Vec::new();
    let mut records = Vec::with_capacity(sizes.len());
    for (s, &k) in senders.iter().zip(sizes) {
        let mut receivers = Vec::with_capacity(k);
        for _ in 0..k {
            let r = match draw_urn(&slots, |r| counts[r.index()], &distinct, alpha, theta, rng) {
                UrnDraw::Seen(r) => r,
                UrnDraw::Fresh => {
                    let r = ReceiverId(distinct.len() as u32);
                    distinct.push(r);
                    counts.push(0);
                    r
                }
            };
            counts[r.index()] += 1;
            slots.push(r);
            receivers.push(r);
        }
        records.push(Interaction::new(s.clone(), receivers)?);
    }
    InteractionLog::from_ids(records, false)
}
