//! Extended-model state: per-sender auxiliary vertices ("tables") carrying a
//! receiver label and a degree, plus the assignment of every observed
//! receiver slot to one of them.

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generative::AttributionUrn;
use crate::interaction::{InteractionLog, ReceiverId, SenderId};
use crate::math::ln_rising;
use crate::params::HvcmParams;

/// Handle of an auxiliary vertex within its sender's arena.
pub type TableId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Table {
    pub label: ReceiverId,
    pub degree: u64,
}

/// Seat choice for one observation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Seat {
    Existing(TableId),
    New,
}

/// Unnormalized seat weights for one observation.
#[derive(Clone, Debug, PartialEq)]
pub struct SeatWeights {
    pub existing: Vec<(TableId, f64)>,
    pub new: f64,
}

impl SeatWeights {
    pub fn total(&self) -> f64 {
        self.existing.iter().map(|x| x.1).sum::<f64>() + self.new
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
struct Arena {
    tables: Vec<Table>,
    free: Vec<TableId>,
    live: u64,
    customers: u64,
}

/// Extended-model sufficient statistics and seat assignments.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SeatingState {
    receivers: Vec<Vec<ReceiverId>>,
    z: Vec<SenderId>,
    phi: Vec<Vec<Option<TableId>>>,
    arenas: Vec<Arena>,
    by_pair: HashMap<(SenderId, ReceiverId), Vec<TableId>>,
    label_counts: Vec<u64>,
    distinct: usize,
    total: u64,
}

impl SeatingState {
    /// Unseated state for `log` with attributions `z`.
    pub fn new(log: &InteractionLog, z: &[SenderId]) -> Result<Self> {
        if z.len() != log.len() {
            return Err(Error::LengthMismatch(format!(
                "{} attributions for {} interactions",
                z.len(),
                log.len()
            )));
        }
        for (i, (rec, &s)) in log.records().iter().zip(z).enumerate() {
            if !rec.senders().contains(&s) {
                return Err(Error::InconsistentState(format!(
                    "interaction {i} attributed to {s}, not one of its senders"
                )));
            }
        }
        let receivers: Vec<Vec<ReceiverId>> =
            log.records().iter().map(|r| r.receivers().to_vec()).collect();
        let phi = receivers.iter().map(|r| vec![None; r.len()]).collect();
        Ok(SeatingState {
            receivers,
            z: z.to_vec(),
            phi,
            ..Default::default()
        })
    }

    /// Seats every observation in record order by its sequential conditional
    /// probabilities given the observations seated before it.
    pub fn sequential<R: Rng + ?Sized>(
        log: &InteractionLog,
        z: &[SenderId],
        params: &HvcmParams,
        rng: &mut R,
    ) -> Result<Self> {
        let mut st = Self::new(log, z)?;
        for n in 0..st.receivers.len() {
            for j in 0..st.receivers[n].len() {
                st.reseat_observation(n, j, params, rng)?;
            }
        }
        Ok(st)
    }

    pub fn num_interactions(&self) -> usize {
        self.receivers.len()
    }

    pub fn receivers(&self, n: usize) -> &[ReceiverId] {
        &self.receivers[n]
    }

    pub fn attribution(&self) -> &[SenderId] {
        &self.z
    }

    /// Sender ids with an arena (possibly empty).
    pub fn sender_capacity(&self) -> usize {
        self.arenas.len()
    }

    /// V(s, ·).
    pub fn sender_tables(&self, s: SenderId) -> u64 {
        self.arenas.get(s.index()).map_or(0, |a| a.live)
    }

    /// m(s).
    pub fn sender_customers(&self, s: SenderId) -> u64 {
        self.arenas.get(s.index()).map_or(0, |a| a.customers)
    }

    /// V(s, r).
    pub fn pair_tables(&self, s: SenderId, r: ReceiverId) -> u64 {
        self.by_pair.get(&(s, r)).map_or(0, |v| v.len() as u64)
    }

    /// Handles of the live tables of `s` labelled `r`.
    pub fn tables_for(&self, s: SenderId, r: ReceiverId) -> &[TableId] {
        self.by_pair.get(&(s, r)).map_or(&[][..], Vec::as_slice)
    }

    pub fn table(&self, s: SenderId, t: TableId) -> Table {
        self.arenas[s.index()].tables[t as usize]
    }

    /// Live tables of `s`.
    pub fn live_tables(&self, s: SenderId) -> impl Iterator<Item = (TableId, Table)> + '_ {
        self.arenas
            .get(s.index())
            .into_iter()
            .flat_map(|a| a.tables.iter().enumerate())
            .filter(|(_, t)| t.degree > 0)
            .map(|(i, t)| (i as TableId, *t))
    }

    /// V(·, r).
    pub fn label_count(&self, r: ReceiverId) -> u64 {
        self.label_counts.get(r.index()).copied().unwrap_or(0)
    }

    /// Labels with a positive table count and their counts.
    pub fn label_counts(&self) -> impl Iterator<Item = (ReceiverId, u64)> + '_ {
        self.label_counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(i, &c)| (ReceiverId(i as u32), c))
    }

    /// K: distinct labels in use.
    pub fn num_labels(&self) -> usize {
        self.distinct
    }

    /// m: total number of tables.
    pub fn num_tables(&self) -> u64 {
        self.total
    }

    /// Number of seated observations.
    pub fn num_seated(&self) -> u64 {
        self.arenas.iter().map(|a| a.customers).sum()
    }

    pub fn assignment(&self, n: usize, j: usize) -> Option<TableId> {
        self.phi[n][j]
    }

    fn arena_mut(&mut self, s: SenderId) -> &mut Arena {
        if self.arenas.len() <= s.index() {
            self.arenas.resize_with(s.index() + 1, Arena::default);
        }
        &mut self.arenas[s.index()]
    }

    /// Probability of label `r` for a new table given the current labels.
    pub fn label_prob(&self, r: ReceiverId, params: &HvcmParams) -> f64 {
        if self.total == 0 {
            return 1.0;
        }
        let denom = self.total as f64 + params.global_theta;
        let c = self.label_count(r);
        if c > 0 {
            (c as f64 - params.global_alpha) / denom
        } else {
            ((params.global_theta + params.global_alpha * self.distinct as f64) / denom).max(0.0)
        }
    }

    /// Seat weights for a new observation of `r` under sender `s`: existing
    /// tables of `s` labelled `r` get `d - α_s`, a new table gets
    /// `(θ_s + α_s V(s,·))` times the label probability of `r`.
    pub fn seat_probabilities(&self, s: SenderId, r: ReceiverId, params: &HvcmParams) -> SeatWeights {
        let lp = params.local_params(s);
        let existing = self
            .tables_for(s, r)
            .iter()
            .map(|&t| (t, self.table(s, t).degree as f64 - lp.alpha))
            .collect();
        let new = (lp.theta + lp.alpha * self.sender_tables(s) as f64) * self.label_prob(r, params);
        SeatWeights { existing, new }
    }

    /// Places observation `(n, j)` according to `seat`.
    pub fn seat(&mut self, n: usize, j: usize, seat: Seat) -> Result<TableId> {
        self.check_position(n, j)?;
        if self.phi[n][j].is_some() {
            return Err(Error::InconsistentState(format!(
                "observation ({n}, {j}) is already seated"
            )));
        }
        let s = self.z[n];
        let r = self.receivers[n][j];
        let t = match seat {
            Seat::Existing(t) => {
                let tab = self
                    .arenas
                    .get(s.index())
                    .and_then(|a| a.tables.get(t as usize))
                    .copied();
                match tab {
                    Some(tab) if tab.degree > 0 && tab.label == r => {}
                    _ => {
                        return Err(Error::InconsistentState(format!(
                            "table {t} of {s} cannot host {r}"
                        )))
                    }
                }
                let a = self.arena_mut(s);
                a.tables[t as usize].degree += 1;
                a.customers += 1;
                t
            }
            Seat::New => {
                let a = self.arena_mut(s);
                let t = match a.free.pop() {
                    Some(t) => {
                        a.tables[t as usize] = Table { label: r, degree: 1 };
                        t
                    }
                    None => {
                        a.tables.push(Table { label: r, degree: 1 });
                        (a.tables.len() - 1) as TableId
                    }
                };
                a.live += 1;
                a.customers += 1;
                self.by_pair.entry((s, r)).or_default().push(t);
                if self.label_counts.len() <= r.index() {
                    self.label_counts.resize(r.index() + 1, 0);
                }
                if self.label_counts[r.index()] == 0 {
                    self.distinct += 1;
                }
                self.label_counts[r.index()] += 1;
                self.total += 1;
                t
            }
        };
        self.phi[n][j] = Some(t);
        Ok(t)
    }

    /// Unseats observation `(n, j)`, deleting its table if it empties.
    pub fn remove_observation(&mut self, n: usize, j: usize) -> Result<()> {
        self.check_position(n, j)?;
        let t = self.phi[n][j]
            .take()
            .ok_or(Error::NotSeated { interaction: n, slot: j })?;
        let s = self.z[n];
        let r = self.receivers[n][j];
        let a = &mut self.arenas[s.index()];
        a.customers -= 1;
        let tab = &mut a.tables[t as usize];
        tab.degree -= 1;
        if tab.degree == 0 {
            a.live -= 1;
            a.free.push(t);
            let list = self.by_pair.get_mut(&(s, r)).expect("pair index");
            let pos = list.iter().position(|&x| x == t).expect("table in pair index");
            list.swap_remove(pos);
            if list.is_empty() {
                self.by_pair.remove(&(s, r));
            }
            self.label_counts[r.index()] -= 1;
            if self.label_counts[r.index()] == 0 {
                self.distinct -= 1;
            }
            self.total -= 1;
        }
        Ok(())
    }

    /// Seats an unseated observation by its conditional seat probabilities.
    pub fn reseat_observation<R: Rng + ?Sized>(
        &mut self,
        n: usize,
        j: usize,
        params: &HvcmParams,
        rng: &mut R,
    ) -> Result<TableId> {
        self.check_position(n, j)?;
        let s = self.z[n];
        let r = self.receivers[n][j];
        let w = self.seat_probabilities(s, r, params);
        let mut u = rng.random::<f64>() * w.total();
        for &(t, x) in &w.existing {
            if u < x {
                return self.seat(n, j, Seat::Existing(t));
            }
            u -= x;
        }
        self.seat(n, j, Seat::New)
    }

    /// Changes the attribution of interaction `n`; all its observations must
    /// be unseated.
    pub fn set_attribution(&mut self, n: usize, s: SenderId) -> Result<()> {
        if n >= self.z.len() {
            return Err(Error::IndexOutOfRange {
                index: n,
                len: self.z.len(),
            });
        }
        if self.phi[n].iter().any(Option::is_some) {
            return Err(Error::InconsistentState(format!(
                "interaction {n} still has seated observations"
            )));
        }
        self.z[n] = s;
        Ok(())
    }

    fn check_position(&self, n: usize, j: usize) -> Result<()> {
        if n >= self.phi.len() {
            return Err(Error::IndexOutOfRange {
                index: n,
                len: self.phi.len(),
            });
        }
        if j >= self.phi[n].len() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.phi[n].len(),
            });
        }
        Ok(())
    }

    /// Reorders interactions (new position `i` holds old interaction
    /// `order[i]`), carrying seat assignments along.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.z.len()];
        if order.len() != self.z.len() {
            return Err(Error::LengthMismatch("permutation length".into()));
        }
        for &i in order {
            if i >= seen.len() || std::mem::replace(&mut seen[i], true) {
                return Err(Error::InvalidPosition("not a permutation".into()));
            }
        }
        let mut out = self.clone();
        out.receivers = order.iter().map(|&i| self.receivers[i].clone()).collect();
        out.z = order.iter().map(|&i| self.z[i]).collect();
        out.phi = order.iter().map(|&i| self.phi[i].clone()).collect();
        Ok(out)
    }

    /// Global label and local table factors of the joint likelihood. No
    /// consistency checks.
    pub(crate) fn ln_seating_factors(&self, params: &HvcmParams) -> (f64, f64) {
        let global = ln_urn_partition(
            params.global_alpha,
            params.global_theta,
            self.label_counts.iter().copied(),
        );
        let mut local = 0.0;
        for (si, a) in self.arenas.iter().enumerate() {
            if a.customers == 0 {
                continue;
            }
            let lp = params.local_params(SenderId(si as u32));
            local += ln_urn_partition(lp.alpha, lp.theta, a.tables.iter().map(|t| t.degree));
        }
        (global, local)
    }

    /// Checks every count identity and assignment; `Ok` iff consistent.
    pub fn audit(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InconsistentState(m));
        let mut degree: Vec<Vec<u64>> =
            self.arenas.iter().map(|a| vec![0; a.tables.len()]).collect();
        for (n, seats) in self.phi.iter().enumerate() {
            let s = self.z[n];
            for (j, seat) in seats.iter().enumerate() {
                let Some(t) = *seat else { continue };
                let Some(tab) = self.arenas.get(s.index()).and_then(|a| a.tables.get(t as usize)) else {
                    return bad(format!("({n}, {j}) points at a missing table"));
                };
                if tab.label != self.receivers[n][j] {
                    return bad(format!("({n}, {j}) seated at a table with another label"));
                }
                degree[s.index()][t as usize] += 1;
            }
        }
        let mut labels = vec![0u64; self.label_counts.len()];
        let mut pairs: HashMap<(SenderId, ReceiverId), u64> = HashMap::new();
        for (si, a) in self.arenas.iter().enumerate() {
            let s = SenderId(si as u32);
            let mut live = 0;
            for (t, tab) in a.tables.iter().enumerate() {
                if tab.degree != degree[si][t] {
                    return bad(format!("table {t} of {s}: degree {} vs {}", tab.degree, degree[si][t]));
                }
                let free = a.free.contains(&(t as TableId));
                if (tab.degree == 0) != free {
                    return bad(format!("table {t} of {s}: free list mismatch"));
                }
                if tab.degree > 0 {
                    live += 1;
                    *pairs.entry((s, tab.label)).or_insert(0) += 1;
                    if labels.len() <= tab.label.index() {
                        return bad(format!("label {} has no count slot", tab.label));
                    }
                    labels[tab.label.index()] += 1;
                }
            }
            if live != a.live {
                return bad(format!("V({s},·) = {} but {live} live tables", a.live));
            }
            if degree[si].iter().sum::<u64>() != a.customers {
                return bad(format!("m({s}) mismatch"));
            }
        }
        if pairs.len() != self.by_pair.len() {
            return bad("pair index size".into());
        }
        for (k, list) in &self.by_pair {
            if pairs.get(k).copied() != Some(list.len() as u64) {
                return bad(format!("pair index for {k:?}"));
            }
        }
        if labels != self.label_counts {
            return bad("label counts".into());
        }
        if labels.iter().filter(|&&c| c > 0).count() != self.distinct {
            return bad("distinct label count".into());
        }
        if labels.iter().sum::<u64>() != self.total {
            return bad("table total".into());
        }
        Ok(())
    }

    fn fully_seated(&self) -> bool {
        self.phi.iter().flatten().all(Option::is_some)
    }

    /// Serializable snapshot together with the current parameters.
    pub fn checkpoint(&self, params: &HvcmParams) -> Checkpoint {
        let tables = self
            .arenas
            .iter()
            .map(|a| a.tables.clone())
            .collect();
        let local = params
            .local
            .iter()
            .map(|(s, lp)| (*s, lp.alpha.to_string(), lp.theta.to_string()))
            .collect();
        Checkpoint {
            version: CHECKPOINT_VERSION,
            receivers: self.receivers.clone(),
            z: self.z.clone(),
            phi: self.phi.clone(),
            tables,
            global_alpha: params.global_alpha.to_string(),
            global_theta: params.global_theta.to_string(),
            local,
        }
    }

    /// Rebuilds a state from a snapshot and writes its parameter values into
    /// `params`.
    pub fn restore(cp: &Checkpoint, params: &mut HvcmParams) -> Result<Self> {
        if cp.version != CHECKPOINT_VERSION {
            return Err(Error::Config(format!(
                "checkpoint version {} (expected {CHECKPOINT_VERSION})",
                cp.version
            )));
        }
        let num = |x: &str| -> Result<f64> {
            x.parse()
                .map_err(|_| Error::Config(format!("bad decimal {x:?} in checkpoint")))
        };
        params.global_alpha = num(&cp.global_alpha)?;
        params.global_theta = num(&cp.global_theta)?;
        params.local.clear();
        for (s, a, t) in &cp.local {
            params
                .local
                .insert(*s, crate::params::LocalParams::new(num(a)?, num(t)?));
        }
        let mut st = SeatingState {
            receivers: cp.receivers.clone(),
            z: cp.z.clone(),
            phi: cp.phi.clone(),
            ..Default::default()
        };
        for (si, tables) in cp.tables.iter().enumerate() {
            let s = SenderId(si as u32);
            let mut a = Arena {
                tables: tables.clone(),
                ..Default::default()
            };
            for (t, tab) in tables.iter().enumerate() {
                if tab.degree == 0 {
                    a.free.push(t as TableId);
                    continue;
                }
                a.live += 1;
                a.customers += tab.degree;
                st.by_pair.entry((s, tab.label)).or_default().push(t as TableId);
                if st.label_counts.len() <= tab.label.index() {
                    st.label_counts.resize(tab.label.index() + 1, 0);
                }
                if st.label_counts[tab.label.index()] == 0 {
                    st.distinct += 1;
                }
                st.label_counts[tab.label.index()] += 1;
                st.total += 1;
            }
            st.arenas.push(a);
        }
        st.audit()?;
        Ok(st)
    }
}

pub const CHECKPOINT_VERSION: u32 = 1;

/// Versioned snapshot of a chain: exact integer state, parameters as decimal
/// strings (shortest round-trip representation).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub receivers: Vec<Vec<ReceiverId>>,
    pub z: Vec<SenderId>,
    pub phi: Vec<Vec<Option<TableId>>>,
    pub tables: Vec<Vec<Table>>,
    pub global_alpha: String,
    pub global_theta: String,
    pub local: Vec<(SenderId, String, String)>,
}

/// Log-likelihood of the extended model split by factor.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LikelihoodTerms {
    /// Sender urn over the flattened sender slots.
    pub senders: f64,
    /// Attribution urn for interactions with several senders.
    pub attribution: f64,
    /// Sender and receiver count distributions.
    pub sizes: f64,
    /// Global label process.
    pub global: f64,
    /// Per-sender seating processes.
    pub local: f64,
}

impl LikelihoodTerms {
    pub fn total(&self) -> f64 {
        self.senders + self.attribution + self.sizes + self.global + self.local
    }
}

/// `ln [θ+α]_α^{K-1} / [θ+1]_1^{m-1} Π_i [1-α]_1^{c_i - 1}` for a urn
/// with `m = Σ c_i` draws over `K` distinct items.
pub fn ln_urn_partition(alpha: f64, theta: f64, counts: impl IntoIterator<Item = u64>) -> f64 {
    let mut k = 0u64;
    let mut m = 0u64;
    let mut acc = 0.0;
    for c in counts {
        if c == 0 {
            continue;
        }
        k += 1;
        m += c;
        acc += ln_rising(1.0 - alpha, 1.0, c - 1);
    }
    if m == 0 {
        return 0.0;
    }
    acc + ln_rising(theta + alpha, alpha, k - 1) - ln_rising(theta + 1.0, 1.0, m - 1)
}

/// Sender-urn log-probability of the log's flattened sender sequence.
pub fn ln_sender_factor(log: &InteractionLog, params: &HvcmParams) -> f64 {
    if let Some(w) = &params.sender_weights {
        return log
            .sender_sequence()
            .map(|s| w.get(s.index()).copied().unwrap_or(0.0).ln())
            .sum();
    }
    let mut counts: Vec<u64> = vec![0; log.num_senders()];
    for s in log.sender_sequence() {
        counts[s.index()] += 1;
    }
    ln_urn_partition(params.sender_alpha, params.sender_theta, counts)
}

/// Attribution-urn log-probability of `z`, accumulated in record order.
pub fn ln_attribution_factor(log: &InteractionLog, z: &[SenderId], params: &HvcmParams) -> f64 {
    let mut urn = AttributionUrn::new();
    let mut acc = 0.0;
    for (rec, &s) in log.records().iter().zip(z) {
        if rec.distinct_senders().len() > 1 {
            let w = urn.weights(rec.senders(), params);
            acc += w.iter().find(|x| x.0 == s).map_or(f64::NEG_INFINITY, |x| x.1.ln());
        }
        urn.observe(s);
    }
    acc
}

/// Log of the size factors `Π_n ν_{k1(n)} ν^{(z_n)}_{k2(n)}`.
pub fn ln_size_factor(log: &InteractionLog, z: &[SenderId], params: &HvcmParams) -> f64 {
    log.records()
        .iter()
        .zip(z)
        .map(|(rec, &s)| {
            params.size_dist.prob(rec.sender_arity()).ln()
                + params.local_size(s).prob(rec.receiver_arity()).ln()
        })
        .sum()
}

/// Extended-model joint log-likelihood of the seated state, split by factor.
pub fn likelihood_terms(
    state: &SeatingState,
    log: &InteractionLog,
    params: &HvcmParams,
) -> Result<LikelihoodTerms> {
    if log.len() != state.num_interactions()
        || log
            .records()
            .iter()
            .zip(&state.receivers)
            .any(|(rec, r)| rec.receivers() != r.as_slice())
    {
        return Err(Error::InconsistentState(
            "seating state does not match the log".into(),
        ));
    }
    if !state.fully_seated() {
        return Err(Error::InconsistentState("unseated observations".into()));
    }
    #[cfg(debug_assertions)]
    state.audit()?;
    let z = state.attribution();
    let (global, local) = state.ln_seating_factors(params);
    Ok(LikelihoodTerms {
        senders: ln_sender_factor(log, params),
        attribution: ln_attribution_factor(log, z, params),
        sizes: ln_size_factor(log, z, params),
        global,
        local,
    })
}

/// Extended-model joint log-likelihood of the seated state.
pub fn log_likelihood(state: &SeatingState, log: &InteractionLog, params: &HvcmParams) -> Result<f64> {
    Ok(likelihood_terms(state, log, params)?.total())
}

/// Attribution used when none is given: the lead sender of each interaction.
pub fn lead_attribution(log: &InteractionLog) -> Vec<SenderId> {
    log.lead_senders()
}
