//! Reference computations written directly from the model's definitions.
//! They share no code with the library beyond its data types.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use hvcm_core::seating::SeatingState;
use hvcm_core::stick::Paintbox;
use hvcm_core::{Categorical, HvcmParams, Interaction, InteractionLog, LocalParams, ReceiverId, SenderId};

pub fn log_of(recs: &[(&[u32], &[u32])]) -> InteractionLog {
    InteractionLog::from_ids(
        recs.iter()
            .map(|(s, r)| {
                Interaction::new(
                    s.iter().map(|&x| SenderId(x)).collect(),
                    r.iter().map(|&x| ReceiverId(x)).collect(),
                )
                .unwrap()
            })
            .collect(),
        false,
    )
    .unwrap()
}

fn distinct(v: &[SenderId]) -> Vec<SenderId> {
    let mut d = v.to_vec();
    d.sort();
    d.dedup();
    d
}

/// Probability of the stored sender sequence, draw by draw.
pub fn sender_prob(log: &InteractionLog, p: &HvcmParams) -> f64 {
    let mut counts: HashMap<SenderId, u64> = HashMap::new();
    let mut n = 0.0;
    let mut prob = 1.0;
    for rec in log.records() {
        for &s in rec.senders() {
            let c = counts.get(&s).copied().unwrap_or(0);
            prob *= match &p.sender_weights {
                Some(w) => w[s.index()],
                None if c > 0 => (c as f64 - p.sender_alpha) / (n + p.sender_theta),
                None => (p.sender_theta + p.sender_alpha * counts.len() as f64) / (n + p.sender_theta),
            };
            *counts.entry(s).or_insert(0) += 1;
            n += 1.0;
        }
    }
    prob
}

/// Attribution weights over the distinct candidates given earlier choices.
pub fn attribution_prob(earlier: &[SenderId], candidates: &[SenderId], s: SenderId, p: &HvcmParams) -> f64 {
    let cands = distinct(candidates);
    if cands.len() == 1 {
        return 1.0;
    }
    let mut counts: HashMap<SenderId, u64> = HashMap::new();
    for &x in earlier {
        *counts.entry(x).or_insert(0) += 1;
    }
    let w = |x: SenderId| match counts.get(&x) {
        Some(&c) => c as f64 - p.z_alpha,
        None => p.z_theta + p.z_alpha * counts.len() as f64,
    };
    w(s) / cands.iter().map(|&x| w(x)).sum::<f64>()
}

/// `Π_n attribution × ν_{k1} × ν^{(z)}_{k2}` for a fixed attribution.
pub fn z_and_size_prob(log: &InteractionLog, z: &[SenderId], p: &HvcmParams) -> f64 {
    let mut prob = 1.0;
    for (n, rec) in log.records().iter().enumerate() {
        prob *= attribution_prob(&z[..n], rec.senders(), z[n], p);
        prob *= p.size_dist.prob(rec.sender_arity());
        prob *= p.local_size(z[n]).prob(rec.receiver_arity());
    }
    prob
}

/// Counts of the sequential process: local in-degrees, latent degrees and
/// their totals.
#[derive(Clone, Default)]
struct Latent {
    d: HashMap<(SenderId, ReceiverId), u64>,
    v: HashMap<(SenderId, ReceiverId), u64>,
    m_s: HashMap<SenderId, u64>,
    v_s: HashMap<SenderId, u64>,
    v_r: HashMap<ReceiverId, u64>,
    total: u64,
}

impl Latent {
    fn get<K: std::hash::Hash + Eq>(m: &HashMap<K, u64>, k: K) -> f64 {
        m.get(&k).copied().unwrap_or(0) as f64
    }

    /// `(local, escape)` probabilities of drawing `r` for `s`.
    fn branches(&self, s: SenderId, r: ReceiverId, p: &HvcmParams) -> (f64, f64) {
        let LocalParams { alpha: a_s, theta: t_s } = p.local_params(s);
        let m_s = Self::get(&self.m_s, s);
        let d = Self::get(&self.d, (s, r));
        let v = Self::get(&self.v, (s, r));
        let v_s = Self::get(&self.v_s, s);
        let local = if d > 0.0 { (d - a_s * v) / (m_s + t_s) } else { 0.0 };
        let v_r = Self::get(&self.v_r, r);
        let denom = self.total as f64 + p.global_theta;
        let global = if v_r > 0.0 {
            (v_r - p.global_alpha) / denom
        } else {
            (p.global_theta + p.global_alpha * self.v_r.len() as f64) / denom
        };
        (local, (t_s + a_s * v_s) / (m_s + t_s) * global)
    }

    fn observe(&mut self, s: SenderId, r: ReceiverId, escape: bool) {
        *self.d.entry((s, r)).or_insert(0) += 1;
        *self.m_s.entry(s).or_insert(0) += 1;
        if escape {
            *self.v.entry((s, r)).or_insert(0) += 1;
            *self.v_s.entry(s).or_insert(0) += 1;
            *self.v_r.entry(r).or_insert(0) += 1;
            self.total += 1;
        }
    }
}

fn trajectories(lat: &Latent, slots: &[(SenderId, ReceiverId)], p: &HvcmParams) -> f64 {
    let Some((&(s, r), rest)) = slots.split_first() else {
        return 1.0;
    };
    let (local, escape) = lat.branches(s, r, p);
    let mut acc = 0.0;
    if local > 0.0 {
        let mut next = lat.clone();
        next.observe(s, r, false);
        acc += local * trajectories(&next, rest, p);
    }
    if escape > 0.0 {
        let mut next = lat.clone();
        next.observe(s, r, true);
        acc += escape * trajectories(&next, rest, p);
    }
    acc
}

/// Joint probability of the log and a fixed attribution under the
/// sequential process, summing over latent-increment trajectories.
pub fn sequential_joint(log: &InteractionLog, z: &[SenderId], p: &HvcmParams) -> f64 {
    let slots: Vec<(SenderId, ReceiverId)> = log
        .records()
        .iter()
        .zip(z)
        .flat_map(|(rec, &s)| rec.receivers().iter().map(move |&r| (s, r)))
        .collect();
    sender_prob(log, p) * z_and_size_prob(log, z, p) * trajectories(&Latent::default(), &slots, p)
}

/// Every attribution vector compatible with the log.
pub fn attributions(log: &InteractionLog) -> Vec<Vec<SenderId>> {
    let mut out = vec![Vec::new()];
    for rec in log.records() {
        let cands = distinct(rec.senders());
        out = out
            .into_iter()
            .flat_map(|z| {
                cands.iter().map(move |&s| {
                    let mut z = z.clone();
                    z.push(s);
                    z
                })
            })
            .collect();
    }
    out
}

/// Marginal probability of the log under the sequential process.
pub fn sequential_marginal(log: &InteractionLog, p: &HvcmParams) -> f64 {
    attributions(log).iter().map(|z| sequential_joint(log, z, p)).sum()
}

/// Canonically labelled logs with at most `max_n` interactions, at most
/// `max_senders` per interaction, drawing on `n_senders` senders and
/// `n_receivers` receivers. `slot_cost(k1, k2)` is charged against
/// `budget`.
pub fn canonical_logs(
    max_n: usize,
    max_senders: usize,
    n_senders: u32,
    n_receivers: u32,
    budget: usize,
    slot_cost: &dyn Fn(usize, usize) -> usize,
) -> Vec<InteractionLog> {
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    grow(&mut prefix, 0, 0, max_n, max_senders, n_senders, n_receivers, budget, slot_cost, &mut out);
    out
}

#[allow(clippy::too_many_arguments)]
fn grow(
    prefix: &mut Vec<(Vec<u32>, Vec<u32>)>,
    ns: u32,
    nr: u32,
    max_n: usize,
    max_senders: usize,
    n_senders: u32,
    n_receivers: u32,
    budget: usize,
    cost: &dyn Fn(usize, usize) -> usize,
    out: &mut Vec<InteractionLog>,
) {
    if prefix.len() == max_n {
        return;
    }
    for k1 in 1..=max_senders {
        for senders in sender_multisets(k1, ns, n_senders) {
            let ns2 = ns.max(senders.iter().max().unwrap() + 1);
            let mut k2 = 1;
            while cost(k1, k2) <= budget {
                for (receivers, nr2) in receiver_sequences(k2, nr, n_receivers) {
                    prefix.push((senders.clone(), receivers));
                    let recs: Vec<(&[u32], &[u32])> =
                        prefix.iter().map(|(s, r)| (s.as_slice(), r.as_slice())).collect();
                    out.push(log_of(&recs));
                    grow(prefix, ns2, nr2, max_n, max_senders, n_senders, n_receivers, budget - cost(k1, k2), cost, out);
                    prefix.pop();
                }
                k2 += 1;
            }
        }
    }
}

/// Sorted multisets whose unseen labels are exactly `ns, ns+1, ...`.
fn sender_multisets(k: usize, ns: u32, n_senders: u32) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
    fn rec(k: usize, lo: u32, hi: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for x in lo..hi {
            cur.push(x);
            rec(k, x, hi, cur, out);
            cur.pop();
        }
    }
    rec(k, 0, n_senders, &mut cur, &mut out);
    out.retain(|m| {
        let mut fresh: Vec<u32> = m.iter().copied().filter(|&x| x >= ns).collect();
        fresh.dedup();
        fresh.iter().enumerate().all(|(i, &x)| x == ns + i as u32)
    });
    out
}

fn receiver_sequences(k: usize, nr: u32, n_receivers: u32) -> Vec<(Vec<u32>, u32)> {
    let mut out = vec![(Vec::new(), nr)];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|(seq, seen)| {
                (0..(seen + 1).min(n_receivers)).map(move |r| {
                    let mut s = seq.clone();
                    s.push(r);
                    (s, seen.max(r + 1))
                })
            })
            .collect();
    }
    out
}

/// Log of the extended joint likelihood as a product of sequential seat
/// probabilities, replaying the seated state observation by observation.
pub fn telescoped_log_likelihood(state: &SeatingState, log: &InteractionLog, p: &HvcmParams) -> f64 {
    let z = state.attribution();
    let mut ln = (sender_prob(log, p) * z_and_size_prob(log, z, p)).ln();
    let mut degree: HashMap<(SenderId, u32), u64> = HashMap::new();
    let mut tables_of: HashMap<SenderId, u64> = HashMap::new();
    let mut customers: HashMap<SenderId, u64> = HashMap::new();
    let mut labels: HashMap<ReceiverId, u64> = HashMap::new();
    let mut total_tables = 0u64;
    for (n, rec) in log.records().iter().enumerate() {
        let s = z[n];
        let LocalParams { alpha: a_s, theta: t_s } = p.local_params(s);
        for j in 0..rec.receiver_arity() {
            let t = state.assignment(n, j).expect("seated");
            let m_s = customers.get(&s).copied().unwrap_or(0) as f64;
            let d = degree.entry((s, t)).or_insert(0);
            if *d > 0 {
                ln += ((*d as f64 - a_s) / (m_s + t_s)).ln();
            } else {
                let v_s = tables_of.get(&s).copied().unwrap_or(0) as f64;
                let r = state.table(s, t).label;
                let l = labels.get(&r).copied().unwrap_or(0) as f64;
                let g = if l > 0.0 {
                    l - p.global_alpha
                } else {
                    p.global_theta + p.global_alpha * labels.len() as f64
                };
                ln += ((t_s + a_s * v_s) / (m_s + t_s) * g / (total_tables as f64 + p.global_theta)).ln();
                *tables_of.entry(s).or_insert(0) += 1;
                *labels.entry(r).or_insert(0) += 1;
                total_tables += 1;
            }
            *d += 1;
            *customers.entry(s).or_insert(0) += 1;
        }
    }
    ln
}

/// Configuration signature: per observation, the rank of its table among
/// its sender's tables in order of first use.
pub fn seating_signature(state: &SeatingState, log: &InteractionLog) -> Vec<u32> {
    let z = state.attribution();
    let mut rank: HashMap<(SenderId, u32), u32> = HashMap::new();
    let mut next: HashMap<SenderId, u32> = HashMap::new();
    let mut sig = Vec::new();
    for (n, rec) in log.records().iter().enumerate() {
        for j in 0..rec.receiver_arity() {
            let t = state.assignment(n, j).expect("seated");
            let k = *rank.entry((z[n], t)).or_insert_with(|| {
                let c = next.entry(z[n]).or_insert(0);
                *c += 1;
                *c - 1
            });
            sig.push(k);
        }
    }
    sig
}

/// `P(receivers of n | Z_n = s, the other observations' seating)` by
/// summing over seat paths, from the table degrees and label counts of a
/// state in which `n` is unseated.
pub fn receiver_path_sum(state: &SeatingState, receivers: &[ReceiverId], s: SenderId, p: &HvcmParams) -> f64 {
    let tables: Vec<(ReceiverId, u64)> = state.live_tables(s).map(|(_, t)| (t.label, t.degree)).collect();
    let labels: HashMap<ReceiverId, u64> = state.label_counts().filter(|x| x.1 > 0).collect();
    let total: u64 = labels.values().sum();
    fn go(
        tables: &mut Vec<(ReceiverId, u64)>,
        labels: &mut HashMap<ReceiverId, u64>,
        total: u64,
        rest: &[ReceiverId],
        lp: LocalParams,
        p: &HvcmParams,
    ) -> f64 {
        let Some((&r, tail)) = rest.split_first() else {
            return 1.0;
        };
        let m_s: u64 = tables.iter().map(|t| t.1).sum();
        let denom = m_s as f64 + lp.theta;
        let mut acc = 0.0;
        for i in 0..tables.len() {
            if tables[i].0 != r {
                continue;
            }
            let w = (tables[i].1 as f64 - lp.alpha) / denom;
            tables[i].1 += 1;
            acc += w * go(tables, labels, total, tail, lp, p);
            tables[i].1 -= 1;
        }
        let l = labels.get(&r).copied().unwrap_or(0) as f64;
        let g = if l > 0.0 {
            l - p.global_alpha
        } else {
            p.global_theta + p.global_alpha * labels.len() as f64
        } / (total as f64 + p.global_theta);
        let w = (lp.theta + lp.alpha * tables.len() as f64) / denom * g;
        tables.push((r, 1));
        *labels.entry(r).or_insert(0) += 1;
        acc += w * go(tables, labels, total + 1, tail, lp, p);
        tables.pop();
        let c = labels.get_mut(&r).unwrap();
        *c -= 1;
        if *c == 0 {
            labels.remove(&r);
        }
        acc
    }
    let mut tables = tables;
    let mut labels = labels;
    go(&mut tables, &mut labels, total, receivers, p.local_params(s), p)
}

/// Set partitions of `0..k`, each as a list of blocks.
pub fn set_partitions(k: usize) -> Vec<Vec<Vec<usize>>> {
    let mut out: Vec<Vec<Vec<usize>>> = vec![Vec::new()];
    for x in 0..k {
        let mut next = Vec::new();
        for part in &out {
            for b in 0..part.len() {
                let mut p = part.clone();
                p[b].push(x);
                next.push(p);
            }
            let mut p = part.clone();
            p.push(vec![x]);
            next.push(p);
        }
        out = next;
    }
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|x| x as f64).product()
}

/// `Σ over distinct atoms a_1..a_K of Π_k Π_s f_{a_k|s}^{c[k][s]}` for a
/// truncated paintbox, by Möbius inversion over set partitions of the labels.
pub fn paintbox_pattern_prob(pb: &Paintbox, pattern: &[Vec<u32>]) -> f64 {
    let atoms = pb.global.len();
    let mut total = 0.0;
    for part in set_partitions(pattern.len()) {
        let mut term = 1.0;
        for block in &part {
            let sign = if block.len() % 2 == 1 { 1.0 } else { -1.0 };
            let mut power_sum = 0.0;
            for a in 0..atoms {
                let mut x = 1.0;
                for (s, row) in pb.local.iter().enumerate() {
                    let e: u32 = block.iter().map(|&k| pattern[k].get(s).copied().unwrap_or(0)).sum();
                    if e > 0 {
                        x *= row[a].powi(e as i32);
                    }
                }
                power_sum += x;
            }
            term *= sign * factorial(block.len() - 1) * power_sum;
        }
        total += term;
    }
    total
}

/// Label-by-sender counts of a single-sender log.
pub fn pattern_of(log: &InteractionLog) -> Vec<Vec<u32>> {
    let mut pat: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for rec in log.records() {
        let s = rec.lead_sender().index();
        for r in rec.receivers() {
            let row = pat.entry(r.0).or_default();
            if row.len() <= s {
                row.resize(s + 1, 0);
            }
            row[s] += 1;
        }
    }
    pat.into_values().collect()
}

/// Total variation between two distributions over the same support.
pub fn tv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / 2.0
}

pub fn uniform_sizes(k: usize) -> Categorical {
    Categorical::uniform(k)
}
