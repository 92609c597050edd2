//! Network statistics: degree and arity histograms, growth and power-law
//! diagnostics, node sharing, degree-distribution distances and subject
//! overlap.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::GibbsTrace;
use crate::interaction::{InteractionLog, ReceiverId, SenderId};
use crate::math::{entropy_bits, ols};

/// Counts for one network (global, or one sender's interactions).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    /// Receivers with positive degree.
    pub v: u64,
    /// Interactions.
    pub e: u64,
    /// Receiver slots.
    pub slots: u64,
    /// `M_k`: interactions with `k` receivers.
    pub arity_hist: BTreeMap<u64, u64>,
    /// `N_k`: receivers with degree `k`.
    pub degree_hist: BTreeMap<u64, u64>,
}

impl Counts {
    fn from_degrees<'a>(arities: impl Iterator<Item = u64>, degrees: impl Iterator<Item = &'a u64>) -> Self {
        let mut c = Counts::default();
        for k in arities {
            c.e += 1;
            c.slots += k;
            *c.arity_hist.entry(k).or_insert(0) += 1;
        }
        for &d in degrees {
            if d > 0 {
                c.v += 1;
                *c.degree_hist.entry(d).or_insert(0) += 1;
            }
        }
        c
    }

    /// `m•`: average arity.
    pub fn m_bullet(&self) -> f64 {
        if self.e == 0 {
            0.0
        } else {
            self.slots as f64 / self.e as f64
        }
    }

    /// `d_k = N_k / v`.
    pub fn degree_distribution(&self) -> BTreeMap<u64, f64> {
        let v = self.v as f64;
        self.degree_hist
            .iter()
            .map(|(&k, &n)| (k, n as f64 / v))
            .collect()
    }

    /// `N_k` (zero when absent).
    pub fn receivers_with_degree(&self, k: u64) -> u64 {
        self.degree_hist.get(&k).copied().unwrap_or(0)
    }

    /// Checks `Σ N_k = v`, `Σ M_k = e` and `Σ k M_k = Σ k N_k`.
    pub fn check_conservation(&self) -> Result<()> {
        let nv: u64 = self.degree_hist.values().sum();
        let me: u64 = self.arity_hist.values().sum();
        let km: u64 = self.arity_hist.iter().map(|(k, m)| k * m).sum();
        let kn: u64 = self.degree_hist.iter().map(|(k, n)| k * n).sum();
        if nv != self.v || me != self.e || km != kn || km != self.slots {
            return Err(Error::InconsistentState(format!(
                "conservation: Σ N_k = {nv}, v = {}, Σ M_k = {me}, e = {}, slots {km} / {kn}",
                self.v, self.e
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NetStats {
    pub global: Counts,
    /// Per sender, over the interactions listing it (every listed sender of a
    /// multi-sender interaction counts it).
    pub local: BTreeMap<SenderId, Counts>,
}

/// Exact global and per-sender counts.
pub fn compute_stats(log: &InteractionLog) -> NetStats {
    let mut deg: Vec<u64> = vec![0; log.num_receivers()];
    let mut local_deg: BTreeMap<SenderId, HashMap<ReceiverId, u64>> = BTreeMap::new();
    let mut local_arity: BTreeMap<SenderId, Vec<u64>> = BTreeMap::new();
    for rec in log.records() {
        for &r in rec.receivers() {
            deg[r.index()] += 1;
        }
        for s in rec.distinct_senders() {
            let d = local_deg.entry(s).or_default();
            for &r in rec.receivers() {
                *d.entry(r).or_insert(0) += 1;
            }
            local_arity
                .entry(s)
                .or_default()
                .push(rec.receiver_arity() as u64);
        }
    }
    let global = Counts::from_degrees(
        log.records().iter().map(|r| r.receiver_arity() as u64),
        deg.iter(),
    );
    let local = local_deg
        .into_iter()
        .map(|(s, d)| {
            let c = Counts::from_degrees(local_arity[&s].iter().copied(), d.values());
            (s, c)
        })
        .collect();
    NetStats { global, local }
}

/// One point of a growth curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GrowthPoint {
    /// Interactions observed.
    pub n: u64,
    /// Distinct receivers.
    pub v: u64,
    /// Receiver slots.
    pub slots: u64,
}

/// `count` geometrically spaced checkpoints between `lo` and `hi` inclusive.
pub fn geometric_checkpoints(lo: usize, hi: usize, count: usize) -> Vec<usize> {
    if count == 0 || lo == 0 || hi < lo {
        return Vec::new();
    }
    if count == 1 {
        return vec![hi];
    }
    let ratio = (hi as f64 / lo as f64).ln() / (count - 1) as f64;
    let mut out: Vec<usize> = (0..count)
        .map(|i| ((lo as f64).ln() + ratio * i as f64).exp().round() as usize)
        .collect();
    out[count - 1] = hi;
    out.dedup();
    out
}

/// Growth of `v` at the given interaction counts, optionally restricted to
/// the interactions listing `sender`.
pub fn growth_curve(log: &InteractionLog, checkpoints: &[usize], sender: Option<SenderId>) -> Vec<GrowthPoint> {
    let mut seen = vec![false; log.num_receivers()];
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut v = 0u64;
    let mut slots = 0u64;
    let mut n = 0u64;
    let mut next = checkpoints.iter().peekable();
    for rec in log.records() {
        if let Some(s) = sender {
            if !rec.senders().contains(&s) {
                continue;
            }
        }
        n += 1;
        for &r in rec.receivers() {
            slots += 1;
            if !std::mem::replace(&mut seen[r.index()], true) {
                v += 1;
            }
        }
        while next.peek().is_some_and(|&&c| c as u64 == n) {
            out.push(GrowthPoint { n, v, slots });
            next.next();
        }
    }
    out
}

/// Least-squares slope of `ln v` against `ln n`.
pub fn sparsity_slope(points: &[GrowthPoint]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} growth checkpoints (need at least 2)",
            points.len()
        )));
    }
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.n > 0 && p.v > 0)
        .map(|p| ((p.n as f64).ln(), (p.v as f64).ln()))
        .collect();
    ols(&xy)
        .map(|(slope, _)| slope)
        .ok_or_else(|| Error::InsufficientData("degenerate growth checkpoints".into()))
}

/// `ln e / (m• ln v)`: below one when `e` grows slower than `v^{m•}`.
pub fn sparsity_ratio(e: u64, v: u64, m_bullet: f64) -> f64 {
    (e as f64).ln() / (m_bullet * (v as f64).ln())
}

/// Log-log least-squares exponent `γ̂` of `d_k ≈ C k^{-γ}` over `k_range`.
pub fn powerlaw_slope(d: &BTreeMap<u64, f64>, k_range: std::ops::RangeInclusive<u64>) -> Result<f64> {
    let xy: Vec<(f64, f64)> = d
        .range(k_range)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&k, &p)| ((k as f64).ln(), p.ln()))
        .collect();
    if xy.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "{} support points in range (need 5)",
            xy.len()
        )));
    }
    let (slope, _) = ols(&xy).expect("distinct abscissae");
    Ok(-slope)
}

/// Reference power law `α k^{-(α+1)} / Γ(1-α)`.
pub fn yule_reference(alpha: f64, k: u64) -> f64 {
    alpha * (k as f64).powf(-(alpha + 1.0)) / statrs::function::gamma::gamma(1.0 - alpha)
}

/// For each receiver, the number of distinct senders whose interactions
/// contain it; returns the histogram of those numbers.
pub fn node_sharing_histogram(log: &InteractionLog) -> BTreeMap<usize, u64> {
    let mut senders: HashMap<ReceiverId, BTreeSet<SenderId>> = HashMap::new();
    for rec in log.records() {
        for &r in rec.receivers() {
            senders.entry(r).or_default().extend(rec.senders().iter().copied());
        }
    }
    let mut hist = BTreeMap::new();
    for set in senders.values() {
        *hist.entry(set.len()).or_insert(0) += 1;
    }
    hist
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    L1,
    Tv,
}

/// L1 or total-variation distance between two degree distributions.
pub fn degree_distribution_distance(
    d1: &BTreeMap<u64, f64>,
    d2: &BTreeMap<u64, f64>,
    metric: Metric,
) -> Result<f64> {
    for d in [d1, d2] {
        let t: f64 = d.values().sum();
        if (t - 1.0).abs() > 1e-9 || d.values().any(|&x| x < 0.0) {
            return Err(Error::InvalidParams(format!(
                "degree distribution sums to {t}, not 1"
            )));
        }
    }
    let keys: BTreeSet<u64> = d1.keys().chain(d2.keys()).copied().collect();
    let l1: f64 = keys
        .iter()
        .map(|k| (d1.get(k).unwrap_or(&0.0) - d2.get(k).unwrap_or(&0.0)).abs())
        .sum();
    Ok(match metric {
        Metric::L1 => l1,
        Metric::Tv => l1 / 2.0,
    })
}

/// Posterior attribution probabilities for each multi-sender interaction:
/// the trace's running mean, or sample frequencies when no mean was kept.
fn attribution_probs(trace: &GibbsTrace, log: &InteractionLog) -> Vec<Vec<(SenderId, f64)>> {
    let usable = trace.z_posterior_mean.len() == trace.multi_sender.len()
        && trace
            .z_posterior_mean
            .iter()
            .all(|row| row.iter().map(|x| x.1).sum::<f64>() > 0.0);
    if usable {
        return trace.z_posterior_mean.clone();
    }
    let kept = trace.kept();
    trace
        .multi_sender
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let cand = log.records()[n].distinct_senders();
            let total = kept.len().max(1) as f64;
            cand.into_iter()
                .map(|s| {
                    let hits = kept.clone().filter(|&i| trace.z_samples[i][k] == s).count();
                    (s, hits as f64 / total)
                })
                .collect()
        })
        .collect()
}

/// Mean base-2 entropy of the posterior attribution, restricted and
/// renormalized to `{s1, s2}`, over interactions listing both. Interactions
/// where both have zero posterior mass are skipped.
pub fn subject_overlap(trace: &GibbsTrace, log: &InteractionLog, s1: SenderId, s2: SenderId) -> Result<f64> {
    let probs = attribution_probs(trace, log);
    overlap_from_probs(&trace.multi_sender, &probs, s1, s2).ok_or_else(|| {
        Error::NoQualifyingInteractions(
            log.sender_name(s1).to_string(),
            log.sender_name(s2).to_string(),
        )
    })
}

fn overlap_from_probs(
    multi: &[usize],
    probs: &[Vec<(SenderId, f64)>],
    s1: SenderId,
    s2: SenderId,
) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for row in probs.iter().take(multi.len()) {
        let p1 = row.iter().find(|x| x.0 == s1).map(|x| x.1);
        let p2 = row.iter().find(|x| x.0 == s2).map(|x| x.1);
        if let (Some(p1), Some(p2)) = (p1, p2) {
            if s1 == s2 {
                continue;
            }
            let t = p1 + p2;
            if t <= 0.0 {
                continue;
            }
            sum += entropy_bits(&[p1 / t, p2 / t]);
            n += 1;
        }
    }
    (n > 0).then(|| sum / n as f64)
}

/// One entry of the subject-overlap matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OverlapEntry {
    pub s1: SenderId,
    pub s2: SenderId,
    pub score: f64,
    pub interactions: usize,
}

/// Subject overlap for every co-listed pair `s1 < s2`.
pub fn subject_overlap_matrix(trace: &GibbsTrace, log: &InteractionLog) -> Result<Vec<OverlapEntry>> {
    let probs = attribution_probs(trace, log);
    let mut pairs: BTreeMap<(SenderId, SenderId), usize> = BTreeMap::new();
    for &n in &trace.multi_sender {
        let d = log.records()[n].distinct_senders();
        for (i, &a) in d.iter().enumerate() {
            for &b in &d[i + 1..] {
                *pairs.entry((a, b)).or_insert(0) += 1;
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoQualifyingInteractions("*".into(), "*".into()));
    }
    Ok(pairs
        .into_iter()
        .filter_map(|((a, b), count)| {
            overlap_from_probs(&trace.multi_sender, &probs, a, b).map(|score| OverlapEntry {
                s1: a,
                s2: b,
                score,
                interactions: count,
            })
        })
        .collect())
}
