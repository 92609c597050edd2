//! Posterior predictive replicates and coverage of network statistics.

use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generative::simulate_conditional;
use crate::inference::GibbsTrace;
use crate::interaction::{InteractionLog, SenderId};
use crate::netstats::{compute_stats, degree_distribution_distance, node_sharing_histogram, Metric, NetStats};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "HVCM_THREADS";

/// Runs `f` on a pool capped by `HVCM_THREADS` when set.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0);
    match cap.and_then(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build().ok()) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// Seed of replicate `i` derived from the root seed.
pub fn replicate_seed(root: u64, i: usize) -> u64 {
    root.wrapping_add((i as u64 + 1).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

/// Iterations used for `m` replicates: evenly spaced over the post-burn-in
/// part of the trace.
pub fn thinned_iterations(trace: &GibbsTrace, m: usize) -> Result<Vec<usize>> {
    let kept = trace.kept();
    if m > kept.len() {
        return Err(Error::InsufficientData(format!(
            "{m} replicates requested from {} post-burn-in iterations",
            kept.len()
        )));
    }
    Ok((0..m).map(|i| kept.start + i * kept.len() / m.max(1)).collect())
}

/// Replicates conditioned on the observed sender multisets and receiver
/// counts, one per thinned posterior sample.
pub fn generate_replicates(
    trace: &GibbsTrace,
    log: &InteractionLog,
    m: usize,
    seed: u64,
) -> Result<Vec<InteractionLog>> {
    if m == 0 {
        return Ok(Vec::new());
    }
    let iters = thinned_iterations(trace, m)?;
    let senders: Vec<Vec<SenderId>> = log.records().iter().map(|r| r.senders().to_vec()).collect();
    let sizes: Vec<usize> = log.records().iter().map(|r| r.receiver_arity()).collect();
    with_thread_cap(|| {
        iters
            .par_iter()
            .enumerate()
            .map(|(i, &it)| {
                let params = trace.params_at(it);
                let mut rng = crate::seeded_rng(replicate_seed(seed, i));
                simulate_conditional(&senders, &sizes, &params, &mut rng).map(|s| s.log)
            })
            .collect()
    })
}

/// Empirical quantile with linear interpolation between order statistics
/// (position `(n - 1) q`).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Central interval at `level`.
pub fn interval(values: &[f64], level: f64) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} values (need at least 2)",
            values.len()
        )));
    }
    if !(0.0..=1.0).contains(&level) {
        return Err(Error::Config(format!("level {level} outside [0, 1]")));
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok((quantile(&v, tail), quantile(&v, 1.0 - tail)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpcConfig {
    pub level: f64,
    /// Degrees `k` whose receiver counts `N_k` are checked.
    pub thresholds: Vec<u64>,
}

impl Default for PpcConfig {
    fn default() -> Self {
        PpcConfig {
            level: 0.95,
            thresholds: vec![1, 10, 100],
        }
    }
}

/// One statistic: replicate values, interval and the observed value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StatRow {
    pub statistic: String,
    pub actual: f64,
    pub lo: f64,
    pub hi: f64,
    pub covered: bool,
    pub values: Vec<f64>,
}

impl StatRow {
    fn new(statistic: String, actual: f64, values: Vec<f64>, level: f64) -> Result<Self> {
        let (lo, hi) = interval(&values, level)?;
        Ok(StatRow {
            statistic,
            actual,
            lo,
            hi,
            covered: lo <= actual && actual <= hi,
            values,
        })
    }
}

/// Distance of each replicate's degree distribution to the observed one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub metric: Metric,
    pub lo: f64,
    pub hi: f64,
    pub values: Vec<f64>,
}

/// `covered / eligible` for one statistic across senders.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageRate {
    pub statistic: String,
    pub covered: usize,
    pub eligible: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpcReport {
    pub level: f64,
    pub replicates: usize,
    pub global: Vec<StatRow>,
    /// Rows `shared_by_<c>`: receivers shared by exactly `c` senders.
    pub node_sharing: Vec<StatRow>,
    pub degree_distance: Vec<DistanceRow>,
    /// Per sender: the statistics it is eligible for.
    pub local: BTreeMap<SenderId, Vec<StatRow>>,
    pub local_coverage: Vec<CoverageRate>,
}

const UNIQUE: &str = "unique_receivers";

fn degree_stat(k: u64) -> String {
    format!("degree_{k}")
}

/// Intervals, coverage flags and local coverage rates of the replicate
/// statistics. A sender is eligible for the unique-receiver check when it has
/// an interaction, and for a degree-`k` check when the observed data has a
/// receiver of degree `k` for it.
pub fn coverage_report(replicates: &[InteractionLog], log: &InteractionLog, cfg: &PpcConfig) -> Result<PpcReport> {
    if replicates.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} replicates (need at least 2)",
            replicates.len()
        )));
    }
    let obs = compute_stats(log);
    let reps: Vec<NetStats> = with_thread_cap(|| replicates.par_iter().map(compute_stats).collect());

    let mut global = vec![StatRow::new(
        UNIQUE.into(),
        obs.global.v as f64,
        reps.iter().map(|r| r.global.v as f64).collect(),
        cfg.level,
    )?];
    for &k in &cfg.thresholds {
        global.push(StatRow::new(
            degree_stat(k),
            obs.global.receivers_with_degree(k) as f64,
            reps.iter().map(|r| r.global.receivers_with_degree(k) as f64).collect(),
            cfg.level,
        )?);
    }

    let obs_share = node_sharing_histogram(log);
    let rep_share: Vec<BTreeMap<usize, u64>> = replicates.iter().map(node_sharing_histogram).collect();
    let shares: BTreeSet<usize> = obs_share
        .keys()
        .chain(rep_share.iter().flat_map(|h| h.keys()))
        .copied()
        .collect();
    let node_sharing = shares
        .into_iter()
        .map(|c| {
            StatRow::new(
                format!("shared_by_{c}"),
                obs_share.get(&c).copied().unwrap_or(0) as f64,
                rep_share.iter().map(|h| h.get(&c).copied().unwrap_or(0) as f64).collect(),
                cfg.level,
            )
        })
        .collect::<Result<Vec<_>>>()?;

    let obs_d = obs.global.degree_distribution();
    let mut degree_distance = Vec::new();
    for metric in [Metric::L1, Metric::Tv] {
        let values = reps
            .iter()
            .map(|r| {
                if r.global.v == 0 || obs.global.v == 0 {
                    Ok(0.0)
                } else {
                    degree_distribution_distance(&obs_d, &r.global.degree_distribution(), metric)
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        let (lo, hi) = interval(&values, cfg.level)?;
        degree_distance.push(DistanceRow { metric, lo, hi, values });
    }

    let mut local = BTreeMap::new();
    let mut rates: Vec<CoverageRate> = std::iter::once(UNIQUE.to_string())
        .chain(cfg.thresholds.iter().map(|&k| degree_stat(k)))
        .map(|statistic| CoverageRate {
            statistic,
            covered: 0,
            eligible: 0,
        })
        .collect();
    for (&s, c) in &obs.local {
        let rep_local: Vec<Option<&crate::netstats::Counts>> = reps.iter().map(|r| r.local.get(&s)).collect();
        let mut rows = Vec::new();
        if c.e > 0 {
            rows.push(StatRow::new(
                UNIQUE.into(),
                c.v as f64,
                rep_local.iter().map(|x| x.map_or(0.0, |x| x.v as f64)).collect(),
                cfg.level,
            )?);
        }
        for &k in &cfg.thresholds {
            if c.receivers_with_degree(k) == 0 {
                continue;
            }
            rows.push(StatRow::new(
                degree_stat(k),
                c.receivers_with_degree(k) as f64,
                rep_local
                    .iter()
                    .map(|x| x.map_or(0.0, |x| x.receivers_with_degree(k) as f64))
                    .collect(),
                cfg.level,
            )?);
        }
        for row in &rows {
            let rate = rates
                .iter_mut()
                .find(|r| r.statistic == row.statistic)
                .expect("known statistic");
            rate.eligible += 1;
            rate.covered += row.covered as usize;
        }
        local.insert(s, rows);
    }

    Ok(PpcReport {
        level: cfg.level,
        replicates: replicates.len(),
        global,
        node_sharing,
        degree_distance,
        local,
        local_coverage: rates,
    })
}
