//! Auxiliary-variable Gibbs sampling for the extended model.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_distr::{Beta, Bernoulli, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generative::AttributionUrn;
use crate::interaction::{InteractionLog, SenderId};
use crate::params::{Categorical, HvcmParams, LocalParams};
use crate::seating::{log_likelihood, SeatingState};

/// Gamma prior in shape/scale form (mean `shape * scale`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior {
    pub shape: f64,
    pub scale: f64,
}

impl GammaPrior {
    pub fn new(shape: f64, scale: f64) -> Self {
        GammaPrior { shape, scale }
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaPrior {
    pub a: f64,
    pub b: f64,
}

impl BetaPrior {
    pub fn new(a: f64, b: f64) -> Self {
        BetaPrior { a, b }
    }

    pub fn mean(&self) -> f64 {
        self.a / (self.a + self.b)
    }
}

/// Prior on the local discounts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalAlphaPrior {
    /// `α_s ~ Beta(φα, φ(1 - α))`, tied to the global discount.
    Tied { phi: f64 },
    /// Fixed Beta prior shared by every sender.
    Beta(BetaPrior),
}

/// Prior on the local concentrations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LocalThetaPrior {
    Shared(GammaPrior),
    /// `Gamma(θ̂_s / 100, 100)` with `θ̂_s` from a flat-urn fit of each
    /// sender's own receivers, computed when fitting starts.
    HollywoodFitted,
    PerSender {
        priors: BTreeMap<SenderId, GammaPrior>,
        fallback: GammaPrior,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    Conjugate,
    Enron,
    HollywoodFitted,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsPriors {
    pub theta: GammaPrior,
    pub alpha: BetaPrior,
    pub local_theta: LocalThetaPrior,
    pub local_alpha: LocalAlphaPrior,
    /// Sample the sender-urn parameters instead of keeping point estimates.
    pub sample_sender_params: bool,
    /// Auxiliary-variable rounds for the global parameters per sweep.
    #[serde(default = "default_rounds")]
    pub global_rounds: usize,
}

fn default_rounds() -> usize {
    DEFAULT_GLOBAL_ROUNDS
}

pub const DEFAULT_GLOBAL_ROUNDS: usize = 10;

pub const DEFAULT_PHI: f64 = 10.0;

/// Prior presets.
pub fn default_priors(mode: PriorMode) -> GibbsPriors {
    match mode {
        PriorMode::Conjugate => GibbsPriors {
            theta: GammaPrior::new(1.0, 10_000.0),
            alpha: BetaPrior::new(1.0, 1.0),
            local_theta: LocalThetaPrior::Shared(GammaPrior::new(1.0, 1000.0)),
            local_alpha: LocalAlphaPrior::Tied { phi: DEFAULT_PHI },
            sample_sender_params: false,
            global_rounds: DEFAULT_GLOBAL_ROUNDS,
        },
        PriorMode::Enron => GibbsPriors {
            theta: GammaPrior::new(2.0, 1000.0),
            alpha: BetaPrior::new(1.0, 1.0),
            local_theta: LocalThetaPrior::Shared(GammaPrior::new(1.0, 20.0)),
            local_alpha: LocalAlphaPrior::Beta(BetaPrior::new(1.0, 0.9)),
            sample_sender_params: false,
            global_rounds: DEFAULT_GLOBAL_ROUNDS,
        },
        PriorMode::HollywoodFitted => GibbsPriors {
            local_theta: LocalThetaPrior::HollywoodFitted,
            ..default_priors(PriorMode::Conjugate)
        },
    }
}

/// Local concentration prior derived from a flat-urn estimate `θ̂`.
pub fn hollywood_theta_prior(theta_hat: f64) -> GammaPrior {
    GammaPrior::new(theta_hat / 100.0, 100.0)
}

impl GibbsPriors {
    pub fn validate(&self) -> Result<()> {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        let mut ok = pos(self.theta.shape)
            && pos(self.theta.scale)
            && pos(self.alpha.a)
            && pos(self.alpha.b);
        ok &= match &self.local_theta {
            LocalThetaPrior::Shared(g) => pos(g.shape) && pos(g.scale),
            LocalThetaPrior::HollywoodFitted => true,
            LocalThetaPrior::PerSender { priors, fallback } => priors
                .values()
                .chain(std::iter::once(fallback))
                .all(|g| pos(g.shape) && pos(g.scale)),
        };
        ok &= match self.local_alpha {
            LocalAlphaPrior::Tied { phi } => pos(phi),
            LocalAlphaPrior::Beta(b) => pos(b.a) && pos(b.b),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config("prior hyperparameters must be positive".into()))
        }
    }

    fn local_theta_for(&self, s: SenderId) -> GammaPrior {
        match &self.local_theta {
            LocalThetaPrior::Shared(g) => *g,
            LocalThetaPrior::HollywoodFitted => GammaPrior::new(1.0, 1000.0),
            LocalThetaPrior::PerSender { priors, fallback } => {
                priors.get(&s).copied().unwrap_or(*fallback)
            }
        }
    }
}

/// Sufficient statistics of one round of auxiliary draws for a Pitman-Yor
/// level with the given table (or customer) counts.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AuxiliaryDraws {
    /// `ln x`; zero when the Beta draw is skipped (fewer than two customers).
    pub log_x: f64,
    /// `Σ y_i`.
    pub sum_y: f64,
    /// `Σ (1 - y_i)`.
    pub sum_not_y: f64,
    /// `Σ (1 - z)` over all count positions.
    pub sum_not_z: f64,
}

const UNIT_EPS: f64 = 1e-12;

fn clamp_unit(x: f64) -> f64 {
    x.clamp(UNIT_EPS, 1.0 - UNIT_EPS)
}

fn beta_draw<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    clamp_unit(Beta::new(a, b).expect("positive beta parameters").sample(rng))
}

fn gamma_draw<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    Gamma::new(shape, 1.0 / rate)
        .expect("positive gamma parameters")
        .sample(rng)
        .max(f64::MIN_POSITIVE)
}

fn bernoulli<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    Bernoulli::new(p.clamp(0.0, 1.0)).expect("unit probability").sample(rng)
}

/// Draws `x ~ Beta(θ+1, n-1)`, `y_i ~ Bernoulli(θ/(θ+αi))` for
/// `i = 1..K-1` and `z_{cu} ~ Bernoulli((u-1)/(u-α))` for `u = 1..c-1`.
pub fn auxiliary_draws<R: Rng + ?Sized>(
    theta: f64,
    alpha: f64,
    counts: impl IntoIterator<Item = u64>,
    rng: &mut R,
) -> AuxiliaryDraws {
    let mut aux = AuxiliaryDraws::default();
    let mut k = 0u64;
    let mut n = 0u64;
    for c in counts {
        if c == 0 {
            continue;
        }
        k += 1;
        n += c;
        for u in 1..c {
            let u = u as f64;
            if !bernoulli((u - 1.0) / (u - alpha), rng) {
                aux.sum_not_z += 1.0;
            }
        }
    }
    if n >= 2 {
        aux.log_x = Beta::new(theta + 1.0, (n - 1) as f64)
            .expect("positive beta parameters")
            .sample(rng)
            .max(f64::MIN_POSITIVE)
            .ln();
    }
    for i in 1..k {
        if bernoulli(theta / (theta + alpha * i as f64), rng) {
            aux.sum_y += 1.0;
        } else {
            aux.sum_not_y += 1.0;
        }
    }
    aux
}

/// Conjugate concentration update `θ ~ Gamma(a + Σy, 1/b - ln x)`.
pub fn update_theta<R: Rng + ?Sized>(prior: GammaPrior, aux: &AuxiliaryDraws, rng: &mut R) -> f64 {
    gamma_draw(prior.shape + aux.sum_y, 1.0 / prior.scale - aux.log_x, rng)
}

/// Conjugate discount update `α ~ Beta(c + Σ(1-y), d + Σ(1-z))`.
pub fn update_alpha<R: Rng + ?Sized>(prior: BetaPrior, aux: &AuxiliaryDraws, rng: &mut R) -> f64 {
    beta_draw(prior.a + aux.sum_not_y, prior.b + aux.sum_not_z, rng)
}

/// Removes and reseats every observation once, in record order.
pub fn reseat_pass<R: Rng + ?Sized>(
    state: &mut SeatingState,
    params: &HvcmParams,
    rng: &mut R,
) -> Result<()> {
    for n in 0..state.num_interactions() {
        for j in 0..state.receivers(n).len() {
            state.remove_observation(n, j)?;
            state.reseat_observation(n, j, params, rng)?;
        }
    }
    Ok(())
}

/// One sweep: reseating, global auxiliary draws and parameters, then local
/// auxiliary draws and parameters for senders `0..num_senders`.
pub fn gibbs_iteration<R: Rng + ?Sized>(
    state: &mut SeatingState,
    params: &mut HvcmParams,
    priors: &GibbsPriors,
    num_senders: usize,
    rng: &mut R,
) -> Result<()> {
    reseat_pass(state, params, rng)?;
    let counts: Vec<u64> = state.label_counts().map(|(_, c)| c).collect();
    for _ in 0..priors.global_rounds.max(1) {
        let aux = auxiliary_draws(params.global_theta, params.global_alpha, counts.iter().copied(), rng);
        params.global_theta = update_theta(priors.theta, &aux, rng);
        params.global_alpha = update_alpha(priors.alpha, &aux, rng);
    }
    for si in 0..num_senders {
        let s = SenderId(si as u32);
        let lp = params.local_params(s);
        let aux = auxiliary_draws(lp.theta, lp.alpha, state.live_tables(s).map(|(_, t)| t.degree), rng);
        // The y draws range over new-table events only.
        let theta = update_theta(priors.local_theta_for(s), &aux, rng);
        let alpha = match priors.local_alpha {
            LocalAlphaPrior::Tied { phi } => beta_draw(
                phi * params.global_alpha + aux.sum_not_y,
                phi * (1.0 - params.global_alpha) + aux.sum_not_z,
                rng,
            ),
            LocalAlphaPrior::Beta(b) => update_alpha(b, &aux, rng),
        };
        params.local.insert(s, LocalParams::new(alpha, theta));
    }
    #[cfg(debug_assertions)]
    state.audit()?;
    Ok(())
}

/// Sequential estimate of `P(receivers of n | Z_n = s)` from `n_mc` sampled
/// seat paths. Observations of `n` must be unseated; they are left unseated.
fn receiver_likelihood<R: Rng + ?Sized>(
    state: &mut SeatingState,
    n: usize,
    s: SenderId,
    params: &HvcmParams,
    n_mc: usize,
    rng: &mut R,
) -> Result<f64> {
    state.set_attribution(n, s)?;
    let k = state.receivers(n).len();
    let lp = params.local_params(s);
    let mut acc = 0.0;
    for _ in 0..n_mc {
        let mut path = 1.0;
        for j in 0..k {
            let r = state.receivers(n)[j];
            let w = state.seat_probabilities(s, r, params);
            path *= w.total() / (state.sender_customers(s) as f64 + lp.theta);
            state.reseat_observation(n, j, params, rng)?;
        }
        for j in 0..k {
            state.remove_observation(n, j)?;
        }
        acc += path;
    }
    Ok(acc / n_mc.max(1) as f64)
}

/// Approximate posterior over the attribution of interaction `n`, given the
/// attributions of all other interactions (`urn` must exclude `n`).
/// Observations of `n` must be unseated; they are left unseated.
pub fn z_posterior<R: Rng + ?Sized>(
    state: &mut SeatingState,
    log: &InteractionLog,
    n: usize,
    urn: &AttributionUrn,
    params: &HvcmParams,
    n_mc: usize,
    rng: &mut R,
) -> Result<Vec<(SenderId, f64)>> {
    let rec = log
        .records()
        .get(n)
        .ok_or(Error::IndexOutOfRange { index: n, len: log.len() })?;
    let prior = urn.weights(rec.senders(), params);
    if prior.len() == 1 {
        return Ok(vec![(prior[0].0, 1.0)]);
    }
    let mut post = Vec::with_capacity(prior.len());
    let k2 = rec.receiver_arity();
    for &(s, w) in &prior {
        let size = params.local_size(s).prob(k2);
        post.push((s, w * size * receiver_likelihood(state, n, s, params, n_mc, rng)?));
    }
    let total: f64 = post.iter().map(|x| x.1).sum();
    for x in &mut post {
        x.1 = if total > 0.0 { x.1 / total } else { 1.0 / prior.len() as f64 };
    }
    Ok(post)
}

/// Resamples the attribution of interaction `n` and reseats it. Returns the
/// posterior used for the draw.
pub fn sample_z_posterior<R: Rng + ?Sized>(
    state: &mut SeatingState,
    log: &InteractionLog,
    n: usize,
    urn: &mut AttributionUrn,
    params: &HvcmParams,
    n_mc: usize,
    rng: &mut R,
) -> Result<Vec<(SenderId, f64)>> {
    let k = state.receivers(n).len();
    for j in 0..k {
        state.remove_observation(n, j)?;
    }
    let old = state.attribution()[n];
    urn.forget(old);
    let post = z_posterior(state, log, n, urn, params, n_mc, rng)?;
    let probs: Vec<f64> = post.iter().map(|x| x.1).collect();
    let s = post[crate::math::sample_weighted(&probs, rng)].0;
    urn.observe(s);
    state.set_attribution(n, s)?;
    for j in 0..k {
        state.reseat_observation(n, j, params, rng)?;
    }
    Ok(post)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub z_mc_samples: usize,
    /// Resample attributions every this many iterations.
    pub z_every: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            iterations: 1000,
            burn_in: 500,
            seed: 0,
            z_mc_samples: 25,
            z_every: 1,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.burn_in >= self.iterations {
            return Err(Error::Config(format!(
                "need 0 <= burn-in < iterations, got {} and {}",
                self.burn_in, self.iterations
            )));
        }
        if self.z_mc_samples == 0 || self.z_every == 0 {
            return Err(Error::Config("z sampling counts must be positive".into()));
        }
        Ok(())
    }
}

/// Global quantities recorded after each iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub theta: f64,
    pub alpha: f64,
    pub sender_alpha: f64,
    pub sender_theta: f64,
    pub log_likelihood: f64,
    pub num_labels: usize,
    pub num_tables: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GibbsTrace {
    pub seed: u64,
    pub iterations: usize,
    pub burn_in: usize,
    /// Parameters not updated by the sampler (urn parameters for senders and
    /// attributions unless sampled, size distributions).
    pub base: HvcmParams,
    pub records: Vec<IterationRecord>,
    /// Per iteration, `(α_s, θ_s)` for senders `0..num_senders`.
    pub local: Vec<Vec<LocalParams>>,
    /// Interactions with more than one distinct sender.
    pub multi_sender: Vec<usize>,
    /// Per iteration, attribution of each interaction in `multi_sender`.
    pub z_samples: Vec<Vec<SenderId>>,
    /// Per interaction in `multi_sender`, posterior attribution
    /// probabilities averaged over post-burn-in iterations.
    pub z_posterior_mean: Vec<Vec<(SenderId, f64)>>,
}

impl GibbsTrace {
    /// Full parameter set at a recorded iteration.
    pub fn params_at(&self, iteration: usize) -> HvcmParams {
        let rec = &self.records[iteration];
        let mut p = self.base.clone();
        p.global_alpha = rec.alpha;
        p.global_theta = rec.theta;
        p.sender_alpha = rec.sender_alpha;
        p.sender_theta = rec.sender_theta;
        p.local = self.local[iteration]
            .iter()
            .enumerate()
            .map(|(i, lp)| (SenderId(i as u32), *lp))
            .collect();
        p
    }

    /// Post-burn-in iterations.
    pub fn kept(&self) -> std::ops::Range<usize> {
        self.burn_in.min(self.records.len())..self.records.len()
    }

    pub fn posterior_mean_alpha(&self) -> f64 {
        mean(self.kept().map(|i| self.records[i].alpha))
    }

    pub fn posterior_mean_theta(&self) -> f64 {
        mean(self.kept().map(|i| self.records[i].theta))
    }

    /// Posterior mean of `(α_s, θ_s)` per sender.
    pub fn posterior_mean_local(&self) -> Vec<LocalParams> {
        let n = self.local.first().map_or(0, Vec::len);
        (0..n)
            .map(|s| {
                LocalParams::new(
                    mean(self.kept().map(|i| self.local[i][s].alpha)),
                    mean(self.kept().map(|i| self.local[i][s].theta)),
                )
            })
            .collect()
    }

    /// Mean of `α` over iterations `range`.
    pub fn mean_alpha(&self, range: std::ops::Range<usize>) -> f64 {
        mean(range.filter(|&i| i < self.records.len()).map(|i| self.records[i].alpha))
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

/// Flat-urn estimate `(α̂, θ̂)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatEstimate {
    pub alpha: f64,
    pub theta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlatFitConfig {
    pub theta: GammaPrior,
    pub alpha: BetaPrior,
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl Default for FlatFitConfig {
    fn default() -> Self {
        FlatFitConfig {
            theta: GammaPrior::new(1.0, 10_000.0),
            alpha: BetaPrior::new(1.0, 1.0),
            iterations: 400,
            burn_in: 100,
            seed: 0,
        }
    }
}

/// Posterior means of a flat Pitman-Yor urn given the multiplicity of each
/// distinct item, using the same auxiliary-variable updates as the global
/// level. With fewer than two draws the prior means are returned.
pub fn hollywood_fit(counts: &[u64], cfg: &FlatFitConfig) -> FlatEstimate {
    let prior = FlatEstimate {
        alpha: cfg.alpha.mean(),
        theta: cfg.theta.mean(),
    };
    if counts.iter().sum::<u64>() < 2 || cfg.iterations <= cfg.burn_in {
        return prior;
    }
    let mut rng = crate::Rng::seed_from_u64(cfg.seed);
    let (mut alpha, mut theta) = (0.5, 1.0);
    let (mut sa, mut st) = (0.0, 0.0);
    for it in 0..cfg.iterations {
        let aux = auxiliary_draws(theta, alpha, counts.iter().copied(), &mut rng);
        theta = update_theta(cfg.theta, &aux, &mut rng);
        alpha = update_alpha(cfg.alpha, &aux, &mut rng);
        if it >= cfg.burn_in {
            sa += alpha;
            st += theta;
        }
    }
    let k = (cfg.iterations - cfg.burn_in) as f64;
    FlatEstimate {
        alpha: sa / k,
        theta: st / k,
    }
}

/// Multiplicities of the distinct items of a sequence.
pub fn item_counts(items: impl IntoIterator<Item = u32>) -> Vec<u64> {
    let mut counts: Vec<u64> = Vec::new();
    for i in items {
        let i = i as usize;
        if counts.len() <= i {
            counts.resize(i + 1, 0);
        }
        counts[i] += 1;
    }
    counts.retain(|&c| c > 0);
    counts
}

fn derived_seed(seed: u64, stream: u64) -> u64 {
    seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Fits the model to `log`.
///
/// Sender-urn parameters are point estimates from a flat-urn fit of the
/// sender sequence (also used for the attribution urn) unless sampling is
/// requested. Global parameters start from a flat-urn fit of the receivers,
/// local ones at `θ_s = 1`, `α_s = α`. Seating starts from one sequential
/// pass; attributions start at each interaction's lowest sender id.
pub fn fit(log: &InteractionLog, priors: &GibbsPriors, cfg: &FitConfig) -> Result<GibbsTrace> {
    if log.is_empty() {
        return Err(Error::EmptyInput);
    }
    cfg.validate()?;
    priors.validate()?;
    log.validate()?;
    let num_senders = log.num_senders();
    let flat = |items: Vec<u32>, stream| {
        hollywood_fit(
            &item_counts(items),
            &FlatFitConfig {
                seed: derived_seed(cfg.seed, stream),
                ..FlatFitConfig::default()
            },
        )
    };
    let senders_fit = flat(log.sender_sequence().map(|s| s.0).collect(), 1);
    let receivers_fit = flat(
        log.records()
            .iter()
            .flat_map(|r| r.receivers().iter().map(|x| x.0))
            .collect(),
        2,
    );
    let mut priors = priors.clone();
    if priors.local_theta == LocalThetaPrior::HollywoodFitted {
        let mut per: Vec<Vec<u32>> = vec![Vec::new(); num_senders];
        for rec in log.records() {
            for s in rec.distinct_senders() {
                per[s.index()].extend(rec.receivers().iter().map(|r| r.0));
            }
        }
        let fitted = per
            .into_iter()
            .enumerate()
            .map(|(i, items)| {
                let est = flat(items, 1000 + i as u64);
                (SenderId(i as u32), hollywood_theta_prior(est.theta))
            })
            .collect();
        priors.local_theta = LocalThetaPrior::PerSender {
            priors: fitted,
            fallback: GammaPrior::new(1.0, 1000.0),
        };
    }
    let mut params = HvcmParams {
        sender_alpha: senders_fit.alpha,
        sender_theta: senders_fit.theta,
        sender_weights: None,
        global_alpha: receivers_fit.alpha,
        global_theta: receivers_fit.theta,
        local: (0..num_senders)
            .map(|i| (SenderId(i as u32), LocalParams::new(receivers_fit.alpha, 1.0)))
            .collect(),
        default_local: LocalParams::new(receivers_fit.alpha, 1.0),
        z_alpha: senders_fit.alpha,
        z_theta: senders_fit.theta,
        size_dist: Categorical::empirical(log.records().iter().map(|r| r.sender_arity()))?,
        local_size_dist: BTreeMap::new(),
        default_local_size: Categorical::empirical(log.records().iter().map(|r| r.receiver_arity()))?,
    };
    let mut rng = crate::Rng::seed_from_u64(cfg.seed);
    let z0 = log.lead_senders();
    let mut state = SeatingState::sequential(log, &z0, &params, &mut rng)?;
    let multi: Vec<usize> = (0..log.len())
        .filter(|&i| log.records()[i].distinct_senders().len() > 1)
        .collect();
    let mut z_mean: Vec<Vec<(SenderId, f64)>> = multi
        .iter()
        .map(|&i| {
            log.records()[i]
                .distinct_senders()
                .into_iter()
                .map(|s| (s, 0.0))
                .collect()
        })
        .collect();
    let mut trace = GibbsTrace {
        seed: cfg.seed,
        iterations: cfg.iterations,
        burn_in: cfg.burn_in,
        base: params.clone(),
        records: Vec::with_capacity(cfg.iterations),
        local: Vec::with_capacity(cfg.iterations),
        multi_sender: multi.clone(),
        z_samples: Vec::with_capacity(cfg.iterations),
        z_posterior_mean: Vec::new(),
    };
    let sender_counts = item_counts(log.sender_sequence().map(|s| s.0));
    let mut z_sweeps = 0usize;
    for it in 0..cfg.iterations {
        gibbs_iteration(&mut state, &mut params, &priors, num_senders, &mut rng)?;
        if priors.sample_sender_params {
            let aux = auxiliary_draws(
                params.sender_theta,
                params.sender_alpha,
                sender_counts.iter().copied(),
                &mut rng,
            );
            params.sender_theta = update_theta(priors.theta, &aux, &mut rng);
            params.sender_alpha = update_alpha(priors.alpha, &aux, &mut rng);
        }
        if !multi.is_empty() && it % cfg.z_every == 0 {
            let mut urn = AttributionUrn::new();
            for &s in state.attribution() {
                urn.observe(s);
            }
            let keep = it >= cfg.burn_in;
            if keep {
                z_sweeps += 1;
            }
            for (k, &n) in multi.iter().enumerate() {
                let post = sample_z_posterior(
                    &mut state,
                    log,
                    n,
                    &mut urn,
                    &params,
                    cfg.z_mc_samples,
                    &mut rng,
                )?;
                if keep {
                    for (slot, (s, p)) in z_mean[k].iter_mut().zip(post) {
                        debug_assert_eq!(slot.0, s);
                        slot.1 += p;
                    }
                }
            }
        }
        let ll = log_likelihood(&state, log, &params)?;
        trace.records.push(IterationRecord {
            iteration: it,
            theta: params.global_theta,
            alpha: params.global_alpha,
            sender_alpha: params.sender_alpha,
            sender_theta: params.sender_theta,
            log_likelihood: ll,
            num_labels: state.num_labels(),
            num_tables: state.num_tables(),
        });
        trace.local.push(
            (0..num_senders)
                .map(|i| params.local_params(SenderId(i as u32)))
                .collect(),
        );
        trace
            .z_samples
            .push(multi.iter().map(|&n| state.attribution()[n]).collect());
    }
    if z_sweeps > 0 {
        for row in &mut z_mean {
            for x in row.iter_mut() {
                x.1 /= z_sweeps as f64;
            }
        }
    }
    trace.z_posterior_mean = z_mean;
    Ok(trace)
}
