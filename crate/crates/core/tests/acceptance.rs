//! Acceptance suite. Runs every criterion, prints one line each, and exits
//! non-zero if any fails. Run with `cargo test --test acceptance`.

mod common;

use std::time::{Duration, Instant};

use hvcm_core::enumerate::marginal_likelihood_bruteforce;
use hvcm_core::generative::simulate;
use hvcm_core::inference::{default_priors, fit, FitConfig, PriorMode};
use hvcm_core::interaction::{canonicalize_labels, restrict};
use hvcm_core::netstats::{compute_stats, geometric_checkpoints, growth_curve, powerlaw_slope, sparsity_slope, yule_reference};
use hvcm_core::ppc::{coverage_report, generate_replicates, PpcConfig};
use hvcm_core::seating::{lead_attribution, log_likelihood, SeatingState};
use hvcm_core::stick::{stick_breaking_frequencies, Truncation};
use hvcm_core::{seeded_rng, Categorical, HvcmParams, InteractionLog, LocalParams, SenderId};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

type Criterion = (&'static str, fn() -> Outcome, Duration);

fn main() {
    let criteria: [Criterion; 10] = [
        ("exchangeability", exchangeability, Duration::from_secs(10)),
        ("marginalization", marginalization, Duration::from_secs(60)),
        ("power law", power_law, Duration::from_secs(30)),
        ("sparsity exponent", sparsity, Duration::from_secs(120)),
        ("gibbs recovery", recovery, Duration::from_secs(600)),
        ("mixing", mixing, Duration::from_secs(600)),
        ("stick breaking", stick_breaking, Duration::from_secs(60)),
        ("ppc self-consistency", ppc_self_consistency, Duration::from_secs(1800)),
        ("invariants", invariants, Duration::from_secs(60)),
        ("pipeline determinism", determinism, Duration::from_secs(600)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let t = Instant::now();
        let out = run();
        let took = t.elapsed();
        let pass = out.pass && took <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {:>2} {:<22} {}  {} [{:.1}s / {}s]",
            i + 1,
            name,
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}

fn single_sender_params() -> HvcmParams {
    let mut p = HvcmParams {
        sender_alpha: 0.4,
        sender_theta: 3.0,
        global_alpha: 0.5,
        global_theta: 4.0,
        default_local: LocalParams::new(0.3, 2.0),
        default_local_size: Categorical::uniform(3),
        ..HvcmParams::default()
    };
    p.local.insert(SenderId(1), LocalParams::new(0.7, 0.8));
    p.local.insert(SenderId(2), LocalParams::new(0.0, 5.0));
    p
}

fn exchangeability() -> Outcome {
    let p = single_sender_params();
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let mut rng = seeded_rng(seed);
        let log = simulate(50, &p, &mut rng).unwrap();
        let z = lead_attribution(&log);
        let st = SeatingState::sequential(&log, &z, &p, &mut rng).unwrap();
        let base = log_likelihood(&st, &log, &p).unwrap();
        for _ in 0..20 {
            let mut order: Vec<usize> = (0..log.len()).collect();
            order.shuffle(&mut rng);
            let plog = restrict(&log, &order).unwrap();
            let pst = st.permuted(&order).unwrap();
            let ll = log_likelihood(&pst, &plog, &p).unwrap();
            worst = worst.max((ll - base).abs());
        }
    }
    outcome(worst <= 1e-10, format!("max |Δ log L| = {worst:.2e} over 400 permutations"))
}

fn marginalization() -> Outcome {
    // Finite populations: two senders, three receivers.
    let mut p = HvcmParams {
        sender_alpha: -1.0,
        sender_theta: 2.0,
        global_alpha: -0.5,
        global_theta: 1.5,
        z_alpha: 0.25,
        z_theta: 1.5,
        size_dist: Categorical::new(vec![0.6, 0.4]).unwrap(),
        default_local: LocalParams::new(0.3, 2.0),
        default_local_size: Categorical::uniform(8),
        ..HvcmParams::default()
    };
    p.local.insert(SenderId(1), LocalParams::new(0.6, 0.7));
    p.local_size_dist
        .insert(SenderId(1), Categorical::new(vec![0.3, 0.2, 0.2, 0.1, 0.1, 0.05, 0.03, 0.02]).unwrap());

    let mut logs = common::canonical_logs(4, 1, 2, 3, 8, &|_, k2| k2);
    let single = logs.len();
    logs.extend(
        common::canonical_logs(4, 2, 2, 3, 8, &|k1, k2| k1 + k2)
            .into_iter()
            .filter(|l| l.has_multi_sender()),
    );
    let mut worst = 0.0f64;
    for log in &logs {
        let brute = marginal_likelihood_bruteforce(log, &p).unwrap();
        let seq = common::sequential_marginal(log, &p);
        worst = worst.max((brute - seq).abs());
    }

    // Every outcome of three single-sender interactions with one or two
    // receivers.
    let q = HvcmParams {
        size_dist: Categorical::degenerate(1),
        default_local_size: Categorical::new(vec![0.55, 0.45]).unwrap(),
        local_size_dist: Default::default(),
        ..p.clone()
    };
    let outcomes: Vec<InteractionLog> = common::canonical_logs(3, 1, 2, 3, 6, &|_, k2| k2)
        .into_iter()
        .filter(|l| l.len() == 3)
        .collect();
    let total: f64 = outcomes
        .iter()
        .map(|l| marginal_likelihood_bruteforce(l, &q).unwrap())
        .sum();
    let pass = worst <= 1e-12 && (total - 1.0).abs() <= 1e-10;
    outcome(
        pass,
        format!(
            "{} logs ({single} single-sender), max |Δ| = {worst:.2e}; {} outcomes sum to 1 {:+.2e}",
            logs.len(),
            outcomes.len(),
            total - 1.0
        ),
    )
}

fn power_law() -> Outcome {
    let p = HvcmParams {
        global_alpha: 0.5,
        global_theta: 10.0,
        default_local: LocalParams::new(1.0, 1.0),
        default_local_size: Categorical::degenerate(1),
        ..HvcmParams::default()
    };
    let slope = |seed: u64| {
        let log = simulate(100_000, &p, &mut seeded_rng(seed)).unwrap();
        let d = compute_stats(&log).global.degree_distribution();
        (powerlaw_slope(&d, 2..=50).unwrap(), d)
    };
    let (gamma, d) = slope(0);
    // Tail constant: k^{1+α} d_k should approach α / Γ(1 - α).
    let tail: Vec<f64> = (10..=50u64)
        .filter_map(|k| d.get(&k).map(|p| p * (k as f64).powf(1.5)))
        .collect();
    let constant = tail.iter().sum::<f64>() / tail.len() as f64;
    let sweep = (1..20).filter(|&s| (slope(s).0 - 1.5).abs() <= 0.15).count() + ((gamma - 1.5).abs() <= 0.15) as usize;
    outcome(
        (gamma - 1.5).abs() <= 0.15,
        format!(
            "γ̂ = {gamma:.4} (target 1.5 ± 0.15); mean k^1.5 d_k over k in 10..50 = {constant:.4}, reference {:.4}; {sweep}/20 seeds within tolerance",
            yule_reference(0.5, 1)
        ),
    )
}

fn sparsity() -> Outcome {
    let mut p = HvcmParams {
        sender_weights: Some(vec![1.0 / 3.0; 3]),
        global_alpha: 0.8,
        global_theta: 1.0,
        default_local_size: Categorical::degenerate(1),
        ..HvcmParams::default()
    };
    for (s, a) in [0.5, 0.7, 0.9].into_iter().enumerate() {
        p.local.insert(SenderId(s as u32), LocalParams::new(a, 1.0));
    }
    let checkpoints = geometric_checkpoints(1_000, 100_000, 11);
    let mut slopes: Vec<f64> = (0..10)
        .map(|seed| {
            let log = simulate(100_000, &p, &mut seeded_rng(100 + seed)).unwrap();
            sparsity_slope(&growth_curve(&log, &checkpoints, None)).unwrap()
        })
        .collect();
    slopes.sort_by(f64::total_cmp);
    let median = (slopes[4] + slopes[5]) / 2.0;
    outcome(
        (median - 0.72).abs() <= 0.10,
        format!(
            "median slope {median:.4} (target 0.72 ± 0.10), range [{:.4}, {:.4}]",
            slopes[0], slopes[9]
        ),
    )
}

/// Simulation and fit shared by the recovery and mixing criteria.
fn recovery_fit() -> &'static hvcm_core::inference::GibbsTrace {
    static TRACE: std::sync::OnceLock<hvcm_core::inference::GibbsTrace> = std::sync::OnceLock::new();
    TRACE.get_or_init(|| {
        let p = HvcmParams {
            sender_weights: Some(vec![1.0 / 20.0; 20]),
            global_alpha: 0.5,
            global_theta: 100.0,
            default_local: LocalParams::new(0.3, 5.0),
            default_local_size: Categorical::uniform(4),
            ..HvcmParams::default()
        };
        let seed = 20_251;
        let log = simulate(2000, &p, &mut seeded_rng(seed)).unwrap();
        let cfg = FitConfig {
            iterations: 1000,
            burn_in: 500,
            seed,
            ..FitConfig::default()
        };
        fit(&log, &default_priors(PriorMode::Conjugate), &cfg).unwrap()
    })
}

fn recovery() -> Outcome {
    let tr = recovery_fit();
    let alpha = tr.posterior_mean_alpha();
    let theta = tr.posterior_mean_theta();
    let mut local: Vec<f64> = tr.posterior_mean_local().iter().map(|l| l.alpha).collect();
    local.sort_by(f64::total_cmp);
    let mid = local.len() / 2;
    let median = if local.len().is_multiple_of(2) {
        (local[mid - 1] + local[mid]) / 2.0
    } else {
        local[mid]
    };
    let pass = (alpha - 0.5).abs() <= 0.10 && (theta - 100.0).abs() <= 50.0 && (median - 0.3).abs() <= 0.15;
    outcome(
        pass,
        format!("α = {alpha:.4} (0.5 ± 0.10), θ = {theta:.2} (100 ± 50), median α_s = {median:.4} (0.3 ± 0.15)"),
    )
}

fn mixing() -> Outcome {
    let tr = recovery_fit();
    let early = tr.mean_alpha(100..201);
    let late = tr.mean_alpha(500..1000);
    outcome(
        (early - late).abs() <= 0.05,
        format!("mean α over 100-200 = {early:.4}, over 500-1000 = {late:.4}"),
    )
}

fn stick_breaking() -> Outcome {
    let mut p = HvcmParams {
        sender_weights: Some(vec![0.5, 0.5]),
        global_alpha: 0.2,
        global_theta: 2.0,
        default_local: LocalParams::new(0.0, 1.5),
        default_local_size: Categorical::degenerate(1),
        ..HvcmParams::default()
    };
    p.local.insert(SenderId(1), LocalParams::new(0.0, 4.0));
    let history: [(&[u32], &[u32]); 3] = [(&[0], &[0]), (&[1], &[0]), (&[0], &[1])];
    // Next receiver of sender 1: receiver 0, receiver 1 or a new one.
    let candidates: Vec<InteractionLog> = (0..3u32)
        .map(|r| {
            let mut recs = history.to_vec();
            let next = [r];
            recs.push((&[1], &next));
            common::log_of(&recs)
        })
        .collect();
    let seq: Vec<f64> = candidates
        .iter()
        .map(|l| marginal_likelihood_bruteforce(l, &p).unwrap())
        .collect();
    let z: f64 = seq.iter().sum();
    let seq: Vec<f64> = seq.iter().map(|x| x / z).collect();

    let base = common::pattern_of(&common::log_of(&history));
    let patterns: Vec<Vec<Vec<u32>>> = candidates.iter().map(common::pattern_of).collect();
    let mut rng = seeded_rng(7);
    let mut num = [0.0f64; 3];
    let mut den = 0.0;
    let draws = 100_000;
    let mut worst_tail = 0.0f64;
    for _ in 0..draws {
        let pb = stick_breaking_frequencies(&p, Truncation::Adaptive { min: 1, tail: 1e-6 }, &mut rng).unwrap();
        worst_tail = worst_tail.max(pb.global_tail);
        den += common::paintbox_pattern_prob(&pb, &base);
        for (acc, pat) in num.iter_mut().zip(&patterns) {
            *acc += common::paintbox_pattern_prob(&pb, pat);
        }
    }
    let mc: Vec<f64> = num.iter().map(|x| x / den).collect();
    let dist = common::tv(&seq, &mc);
    outcome(
        dist < 0.02,
        format!(
            "TV = {dist:.4}; sequential {:.4?}, paintbox {:.4?} (mass {:.4}), max tail {worst_tail:.1e}",
            seq,
            mc,
            mc.iter().sum::<f64>()
        ),
    )
}

fn ppc_self_consistency() -> Outcome {
    let p = HvcmParams {
        global_alpha: 0.5,
        global_theta: 20.0,
        default_local: LocalParams::new(0.4, 3.0),
        default_local_size: Categorical::uniform(3),
        ..HvcmParams::default()
    };
    let cfg = PpcConfig::default();
    let mut covered = 0;
    let reps = 20;
    for rep in 0..reps {
        let seed = 5_000 + rep;
        let log = simulate(1000, &p, &mut seeded_rng(seed)).unwrap();
        let fc = FitConfig {
            seed,
            ..FitConfig::default()
        };
        let trace = fit(&log, &default_priors(PriorMode::Conjugate), &fc).unwrap();
        let replicates = generate_replicates(&trace, &log, 100, seed).unwrap();
        let report = coverage_report(&replicates, &log, &cfg).unwrap();
        covered += report.global[0].covered as usize;
    }
    let rate = covered as f64 / reps as f64;
    outcome(
        (0.85..=1.0).contains(&rate),
        format!("unique-receiver interval covered in {covered}/{reps} repetitions"),
    )
}

fn random_log(rng: &mut hvcm_core::Rng) -> InteractionLog {
    let n = rng.random_range(1..40);
    let mut log = InteractionLog::new(false);
    for _ in 0..n {
        let k1 = rng.random_range(1..4);
        let k2 = rng.random_range(1..5);
        let s: Vec<String> = (0..k1).map(|_| format!("s{}", rng.random_range(0..6))).collect();
        let r: Vec<String> = (0..k2).map(|_| format!("r{}", rng.random_range(0..15))).collect();
        log.push_named(&s, &r).unwrap();
    }
    log
}

fn renamed(log: &InteractionLog, rng: &mut hvcm_core::Rng) -> InteractionLog {
    let mut sp: Vec<usize> = (0..log.num_senders()).collect();
    let mut rp: Vec<usize> = (0..log.num_receivers()).collect();
    sp.shuffle(rng);
    rp.shuffle(rng);
    let mut out = InteractionLog::new(false);
    for rec in log.records() {
        let s: Vec<String> = rec.senders().iter().map(|s| format!("a{}", sp[s.index()])).collect();
        let r: Vec<String> = rec.receivers().iter().map(|r| format!("b{}", rp[r.index()])).collect();
        out.push_named(&s, &r).unwrap();
    }
    out
}

fn invariants() -> Outcome {
    let mut rng = seeded_rng(11);
    let p = HvcmParams {
        z_alpha: 0.2,
        z_theta: 1.0,
        ..single_sender_params()
    };
    let log = random_log(&mut rng);
    let z: Vec<SenderId> = log
        .records()
        .iter()
        .map(|r| *r.senders().choose(&mut rng).unwrap())
        .collect();
    let mut st = SeatingState::sequential(&log, &z, &p, &mut rng).unwrap();
    let positions: Vec<(usize, usize)> = log
        .records()
        .iter()
        .enumerate()
        .flat_map(|(n, r)| (0..r.receiver_arity()).map(move |j| (n, j)))
        .collect();
    let mut audit_ok = true;
    for _ in 0..10_000 {
        let &(n, j) = positions.choose(&mut rng).unwrap();
        st.remove_observation(n, j).unwrap();
        st.reseat_observation(n, j, &p, &mut rng).unwrap();
        audit_ok &= st.audit().is_ok();
    }
    let mut conservation_ok = true;
    let mut canon_ok = true;
    for _ in 0..100 {
        let log = random_log(&mut rng);
        let stats = compute_stats(&log);
        conservation_ok &= stats.global.check_conservation().is_ok();
        conservation_ok &= stats.local.values().all(|c| c.check_conservation().is_ok());
        let c = canonicalize_labels(&log);
        canon_ok &= canonicalize_labels(&c) == c;
        let other = canonicalize_labels(&renamed(&log, &mut rng));
        canon_ok &= other.records() == c.records();
    }
    outcome(
        audit_ok && conservation_ok && canon_ok,
        format!("audit after 10^4 reseats {audit_ok}, conservation {conservation_ok}, canonicalization {canon_ok}"),
    )
}

fn pipeline_bodies() -> Vec<(String, String)> {
    use hvcm_core::api;
    let config = hvcm_core::config::RunConfig {
        seed: Some(42),
        n: 300,
        params: HvcmParams {
            size_dist: Categorical::new(vec![0.7, 0.3]).unwrap(),
            default_local_size: Categorical::uniform(3),
            ..HvcmParams::default()
        },
        iterations: 200,
        burn_in: 100,
        replicates: 50,
        ..Default::default()
    };
    let sim = api::simulate(&api::SimulateRequest { config: config.clone() }).unwrap();
    let text = hvcm_core::io::emit(&sim.log, hvcm_core::io::Format::Jsonl);
    let log = hvcm_core::io::ingest_str(&text, hvcm_core::io::Format::Jsonl, false).unwrap().log;
    let fitted = api::fit_log(&api::FitRequest {
        config: config.clone(),
        log: log.clone(),
    })
    .unwrap();
    let trace = api::parse_trace(&fitted.files[0].contents).unwrap();
    let ppc = api::ppc(&api::PpcRequest {
        config: config.clone(),
        log: log.clone(),
        trace,
    })
    .unwrap();
    let stats = api::stats(&api::StatsRequest { config, log }).unwrap();
    let mut out = vec![("log.jsonl".to_string(), text)];
    for f in fitted.files.into_iter().chain(ppc.files).chain(stats.files) {
        out.push((f.name, f.contents));
    }
    out
}

fn determinism() -> Outcome {
    let a = pipeline_bodies();
    let b = pipeline_bodies();
    let same = a == b;
    let bytes: usize = a.iter().map(|x| x.1.len()).sum();
    outcome(same, format!("{} bodies, {bytes} bytes, identical across runs: {same}", a.len()))
}
