//! Library computations checked against the reference implementations in
//! `common`.

mod common;

use std::collections::HashMap;

use common::log_of;
use hvcm_core::generative::{simulate_traced, AttributionUrn};
use hvcm_core::inference::z_posterior;
use hvcm_core::interaction::canonicalize_labels;
use hvcm_core::seating::{log_likelihood, Seat, SeatingState};
use hvcm_core::{seeded_rng, Categorical, HvcmParams, InteractionLog, LocalParams, SenderId};
use rand::seq::IndexedRandom;

fn params() -> HvcmParams {
    let mut p = HvcmParams {
        sender_alpha: 0.3,
        sender_theta: 1.5,
        global_alpha: 0.4,
        global_theta: 1.3,
        z_alpha: 0.2,
        z_theta: 2.0,
        size_dist: Categorical::new(vec![0.5, 0.3, 0.2]).unwrap(),
        default_local: LocalParams::new(0.3, 2.0),
        default_local_size: Categorical::uniform(4),
        ..HvcmParams::default()
    };
    p.local.insert(SenderId(1), LocalParams::new(0.6, 0.7));
    p.local.insert(SenderId(2), LocalParams::new(0.0, 3.0));
    p.local_size_dist
        .insert(SenderId(2), Categorical::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap());
    p
}

#[test]
fn joint_likelihood_telescopes_into_sequential_seat_probabilities() {
    let p = params();
    let mut rng = seeded_rng(1);
    for seed in 0..30 {
        let sim = simulate_traced(25, &p, &mut seeded_rng(seed)).unwrap();
        let st = SeatingState::sequential(&sim.log, &sim.attribution, &p, &mut rng).unwrap();
        let lib = log_likelihood(&st, &sim.log, &p).unwrap();
        let oracle = common::telescoped_log_likelihood(&st, &sim.log, &p);
        assert!((lib - oracle).abs() < 1e-9 * lib.abs().max(1.0), "seed {seed}: {lib} vs {oracle}");
    }
}

type Ids = (Vec<u32>, Vec<u32>);

#[test]
fn simulator_frequencies_match_sequential_probabilities() {
    let mut p = HvcmParams {
        sender_alpha: -1.0,
        sender_theta: 2.0,
        global_alpha: -0.5,
        global_theta: 1.0,
        default_local: LocalParams::new(0.4, 1.5),
        default_local_size: Categorical::new(vec![0.6, 0.4]).unwrap(),
        ..HvcmParams::default()
    };
    p.local.insert(SenderId(1), LocalParams::new(0.0, 0.8));
    // About 430 outcomes; sampling noise alone puts TV near 0.4*sqrt(430/runs).
    let runs = 2_000_000;
    let mut freq: HashMap<Vec<Ids>, f64> = HashMap::new();
    let mut rng = seeded_rng(9);
    for _ in 0..runs {
        let log = canonicalize_labels(&hvcm_core::generative::simulate(3, &p, &mut rng).unwrap());
        let key = log
            .records()
            .iter()
            .map(|r| {
                (
                    r.senders().iter().map(|s| s.0).collect(),
                    r.receivers().iter().map(|r| r.0).collect(),
                )
            })
            .collect();
        *freq.entry(key).or_insert(0.0) += 1.0 / runs as f64;
    }
    let mut dist = 0.0;
    let mut mass = 0.0;
    for log in common::canonical_logs(3, 1, 2, 2, 6, &|_, k2| k2) {
        if log.len() != 3 {
            continue;
        }
        let key: Vec<Ids> = log
            .records()
            .iter()
            .map(|r| {
                (
                    r.senders().iter().map(|s| s.0).collect(),
                    r.receivers().iter().map(|r| r.0).collect(),
                )
            })
            .collect();
        let exact = common::sequential_marginal(&log, &p);
        mass += exact;
        dist += (exact - freq.get(&key).copied().unwrap_or(0.0)).abs() / 2.0;
    }
    assert!((mass - 1.0).abs() < 1e-12, "outcome mass {mass}");
    assert!(dist < 0.01, "TV {dist}");
}

#[test]
fn attribution_posterior_matches_exact_conditional() {
    let p = params();
    let log = log_of(&[
        (&[0], &[0, 1]),
        (&[1], &[0]),
        (&[0, 1], &[1]),
        (&[2], &[2, 0]),
        (&[0, 1, 2], &[0, 1, 2]),
    ]);
    let n = 4;
    let z = vec![SenderId(0), SenderId(1), SenderId(1), SenderId(2), SenderId(0)];
    let mut rng = seeded_rng(3);
    let mut st = SeatingState::sequential(&log, &z, &p, &mut rng).unwrap();
    for j in 0..3 {
        st.remove_observation(n, j).unwrap();
    }
    let mut urn = AttributionUrn::new();
    for &s in &z[..n] {
        urn.observe(s);
    }
    let rec = &log.records()[n];
    let mut exact: Vec<f64> = rec
        .distinct_senders()
        .iter()
        .map(|&s| {
            common::attribution_prob(&z[..n], rec.senders(), s, &p)
                * p.local_size(s).prob(3)
                * common::receiver_path_sum(&st, rec.receivers(), s, &p)
        })
        .collect();
    let total: f64 = exact.iter().sum();
    exact.iter_mut().for_each(|x| *x /= total);
    let est = z_posterior(&mut st, &log, n, &urn, &p, 20_000, &mut rng).unwrap();
    let est: Vec<f64> = est.iter().map(|x| x.1).collect();
    assert!(common::tv(&exact, &est) < 0.01, "{exact:?} vs {est:?}");
}

fn enumerate_configs(
    st: &mut SeatingState,
    log: &InteractionLog,
    p: &HvcmParams,
    rest: &[(usize, usize)],
    out: &mut Vec<(Vec<u32>, f64)>,
) {
    let Some((&(n, j), tail)) = rest.split_first() else {
        let w = common::telescoped_log_likelihood(st, log, p).exp();
        out.push((common::seating_signature(st, log), w));
        return;
    };
    let s = st.attribution()[n];
    let r = st.receivers(n)[j];
    for t in st.tables_for(s, r).to_vec() {
        st.seat(n, j, Seat::Existing(t)).unwrap();
        enumerate_configs(st, log, p, tail, out);
        st.remove_observation(n, j).unwrap();
    }
    st.seat(n, j, Seat::New).unwrap();
    enumerate_configs(st, log, p, tail, out);
    st.remove_observation(n, j).unwrap();
}

#[test]
fn reseating_is_in_detailed_balance_with_the_joint() {
    let p = params();
    let log = log_of(&[(&[0], &[0, 0]), (&[0], &[0])]);
    let z = vec![SenderId(0); 2];
    let positions = [(0, 0), (0, 1), (1, 0)];
    let mut configs = Vec::new();
    enumerate_configs(&mut SeatingState::new(&log, &z).unwrap(), &log, &p, &positions, &mut configs);
    assert_eq!(configs.len(), 5);
    let total: f64 = configs.iter().map(|c| c.1).sum();

    let mut rng = seeded_rng(5);
    let mut st = SeatingState::sequential(&log, &z, &p, &mut rng).unwrap();
    let mut counts: HashMap<Vec<u32>, f64> = HashMap::new();
    let sweeps = 200_000;
    for _ in 0..sweeps {
        let &(n, j) = positions.choose(&mut rng).unwrap();
        st.remove_observation(n, j).unwrap();
        st.reseat_observation(n, j, &p, &mut rng).unwrap();
        *counts.entry(common::seating_signature(&st, &log)).or_insert(0.0) += 1.0 / sweeps as f64;
    }
    let dist: f64 = configs
        .iter()
        .map(|(sig, w)| (w / total - counts.get(sig).copied().unwrap_or(0.0)).abs())
        .sum::<f64>()
        / 2.0;
    assert!(dist < 0.02, "TV {dist}");
}

#[test]
fn paintbox_pattern_matches_direct_sum() {
    // Two atoms, two labels: Σ_{a≠b} f_a^2 f_b = f_0^2 f_1 + f_1^2 f_0.
    let pb = hvcm_core::stick::Paintbox {
        senders: vec![1.0],
        sender_tail: 0.0,
        global: vec![0.6, 0.4],
        global_tail: 0.0,
        local: vec![vec![0.7, 0.3]],
        local_tail: vec![0.0],
    };
    let got = common::paintbox_pattern_prob(&pb, &[vec![2], vec![1]]);
    let want = 0.7f64.powi(2) * 0.3 + 0.3f64.powi(2) * 0.7;
    assert!((got - want).abs() < 1e-15);
    // Three labels cannot be placed on two atoms.
    assert!(common::paintbox_pattern_prob(&pb, &[vec![1], vec![1], vec![1]]).abs() < 1e-15);
}
