//! Exhaustive marginalization of the extended likelihood over seatings.

use crate::error::{Error, Result};
use crate::interaction::{InteractionLog, SenderId};
use crate::params::HvcmParams;
use crate::seating::{ln_attribution_factor, ln_sender_factor, ln_size_factor, Seat, SeatingState};

/// Largest instance accepted, in total receiver slots.
pub const MAX_SLOTS: usize = 8;

/// Sum of the extended joint likelihood over every seating configuration and,
/// for interactions with several senders, every attribution.
pub fn marginal_likelihood_bruteforce(log: &InteractionLog, params: &HvcmParams) -> Result<f64> {
    let slots = log.receiver_slots();
    if slots > MAX_SLOTS {
        return Err(Error::TooLarge(format!(
            "{slots} receiver slots (enumeration limit {MAX_SLOTS})"
        )));
    }
    let choices: Vec<Vec<SenderId>> = log.records().iter().map(|r| r.distinct_senders()).collect();
    let positions: Vec<(usize, usize)> = log
        .records()
        .iter()
        .enumerate()
        .flat_map(|(n, r)| (0..r.receiver_arity()).map(move |j| (n, j)))
        .collect();
    let mut z: Vec<SenderId> = choices.iter().map(|c| c[0]).collect();
    let ln_senders = ln_sender_factor(log, params);
    let mut total = 0.0;
    loop {
        let mut st = SeatingState::new(log, &z)?;
        let fixed = ln_senders + ln_attribution_factor(log, &z, params) + ln_size_factor(log, &z, params);
        if fixed > f64::NEG_INFINITY {
            total += fixed.exp() * sum_seatings(&mut st, params, &positions)?;
        }
        // Odometer over attributions.
        let mut i = 0;
        loop {
            if i == z.len() {
                return Ok(total);
            }
            let c = &choices[i];
            let k = c.iter().position(|&s| s == z[i]).expect("current choice");
            if k + 1 < c.len() {
                z[i] = c[k + 1];
                break;
            }
            z[i] = c[0];
            i += 1;
        }
    }
}

/// Sum of the seating factors over completions of the remaining positions.
fn sum_seatings(st: &mut SeatingState, params: &HvcmParams, rest: &[(usize, usize)]) -> Result<f64> {
    let Some((&(n, j), tail)) = rest.split_first() else {
        let (global, local) = st.ln_seating_factors(params);
        return Ok((global + local).exp());
    };
    let s = st.attribution()[n];
    let r = st.receivers(n)[j];
    let tables: Vec<u32> = st.tables_for(s, r).to_vec();
    let mut acc = 0.0;
    for t in tables {
        st.seat(n, j, Seat::Existing(t))?;
        acc += sum_seatings(st, params, tail)?;
        st.remove_observation(n, j)?;
    }
    st.seat(n, j, Seat::New)?;
    acc += sum_seatings(st, params, tail)?;
    st.remove_observation(n, j)?;
    Ok(acc)
}
