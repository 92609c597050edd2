//! Stick-breaking construction of the paintbox when every local discount is
//! zero.

use rand::Rng;
use rand_distr::{Beta, Distribution};

use crate::error::{Error, Result};
use crate::interaction::SenderId;
use crate::params::HvcmParams;

/// Upper bound on the number of sticks broken by adaptive truncation.
pub const MAX_STICKS: usize = 1 << 20;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Truncation {
    /// Exactly this many sticks at every level.
    Fixed(usize),
    /// At least `min` sticks, extended until the unbroken remainder falls
    /// below `tail` (or [`MAX_STICKS`] is reached).
    Adaptive { min: usize, tail: f64 },
}

impl Truncation {
    fn done(&self, k: usize, rest: f64) -> bool {
        match *self {
            Truncation::Fixed(n) => k >= n,
            Truncation::Adaptive { min, tail } => k >= MAX_STICKS || (k >= min && rest < tail),
        }
    }
}

/// A truncated paintbox.
#[derive(Clone, Debug, PartialEq)]
pub struct Paintbox {
    /// `f_s` for senders `0..len`.
    pub senders: Vec<f64>,
    pub sender_tail: f64,
    /// Global receiver frequencies `π̃_r`.
    pub global: Vec<f64>,
    pub global_tail: f64,
    /// `f_{r|s}` over the global atoms, one row per sender.
    pub local: Vec<Vec<f64>>,
    /// Unassigned local mass per sender.
    pub local_tail: Vec<f64>,
}

fn beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if b <= 0.0 {
        return 1.0;
    }
    if a <= 0.0 {
        return 0.0;
    }
    Beta::new(a, b).expect("positive beta parameters").sample(rng)
}

/// Breaks `(1 - d, c + i d)` sticks for `i = 1, 2, ...`.
fn py_sticks<R: Rng + ?Sized>(d: f64, c: f64, trunc: Truncation, rng: &mut R) -> (Vec<f64>, f64) {
    let mut w = Vec::new();
    let mut rest = 1.0;
    while !trunc.done(w.len(), rest) {
        let i = (w.len() + 1) as f64;
        let b = beta(1.0 - d, c + i * d, rng);
        w.push(rest * b);
        rest *= 1.0 - b;
    }
    (w, rest)
}

/// Draws a truncated paintbox. Fails unless every local discount is zero.
pub fn stick_breaking_frequencies<R: Rng + ?Sized>(
    params: &HvcmParams,
    truncation: Truncation,
    rng: &mut R,
) -> Result<Paintbox> {
    if params.default_local.alpha != 0.0 || params.local.values().any(|lp| lp.alpha != 0.0) {
        return Err(Error::InvalidParams(
            "stick breaking needs every local discount to be zero".into(),
        ));
    }
    params.validate()?;
    let (senders, sender_tail) = match &params.sender_weights {
        Some(w) => (w.clone(), 0.0),
        None => py_sticks(params.sender_alpha, params.sender_theta, truncation, rng),
    };
    let (global, global_tail) =
        py_sticks(params.global_alpha, params.global_theta, truncation, rng);
    let mut local = Vec::with_capacity(senders.len());
    let mut local_tail = Vec::with_capacity(senders.len());
    for s in 0..senders.len() {
        let theta = params.local_params(SenderId(s as u32)).theta;
        let mut row = Vec::with_capacity(global.len());
        let mut rest = 1.0;
        let mut used = 0.0;
        for &pi in &global {
            used += pi;
            let b = beta(theta * pi, theta * (1.0 - used).max(0.0), rng);
            row.push(rest * b);
            rest *= 1.0 - b;
        }
        local.push(row);
        local_tail.push(rest);
    }
    Ok(Paintbox {
        senders,
        sender_tail,
        global,
        global_tail,
        local,
        local_tail,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::LocalParams;

    fn dp_params() -> HvcmParams {
        HvcmParams {
            sender_alpha: 0.0,
            sender_theta: 1.5,
            global_alpha: 0.0,
            global_theta: 2.0,
            default_local: LocalParams::new(0.0, 3.0),
            ..HvcmParams::default()
        }
    }

    #[test]
    fn single_stick() {
        let mut rng = crate::seeded_rng(1);
        let pb = stick_breaking_frequencies(&dp_params(), Truncation::Fixed(1), &mut rng).unwrap();
        assert_eq!(pb.senders.len(), 1);
        assert!((pb.senders[0] + pb.sender_tail - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_local_discount() {
        let mut p = dp_params();
        p.local.insert(SenderId(2), LocalParams::new(0.1, 1.0));
        assert!(stick_breaking_frequencies(&p, Truncation::Fixed(3), &mut crate::seeded_rng(2)).is_err());
    }

    #[test]
    fn adaptive_tail_is_small_and_masses_sum() {
        let mut rng = crate::seeded_rng(3);
        let t = Truncation::Adaptive { min: 1, tail: 1e-6 };
        let pb = stick_breaking_frequencies(&dp_params(), t, &mut rng).unwrap();
        assert!(pb.global_tail < 1e-6 && pb.sender_tail < 1e-6);
        let g: f64 = pb.global.iter().sum::<f64>() + pb.global_tail;
        assert!((g - 1.0).abs() < 1e-12);
        for (row, tail) in pb.local.iter().zip(&pb.local_tail) {
            assert!((row.iter().sum::<f64>() + tail - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn local_frequencies_perturb_global_ones() {
        // E[f_{r|s} | π̃] = π̃_r: fix the global sticks, redraw local rows.
        let p = dp_params();
        let mut rng = crate::seeded_rng(4);
        let t = Truncation::Adaptive { min: 1, tail: 1e-6 };
        let pb = stick_breaking_frequencies(&p, t, &mut rng).unwrap();
        let theta = p.default_local.theta;
        let n = 10_000;
        let k = pb.global.len().min(4);
        let mut sum = vec![0.0; k];
        let mut sq = vec![0.0; k];
        for _ in 0..n {
            let mut rest = 1.0;
            let mut used = 0.0;
            for (r, &pi) in pb.global.iter().enumerate().take(k) {
                used += pi;
                let b = beta(theta * pi, theta * (1.0 - used).max(0.0), &mut rng);
                let f = rest * b;
                rest *= 1.0 - b;
                sum[r] += f;
                sq[r] += f * f;
            }
        }
        for r in 0..k {
            let mean = sum[r] / n as f64;
            let var = sq[r] / n as f64 - mean * mean;
            let se = (var / n as f64).sqrt();
            assert!((mean - pb.global[r]).abs() < 3.0 * se + 1e-12, "atom {r}");
        }
    }
}
