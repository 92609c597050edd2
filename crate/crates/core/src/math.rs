//! Numerical helpers: ascending factorials, entropies and log-log fits.

use statrs::function::gamma::ln_gamma;

/// Below this exponent ascending factorials are evaluated as explicit
/// products.
const EXPLICIT_PRODUCT_LIMIT: u64 = 32;

/// `ln [a]_b^c = ln (a (a + b) ... (a + (c - 1) b))`.
///
/// Returns `-inf` when a factor is zero and `NaN` when a factor is negative
/// (the product is then not a probability). `c = 0` gives 0.
pub fn ln_rising(a: f64, b: f64, c: u64) -> f64 {
    if c == 0 {
        return 0.0;
    }
    if b == 0.0 {
        return factor_ln(a) * c as f64;
    }
    // Negative increments only occur in finite-population regimes, where the
    // exponent is bounded by the population size.
    if b < 0.0 || c < EXPLICIT_PRODUCT_LIMIT {
        let mut acc = 0.0;
        for i in 0..c {
            let f = factor_ln(a + i as f64 * b);
            if !f.is_finite() {
                return f;
            }
            acc += f;
        }
        return acc;
    }
    if a <= 0.0 {
        return factor_ln(a);
    }
    let x = a / b;
    ln_gamma(x + c as f64) - ln_gamma(x) + c as f64 * b.ln()
}

fn factor_ln(f: f64) -> f64 {
    if f > 0.0 {
        f.ln()
    } else if f == 0.0 {
        f64::NEG_INFINITY
    } else {
        f64::NAN
    }
}

/// Shannon entropy in bits of a probability vector (zero entries ignored).
pub fn entropy_bits(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| -x * x.log2())
        .sum()
}

/// `ln Σ exp(x_i)`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Ordinary least-squares slope and intercept of `y` on `x`.
pub fn ols(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Samples an index with probability proportional to `weights`.
pub fn sample_weighted<R: rand::Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    debug_assert!(total > 0.0, "no positive weight");
    let mut u = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}
