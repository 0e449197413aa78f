use crate::error::{Error, Result};
use crate::subspace::{norm_sqr, span_energy};
use itertools::Itertools;
use num_complex::Complex64;

/// Nearest-subspace statistic for a candidate wrong set `s0` of transmitted
/// codewords: the energy left after the best `t`-subset of `s0` joins the
/// remaining codewords, relative to the energy left by the remaining codewords
/// alone. Lies in `[0, 1]`.
pub fn projection_g(y: &[Complex64], codewords: &[Vec<Complex64>], s0: &[usize], t: usize) -> Result<f64> {
    let total = norm_sqr(y);
    let rest: Vec<&Vec<Complex64>> = (0..codewords.len()).filter(|i| !s0.contains(i)).map(|i| &codewords[i]).collect();
    let denom = total - span_energy(y, &rest);
    if denom < 1e-12 * total || total == 0.0 {
        return Err(Error::DegenerateGeometry(format!("residual energy {denom:e} of {total:e}")));
    }
    let mut best = f64::NEG_INFINITY;
    for s2 in s0.iter().combinations(t) {
        let mut span = rest.clone();
        span.extend(s2.iter().map(|&&i| &codewords[i]));
        best = best.max(span_energy(y, &span));
    }
    Ok(((total - best) / denom).clamp(0.0, 1.0))
}

/// `max` of [`projection_g`] over all `s0` of size `k2 - k1 + t`.
pub fn max_projection_g(y: &[Complex64], codewords: &[Vec<Complex64>], k1: usize, t: usize) -> Result<f64> {
    let k2 = codewords.len();
    let size = k2 - k1 + t;
    let mut best: f64 = 0.0;
    for s0 in (0..k2).combinations(size) {
        best = best.max(projection_g(y, codewords, &s0, t)?);
    }
    Ok(best)
}

/// Fraction of the energy outside `span(rest)` captured by adding the
/// non-transmitted codewords `s1`.
pub fn claim1_statistic(y: &[Complex64], rest: &[Vec<Complex64>], s1: &[Vec<Complex64>]) -> Result<f64> {
    let total = norm_sqr(y);
    let base = span_energy(y, rest);
    let denom = total - base;
    if denom <= 1e-12 * total {
        return Err(Error::DegenerateGeometry("received vector lies in the span".into()));
    }
    let mut all: Vec<&Vec<Complex64>> = rest.iter().collect();
    all.extend(s1.iter());
    Ok(((span_energy(y, &all) - base) / denom).clamp(0.0, 1.0))
}
