use crate::error::{invalid, Result};
use crate::numerics::{bisect_threshold, db_to_linear, log_sum_exp};
use crate::rng::RngStream;
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;

/// Plain Monte-Carlo is trusted when the tail event is hit at least this often.
const MIN_TAIL_HITS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConverseResult {
    /// Upper bound on `log2 M`.
    pub log2_m_max: f64,
    /// Per-symbol threshold solving `P{S_n <= n γ} = ε`.
    pub gamma: f64,
    /// Natural log of the estimate of `P{L_n >= n γ}`.
    pub ln_tail: f64,
    pub importance_sampled: bool,
    /// Set when the tail estimate is zero or unreliable; the reported bound is
    /// then computed from a conservative upper estimate of the tail.
    pub widened: bool,
}

fn fading_power<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

/// `(1/2) χ'²_{2n}(λ)`: the sum of `n` values `|Z_i - b|²`, `Z_i ~ CN(0, 1)`, with
/// `λ = 2 n |b|²`.
fn half_noncentral_chi2<R: Rng + ?Sized>(lambda: f64, central: &ChiSquared<f64>, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    0.5 * ((z + lambda.sqrt()).powi(2) + central.sample(rng))
}

/// `L_n >= nγ` given `G = g` is `Σ|Z_i - b|² <= x(g)` with `b² = (1 + pg)/pg`.
fn tail_threshold(nf: f64, pg: f64, gamma: f64) -> f64 {
    nf * ((1.0 + pg).ln() + 1.0 - gamma) / pg
}

/// Plain Monte-Carlo count of `L_n >= nγ`.
fn tail_hits<R: Rng + ?Sized>(n: usize, power: f64, gamma: f64, samples: usize, central: &ChiSquared<f64>, rng: &mut R) -> usize {
    let nf = n as f64;
    let mut hits = 0;
    for _ in 0..samples {
        let pg = power * fading_power(rng);
        let b2 = (1.0 + pg) / pg;
        let x = tail_threshold(nf, pg, gamma);
        if x > 0.0 && half_noncentral_chi2(2.0 * nf * b2, central, rng) <= x {
            hits += 1;
        }
    }
    hits
}

/// `ln P{L_n >= nγ}` with the conditional noise law exponentially tilted so
/// that its mean sits at the threshold `x(g)`.
fn ln_tail_tilted<R: Rng + ?Sized>(n: usize, power: f64, gamma: f64, samples: usize, central: &ChiSquared<f64>, rng: &mut R) -> f64 {
    let nf = n as f64;
    let mut log_weights = Vec::new();
    for _ in 0..samples {
        let pg = power * fading_power(rng);
        let b2 = (1.0 + pg) / pg;
        let x = tail_threshold(nf, pg, gamma);
        if x <= 0.0 {
            continue;
        }
        let u = if x >= nf * (1.0 + b2) { 1.0 } else { (-1.0 + (1.0 + 4.0 * b2 * x / nf).sqrt()) / (2.0 * b2) };
        let theta = 1.0 / u - 1.0;
        let w = u * half_noncentral_chi2(2.0 * nf * b2 * u, central, rng);
        if w <= x {
            log_weights.push(nf * (u.ln() - theta * b2 * u) + theta * w);
        }
    }
    log_sum_exp(&log_weights) - (samples as f64).ln()
}

/// Single-user list converse: `log M <= log K_a - log P{L_n >= n γ_n}`.
pub fn converse_theorem1(n: usize, power: f64, active_users: usize, epsilon: f64, samples: usize, stream: RngStream) -> Result<ConverseResult> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid("epsilon must lie in (0, 1)"));
    }
    if n < 2 || samples < 10 || active_users == 0 || !(power > 0.0) {
        return Err(invalid("need n >= 2, samples >= 10, K_a >= 1 and positive power"));
    }
    let nf = n as f64;
    let central = ChiSquared::new(2.0 * nf - 1.0).expect("positive degrees of freedom");
    let mut rng = stream.child(0).rng();
    let mut s: Vec<f64> = (0..samples)
        .map(|_| {
            let pg = power * fading_power(&mut rng);
            let w = pg * half_noncentral_chi2(2.0 * nf / pg, &central, &mut rng);
            (nf * (1.0 + pg).ln() + nf - w / (1.0 + pg)) / nf
        })
        .collect();
    s.sort_by(f64::total_cmp);
    let idx = ((epsilon * samples as f64).ceil() as usize).clamp(1, samples) - 1;
    let gamma = s[idx];

    let hits = tail_hits(n, power, gamma, samples, &central, &mut stream.child(1).rng());
    let (ln_tail, importance_sampled) = if hits >= MIN_TAIL_HITS {
        ((hits as f64 / samples as f64).ln(), false)
    } else {
        (ln_tail_tilted(n, power, gamma, samples, &central, &mut stream.child(2).rng()), true)
    };
    let widened = !ln_tail.is_finite();
    let safe_ln_tail = if widened { -(samples as f64).ln() } else { ln_tail };
    let log2_m_max = (active_users as f64).log2() - safe_ln_tail / LN_2;
    Ok(ConverseResult { log2_m_max, gamma, ln_tail, importance_sampled, widened })
}

/// Smallest Eb/N0 (dB) at which the converse admits `k` bits, by bisection to
/// `tol_db` over `[lo_db, hi_db]`. Every evaluation reuses the same random stream.
pub fn converse_min_ebn0(
    n: usize,
    k: usize,
    active_users: usize,
    epsilon: f64,
    samples: usize,
    stream: RngStream,
    (lo_db, hi_db): (f64, f64),
    tol_db: f64,
) -> Result<Option<f64>> {
    let mut err = None;
    let found = bisect_threshold(lo_db, hi_db, tol_db, |db| {
        let power = db_to_linear(db) * k as f64 / n as f64;
        match converse_theorem1(n, power, active_users, epsilon, samples, stream) {
            Ok(r) => r.log2_m_max >= k as f64,
            Err(e) => {
                err = Some(e);
                false
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(found),
    }
}
