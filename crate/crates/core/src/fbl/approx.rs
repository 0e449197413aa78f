use crate::aloha::SlotErrorModel;
use crate::error::{invalid, Result};
use crate::numerics::{bisect_threshold, db_to_linear, q_func};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use std::f64::consts::LOG2_E;

/// Capacity of the complex AWGN channel in bits.
fn capacity_bits(snr: f64) -> f64 {
    snr.ln_1p() * LOG2_E
}

/// Dispersion of the complex AWGN channel in bits².
fn dispersion_bits(snr: f64) -> f64 {
    (1.0 - 1.0 / (1.0 + snr).powi(2)) * LOG2_E * LOG2_E
}

fn normal_approx_term(n: f64, snr: f64, log2_m: f64) -> f64 {
    let v = dispersion_bits(snr);
    if v <= 0.0 {
        return 1.0;
    }
    q_func((n * capacity_bits(snr) - log2_m) / (n * v).sqrt())
}

/// Draws of `Σ_{i<=r} |H_i|²` for `r = 1..=max_users`, reused across evaluations.
#[derive(Debug, Clone)]
pub struct FadingSamples {
    sums: Vec<Vec<f64>>,
}

impl FadingSamples {
    pub fn new<R: Rng + ?Sized>(max_users: usize, draws: usize, rng: &mut R) -> Self {
        let sums = (1..=max_users)
            .map(|r| {
                let g = Gamma::new(r as f64, 1.0).expect("positive shape");
                (0..draws).map(|_| g.sample(rng)).collect()
            })
            .collect();
        Self { sums }
    }

    pub fn max_users(&self) -> usize {
        self.sums.len()
    }

    /// Draws of the total fading power of `r` users.
    pub fn sum_of(&self, r: usize) -> &[f64] {
        &self.sums[r - 1]
    }
}

/// Normal approximation of the slot error with `r` users at per-symbol slot
/// power `slot_power`, averaged over fading draws.
pub fn normal_approx_pe(log2_m: f64, n1: usize, r: usize, slot_power: f64, fading: &FadingSamples) -> f64 {
    if r == 0 {
        return 0.0;
    }
    if r > fading.max_users() {
        return 1.0;
    }
    let draws = fading.sum_of(r);
    draws.iter().map(|&g| normal_approx_term(n1 as f64, slot_power * g, log2_m)).sum::<f64>() / draws.len() as f64
}

/// [`normal_approx_pe`] as a slot model for the ALOHA optimizer.
#[derive(Debug, Clone)]
pub struct NormalApproxModel {
    pub log2_m: f64,
    pub fading: FadingSamples,
}

impl SlotErrorModel for NormalApproxModel {
    fn miss(&self, slot_length: usize, r: usize, slot_power: f64) -> f64 {
        normal_approx_pe(self.log2_m, slot_length, r, slot_power, &self.fading)
    }
}

/// Treating-interference-as-noise approximation with `interferers + 1` users
/// sharing `n` symbols at power `power` each.
pub fn tin_pe<R: Rng + ?Sized>(n: usize, k: usize, power: f64, interferers: usize, draws: usize, rng: &mut R) -> f64 {
    let single = Gamma::new(1.0, 1.0).expect("positive shape");
    let mut acc = 0.0;
    for _ in 0..draws {
        let own: f64 = single.sample(rng);
        let interference: f64 = if interferers == 0 { 0.0 } else { Gamma::new(interferers as f64, 1.0).expect("positive shape").sample(rng) };
        let sinr = power * own / (1.0 + power * interference);
        acc += normal_approx_term(n as f64, sinr, k as f64);
    }
    acc / draws as f64
}

/// Crystallized fading powers of `K` users in decreasing order:
/// quantiles of `Exp(1)` at `j / (K + 1)`.
pub fn crystallized_gains(users: usize) -> Vec<f64> {
    (1..=users).map(|j| -(j as f64 / (users as f64 + 1.0)).ln()).collect()
}

/// Whether the `kept` strongest users can all be decoded at `k` bits each when
/// the rest are treated as noise: every subset must fit in the instantaneous
/// capacity region, and with equal rates the binding subsets are the weakest ones.
fn kept_users_fit(gains: &[f64], kept: usize, n: usize, k: usize, power: f64) -> bool {
    let noise = 1.0 + power * gains[kept..].iter().sum::<f64>();
    let mut weakest = 0.0;
    for s in 1..=kept {
        weakest += gains[kept - s];
        if (s * k) as f64 > n as f64 * (1.0 + power * weakest / noise).log2() {
            return false;
        }
    }
    true
}

/// Fraction of users dropped when the weakest are removed one at a time until
/// the rest fit.
pub fn shamai_bettesh_outage(users: usize, n: usize, k: usize, power: f64) -> f64 {
    if users == 0 {
        return 0.0;
    }
    let gains = crystallized_gains(users);
    let mut kept = users;
    while kept > 0 && !kept_users_fit(&gains, kept, n, k, power) {
        kept -= 1;
    }
    (users - kept) as f64 / users as f64
}

/// Smallest Eb/N0 (dB, per user) with outage at most `epsilon`.
pub fn shamai_bettesh_min_ebn0(users: usize, n: usize, k: usize, epsilon: f64, (lo_db, hi_db): (f64, f64), tol_db: f64) -> Result<Option<f64>> {
    if users == 0 || n == 0 || k == 0 {
        return Err(invalid("users, n and k must be positive"));
    }
    Ok(bisect_threshold(lo_db, hi_db, tol_db, |db| {
        let power = db_to_linear(db) * k as f64 / n as f64;
        shamai_bettesh_outage(users, n, k, power) <= epsilon
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;
    use itertools::Itertools;

    #[test]
    fn tin_without_interference_is_the_single_user_approximation() {
        let fading = FadingSamples::new(1, 50_000, &mut RngStream::new(1, 0).rng());
        let direct = normal_approx_pe(100.0, 300, 1, 1.0, &fading);
        let tin = tin_pe(300, 100, 1.0, 0, 50_000, &mut RngStream::new(1, 0).rng());
        assert!((direct - tin).abs() < 1e-12, "{direct} {tin}");
    }

    #[test]
    fn single_user_reduces_to_fading_average() {
        let fading = FadingSamples::new(2, 1000, &mut RngStream::new(2, 0).rng());
        let g = fading.sum_of(1);
        let by_hand: f64 = g
            .iter()
            .map(|&x| {
                let c = (1.0 + 2.0 * x).log2();
                let v = (1.0 - 1.0 / (1.0 + 2.0 * x).powi(2)) * LOG2_E * LOG2_E;
                q_func((200.0 * c - 80.0) / (200.0 * v).sqrt())
            })
            .sum::<f64>()
            / 1000.0;
        assert!((normal_approx_pe(80.0, 200, 1, 2.0, &fading) - by_hand).abs() < 1e-12);
    }

    #[test]
    fn normal_approx_decreases_with_power() {
        let fading = FadingSamples::new(3, 20_000, &mut RngStream::new(3, 0).rng());
        for r in 1..=3 {
            let mut prev = 1.0;
            for db in [-5.0, 0.0, 5.0, 10.0, 15.0, 20.0] {
                let v = normal_approx_pe(100.0, 500, r, db_to_linear(db), &fading);
                assert!(v <= prev + 1e-15);
                prev = v;
            }
        }
    }

    fn brute_force_outage(users: usize, n: usize, k: usize, power: f64) -> f64 {
        let gains = crystallized_gains(users);
        for kept in (0..=users).rev() {
            let noise = 1.0 + power * gains[kept..].iter().sum::<f64>();
            let ok = (1..=kept).all(|s| {
                (0..kept).combinations(s).all(|set| {
                    let g: f64 = set.iter().map(|&i| gains[i]).sum();
                    (s * k) as f64 <= n as f64 * (1.0 + power * g / noise).log2()
                })
            });
            if ok {
                return (users - kept) as f64 / users as f64;
            }
        }
        1.0
    }

    #[test]
    fn dropping_loop_matches_exhaustive_search() {
        for db in [-10.0, -3.0, 0.0, 2.0, 5.0, 10.0, 20.0] {
            let power = db_to_linear(db);
            assert_eq!(shamai_bettesh_outage(10, 300, 100, power), brute_force_outage(10, 300, 100, power), "{db}");
        }
    }

    #[test]
    fn crystallized_gains_are_decreasing_exponential_quantiles() {
        let g = crystallized_gains(4);
        assert!((g[0] - 5f64.ln()).abs() < 1e-15 && (g[3] - (5.0f64 / 4.0).ln()).abs() < 1e-15);
        assert!(g.windows(2).all(|w| w[0] > w[1]));
    }
}
