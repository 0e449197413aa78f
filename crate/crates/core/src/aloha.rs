//! T-fold slotted ALOHA: frame simulation, PUPE accounting and closed-form
//! bounds, and the `(L, P)` operating-point search.

use crate::error::{invalid, Error, Result};
use crate::numerics::{binom_pmf, db_to_linear};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

/// Occupancy probabilities below this are dropped from the slot-error sums.
const OCCUPANCY_TAIL: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameConfig {
    pub frame_length: usize,
    pub slots: usize,
    pub active_users: usize,
    pub max_per_slot: usize,
    /// Codebook size; `0` stands for an unbounded codebook (no collisions).
    pub codebook_size: u128,
    /// Average power per symbol over the frame.
    pub power: f64,
}

impl FrameConfig {
    pub fn validate(&self) -> Result<()> {
        if self.slots == 0 {
            return Err(invalid("slot count must be at least 1"));
        }
        if self.slot_length() == 0 {
            return Err(invalid("slot length floor(n/L) must be at least 1"));
        }
        if !(self.power >= 0.0) {
            return Err(invalid("power must be nonnegative"));
        }
        Ok(())
    }

    /// `floor(n / L)`; remainder symbols stay unused.
    pub fn slot_length(&self) -> usize {
        self.frame_length / self.slots
    }

    /// Power per symbol inside a slot, `L * P`.
    pub fn slot_power(&self) -> f64 {
        self.slots as f64 * self.power
    }
}

/// Outcome of one slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SlotTally {
    pub occupancy: usize,
    pub hits: usize,
    pub misses: usize,
    pub false_alarms: usize,
}

/// Frame-level sample of the per-user error.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameOutcome {
    /// Fraction of active users in error (missed or collided).
    pub pupe: f64,
    pub collided_users: usize,
    pub slots: Vec<SlotTally>,
}

/// Uniform slot choice for every active user.
pub fn assign_slots<R: Rng + ?Sized>(active_users: usize, slots: usize, rng: &mut R) -> Vec<usize> {
    (0..active_users).map(|_| rng.random_range(0..slots.max(1))).collect()
}

/// Anything that can carry the messages of the users sharing one slot and
/// return the decoded list.
pub trait SlotScheme {
    fn transmit_and_decode(&mut self, messages: &[u128], slot_index: usize, rng: &mut dyn rand::RngCore) -> Vec<u128>;
}

/// Decodes every slot perfectly, regardless of occupancy.
#[derive(Debug, Clone, Copy, Default)]
pub struct PerfectDecoder;

impl SlotScheme for PerfectDecoder {
    fn transmit_and_decode(&mut self, messages: &[u128], _: usize, _: &mut dyn rand::RngCore) -> Vec<u128> {
        let mut out = messages.to_vec();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Never decodes anything.
#[derive(Debug, Clone, Copy, Default)]
pub struct FailingDecoder;

impl SlotScheme for FailingDecoder {
    fn transmit_and_decode(&mut self, _: &[u128], _: usize, _: &mut dyn rand::RngCore) -> Vec<u128> {
        Vec::new()
    }
}

/// Knows the slot occupancy `r` and misses each user independently with
/// probability `miss[r - 1]`; slots with more than `miss.len()` users fail.
#[derive(Debug, Clone, PartialEq)]
pub struct GenieDecoder {
    pub miss: Vec<f64>,
}

impl SlotScheme for GenieDecoder {
    fn transmit_and_decode(&mut self, messages: &[u128], _: usize, rng: &mut dyn rand::RngCore) -> Vec<u128> {
        let r = messages.len();
        if r == 0 || r > self.miss.len() {
            return Vec::new();
        }
        let p = self.miss[r - 1];
        messages.iter().copied().filter(|_| rng.random::<f64>() >= p).collect()
    }
}

/// Simulates one frame: random messages and slots, per-slot decoding, and PUPE
/// counting a user in error when its message is missing from its slot's list or
/// equals another active user's message.
pub fn run_frame<R: Rng + ?Sized>(cfg: &FrameConfig, scheme: &mut dyn SlotScheme, rng: &mut R) -> Result<FrameOutcome> {
    cfg.validate()?;
    let ka = cfg.active_users;
    let messages: Vec<u128> = (0..ka)
        .map(|_| if cfg.codebook_size == 0 { rng.random() } else { rng.random_range(0..cfg.codebook_size) })
        .collect();
    let slot_of = assign_slots(ka, cfg.slots, rng);
    let mut by_slot: Vec<Vec<usize>> = vec![Vec::new(); cfg.slots];
    for (user, &s) in slot_of.iter().enumerate() {
        by_slot[s].push(user);
    }
    let collided: Vec<bool> = (0..ka)
        .map(|i| (0..ka).any(|j| j != i && messages[j] == messages[i]))
        .collect();
    let mut errors = 0;
    let mut tallies = Vec::with_capacity(cfg.slots);
    let mut seed_rng = rand_chacha::ChaCha8Rng::seed_from_u64(rng.random());
    for (s, users) in by_slot.iter().enumerate() {
        let sent: Vec<u128> = users.iter().map(|&u| messages[u]).collect();
        let list = scheme.transmit_and_decode(&sent, s, &mut seed_rng);
        let mut hits = 0;
        for &u in users {
            let found = list.contains(&messages[u]);
            hits += found as usize;
            if !found || collided[u] {
                errors += 1;
            }
        }
        tallies.push(SlotTally {
            occupancy: users.len(),
            hits,
            misses: users.len() - hits,
            false_alarms: list.len().saturating_sub(hits),
        });
    }
    let collided_users = collided.iter().filter(|&&c| c).count();
    let pupe = if ka == 0 { 0.0 } else { errors as f64 / ka as f64 };
    Ok(FrameOutcome { pupe, collided_users, slots: tallies })
}

fn collision_term(active_users: usize, codebook_size: f64) -> f64 {
    if codebook_size.is_infinite() {
        0.0
    } else {
        active_users as f64 / codebook_size
    }
}

/// Probability that a given user shares its slot with `r - 1` others.
fn occupancy_seen_by_user(active_users: usize, slots: usize, r: usize) -> f64 {
    if r == 0 || r > active_users {
        return 0.0;
    }
    binom_pmf(active_users as u64 - 1, r as u64 - 1, 1.0 / slots as f64)
}

/// Genie-aided PUPE bound. `genie_miss[r - 1]` is the per-user miss probability
/// in a slot with `r` users, for `r = 1..=T`.
pub fn epsilon_t_genie(active_users: usize, slots: usize, max_per_slot: usize, codebook_size: f64, genie_miss: &[f64]) -> Result<f64> {
    if slots == 0 {
        return Err(invalid("slot count must be at least 1"));
    }
    if genie_miss.len() < max_per_slot {
        return Err(invalid("miss table shorter than the per-slot user limit"));
    }
    if genie_miss.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(invalid("miss probabilities must lie in [0, 1]"));
    }
    let mut success = 0.0;
    for r in 1..=max_per_slot.min(active_users) {
        success += (1.0 - genie_miss[r - 1]) * occupancy_seen_by_user(active_users, slots, r);
    }
    Ok((1.0 - success + collision_term(active_users, codebook_size)).clamp(0.0, 1.0))
}

/// Genie-free PUPE bound with the list-overflow term. `miss[r]` and
/// `overflow[r]` are indexed by occupancy `r = 0..=K_a`; missing entries count
/// as 1 for misses beyond `T` and as given otherwise.
pub fn epsilon_t_blind(
    active_users: usize,
    slots: usize,
    max_per_slot: usize,
    codebook_size: f64,
    miss: &[f64],
    overflow: &[f64],
) -> Result<f64> {
    if slots == 0 {
        return Err(invalid("slot count must be at least 1"));
    }
    let miss_at = |r: usize| if r > max_per_slot { 1.0 } else { miss.get(r).copied().unwrap_or(1.0) };
    let overflow_at = |r: usize| overflow.get(r).copied().unwrap_or(1.0);
    let mut success = 0.0;
    for r in 1..=max_per_slot.min(active_users) {
        success += (1.0 - miss_at(r)) * occupancy_seen_by_user(active_users, slots, r);
    }
    let p = 1.0 / slots as f64;
    let mut q = 0.0;
    let mut covered = 0.0;
    for r in 0..=active_users {
        let w = binom_pmf(active_users as u64, r as u64, p);
        if w < OCCUPANCY_TAIL {
            continue;
        }
        covered += w;
        q += w * overflow_at(r);
    }
    q += (1.0 - covered).max(0.0);
    q *= slots as f64;
    Ok((1.0 - success + collision_term(active_users, codebook_size) + q).clamp(0.0, 1.0))
}

/// Per-slot error model used by the operating-point search.
pub trait SlotErrorModel: Sync {
    /// Per-user miss probability with `r` users in a slot of `slot_length`
    /// symbols at per-symbol power `slot_power`.
    fn miss(&self, slot_length: usize, r: usize, slot_power: f64) -> f64;

    /// Probability that the decoded list overflows `r`.
    fn overflow(&self, _slot_length: usize, _r: usize, _slot_power: f64) -> f64 {
        0.0
    }
}

/// Search space for [`optimize_operating_point`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatingGrid {
    pub slot_counts: Vec<usize>,
    pub ebn0_min_db: f64,
    pub ebn0_max_db: f64,
    pub ebn0_step_db: f64,
}

impl OperatingGrid {
    /// Every `L` from 1 up to the largest with `floor(n/L) >= min_slot_length`.
    pub fn all_slot_counts(n: usize, min_slot_length: usize, ebn0_min_db: f64, ebn0_max_db: f64) -> Self {
        let max_l = (n / min_slot_length.max(1)).max(1);
        Self { slot_counts: (1..=max_l).collect(), ebn0_min_db, ebn0_max_db, ebn0_step_db: 0.1 }
    }

    fn levels(&self) -> Vec<f64> {
        let steps = ((self.ebn0_max_db - self.ebn0_min_db) / self.ebn0_step_db).round().max(0.0) as usize;
        (0..=steps).map(|i| self.ebn0_min_db + i as f64 * self.ebn0_step_db).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub slots: usize,
    pub slot_length: usize,
    /// Average power per symbol over the frame.
    pub power: f64,
    pub ebn0_db: f64,
    pub pupe: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlohaProblem {
    pub frame_length: usize,
    pub payload_bits: usize,
    pub active_users: usize,
    pub max_per_slot: usize,
    pub target: f64,
    /// Use the genie bound instead of the genie-free one.
    pub genie: bool,
}

impl AlohaProblem {
    /// PUPE bound at `L` slots and Eb/N0 `ebn0_db`.
    pub fn pupe(&self, model: &dyn SlotErrorModel, slots: usize, ebn0_db: f64) -> Result<f64> {
        let n1 = self.frame_length / slots;
        if n1 == 0 {
            return Err(invalid("slot length is zero"));
        }
        let power = db_to_linear(ebn0_db) * self.payload_bits as f64 / self.frame_length as f64;
        let slot_power = slots as f64 * power;
        let m = 2f64.powi(self.payload_bits as i32);
        let t = self.max_per_slot;
        if self.genie {
            let miss: Vec<f64> = (1..=t).map(|r| model.miss(n1, r, slot_power)).collect();
            epsilon_t_genie(self.active_users, slots, t, m, &miss)
        } else {
            let top = self.active_users.min(t);
            let miss: Vec<f64> = (0..=top).map(|r| if r == 0 { 0.0 } else { model.miss(n1, r, slot_power) }).collect();
            let overflow: Vec<f64> = (0..=self.active_users).map(|r| model.overflow(n1, r, slot_power)).collect();
            epsilon_t_blind(self.active_users, slots, t, m, &miss, &overflow)
        }
    }
}

/// Minimum Eb/N0 meeting the target over the grid. For each `L` the smallest
/// feasible grid level is located by bisection over grid indices, assuming the
/// bound decreases with power.
pub fn optimize_operating_point(problem: &AlohaProblem, model: &dyn SlotErrorModel, grid: &OperatingGrid) -> Result<OperatingPoint> {
    let levels = grid.levels();
    if levels.is_empty() || grid.slot_counts.is_empty() {
        return Err(invalid("empty search grid"));
    }
    let mut best: Option<OperatingPoint> = None;
    for &l in &grid.slot_counts {
        if l == 0 || problem.frame_length / l == 0 {
            continue;
        }
        let feasible = |i: usize| -> Result<Option<f64>> {
            let v = problem.pupe(model, l, levels[i])?;
            Ok((v <= problem.target).then_some(v))
        };
        let last = levels.len() - 1;
        let Some(mut top_val) = feasible(last)? else { continue };
        let (mut lo, mut hi) = (0usize, last);
        if let Some(v) = feasible(0)? {
            hi = 0;
            top_val = v;
        } else {
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                match feasible(mid)? {
                    Some(v) => {
                        hi = mid;
                        top_val = v;
                    }
                    None => lo = mid,
                }
            }
        }
        let db = levels[hi];
        if best.is_none_or(|b| db < b.ebn0_db) {
            let power = db_to_linear(db) * problem.payload_bits as f64 / problem.frame_length as f64;
            best = Some(OperatingPoint { slots: l, slot_length: problem.frame_length / l, power, ebn0_db: db, pupe: top_val });
        }
    }
    best.ok_or_else(|| Error::Infeasible(format!("target {} not met on the grid", problem.target)))
}
