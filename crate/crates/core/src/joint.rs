//! Alternating belief-propagation joint decoder for one ALOHA slot.
//!
//! Every decoding branch carries LLRs for one user's LDPC codeword and Gaussian
//! mixture posteriors for the real and imaginary parts of its fading coefficient.
//! Branches are visited serially; each visit passes four message types:
//! functional nodes to fading (msg1), fading to functional nodes (msg2),
//! functional nodes to code bits (msg3) and LDPC BP (msg4). Several randomized
//! attempts are run and the union of converged codewords is returned.

use crate::channel::ComplexSignal;
use crate::error::{invalid, Result};
use crate::gm::{GaussianMixture, GmConfig};
use crate::ldpc::{BpDecoder, BpVariant, LdpcCode, LLR_CLAMP};
use crate::numerics::log_sum_exp;
use crate::subspace::{norm_sqr, span_energy};
use num_complex::Complex64;
use rand::seq::index::sample as sample_indices;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Noise variance per real dimension.
const NOISE_VAR: f64 = 0.5;
/// Prior variance of each fading part.
const PRIOR_VAR: f64 = 0.5;
/// Variance used to pin a fading part to a known value.
const KNOWN_VAR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JointDecoderConfig {
    /// Maximum number of users decodable in a slot (decoding branches).
    pub max_users: usize,
    pub outer_iters: usize,
    pub inner_iters: usize,
    pub attempts: usize,
    /// Functional-node messages multiplied per fading update; clipped to the code length.
    pub subset_size: usize,
    /// An attempt stops after this many consecutive outer iterations without a new
    /// converged branch; `None` runs all outer iterations.
    pub patience: Option<usize>,
    pub variant: BpVariant,
    pub gm: GmConfig,
    /// False-alarm tail for dropping listed codewords that explain no more of the
    /// received energy than the best-fitting codeword of pure noise would; `None`
    /// keeps the raw union.
    pub list_check_tail: Option<f64>,
}

impl Default for JointDecoderConfig {
    fn default() -> Self {
        Self {
            max_users: 4,
            outer_iters: 25,
            inner_iters: 50,
            attempts: 4,
            subset_size: 32,
            patience: None,
            variant: BpVariant::SumProduct,
            gm: GmConfig::default(),
            list_check_tail: Some(1e-6),
        }
    }
}

impl JointDecoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_users == 0 {
            return Err(invalid("max_users must be at least 1"));
        }
        if self.attempts == 0 || self.outer_iters == 0 || self.inner_iters == 0 {
            return Err(invalid("attempts and iteration counts must be positive"));
        }
        if self.subset_size == 0 {
            return Err(invalid("subset_size must be positive"));
        }
        if let Some(t) = self.list_check_tail {
            if !(t > 0.0 && t < 1.0) {
                return Err(invalid("list_check_tail must lie in (0, 1)"));
            }
        }
        self.gm.validate()
    }
}

/// State of one decoding branch.
#[derive(Debug, Clone)]
pub struct UserBranchState {
    pub llrs: Vec<f64>,
    pub fading_re: GaussianMixture,
    pub fading_im: GaussianMixture,
    pub decoded: Option<Vec<u8>>,
    fading_fixed: bool,
}

impl UserBranchState {
    pub fn initial(n: usize) -> Self {
        Self {
            llrs: vec![0.0; n],
            fading_re: GaussianMixture::gaussian(0.0, PRIOR_VAR),
            fading_im: GaussianMixture::gaussian(0.0, PRIOR_VAR),
            decoded: None,
            fading_fixed: false,
        }
    }

    /// A branch whose fading coefficient is pinned to `h`.
    pub fn with_known_fading(n: usize, h: Complex64) -> Self {
        Self {
            fading_re: GaussianMixture::gaussian(h.re, KNOWN_VAR),
            fading_im: GaussianMixture::gaussian(h.im, KNOWN_VAR),
            fading_fixed: true,
            ..Self::initial(n)
        }
    }

    fn reset(&mut self) {
        let n = self.llrs.len();
        *self = Self::initial(n);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttemptOutcome {
    pub converged_branches: usize,
    pub outer_iterations: usize,
    /// Codewords decoded in this attempt.
    pub found: Vec<Vec<u8>>,
}

#[derive(Debug, Clone, Default)]
pub struct SlotDecodeResult {
    /// Unique codewords, each satisfying every parity check.
    pub codewords: Vec<Vec<u8>>,
    pub attempts: Vec<AttemptOutcome>,
}

impl SlotDecodeResult {
    pub fn estimated_user_count(&self) -> usize {
        self.codewords.len()
    }
}

/// Test hooks reproducing the idealized decoders.
#[derive(Debug, Clone, Default)]
pub struct DecodeHook {
    /// Number of branches to run instead of `max_users` (known user count).
    pub branches: Option<usize>,
    /// Ground-truth fading coefficients, one per branch.
    pub known_fading: Option<Vec<Complex64>>,
}

/// Message type 1 for one part (real or imaginary) of node `i`.
///
/// Returns the mixture for user `u`'s fading part implied by
/// `y = H_u x_u + Σ_{j≠u} H_j x_j + z`.
pub fn msg1_part(
    y_part: f64,
    u: usize,
    fading: &[&GaussianMixture],
    llrs_at_node: &[f64],
    power: f64,
    cfg: &GmConfig,
) -> GaussianMixture {
    let amp = power.sqrt();
    let mut acc = GaussianMixture::gaussian(0.0, NOISE_VAR);
    for (j, g) in fading.iter().enumerate() {
        if j == u {
            continue;
        }
        acc = acc.convolve(&g.mix_binary_llr(llrs_at_node[j], amp)).reduce(cfg);
    }
    let rhs = acc.affine(-1.0, y_part).expect("unit reflection is valid");
    rhs.mix_binary_llr(llrs_at_node[u], 1.0 / amp).reduce(cfg)
}

/// Message type 1 at one functional node: `(real part, imaginary part)`.
pub fn msg1_functional_to_fading(
    y_i: Complex64,
    node: usize,
    u: usize,
    states: &[UserBranchState],
    power: f64,
    cfg: &GmConfig,
) -> (GaussianMixture, GaussianMixture) {
    let llrs: Vec<f64> = states.iter().map(|s| s.llrs[node]).collect();
    let re: Vec<&GaussianMixture> = states.iter().map(|s| &s.fading_re).collect();
    let im: Vec<&GaussianMixture> = states.iter().map(|s| &s.fading_im).collect();
    (msg1_part(y_i.re, u, &re, &llrs, power, cfg), msg1_part(y_i.im, u, &im, &llrs, power, cfg))
}

/// Message type 2: product of `subset_size` randomly chosen incoming messages.
/// Falls back to the prior when the product degenerates.
pub fn msg2_fading_to_functional<R: Rng + ?Sized>(
    messages: &[GaussianMixture],
    subset_size: usize,
    cfg: &GmConfig,
    rng: &mut R,
) -> GaussianMixture {
    assert!(!messages.is_empty(), "msg2 needs at least one incoming message");
    let s = subset_size.clamp(1, messages.len());
    let picks = sample_indices(rng, messages.len(), s);
    let mut it = picks.iter();
    let mut acc = messages[it.next().expect("at least one pick")].clone();
    for idx in it {
        match acc.multiply(&messages[idx]) {
            Ok(p) => acc = p.reduce(cfg),
            Err(_) => return GaussianMixture::gaussian(0.0, PRIOR_VAR),
        }
    }
    acc
}

/// Bit patterns of the other users less likely than the best by this many nats are skipped.
const PATTERN_CUTOFF: f64 = 40.0;

/// Message type 3: LLR of user `u`'s bit at one node, averaging over fading samples.
///
/// `samples[s][j]` is the `s`-th sampled coefficient of user `j`; `llrs_at_node[j]`
/// gives the other users' bit beliefs. Exact enumeration over the other users' bits.
pub fn msg3_functional_to_llr(y_i: Complex64, u: usize, samples: &[Vec<Complex64>], llrs_at_node: &[f64], power: f64) -> f64 {
    let t = llrs_at_node.len();
    let amp = power.sqrt();
    let others: Vec<usize> = (0..t).filter(|&j| j != u).collect();
    // log P(x_j = ±) for the other users
    let log_p: Vec<(f64, f64)> = others
        .iter()
        .map(|&j| {
            let l = llrs_at_node[j];
            (-softplus(-l), -softplus(l))
        })
        .collect();
    let mut patterns: Vec<(usize, f64)> = (0..1usize << others.len())
        .map(|pat| (pat, (0..others.len()).map(|b| if pat >> b & 1 == 0 { log_p[b].0 } else { log_p[b].1 }).sum()))
        .collect();
    let top = patterns.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    patterns.retain(|p| p.1 >= top - PATTERN_CUTOFF);
    let mut plus = Vec::with_capacity(samples.len());
    let mut minus = Vec::with_capacity(samples.len());
    let mut terms_p = vec![0.0; patterns.len()];
    let mut terms_m = vec![0.0; patterns.len()];
    for h in samples {
        for (k, &(pat, lp)) in patterns.iter().enumerate() {
            let mut interf = Complex64::new(0.0, 0.0);
            for (b, &j) in others.iter().enumerate() {
                if pat >> b & 1 == 0 {
                    interf += h[j];
                } else {
                    interf -= h[j];
                }
            }
            let base = y_i - interf * amp;
            let own = h[u] * amp;
            terms_p[k] = lp - (base - own).norm_sqr();
            terms_m[k] = lp - (base + own).norm_sqr();
        }
        plus.push(log_sum_exp(&terms_p));
        minus.push(log_sum_exp(&terms_m));
    }
    (log_sum_exp(&plus) - log_sum_exp(&minus)).clamp(-LLR_CLAMP, LLR_CLAMP)
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Removes codewords whose share of the energy left unexplained by the other
/// listed codewords is below the level that the best of `2^codebook_bits` random
/// directions exceeds with probability at most `tail` (union bound). The weakest
/// offender is removed first and the rest are re-examined.
pub fn screen_list(y: &[Complex64], mut words: Vec<Vec<u8>>, tail: f64, codebook_bits: usize) -> Vec<Vec<u8>> {
    let ln_tail = tail.ln() - codebook_bits as f64 * std::f64::consts::LN_2;
    let n = y.len();
    let total = norm_sqr(y);
    loop {
        if words.is_empty() {
            return words;
        }
        let signals: Vec<Vec<Complex64>> = words
            .iter()
            .map(|w| w.iter().map(|&b| Complex64::new(if b == 0 { 1.0 } else { -1.0 }, 0.0)).collect())
            .collect();
        let full = span_energy(y, &signals);
        let free_dims = n.saturating_sub(words.len() - 1);
        if free_dims < 2 {
            return words;
        }
        let threshold = -(ln_tail / (free_dims - 1) as f64).exp_m1();
        let mut worst: Option<(usize, f64)> = None;
        for i in 0..signals.len() {
            let others: Vec<&Vec<Complex64>> = signals.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v).collect();
            let rest = span_energy(y, &others);
            let denom = total - rest;
            let share = if denom > 0.0 { (full - rest) / denom } else { 0.0 };
            if share < threshold && worst.is_none_or(|(_, s)| share < s) {
                worst = Some((i, share));
            }
        }
        match worst {
            Some((i, _)) => {
                words.remove(i);
            }
            None => return words,
        }
    }
}

/// Joint decoder bound to one LDPC code and per-symbol power.
#[derive(Debug, Clone)]
pub struct JointDecoder {
    code: LdpcCode,
    cfg: JointDecoderConfig,
    power: f64,
    bp: BpDecoder,
}

impl JointDecoder {
    pub fn new(code: LdpcCode, cfg: JointDecoderConfig, power: f64) -> Result<Self> {
        cfg.validate()?;
        if !(power > 0.0) {
            return Err(invalid("power must be positive"));
        }
        let bp = BpDecoder::new(code.matrix.clone(), cfg.variant);
        Ok(Self { code, cfg, power, bp })
    }

    pub fn config(&self) -> &JointDecoderConfig {
        &self.cfg
    }

    pub fn code(&self) -> &LdpcCode {
        &self.code
    }

    /// Blind decoding with `max_users` branches.
    pub fn decode_slot<R: Rng + ?Sized>(&mut self, received: &ComplexSignal, rng: &mut R) -> Result<SlotDecodeResult> {
        self.decode_slot_with(received, &DecodeHook::default(), rng)
    }

    pub fn decode_slot_with<R: Rng + ?Sized>(
        &mut self,
        received: &ComplexSignal,
        hook: &DecodeHook,
        rng: &mut R,
    ) -> Result<SlotDecodeResult> {
        let n = self.code.n();
        if received.len() != n {
            return Err(invalid(format!("received length {} differs from code length {n}", received.len())));
        }
        let branches = match (&hook.known_fading, hook.branches) {
            (Some(h), _) => h.len(),
            (None, Some(b)) => b,
            (None, None) => self.cfg.max_users,
        };
        let mut result = SlotDecodeResult::default();
        if branches == 0 {
            return Ok(result);
        }
        for _ in 0..self.cfg.attempts {
            let outcome = self.run_attempt(received, branches, hook, &mut result.codewords, rng);
            result.attempts.push(outcome);
            if result.codewords.len() >= branches {
                break;
            }
        }
        if let Some(tail) = self.cfg.list_check_tail {
            result.codewords = screen_list(received.samples(), result.codewords, tail, self.code.k());
        }
        Ok(result)
    }

    fn fresh_states(&self, branches: usize, hook: &DecodeHook) -> Vec<UserBranchState> {
        let n = self.code.n();
        match &hook.known_fading {
            Some(h) => h.iter().map(|&h| UserBranchState::with_known_fading(n, h)).collect(),
            None => (0..branches).map(|_| UserBranchState::initial(n)).collect(),
        }
    }

    fn run_attempt<R: Rng + ?Sized>(
        &mut self,
        received: &ComplexSignal,
        branches: usize,
        hook: &DecodeHook,
        union: &mut Vec<Vec<u8>>,
        rng: &mut R,
    ) -> AttemptOutcome {
        let n = self.code.n();
        let y = received.samples();
        let gm = self.cfg.gm;
        let subset = self.cfg.subset_size.min(n);
        let mut states = self.fresh_states(branches, hook);
        let mut idle = 0;
        let mut iterations = 0;
        for _ in 0..self.cfg.outer_iters {
            iterations += 1;
            let mut progressed = false;
            for u in 0..branches {
                if !states[u].fading_fixed {
                    // msg1 at a random subset of functional nodes, then msg2
                    let nodes = sample_indices(rng, n, subset);
                    let mut re_msgs = Vec::with_capacity(subset);
                    let mut im_msgs = Vec::with_capacity(subset);
                    for i in nodes.iter() {
                        let (re, im) = msg1_functional_to_fading(y[i], i, u, &states, self.power, &gm);
                        re_msgs.push(re);
                        im_msgs.push(im);
                    }
                    states[u].fading_re = msg2_fading_to_functional(&re_msgs, subset, &gm, rng);
                    states[u].fading_im = msg2_fading_to_functional(&im_msgs, subset, &gm, rng);
                }
                if states[u].decoded.is_some() {
                    continue;
                }
                // sample every branch's fading coefficient
                let per_user: Vec<(Vec<f64>, Vec<f64>)> = states
                    .iter()
                    .map(|s| (s.fading_re.sample(gm.sample_count, rng), s.fading_im.sample(gm.sample_count, rng)))
                    .collect();
                let samples: Vec<Vec<Complex64>> = (0..gm.sample_count)
                    .map(|s| per_user.iter().map(|(re, im)| Complex64::new(re[s], im[s])).collect())
                    .collect();
                // msg3
                let mut llr_in = vec![0.0; n];
                let mut node_llrs = vec![0.0; branches];
                for i in 0..n {
                    for (j, st) in states.iter().enumerate() {
                        node_llrs[j] = st.llrs[i];
                    }
                    llr_in[i] = msg3_functional_to_llr(y[i], u, &samples, &node_llrs, self.power);
                }
                // msg4
                let out = self.bp.decode(&llr_in, self.cfg.inner_iters);
                if out.converged {
                    let claimed_elsewhere = states.iter().enumerate().any(|(v, s)| v != u && s.decoded.as_ref() == Some(&out.bits));
                    if claimed_elsewhere {
                        states[u].reset();
                        if let Some(h) = hook.known_fading.as_ref() {
                            states[u] = UserBranchState::with_known_fading(n, h[u]);
                        }
                        continue;
                    }
                    states[u].llrs = out.bits.iter().map(|&b| if b == 0 { LLR_CLAMP } else { -LLR_CLAMP }).collect();
                    if !union.contains(&out.bits) {
                        union.push(out.bits.clone());
                    }
                    states[u].decoded = Some(out.bits);
                    progressed = true;
                } else {
                    states[u].llrs = out.llrs;
                }
            }
            if states.iter().all(|s| s.decoded.is_some()) {
                break;
            }
            idle = if progressed { 0 } else { idle + 1 };
            if let Some(p) = self.cfg.patience {
                if idle >= p {
                    break;
                }
            }
        }
        let found: Vec<Vec<u8>> = states.into_iter().filter_map(|s| s.decoded).collect();
        AttemptOutcome { converged_branches: found.len(), outer_iterations: iterations, found }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{noise_only, transmit, FadingDraw};
    use crate::ldpc::bpsk_map;
    use crate::rng::RngStream;

    fn exact_cfg() -> GmConfig {
        GmConfig { max_components: 100_000, merge_distance: 0.0, prune_cum_weight: 0.0, sample_count: 20 }
    }

    #[test]
    fn msg1_single_user_known_bit() {
        let p = 4.0;
        let g = GaussianMixture::gaussian(0.0, 0.5);
        let out = msg1_part(1.3, 0, &[&g], &[LLR_CLAMP * 1e3], p, &exact_cfg());
        let (m, _) = out.moments();
        assert!((m - 1.3 / p.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn msg1_symmetric_without_bit_information() {
        let p = 2.0;
        let g0 = GaussianMixture::gaussian(0.0, 0.5);
        let g1 = GaussianMixture::from_triples(&[(0.7, 0.4, 0.1), (0.3, -0.2, 0.3)]).unwrap();
        let out = msg1_part(0.8, 0, &[&g0, &g1], &[0.0, 1.5], p, &exact_cfg());
        for x in [0.1, 0.5, 1.2] {
            assert!((out.density(x) - out.density(-x)).abs() < 1e-12);
        }
    }

    #[test]
    fn msg1_matches_grid_bayes_oracle() {
        let p: f64 = 1.7;
        let a = p.sqrt();
        let y = 0.9;
        let (l1, l2) = (0.6, -1.1);
        let g2 = GaussianMixture::from_triples(&[(0.6, 0.5, 0.2), (0.4, -0.7, 0.1)]).unwrap();
        let g1 = GaussianMixture::gaussian(0.0, 0.5);
        let out = msg1_part(y, 0, &[&g1, &g2], &[l1, l2], p, &exact_cfg());
        let pr = |l: f64| 1.0 / (1.0 + (-l).exp());
        let lik = |v: f64| (-(y - v) * (y - v) / (2.0 * NOISE_VAR)).exp();
        let (h_lo, h_hi, nh) = (-6.0, 6.0, 2401);
        let dh = (h_hi - h_lo) / (nh - 1) as f64;
        let mut grid = vec![0.0; nh];
        for (k, gk) in grid.iter_mut().enumerate() {
            let h1 = h_lo + k as f64 * dh;
            let mut acc = 0.0;
            for (s1, p1) in [(1.0, pr(l1)), (-1.0, 1.0 - pr(l1))] {
                for (s2, p2) in [(1.0, pr(l2)), (-1.0, 1.0 - pr(l2))] {
                    let mut inner = 0.0;
                    for q in 0..2001 {
                        let h2 = -4.0 + q as f64 * 0.004;
                        inner += g2.density(h2) * lik(s1 * a * h1 + s2 * a * h2) * 0.004;
                    }
                    acc += p1 * p2 * inner;
                }
            }
            *gk = acc;
        }
        let z: f64 = grid.iter().sum::<f64>() * dh;
        let l1_err: f64 = grid
            .iter()
            .enumerate()
            .map(|(k, g)| (g / z - out.density(h_lo + k as f64 * dh)).abs() * dh)
            .sum();
        assert!(l1_err < 1e-3, "{l1_err}");
    }

    #[test]
    fn msg2_gaussian_products() {
        let mut rng = RngStream::new(1, 0).rng();
        let cfg = GmConfig::default();
        let msgs = vec![GaussianMixture::gaussian(0.7, 0.3); 40];
        let q = msg2_fading_to_functional(&msgs, 8, &cfg, &mut rng);
        let (m, v) = q.moments();
        assert!((m - 0.7).abs() < 1e-12 && (v - 0.3 / 8.0).abs() < 1e-12);
        let mixed = vec![GaussianMixture::from_triples(&[(0.5, 1.0, 0.2), (0.5, -1.0, 0.4)]).unwrap()];
        assert_eq!(msg2_fading_to_functional(&mixed, 1, &cfg, &mut rng), mixed[0]);
        let prior = vec![GaussianMixture::gaussian(0.0, 0.5); 10];
        for k in 1..=10 {
            let (_, v) = msg2_fading_to_functional(&prior, k, &cfg, &mut rng).moments();
            assert!((v - 0.5 / k as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn msg3_single_user_coherent() {
        let p: f64 = 2.5;
        let y = Complex64::new(p.sqrt(), 0.0);
        let samples = vec![vec![Complex64::new(1.0, 0.0)]];
        let l = msg3_functional_to_llr(y, 0, &samples, &[0.0], p);
        assert!((l - 4.0 * p).abs() < 1e-9);
        let h = Complex64::new(0.3, -0.8);
        let y = Complex64::new(0.4, 0.9);
        let l = msg3_functional_to_llr(y, 0, &[vec![h]], &[0.0], p);
        assert!((l - 4.0 * p.sqrt() * (h.conj() * y).re).abs() < 1e-9);
        let s2 = vec![vec![Complex64::new(0.5, 0.2), Complex64::new(-0.3, 1.0)]; 3];
        assert!(msg3_functional_to_llr(Complex64::new(0.0, 0.0), 0, &s2, &[0.0, 0.0], p).abs() < 1e-12);
    }

    #[test]
    fn msg3_matches_quadrature_for_two_users() {
        let p: f64 = 1.2;
        let a = p.sqrt();
        let mut rng = RngStream::new(5, 0).rng();
        let g = [
            (GaussianMixture::gaussian(0.6, 0.05), GaussianMixture::gaussian(-0.2, 0.05)),
            (GaussianMixture::gaussian(-0.4, 0.08), GaussianMixture::gaussian(0.3, 0.04)),
        ];
        let llr2 = 0.8;
        let y = Complex64::new(0.5, -0.4);
        let count = 10_000;
        let draws: Vec<(Vec<f64>, Vec<f64>)> = g.iter().map(|(r, i)| (r.sample(count, &mut rng), i.sample(count, &mut rng))).collect();
        let samples: Vec<Vec<Complex64>> =
            (0..count).map(|s| draws.iter().map(|(r, i)| Complex64::new(r[s], i[s])).collect()).collect();
        let mc = msg3_functional_to_llr(y, 0, &samples, &[0.0, llr2], p);
        // quadrature: the likelihood factorizes over parts given the bits
        let pr2 = 1.0 / (1.0 + (-llr2).exp());
        let part = |gm1: &GaussianMixture, gm2: &GaussianMixture, yp: f64, s1: f64, s2: f64| {
            let mut acc = 0.0;
            let step = 0.01;
            for i in 0..300 {
                let h1 = -1.5 + i as f64 * step;
                let w1 = gm1.density(h1) * step;
                for j in 0..300 {
                    let h2 = -1.5 + j as f64 * step;
                    let d = yp - s1 * a * h1 - s2 * a * h2;
                    acc += w1 * gm2.density(h2) * step * (-d * d).exp();
                }
            }
            acc
        };
        let num: f64 = [(1.0, pr2), (-1.0, 1.0 - pr2)]
            .iter()
            .map(|&(s2, p2)| p2 * part(&g[0].0, &g[1].0, y.re, 1.0, s2) * part(&g[0].1, &g[1].1, y.im, 1.0, s2))
            .sum();
        let den: f64 = [(1.0, pr2), (-1.0, 1.0 - pr2)]
            .iter()
            .map(|&(s2, p2)| p2 * part(&g[0].0, &g[1].0, y.re, -1.0, s2) * part(&g[0].1, &g[1].1, y.im, -1.0, s2))
            .sum();
        let exact = (num / den).ln();
        assert!((mc - exact).abs() < 0.1, "{mc} vs {exact}");
    }

    fn slot(code: &LdpcCode, r: usize, power: f64, seed: u64) -> (ComplexSignal, Vec<Vec<u8>>, FadingDraw) {
        let mut rng = RngStream::new(seed, 0).rng();
        if r == 0 {
            return (noise_only(code.n(), &mut rng).unwrap(), vec![], FadingDraw::fixed(vec![]));
        }
        let words: Vec<Vec<u8>> = (0..r)
            .map(|_| {
                let msg: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
                code.encoder.encode(&msg).unwrap()
            })
            .collect();
        let x: Vec<ComplexSignal> = words.iter().map(|w| bpsk_map(w, power).unwrap()).collect();
        let h = FadingDraw::sample(r, &mut rng);
        (transmit(&x, &h, true, &mut rng).unwrap(), words, h)
    }

    #[test]
    fn single_user_high_snr_is_decoded() {
        let code = LdpcCode::load("ldpc_128_64").unwrap();
        let power = 10f64.powf(2.0);
        let cfg = JointDecoderConfig { max_users: 1, outer_iters: 10, attempts: 2, ..Default::default() };
        let mut dec = JointDecoder::new(code.clone(), cfg, power).unwrap();
        let mut ok = 0;
        let trials = 20;
        for t in 0..trials {
            let (y, words, h) = slot(&code, 1, power, 100 + t);
            if h.powers()[0] < 0.02 {
                ok += 1;
                continue;
            }
            let out = dec.decode_slot(&y, &mut RngStream::new(t, 1).rng()).unwrap();
            ok += (out.codewords == words) as usize;
        }
        assert!(ok >= trials as usize - 1, "{ok}");
    }

    #[test]
    fn empty_slot_gives_empty_list() {
        let code = LdpcCode::load("ldpc_128_64").unwrap();
        let cfg = JointDecoderConfig { max_users: 2, outer_iters: 5, attempts: 1, ..Default::default() };
        let mut dec = JointDecoder::new(code.clone(), cfg, 1.0).unwrap();
        for t in 0..5 {
            let (y, _, _) = slot(&code, 0, 1.0, t);
            let out = dec.decode_slot(&y, &mut RngStream::new(t, 2).rng()).unwrap();
            assert!(out.codewords.is_empty());
        }
    }

    #[test]
    fn identical_messages_yield_one_codeword() {
        let code = LdpcCode::load("ldpc_128_64").unwrap();
        let power = 30.0;
        let mut rng = RngStream::new(9, 0).rng();
        let msg: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
        let w = code.encoder.encode(&msg).unwrap();
        let x = bpsk_map(&w, power).unwrap();
        let h = FadingDraw::fixed(vec![Complex64::new(0.9, 0.3), Complex64::new(0.2, -0.7)]);
        let y = transmit(&[x.clone(), x], &h, true, &mut rng).unwrap();
        let cfg = JointDecoderConfig { max_users: 2, outer_iters: 8, attempts: 2, ..Default::default() };
        let out = JointDecoder::new(code, cfg, power).unwrap().decode_slot(&y, &mut rng).unwrap();
        assert!(out.codewords.len() <= 1);
    }

    #[test]
    fn outputs_pass_syndrome_check() {
        let code = LdpcCode::load("ldpc_128_64").unwrap();
        let power = 10.0;
        let cfg = JointDecoderConfig { max_users: 3, outer_iters: 8, attempts: 2, ..Default::default() };
        let mut dec = JointDecoder::new(code.clone(), cfg, power).unwrap();
        for t in 0..4 {
            let (y, _, _) = slot(&code, 2, power, 50 + t);
            let out = dec.decode_slot(&y, &mut RngStream::new(t, 3).rng()).unwrap();
            assert!(out.codewords.iter().all(|c| code.matrix.syndrome_is_zero(c)));
            assert!(out.codewords.len() <= 3);
        }
    }
}
