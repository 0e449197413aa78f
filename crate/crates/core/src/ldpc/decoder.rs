use super::ParityCheckMatrix;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Magnitude at which all LLRs are clamped.
pub const LLR_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BpVariant {
    #[default]
    SumProduct,
    MinSum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutcome {
    pub bits: Vec<u8>,
    /// All checks satisfied by `bits`.
    pub converged: bool,
    pub iterations_used: usize,
    /// Posterior LLRs after the last iteration.
    pub llrs: Vec<f64>,
}

/// Flooding-schedule BP decoder; owns its message buffers.
#[derive(Debug, Clone)]
pub struct BpDecoder {
    matrix: Arc<ParityCheckMatrix>,
    variant: BpVariant,
    early_stop: bool,
    edge_var: Vec<usize>,
    check_start: Vec<usize>,
    var_edges: Vec<Vec<usize>>,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    scratch: Vec<f64>,
}

fn clamp(x: f64) -> f64 {
    x.clamp(-LLR_CLAMP, LLR_CLAMP)
}

impl BpDecoder {
    pub fn new(matrix: Arc<ParityCheckMatrix>, variant: BpVariant) -> Self {
        let mut edge_var = Vec::with_capacity(matrix.edges());
        let mut check_start = Vec::with_capacity(matrix.m() + 1);
        let mut var_edges = vec![Vec::new(); matrix.n()];
        for row in matrix.rows() {
            check_start.push(edge_var.len());
            for &v in row {
                var_edges[v].push(edge_var.len());
                edge_var.push(v);
            }
        }
        check_start.push(edge_var.len());
        let e = edge_var.len();
        Self {
            matrix,
            variant,
            early_stop: true,
            edge_var,
            check_start,
            var_edges,
            v2c: vec![0.0; e],
            c2v: vec![0.0; e],
            scratch: Vec::new(),
        }
    }

    /// Disable the zero-syndrome exit so exactly `max_iters` iterations run.
    pub fn without_early_stop(mut self) -> Self {
        self.early_stop = false;
        self
    }

    pub fn matrix(&self) -> &ParityCheckMatrix {
        &self.matrix
    }

    pub fn decode(&mut self, channel_llr: &[f64], max_iters: usize) -> DecodeOutcome {
        let n = self.matrix.n();
        assert_eq!(channel_llr.len(), n, "LLR vector length must equal the code length");
        let max_iters = max_iters.max(1);
        let ch: Vec<f64> = channel_llr.iter().map(|&l| clamp(l)).collect();
        self.c2v.iter_mut().for_each(|x| *x = 0.0);
        let mut post = ch.clone();
        let mut bits = vec![0u8; n];
        let mut used = 0;
        let mut converged = false;
        for it in 1..=max_iters {
            used = it;
            for (e, &v) in self.edge_var.iter().enumerate() {
                self.v2c[e] = clamp(post[v] - self.c2v[e]);
            }
            for c in 0..self.matrix.m() {
                let (s, t) = (self.check_start[c], self.check_start[c + 1]);
                match self.variant {
                    BpVariant::SumProduct => self.check_sum_product(s, t),
                    BpVariant::MinSum => self.check_min_sum(s, t),
                }
            }
            for v in 0..n {
                let total = ch[v] + self.var_edges[v].iter().map(|&e| self.c2v[e]).sum::<f64>();
                post[v] = clamp(total);
                bits[v] = (post[v] < 0.0) as u8;
            }
            converged = self.matrix.syndrome_is_zero(&bits);
            if converged && self.early_stop {
                break;
            }
        }
        DecodeOutcome { bits, converged, iterations_used: used, llrs: post }
    }

    fn check_sum_product(&mut self, s: usize, t: usize) {
        let d = t - s;
        self.scratch.clear();
        self.scratch.extend(self.v2c[s..t].iter().map(|&x| (0.5 * x).tanh()));
        // leave-one-out products via prefix/suffix sweeps
        let mut prefix = 1.0;
        for i in 0..d {
            self.c2v[s + i] = prefix;
            prefix *= self.scratch[i];
        }
        let mut suffix = 1.0;
        for i in (0..d).rev() {
            let p = (self.c2v[s + i] * suffix).clamp(-1.0 + 1e-15, 1.0 - 1e-15);
            self.c2v[s + i] = clamp(2.0 * p.atanh());
            suffix *= self.scratch[i];
        }
    }

    fn check_min_sum(&mut self, s: usize, t: usize) {
        let mut sign = 1.0f64;
        let (mut min1, mut min2, mut arg) = (f64::INFINITY, f64::INFINITY, s);
        for e in s..t {
            let x = self.v2c[e];
            if x < 0.0 {
                sign = -sign;
            }
            let a = x.abs();
            if a < min1 {
                min2 = min1;
                min1 = a;
                arg = e;
            } else if a < min2 {
                min2 = a;
            }
        }
        for e in s..t {
            let own = if self.v2c[e] < 0.0 { -1.0 } else { 1.0 };
            let mag = if e == arg { min2 } else { min1 };
            self.c2v[e] = sign * own * mag;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldpc::{bpsk_map, LdpcCode};
    use crate::numerics::log_sum_exp;
    use crate::rng::RngStream;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn noiseless_llrs_converge_immediately() {
        let code = LdpcCode::load("ldpc_128_64").unwrap();
        let mut rng = RngStream::new(1, 0).rng();
        let msg: Vec<u8> = (0..64).map(|_| rng.random_range(0..2u8)).collect();
        let c = code.encoder.encode(&msg).unwrap();
        let llr: Vec<f64> = c.iter().map(|&b| if b == 0 { 20.0 } else { -20.0 }).collect();
        for variant in [BpVariant::SumProduct, BpVariant::MinSum] {
            let out = BpDecoder::new(code.matrix.clone(), variant).decode(&llr, 50);
            assert!(out.converged);
            assert_eq!(out.iterations_used, 1);
            assert_eq!(out.bits, c);
        }
    }

    #[test]
    fn random_signs_do_not_converge() {
        let code = LdpcCode::load("ldpc_400_100").unwrap();
        let mut dec = BpDecoder::new(code.matrix.clone(), BpVariant::SumProduct);
        let mut rng = RngStream::new(2, 0).rng();
        for _ in 0..20 {
            let llr: Vec<f64> = (0..400).map(|_| if rng.random::<bool>() { 20.0 } else { -20.0 }).collect();
            let out = dec.decode(&llr, 50);
            assert!(!out.converged);
            assert!(!code.matrix.syndrome_is_zero(&out.bits));
        }
    }

    #[test]
    fn tree_code_marginals_match_enumeration() {
        // Tanner graph is a tree: c0-{v0,v1}, c1-{v1,v2,v3}, c2-{v3,v4}
        let h = ParityCheckMatrix::from_rows(5, vec![vec![0, 1], vec![1, 2, 3], vec![3, 4]]).unwrap();
        let words: Vec<Vec<u8>> = (0u8..32)
            .map(|w| (0..5).map(|i| (w >> i) & 1).collect::<Vec<u8>>())
            .filter(|w| h.syndrome_is_zero(w))
            .collect();
        assert!(words.len() <= 16);
        let mut dec = BpDecoder::new(Arc::new(h), BpVariant::SumProduct).without_early_stop();
        let mut rng = RngStream::new(3, 0).rng();
        for _ in 0..50 {
            let llr: Vec<f64> = (0..5).map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            let out = dec.decode(&llr, 10);
            for v in 0..5 {
                let score = |w: &Vec<u8>| -> f64 { (0..5).map(|i| if w[i] == 0 { 0.5 * llr[i] } else { -0.5 * llr[i] }).sum() };
                let zero: Vec<f64> = words.iter().filter(|w| w[v] == 0).map(score).collect();
                let one: Vec<f64> = words.iter().filter(|w| w[v] == 1).map(score).collect();
                let exact = log_sum_exp(&zero) - log_sum_exp(&one);
                assert!((out.llrs[v] - exact).abs() < 1e-9, "{} vs {}", out.llrs[v], exact);
            }
        }
    }

    #[test]
    fn fer_monotone_in_snr_on_biawgn() {
        let code = LdpcCode::load("ldpc_128_64").unwrap();
        let mut dec = BpDecoder::new(code.matrix.clone(), BpVariant::SumProduct);
        let frames = 1000;
        let mut fers = Vec::new();
        for (i, snr_db) in [0.0, 1.0, 2.0, 3.0, 4.0, 5.0].iter().enumerate() {
            let mut rng = RngStream::new(4, i as u64).rng();
            let p = 10f64.powf(snr_db / 10.0);
            let sigma2: f64 = 0.5;
            let mut errors = 0;
            for _ in 0..frames {
                let msg: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2u8)).collect();
                let c = code.encoder.encode(&msg).unwrap();
                let x = bpsk_map(&c, p).unwrap();
                let llr: Vec<f64> = x
                    .samples()
                    .iter()
                    .map(|s| {
                        let y = s.re + sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal);
                        2.0 * p.sqrt() * y / sigma2
                    })
                    .collect();
                let out = dec.decode(&llr, 50);
                errors += (out.bits != c) as usize;
            }
            fers.push(errors as f64 / frames as f64);
        }
        let mut inversions = 0;
        for w in fers.windows(2) {
            if w[1] > w[0] {
                let se = ((w[0] * (1.0 - w[0]) + w[1] * (1.0 - w[1])) / frames as f64).sqrt();
                assert!(w[1] - w[0] <= 2.0 * se, "{fers:?}");
                inversions += 1;
            }
        }
        assert!(inversions <= 1, "{fers:?}");
        assert!(fers[0] > fers[5]);
    }

    proptest! {
        #[test]
        fn min_sum_is_scale_invariant(seed in 0u64..5000, scale in 0.05f64..0.6) {
            let code = LdpcCode::load("ldpc_32_16").unwrap();
            let mut rng = RngStream::new(seed, 0).rng();
            let llr: Vec<f64> = (0..32).map(|_| 1.0 + 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            let scaled: Vec<f64> = llr.iter().map(|x| x * scale).collect();
            let mut dec = BpDecoder::new(code.matrix.clone(), BpVariant::MinSum);
            let a = dec.decode(&llr, 20);
            let b = dec.decode(&scaled, 20);
            prop_assert_eq!(a.bits, b.bits);
            prop_assert_eq!(a.converged, b.converged);
        }

        #[test]
        fn converged_implies_zero_syndrome(seed in 0u64..5000, noise in 0.1f64..2.0) {
            let code = LdpcCode::load("ldpc_32_16").unwrap();
            let mut rng = RngStream::new(seed, 1).rng();
            let msg: Vec<u8> = (0..16).map(|_| rng.random_range(0..2u8)).collect();
            let c = code.encoder.encode(&msg).unwrap();
            let llr: Vec<f64> = c.iter().map(|&b| (if b == 0 { 2.0 } else { -2.0 }) + noise * 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
            let out = BpDecoder::new(code.matrix.clone(), BpVariant::SumProduct).decode(&llr, 30);
            if out.converged {
                prop_assert!(code.matrix.syndrome_is_zero(&out.bits));
            }
        }
    }
}
