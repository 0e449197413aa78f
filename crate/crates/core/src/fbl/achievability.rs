use super::projection::max_projection_g;
use crate::channel::{complex_normal, random_codeword, CodebookKind};
use crate::error::{invalid, Error, Result};
use crate::numerics::{ln_binom, q_func};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::f64::consts::LN_2;

/// Parameters of the projection-decoder random-coding bound for one slot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FblParams {
    /// Block length.
    pub n: usize,
    /// `log2` of the codebook size.
    pub log2_m: f64,
    /// Transmitting users.
    pub k2: usize,
    /// Decoded list size.
    pub k1: usize,
    /// Power constraint per symbol.
    pub power: f64,
    /// Generation variance per symbol (gaussian codebooks).
    pub design_power: f64,
    pub kind: CodebookKind,
}

impl FblParams {
    /// Spherical codebook with `k1 = k2 = r`.
    pub fn spherical_slot(n: usize, log2_m: f64, r: usize, power: f64) -> Self {
        Self { n, log2_m, k2: r, k1: r, power, design_power: power, kind: CodebookKind::Spherical }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k2 == 0 || self.k1 == 0 || self.k1 > self.k2 {
            return Err(invalid("need 1 <= k1 <= k2"));
        }
        if self.n <= self.k1 {
            return Err(invalid("block length must exceed k1"));
        }
        if !(self.power > 0.0 && self.design_power > 0.0 && self.design_power <= self.power) {
            return Err(invalid("need 0 < design_power <= power"));
        }
        if self.log2_m < (self.k2 as f64).log2() {
            return Err(invalid("codebook must hold at least k2 codewords"));
        }
        Ok(())
    }

    fn ln_m(&self) -> f64 {
        self.log2_m * LN_2
    }

    /// `K_{1,t} = k2 - k1 + t`.
    pub fn k1t(&self, t: usize) -> usize {
        self.k2 - self.k1 + t
    }

    fn ln_m_minus_k2_choose_t(&self, t: usize) -> f64 {
        let m = 2f64.powf(self.log2_m);
        if self.log2_m > 40.0 {
            // M - k2 is M to double precision
            let mut s = 0.0;
            for i in 0..t {
                s += self.ln_m() + (1.0 - (self.k2 + i) as f64 / m).ln() - ((i + 1) as f64).ln();
            }
            s
        } else {
            ln_binom(m - self.k2 as f64, t as f64)
        }
    }
}

/// `V_{n,t}(δ) = exp(-(δ + R₁ + s_t))`.
pub fn threshold_v(params: &FblParams, t: usize, delta: f64) -> f64 {
    let denom = (params.n - params.k1) as f64;
    let r1 = params.ln_m_minus_k2_choose_t(t) / denom;
    let n_prime = (params.n - params.k1 + t) as f64;
    let s_t = ln_binom(n_prime - 1.0, (t - 1) as f64) / denom;
    (-(delta + r1 + s_t)).exp()
}

/// Monte-Carlo draws of `max_{S0} G` for every `t = 1..=k1`; `stats[t-1][s]`.
pub fn sample_projection_stats<R: Rng + ?Sized>(params: &FblParams, samples: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
    params.validate()?;
    let n = params.n;
    let mut stats = vec![Vec::with_capacity(samples); params.k1];
    for _ in 0..samples {
        let codewords: Vec<Vec<Complex64>> = (0..params.k2)
            .map(|_| random_codeword(n, params.power, params.design_power, params.kind, rng).0)
            .collect();
        let h: Vec<Complex64> = (0..params.k2).map(|_| complex_normal(rng, 1.0)).collect();
        let y: Vec<Complex64> = (0..n)
            .map(|i| complex_normal(rng, 1.0) + (0..params.k2).map(|j| h[j] * codewords[j][i]).sum::<Complex64>())
            .collect();
        for t in 1..=params.k1 {
            stats[t - 1].push(max_projection_g(&y, &codewords, params.k1, t)?);
        }
    }
    Ok(stats)
}

/// Gaussian kernel smoothing of samples in `[0, 1]` on the logit scale.
#[derive(Debug, Clone)]
pub struct LogitKde {
    points: Vec<f64>,
    bandwidth: f64,
}

const LOGIT_CLAMP: f64 = 1e-12;

fn logit(x: f64) -> f64 {
    let x = x.clamp(LOGIT_CLAMP, 1.0 - LOGIT_CLAMP);
    (x / (1.0 - x)).ln()
}

impl LogitKde {
    /// Silverman's rule of thumb on the logit-transformed samples.
    pub fn new(samples: &[f64]) -> Result<Self> {
        if samples.len() < 2 {
            return Err(invalid("kernel estimate needs at least two samples"));
        }
        let mut points: Vec<f64> = samples.iter().map(|&g| logit(g)).collect();
        points.sort_by(f64::total_cmp);
        let n = points.len() as f64;
        let mean = points.iter().sum::<f64>() / n;
        let sd = (points.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let q = |f: f64| points[((n - 1.0) * f).round() as usize];
        let iqr = q(0.75) - q(0.25);
        let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
        let bandwidth = (0.9 * spread * n.powf(-0.2)).max(1e-6);
        Ok(Self { points, bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Smoothed `P{G >= v}`.
    pub fn survival(&self, v: f64) -> f64 {
        if v <= 0.0 {
            return 1.0;
        }
        if v >= 1.0 {
            return 0.0;
        }
        let lv = logit(v);
        self.points.iter().map(|&p| q_func((lv - p) / self.bandwidth)).sum::<f64>() / self.points.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtBound {
    pub value: f64,
    pub delta: f64,
}

fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

/// Grid minimization with one refinement pass between the neighbours of the best point.
fn minimize_on_log_grid(lo: f64, hi: f64, mut f: impl FnMut(f64) -> f64) -> (f64, f64) {
    let grid = log_grid(lo, hi, 64);
    let vals: Vec<f64> = grid.iter().map(|&x| f(x)).collect();
    let best = (0..grid.len()).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).expect("nonempty grid");
    let (a, b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);
    let mut out = (grid[best], vals[best]);
    for x in log_grid(a, b, 64) {
        let v = f(x);
        if v < out.1 {
            out = (x, v);
        }
    }
    out
}

/// Kernel-smoothed Monte-Carlo bound on `p_t` from precomputed statistics.
pub fn achievability_pt_mc(params: &FblParams, t: usize, stats: &[f64]) -> Result<PtBound> {
    params.validate()?;
    if t == 0 || t > params.k1 {
        return Err(invalid("t must lie in 1..=k1"));
    }
    let kde = LogitKde::new(stats)?;
    let ln_c = ln_binom(params.k2 as f64, params.k1t(t) as f64);
    let m = (params.n - params.k1) as f64;
    let (delta, value) = minimize_on_log_grid(1e-7, 20.0, |d| {
        ((ln_c - m * d).exp() + kde.survival(threshold_v(params, t, d))).min(1.0)
    });
    Ok(PtBound { value, delta })
}

/// `p_0`: message collisions plus power-clipping of gaussian codewords.
fn p0(params: &FblParams) -> f64 {
    let k2 = params.k2 as f64;
    let coll = (k2 * (k2 - 1.0) / 2.0) * (-params.ln_m()).exp();
    match params.kind {
        CodebookKind::Spherical => coll,
        CodebookKind::Gaussian => {
            let n = params.n as f64;
            let chi = ChiSquared::new(2.0 * n).expect("positive degrees of freedom");
            coll + k2 * chi.sf(2.0 * n * params.power / params.design_power)
        }
    }
}

/// Per-user error bound from `p_t`, `t = 1..=k1`; clipped to `[0, 1]`.
pub fn achievability_pupe(params: &FblParams, pt: &[f64]) -> Result<f64> {
    params.validate()?;
    if pt.len() != params.k1 {
        return Err(invalid("need one p_t per t = 1..=k1"));
    }
    let k2 = params.k2 as f64;
    let mut eps = (params.k2 - params.k1) as f64 / k2 + p0(params);
    for (i, &p) in pt.iter().enumerate() {
        eps += params.k1t(i + 1) as f64 * p / k2;
    }
    Ok(eps.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotBound {
    pub pupe: f64,
    pub per_t: Vec<PtBound>,
}

/// Kernel-smoothed Monte-Carlo bound on the slot per-user error.
pub fn slot_error_bound_mc<R: Rng + ?Sized>(params: &FblParams, samples: usize, rng: &mut R) -> Result<SlotBound> {
    let stats = sample_projection_stats(params, samples, rng)?;
    let per_t: Vec<PtBound> = (1..=params.k1).map(|t| achievability_pt_mc(params, t, &stats[t - 1])).collect::<Result<_>>()?;
    let pts: Vec<f64> = per_t.iter().map(|p| p.value).collect();
    Ok(SlotBound { pupe: achievability_pupe(params, &pts)?, per_t })
}

/// The exponent term in the analytic bound; nonnegative for `δ₁ >= 0`.
pub fn f_n(v: f64, delta1: f64) -> f64 {
    let c = 2.0 * v / (1.0 - v);
    let a = 1.0 + c * (1.0 + delta1);
    delta1 + a - a.sqrt() * (2.0 * delta1 + a).sqrt()
}

/// Sorted per-draw values of the fading-only statistic
/// `min_i P'Σ_{j=i}^{i+t-1} G_(j) / (1 + P'Σ_{j=i+t}^{K_{1,t}-1+i} G_(j))`.
#[derive(Debug, Clone)]
pub struct OrderStatistics {
    sorted: Vec<f64>,
}

impl OrderStatistics {
    pub fn sample<R: Rng + ?Sized>(params: &FblParams, t: usize, draws: usize, rng: &mut R) -> Self {
        let k1t = params.k1t(t);
        let p = params.design_power;
        let mut sorted = Vec::with_capacity(draws);
        let mut g = vec![0.0f64; params.k2];
        for _ in 0..draws {
            for gi in g.iter_mut() {
                *gi = Exp1.sample(rng);
            }
            g.sort_by(|a, b| b.total_cmp(a));
            let mut best = f64::INFINITY;
            for i in 1..=params.k1 - t + 1 {
                let num: f64 = g[i - 1..i - 1 + t].iter().sum::<f64>() * p;
                let den = 1.0 + p * g[i - 1 + t..k1t - 1 + i].iter().sum::<f64>();
                best = best.min(num / den);
            }
            sorted.push(best);
        }
        sorted.sort_by(f64::total_cmp);
        Self { sorted }
    }

    /// Empirical `P{statistic <= x}`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.sorted.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtAnalytic {
    pub value: f64,
    pub delta: f64,
    pub delta1: f64,
    pub delta2: f64,
}

/// Analytic bound on `p_t` for gaussian codebooks, minimized over `(δ, δ₁, δ₂)`.
pub fn achievability_pt_analytic(params: &FblParams, t: usize, order: &OrderStatistics) -> Result<PtAnalytic> {
    params.validate()?;
    if t == 0 || t > params.k1 {
        return Err(invalid("t must lie in 1..=k1"));
    }
    let ln_c = ln_binom(params.k2 as f64, params.k1t(t) as f64);
    let m = (params.n - params.k1) as f64;
    let n_prime = (params.n - params.k1 + t) as f64;
    let eval = |d: f64, d1: f64, d2: f64| -> f64 {
        let v = threshold_v(params, t, d);
        let thr = ((1.0 + d1 * (1.0 - v)) / v - 1.0) / (1.0 - d2);
        let terms = (-m * d).exp() + (-n_prime * f_n(v, d1)).exp() + (-n_prime * d2 * d2 / 2.0).exp();
        (ln_c.exp() * terms + order.cdf(thr)).min(1.0)
    };
    let deltas = log_grid(1e-7, 20.0, 64);
    let deltas1 = log_grid(1e-7, 50.0, 64);
    let deltas2 = log_grid(1e-5, 0.999, 64);
    let mut best = PtAnalytic { value: f64::INFINITY, delta: 0.0, delta1: 0.0, delta2: 0.0 };
    for &d in &deltas {
        for &d1 in &deltas1 {
            for &d2 in &deltas2 {
                let v = eval(d, d1, d2);
                if v < best.value {
                    best = PtAnalytic { value: v, delta: d, delta1: d1, delta2: d2 };
                }
            }
        }
    }
    if !best.value.is_finite() {
        return Err(Error::Infeasible("analytic bound grid has no finite value".into()));
    }
    // one coordinate-wise refinement pass
    let (d1, d2) = (best.delta1, best.delta2);
    let (d, _) = minimize_on_log_grid(best.delta / 2.0, best.delta * 2.0, |x| eval(x, d1, d2));
    let (d1, _) = minimize_on_log_grid(d1 / 2.0, d1 * 2.0, |x| eval(d, x, d2));
    let (d2, v) = minimize_on_log_grid(d2 / 2.0, (d2 * 2.0).min(0.9999), |x| eval(d, d1, x));
    if v < best.value {
        best = PtAnalytic { value: v, delta: d, delta1: d1, delta2: d2 };
    }
    Ok(best)
}
