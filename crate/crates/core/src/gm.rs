//! One-dimensional Gaussian mixtures with log-domain weights.
//!
//! Used as posteriors for the real and imaginary parts of fading coefficients.

use crate::error::{invalid, Error, Result};
use crate::numerics::log_sum_exp;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    /// Natural log of the component weight.
    pub log_weight: f64,
    pub mean: f64,
    pub var: f64,
}

impl GaussianComponent {
    pub fn new(weight: f64, mean: f64, var: f64) -> Self {
        Self { log_weight: weight.ln(), mean, var }
    }

    pub fn weight(&self) -> f64 {
        self.log_weight.exp()
    }

    fn log_pdf(&self, x: f64) -> f64 {
        -0.5 * (2.0 * PI * self.var).ln() - 0.5 * (x - self.mean).powi(2) / self.var
    }
}

/// Mixture reduction and sampling parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GmConfig {
    pub max_components: usize,
    pub merge_distance: f64,
    pub prune_cum_weight: f64,
    pub sample_count: usize,
}

impl Default for GmConfig {
    fn default() -> Self {
        Self { max_components: 500, merge_distance: 1.0, prune_cum_weight: 1e-3, sample_count: 20 }
    }
}

impl GmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_components == 0 {
            return Err(invalid("max_components must be at least 1"));
        }
        if !(self.merge_distance >= 0.0) {
            return Err(invalid("merge_distance must be nonnegative"));
        }
        if !(0.0..1.0).contains(&self.prune_cum_weight) {
            return Err(invalid("prune_cum_weight must lie in [0,1)"));
        }
        if self.sample_count == 0 {
            return Err(invalid("sample_count must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<GaussianComponent>,
}

impl GaussianMixture {
    /// Builds and normalizes a mixture; components with zero weight are dropped.
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        for c in &components {
            if !(c.var > 0.0) || !c.var.is_finite() || !c.mean.is_finite() || c.log_weight.is_nan() {
                return Err(invalid("mixture components need finite means and positive variances"));
            }
        }
        let mut m = Self { components };
        m.normalize()?;
        Ok(m)
    }

    /// Convenience constructor from `(weight, mean, variance)` triples.
    pub fn from_triples(triples: &[(f64, f64, f64)]) -> Result<Self> {
        Self::new(triples.iter().map(|&(w, m, v)| GaussianComponent::new(w, m, v)).collect())
    }

    pub fn gaussian(mean: f64, var: f64) -> Self {
        Self { components: vec![GaussianComponent { log_weight: 0.0, mean, var }] }
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn weights(&self) -> Vec<f64> {
        self.components.iter().map(|c| c.weight()).collect()
    }

    fn normalize(&mut self) -> Result<()> {
        self.components.retain(|c| c.log_weight > f64::NEG_INFINITY);
        if self.components.is_empty() {
            return Err(Error::DegenerateProduct);
        }
        let lw: Vec<f64> = self.components.iter().map(|c| c.log_weight).collect();
        let total = log_sum_exp(&lw);
        if !total.is_finite() {
            return Err(Error::DegenerateProduct);
        }
        for c in self.components.iter_mut() {
            c.log_weight -= total;
        }
        Ok(())
    }

    pub fn density(&self, x: f64) -> f64 {
        self.components.iter().map(|c| (c.log_weight + c.log_pdf(x)).exp()).sum()
    }

    pub fn log_density(&self, x: f64) -> f64 {
        let v: Vec<f64> = self.components.iter().map(|c| c.log_weight + c.log_pdf(x)).collect();
        log_sum_exp(&v)
    }

    /// Exact mixture mean and variance.
    pub fn moments(&self) -> (f64, f64) {
        let mean: f64 = self.components.iter().map(|c| c.weight() * c.mean).sum();
        let second: f64 = self.components.iter().map(|c| c.weight() * (c.var + c.mean * c.mean)).sum();
        (mean, (second - mean * mean).max(0.0))
    }

    /// Density of the sum of independent variables.
    pub fn convolve(&self, other: &GaussianMixture) -> GaussianMixture {
        let mut out = Vec::with_capacity(self.len() * other.len());
        for a in &self.components {
            for b in &other.components {
                out.push(GaussianComponent {
                    log_weight: a.log_weight + b.log_weight,
                    mean: a.mean + b.mean,
                    var: a.var + b.var,
                });
            }
        }
        let mut m = GaussianMixture { components: out };
        m.normalize().expect("convolution of normalized mixtures keeps its mass");
        m
    }

    /// Normalized pointwise product of two densities.
    pub fn multiply(&self, other: &GaussianMixture) -> Result<GaussianMixture> {
        let mut out = Vec::with_capacity(self.len() * other.len());
        for a in &self.components {
            for b in &other.components {
                let s = a.var + b.var;
                let var = a.var * b.var / s;
                let mean = var * (a.mean / a.var + b.mean / b.var);
                let log_norm = -0.5 * (2.0 * PI * s).ln() - 0.5 * (a.mean - b.mean).powi(2) / s;
                out.push(GaussianComponent { log_weight: a.log_weight + b.log_weight + log_norm, mean, var });
            }
        }
        let mut m = GaussianMixture { components: out };
        m.normalize()?;
        Ok(m)
    }

    /// Density of `scale * X + shift`.
    pub fn affine(&self, scale: f64, shift: f64) -> Result<GaussianMixture> {
        if scale == 0.0 || !scale.is_finite() || !shift.is_finite() {
            return Err(invalid("affine map needs a finite nonzero scale"));
        }
        Ok(GaussianMixture {
            components: self
                .components
                .iter()
                .map(|c| GaussianComponent { log_weight: c.log_weight, mean: scale * c.mean + shift, var: scale * scale * c.var })
                .collect(),
        })
    }

    /// Density of `X * B` where `B = +scale` with probability `p_plus` and `-scale` otherwise.
    pub fn mix_binary(&self, p_plus: f64, scale: f64) -> GaussianMixture {
        let p = p_plus.clamp(0.0, 1.0);
        self.mix_binary_log(p.ln(), (1.0 - p).ln(), scale)
    }

    /// [`Self::mix_binary`] parameterized by the LLR `ln(p_plus / p_minus)`.
    pub fn mix_binary_llr(&self, llr: f64, scale: f64) -> GaussianMixture {
        let lp = -softplus(-llr);
        let lm = -softplus(llr);
        self.mix_binary_log(lp, lm, scale)
    }

    fn mix_binary_log(&self, log_plus: f64, log_minus: f64, scale: f64) -> GaussianMixture {
        let mut out = Vec::with_capacity(2 * self.len());
        for (lb, s) in [(log_plus, scale), (log_minus, -scale)] {
            if lb == f64::NEG_INFINITY {
                continue;
            }
            for c in &self.components {
                out.push(GaussianComponent { log_weight: c.log_weight + lb, mean: s * c.mean, var: scale * scale * c.var });
            }
        }
        let mut m = GaussianMixture { components: out };
        m.normalize().expect("at least one branch carries mass");
        m
    }

    /// Drops the lightest components whose cumulative weight stays below the threshold.
    pub fn prune(&self, cfg: &GmConfig) -> GaussianMixture {
        if self.len() <= 1 || cfg.prune_cum_weight <= 0.0 {
            return self.clone();
        }
        let mut comps = self.components.clone();
        comps.sort_by(|a, b| a.log_weight.total_cmp(&b.log_weight));
        let mut cum = 0.0;
        let mut cut = 0;
        while cut < comps.len() - 1 {
            let next = cum + comps[cut].weight();
            if next >= cfg.prune_cum_weight {
                break;
            }
            cum = next;
            cut += 1;
        }
        let mut m = GaussianMixture { components: comps.split_off(cut) };
        m.normalize().expect("survivors carry mass");
        m
    }

    /// Greedy moment-matching merge from the heaviest component down, then a hard cap.
    pub fn merge(&self, cfg: &GmConfig) -> GaussianMixture {
        let mut comps = self.components.clone();
        comps.sort_by(|a, b| b.log_weight.total_cmp(&a.log_weight));
        let mut used = vec![false; comps.len()];
        let mut out = Vec::with_capacity(comps.len());
        let mut group: Vec<usize> = Vec::new();
        for i in 0..comps.len() {
            if used[i] {
                continue;
            }
            let head = comps[i];
            group.clear();
            for j in i..comps.len() {
                if !used[j] && (head.mean - comps[j].mean).powi(2) <= cfg.merge_distance * head.var {
                    used[j] = true;
                    group.push(j);
                }
            }
            if group.len() == 1 {
                out.push(head);
                continue;
            }
            let lw: Vec<f64> = group.iter().map(|&j| comps[j].log_weight).collect();
            let log_w = log_sum_exp(&lw);
            let rel: Vec<f64> = lw.iter().map(|l| (l - log_w).exp()).collect();
            let mean: f64 = group.iter().zip(&rel).map(|(&j, r)| r * comps[j].mean).sum();
            let var: f64 = group
                .iter()
                .zip(&rel)
                .map(|(&j, r)| r * (comps[j].var + (comps[j].mean - mean).powi(2)))
                .sum();
            out.push(GaussianComponent { log_weight: log_w, mean, var });
        }
        if out.len() > cfg.max_components {
            out.sort_by(|a, b| b.log_weight.total_cmp(&a.log_weight));
            out.truncate(cfg.max_components);
        }
        let mut m = GaussianMixture { components: out };
        m.normalize().expect("merge preserves mass");
        m
    }

    /// Prune, then merge with the hard component cap.
    pub fn reduce(&self, cfg: &GmConfig) -> GaussianMixture {
        self.prune(cfg).merge(cfg)
    }

    /// Ancestral sampling.
    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Vec<f64> {
        let w = self.weights();
        (0..count)
            .map(|_| {
                let mut u: f64 = rng.random();
                let mut idx = w.len() - 1;
                for (i, wi) in w.iter().enumerate() {
                    if u < *wi {
                        idx = i;
                        break;
                    }
                    u -= wi;
                }
                let c = &self.components[idx];
                let z: f64 = rng.sample(StandardNormal);
                c.mean + c.var.sqrt() * z
            })
            .collect()
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Total-variation distance between two mixtures, by trapezoid quadrature on a covering grid.
pub fn total_variation(a: &GaussianMixture, b: &GaussianMixture, points: usize) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for c in a.components().iter().chain(b.components()) {
        let s = c.var.sqrt();
        lo = lo.min(c.mean - 10.0 * s);
        hi = hi.max(c.mean + 10.0 * s);
    }
    let h = (hi - lo) / (points - 1) as f64;
    let mut acc = 0.0;
    for i in 0..points {
        let x = lo + i as f64 * h;
        let w = if i == 0 || i == points - 1 { 0.5 } else { 1.0 };
        acc += w * (a.density(x) - b.density(x)).abs();
    }
    0.5 * acc * h
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn convolve_single_components() {
        let a = GaussianMixture::gaussian(0.0, 1.0);
        let c = a.convolve(&a);
        assert_eq!(c.len(), 1);
        assert!(close(c.components()[0].mean, 0.0, 0.0) && close(c.components()[0].var, 2.0, 0.0));
        let c = GaussianMixture::gaussian(1.5, 0.3).convolve(&GaussianMixture::gaussian(-0.5, 2.0));
        assert!(close(c.components()[0].mean, 1.0, 1e-15) && close(c.components()[0].var, 2.3, 1e-15));
        assert!(close(c.components()[0].weight(), 1.0, 1e-15));
    }

    #[test]
    fn multiply_standard_normals() {
        let a = GaussianMixture::gaussian(0.0, 1.0);
        let c = a.multiply(&a).unwrap();
        assert!(close(c.components()[0].mean, 0.0, 1e-15) && close(c.components()[0].var, 0.5, 1e-15));
        // pre-normalization weight equals the integral of the density product
        let h = 1e-3;
        let integral: f64 = (-10_000..=10_000)
            .map(|i| {
                let x = i as f64 * h;
                a.density(x).powi(2)
            })
            .sum::<f64>()
            * h;
        assert!(close(integral, 1.0 / (4.0 * PI).sqrt(), 1e-10));
        let b = GaussianMixture::gaussian(2.5, 0.7);
        assert!(close(b.multiply(&b).unwrap().components()[0].mean, 2.5, 1e-14));
    }

    #[test]
    fn far_product_component_is_pruned() {
        let s = 1.0f64 + 1.0;
        let a = GaussianMixture::from_triples(&[(0.5, 0.0, 1.0), (0.5, 20.0 * s.sqrt(), 1.0)]).unwrap();
        let b = GaussianMixture::gaussian(0.0, 1.0);
        let p = a.multiply(&b).unwrap();
        let w = p.weights();
        assert!(w.iter().cloned().fold(1.0, f64::min) < 1e-80);
        assert_eq!(p.prune(&GmConfig::default()).len(), 1);
    }

    #[test]
    fn affine_examples() {
        let a = GaussianMixture::from_triples(&[(1.0, 3.0, 2.0)]).unwrap();
        let r = a.affine(-1.0, 0.0).unwrap();
        assert_eq!((r.components()[0].mean, r.components()[0].var), (-3.0, 2.0));
        let p: f64 = 3.7;
        let m = GaussianMixture::from_triples(&[(0.3, 1.0, 0.5), (0.7, -2.0, 1.5)]).unwrap();
        let back = m.affine(p.sqrt(), 0.0).unwrap().affine(1.0 / p.sqrt(), 0.0).unwrap();
        for (x, y) in back.components().iter().zip(m.components()) {
            assert!(close(x.mean, y.mean, 1e-14) && close(x.var, y.var, 1e-14));
        }
        assert!(a.affine(0.0, 1.0).is_err());
    }

    #[test]
    fn mix_binary_edges() {
        let a = GaussianMixture::from_triples(&[(0.4, 1.0, 0.5), (0.6, -0.3, 1.2)]).unwrap();
        let m = a.mix_binary(1.0, 2.0);
        assert_eq!(m, a.affine(2.0, 0.0).unwrap());
        let s = GaussianMixture::gaussian(0.0, 1.0).mix_binary(0.5, 1.0);
        for x in [0.3, 1.7, 4.0] {
            assert!(close(s.density(x), s.density(-x), 1e-15));
        }
        let via_llr = a.mix_binary_llr((0.3f64 / 0.7).ln(), 1.3);
        let direct = a.mix_binary(0.3, 1.3);
        for x in [-2.0, 0.0, 0.4, 3.0] {
            assert!(close(via_llr.density(x), direct.density(x), 1e-14));
        }
    }

    #[test]
    fn prune_examples() {
        let cfg = GmConfig::default();
        let m = GaussianMixture::from_triples(&[(0.9995, 0.0, 1.0), (0.0004, 3.0, 1.0), (0.0001, -3.0, 1.0)]).unwrap();
        let p = m.prune(&cfg);
        assert_eq!(p.len(), 1);
        assert!(close(p.components()[0].weight(), 1.0, 1e-15));
        let zero = GmConfig { prune_cum_weight: 0.0, ..cfg };
        assert_eq!(m.prune(&zero), m);
        let single = GaussianMixture::gaussian(1.0, 2.0);
        assert_eq!(single.prune(&GmConfig { prune_cum_weight: 0.99, ..cfg }), single);
    }

    #[test]
    fn merge_examples() {
        let cfg = GmConfig::default();
        let m = GaussianMixture::from_triples(&[(0.5, 1.0, 2.0), (0.5, 1.0, 2.0)]).unwrap().merge(&cfg);
        assert_eq!(m.len(), 1);
        assert!(close(m.components()[0].mean, 1.0, 1e-15) && close(m.components()[0].var, 2.0, 1e-15));
        let m = GaussianMixture::from_triples(&[(0.5, 0.0, 1.0), (0.5, 0.1, 1.0)]).unwrap().merge(&cfg);
        let c = m.components()[0];
        assert!(close(c.weight(), 1.0, 1e-15) && close(c.mean, 0.05, 1e-15) && close(c.var, 1.0025, 1e-14));
        let apart = GaussianMixture::from_triples(&[(0.5, 0.0, 1.0), (0.5, 1.5, 1.0)]).unwrap().merge(&cfg);
        assert_eq!(apart.len(), 2);
    }

    #[test]
    fn hard_cap_keeps_heaviest() {
        let cfg = GmConfig { max_components: 2, merge_distance: 0.0, ..GmConfig::default() };
        let m = GaussianMixture::from_triples(&[(0.5, 0.0, 0.1), (0.3, 5.0, 0.1), (0.2, 10.0, 0.1)]).unwrap().merge(&cfg);
        assert_eq!(m.len(), 2);
        assert!(m.components().iter().all(|c| c.mean < 6.0));
    }

    #[test]
    fn sampling_and_moments() {
        let (mean, var) = GaussianMixture::from_triples(&[(0.5, -1.0, 1.0), (0.5, 1.0, 1.0)]).unwrap().moments();
        assert!(close(mean, 0.0, 1e-15) && close(var, 2.0, 1e-14));
        let mut rng = RngStream::new(11, 0).rng();
        let eps = 1e-10;
        let s = GaussianMixture::gaussian(2.0, eps).sample(1000, &mut rng);
        assert!(s.iter().all(|x| (x - 2.0).abs() < 6.0 * eps.sqrt()));
        let m = GaussianMixture::from_triples(&[(0.2, -3.0, 0.5), (0.8, 1.0, 2.0)]).unwrap();
        let (mu, v) = m.moments();
        let n = 100_000;
        let xs = m.sample(n, &mut rng);
        let emp = xs.iter().sum::<f64>() / n as f64;
        assert!((emp - mu).abs() < 3.0 * (v / n as f64).sqrt());
    }

    #[test]
    fn tiny_weights_do_not_produce_nan() {
        let m = GaussianMixture::new(vec![
            GaussianComponent { log_weight: -700.0, mean: 0.0, var: 1.0 },
            GaussianComponent { log_weight: -699.0, mean: 1.0, var: 1.0 },
        ])
        .unwrap();
        assert!(m.weights().iter().all(|w| w.is_finite() && *w > 0.0));
        let p = m.multiply(&m).unwrap();
        assert!(p.components().iter().all(|c| c.log_weight.is_finite()));
    }

    #[test]
    fn degenerate_product_reported() {
        let a = GaussianMixture::gaussian(0.0, 1e-300);
        let b = GaussianMixture::gaussian(1e200, 1e-300);
        assert!(matches!(a.multiply(&b), Err(Error::DegenerateProduct)));
    }
}
