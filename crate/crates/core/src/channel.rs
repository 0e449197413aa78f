//! Complex-baseband quasi-static Rayleigh fading MAC.
//!
//! `Y = Σ H_i X_i + Z` with `H_i, Z_j ~ CN(0,1)` independent. All powers are
//! per complex symbol.

use crate::error::{invalid, Result};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};


/// Draw from `CN(0, variance)`.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let s = (0.5 * variance).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// A finite, nonempty vector of complex baseband samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSignal(Vec<Complex64>);

impl ComplexSignal {
    pub fn new(samples: Vec<Complex64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(invalid("signal must have positive length"));
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(invalid("signal samples must be finite"));
        }
        Ok(Self(samples))
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); len])
    }

    /// Real-valued samples placed on the in-phase axis.
    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.0
    }

    /// Squared Euclidean norm.
    pub fn energy(&self) -> f64 {
        self.0.iter().map(|s| s.norm_sqr()).sum()
    }

    pub fn scaled(&self, factor: Complex64) -> ComplexSignal {
        ComplexSignal(self.0.iter().map(|s| s * factor).collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodebookKind {
    Gaussian,
    Spherical,
}

#[derive(Debug, Clone)]
pub struct Codebook {
    pub codewords: Vec<ComplexSignal>,
    /// Per-symbol power budget `P`.
    pub power: f64,
    /// Per-symbol generation variance `P'`.
    pub design_power: f64,
    pub kind: CodebookKind,
    /// Number of Gaussian codewords that exceeded `n P` and were replaced by zero.
    pub clipped: usize,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    pub fn block_length(&self) -> usize {
        self.codewords[0].len()
    }
}

/// One codeword of length `n1` drawn from the given ensemble.
pub fn random_codeword<R: Rng + ?Sized>(
    n1: usize,
    power: f64,
    design_power: f64,
    kind: CodebookKind,
    rng: &mut R,
) -> (Vec<Complex64>, bool) {
    match kind {
        CodebookKind::Spherical => {
            let mut v: Vec<Complex64> = (0..n1).map(|_| complex_normal(rng, 1.0)).collect();
            let norm = v.iter().map(|s| s.norm_sqr()).sum::<f64>().sqrt();
            let target = (n1 as f64 * power).sqrt();
            v.iter_mut().for_each(|s| *s *= target / norm);
            (v, false)
        }
        CodebookKind::Gaussian => {
            let v: Vec<Complex64> = (0..n1).map(|_| complex_normal(rng, design_power)).collect();
            let e: f64 = v.iter().map(|s| s.norm_sqr()).sum();
            if e > n1 as f64 * power {
                (vec![Complex64::new(0.0, 0.0); n1], true)
            } else {
                (v, false)
            }
        }
    }
}

pub fn generate_codebook<R: Rng + ?Sized>(
    m: usize,
    n1: usize,
    power: f64,
    design_power: f64,
    kind: CodebookKind,
    rng: &mut R,
) -> Result<Codebook> {
    if m == 0 || n1 == 0 {
        return Err(invalid("codebook size and block length must be positive"));
    }
    if !(power > 0.0) || !power.is_finite() {
        return Err(invalid("power must be positive"));
    }
    match kind {
        CodebookKind::Gaussian if !(design_power > 0.0 && design_power <= power) => {
            return Err(invalid("gaussian codebooks need 0 < design_power <= power"))
        }
        CodebookKind::Spherical if (design_power - power).abs() > 1e-12 * power => {
            return Err(invalid("spherical codebooks need design_power = power"))
        }
        _ => {}
    }
    let mut codewords = Vec::with_capacity(m);
    let mut clipped = 0;
    for _ in 0..m {
        let (c, clip) = random_codeword(n1, power, design_power, kind, rng);
        clipped += clip as usize;
        let c = ComplexSignal::new(c)?;
        debug_assert!(c.energy() <= n1 as f64 * power * (1.0 + 1e-9));
        codewords.push(c);
    }
    Ok(Codebook { codewords, power, design_power, kind, clipped })
}

/// Fading coefficients of the active users.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingDraw {
    pub coefficients: Vec<Complex64>,
}

impl FadingDraw {
    pub fn sample<R: Rng + ?Sized>(users: usize, rng: &mut R) -> Self {
        Self { coefficients: (0..users).map(|_| complex_normal(rng, 1.0)).collect() }
    }

    pub fn fixed(coefficients: Vec<Complex64>) -> Self {
        Self { coefficients }
    }

    /// Fading powers `|H_i|^2`.
    pub fn powers(&self) -> Vec<f64> {
        self.coefficients.iter().map(|h| h.norm_sqr()).collect()
    }
}

/// Channel output `Σ H_i X_i + Z`.
pub fn transmit<R: Rng + ?Sized>(
    codewords: &[ComplexSignal],
    fading: &FadingDraw,
    noise_on: bool,
    rng: &mut R,
) -> Result<ComplexSignal> {
    if codewords.len() != fading.coefficients.len() {
        return Err(invalid("one fading coefficient per codeword required"));
    }
    let n = match codewords.first() {
        Some(c) => c.len(),
        None => return Err(invalid("transmit needs at least one codeword; use noise_only for empty slots")),
    };
    if codewords.iter().any(|c| c.len() != n) {
        return Err(invalid("codeword lengths differ"));
    }
    let mut y = vec![Complex64::new(0.0, 0.0); n];
    for (c, h) in codewords.iter().zip(&fading.coefficients) {
        for (yi, xi) in y.iter_mut().zip(c.samples()) {
            *yi += h * xi;
        }
    }
    if noise_on {
        for yi in y.iter_mut() {
            *yi += complex_normal(rng, 1.0);
        }
    }
    ComplexSignal::new(y)
}

/// Output of an empty slot: noise only.
pub fn noise_only<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<ComplexSignal> {
    ComplexSignal::new((0..n).map(|_| complex_normal(rng, 1.0)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyPerBit {
    pub linear: f64,
    pub db: f64,
}

/// `Eb/N0 = n P / k`.
pub fn energy_per_bit(n: usize, power: f64, k: usize) -> EnergyPerBit {
    let linear = n as f64 * power / k as f64;
    EnergyPerBit { linear, db: 10.0 * linear.log10() }
}

/// Per-symbol power giving a target `Eb/N0` in dB.
pub fn power_for_ebn0_db(n: usize, k: usize, ebn0_db: f64) -> f64 {
    10f64.powf(ebn0_db / 10.0) * k as f64 / n as f64
}
