//! Special functions, quadrature and small statistical helpers.

use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::{LN_2, PI, SQRT_2};

/// Gaussian tail `Q(x) = P{N(0,1) > x}`.
pub fn q_func(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// `ln Q(x)`, accurate deep into the upper tail.
pub fn ln_q(x: f64) -> f64 {
    if x < 30.0 {
        q_func(x).ln()
    } else {
        let x2 = x * x;
        -0.5 * x2 - x.ln() - 0.5 * (2.0 * PI).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// Inverse of [`q_func`] for `p` in (0, 1), refined with Newton steps on `ln Q`.
pub fn q_inv(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "q_inv argument must lie in (0,1)");
    let mut x = SQRT_2 * erfc_inv(2.0 * p);
    let target = p.ln();
    for _ in 0..4 {
        let lq = ln_q(x);
        let ln_phi = -0.5 * x * x - 0.5 * (2.0 * PI).ln();
        let step = (lq - target) * (lq - ln_phi).exp();
        x += step;
        if step.abs() < 1e-14 * x.abs().max(1.0) {
            break;
        }
    }
    x
}

/// `ln C(n, k)` for real `n ≥ k ≥ 0`; exact product form when `k` is small and `n` huge.
pub fn ln_binom(n: f64, k: f64) -> f64 {
    if k < 0.0 || k > n {
        return f64::NEG_INFINITY;
    }
    if k == 0.0 || k == n {
        return 0.0;
    }
    if k <= 64.0 && k.fract() == 0.0 && n > 1e7 {
        let mut s = 0.0;
        for i in 0..k as u64 {
            s += (n - i as f64).ln() - ((i + 1) as f64).ln();
        }
        return s;
    }
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

/// Binomial pmf `C(n,r) p^r (1-p)^(n-r)`.
pub fn binom_pmf(n: u64, r: u64, p: f64) -> f64 {
    if r > n {
        return 0.0;
    }
    if p <= 0.0 {
        return if r == 0 { 1.0 } else { 0.0 };
    }
    if p >= 1.0 {
        return if r == n { 1.0 } else { 0.0 };
    }
    let lp = ln_binom(n as f64, r as f64) + r as f64 * p.ln() + (n - r) as f64 * (-p).ln_1p();
    lp.exp()
}

pub fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

pub fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// Natural-log binary entropy `h(p) = -p ln p - (1-p) ln(1-p)` with `0 ln 0 = 0`.
pub fn entropy_nats(p: f64) -> f64 {
    let t = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    t(p) + if p < 1.0 { -(1.0 - p) * (-p).ln_1p() } else { 0.0 }
}

/// Binary entropy in bits.
pub fn entropy_bits(p: f64) -> f64 {
    entropy_nats(p) / LN_2
}

/// Gauss–Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(order: usize) -> Self {
        assert!(order >= 1);
        let mut nodes = vec![0.0; order];
        let mut weights = vec![0.0; order];
        let m = order.div_ceil(2);
        for i in 0..m {
            let mut z = (PI * (i as f64 + 0.75) / (order as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p1, mut p2) = (1.0, 0.0);
                for j in 0..order {
                    let p3 = p2;
                    p2 = p1;
                    p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
                }
                dp = order as f64 * (z * p1 - p2) / (z * z - 1.0);
                let dz = p1 / dp;
                z -= dz;
                if dz.abs() < 1e-15 {
                    break;
                }
            }
            nodes[i] = -z;
            nodes[order - 1 - i] = z;
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            weights[i] = w;
            weights[order - 1 - i] = w;
        }
        Self { nodes, weights }
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (b + a);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * f(mid + half * x))
            .sum::<f64>()
            * half
    }

    /// Composite rule over `panels` equal sub-intervals.
    pub fn integrate_composite(&self, a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|i| self.integrate(a + i as f64 * h, a + (i + 1) as f64 * h, &mut f))
            .sum()
    }
}

/// One-sample Kolmogorov–Smirnov test.
#[derive(Debug, Clone, Copy)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64) -> KsOutcome {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    KsOutcome { statistic: d, p_value: kolmogorov_sf(lambda) }
}

/// Survival function of the Kolmogorov distribution.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Smallest `x` in `[lo, hi]` (to tolerance `tol`) for which the monotone predicate holds.
/// Returns `None` when the predicate fails at `hi`.
pub fn bisect_threshold(mut lo: f64, mut hi: f64, tol: f64, mut pred: impl FnMut(f64) -> bool) -> Option<f64> {
    if !pred(hi) {
        return None;
    }
    if pred(lo) {
        return Some(lo);
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

/// Root of a continuous function with a sign change on `[lo, hi]`.
pub fn bisect_root(mut lo: f64, mut hi: f64, tol: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut flo = f(lo);
    for _ in 0..400 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// Mean and standard error from batch means.
pub fn batch_means(values: &[f64], batches: usize) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let b = batches.min(n).max(1);
    if b < 2 {
        return (mean, f64::NAN);
    }
    let mut means = Vec::with_capacity(b);
    for i in 0..b {
        let (s, e) = (i * n / b, (i + 1) * n / b);
        means.push(values[s..e].iter().sum::<f64>() / (e - s) as f64);
    }
    let mbar = means.iter().sum::<f64>() / b as f64;
    let var = means.iter().map(|m| (m - mbar).powi(2)).sum::<f64>() / (b - 1) as f64;
    (mean, (var / b as f64).sqrt())
}
