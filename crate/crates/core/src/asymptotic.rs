//! Bounds on the minimal energy per bit when the number of users grows
//! linearly with the block length (`K_a = μ n`) and the payload is fixed.

use crate::error::{invalid, Error, Result};
use crate::numerics::{bisect_root, bisect_threshold, entropy_bits, entropy_nats, q_func, q_inv, GaussLegendre};
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, LOG2_E};

/// Energy-per-bit search window in dB for every bisection.
const SEARCH_DB: (f64, f64) = (-30.0, 160.0);
/// Bisection tolerance in dB.
pub const TOL_DB: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsymptoticParams {
    /// `μ = K_a / n`.
    pub user_density: f64,
    /// `log2 M₁`, the payload in bits.
    pub log2_m1: f64,
    /// Target per-user error.
    pub epsilon: f64,
}

impl AsymptoticParams {
    pub fn new(user_density: f64, log2_m1: f64, epsilon: f64) -> Result<Self> {
        let p = Self { user_density, log2_m1, epsilon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.user_density > 0.0 && self.user_density < 1.0) {
            return Err(invalid("user density must lie in (0, 1)"));
        }
        if !(self.log2_m1 > 1.0) {
            return Err(invalid("need M1 > 2"));
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(invalid("epsilon must lie in (0, 1)"));
        }
        Ok(())
    }

    fn ln_m1(&self) -> f64 {
        self.log2_m1 * LN_2
    }

    /// `M₁ - 1` as a float.
    fn m1_minus_one(&self) -> f64 {
        self.log2_m1.exp2() - 1.0
    }

    /// Total power corresponding to an energy per bit in dB.
    pub fn total_power(&self, ebn0_db: f64) -> f64 {
        10f64.powf(ebn0_db / 10.0) * self.user_density * self.log2_m1
    }

    /// Energy per bit (dB) of a total power.
    pub fn ebn0_db(&self, total_power: f64) -> f64 {
        10.0 * (total_power / (self.user_density * self.log2_m1)).log10()
    }
}

/// `α(a, b) = a ln a - b ln b + b - a` with `0 ln 0 = 0`.
pub fn alpha(a: f64, b: f64) -> Result<f64> {
    if a < 0.0 || b < 0.0 {
        return Err(invalid("alpha needs nonnegative arguments"));
    }
    Ok(alpha_unchecked(a, b))
}

fn x_ln_x(x: f64) -> f64 {
    if x > 0.0 {
        x * x.ln()
    } else {
        0.0
    }
}

fn alpha_unchecked(a: f64, b: f64) -> f64 {
    x_ln_x(a) - x_ln_x(b) + b - a
}

/// `m h(c / m)` in nats, stable for huge `m`.
fn scaled_entropy(c: f64, m: f64) -> f64 {
    if c <= 0.0 || c >= m {
        return 0.0;
    }
    c * (m / c).ln() - (m - c) * (-c / m).ln_1p()
}

/// `ln(1 + x) - x` without cancellation for small `x`.
fn ln_1p_minus_x(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        let mut term = -x * x / 2.0;
        let mut sum = 0.0;
        for k in 2..12 {
            sum += term;
            term *= -x * k as f64 / (k + 1) as f64;
        }
        sum
    } else {
        x.ln_1p() - x
    }
}

fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

fn linear_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64).collect()
}

// ---------------------------------------------------------------------------
// projection-decoder achievability

/// One evaluation of the achievability expression at `(ν, θ, ξ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SearchPoint {
    pub nu: f64,
    pub theta: f64,
    pub xi: f64,
    pub v_tilde: f64,
    pub v_theta: f64,
    pub c_theta: f64,
    pub q_theta: f64,
    pub delta: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub f: f64,
    pub f_hat: f64,
    /// `None` when the denominator is not positive.
    pub total_power: Option<f64>,
}

/// Smallest `x ∈ (0, 1)` with `-ln(1 - x) - x >= q`.
pub fn delta2_star(q: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    let g = |x: f64| -(-x).ln_1p() - x - q;
    let mut hi = 0.5;
    while g(hi) < 0.0 {
        hi = 1.0 - (1.0 - hi) / 2.0;
    }
    bisect_root(0.0, hi, 1e-16, g)
}

/// The quantities entering `P_tot,ν(θ, ξ)`.
pub fn search_point(params: &AsymptoticParams, nu: f64, theta: f64, xi: f64) -> SearchPoint {
    let mu = params.user_density;
    let mn = mu * nu;
    let miss = 1.0 - nu * (1.0 - theta);
    let delta = mu * entropy_nats(miss) / (1.0 - mn);
    let v_tilde = delta
        + mu * scaled_entropy(theta * nu, params.m1_minus_one()) / (1.0 - mn)
        + (1.0 - mn * (1.0 - theta)) / (1.0 - mn) * entropy_nats(theta * mn / (1.0 - mn * (1.0 - theta)));
    let v_theta = (-v_tilde).exp();
    let c_theta = 2.0 * v_theta / (1.0 - v_theta);
    let q_theta = mu * entropy_nats(miss) / (1.0 - mn * (1.0 - theta));
    let delta1 = q_theta * (1.0 + c_theta)
        + (q_theta * q_theta * (c_theta * c_theta + 2.0 * c_theta) + 2.0 * q_theta * (1.0 + c_theta)).sqrt();
    let delta2 = delta2_star(q_theta);
    let f = ((1.0 + delta1 * (1.0 - v_theta)) / v_theta - 1.0) / (1.0 - delta2);
    let f_hat = f / alpha_unchecked(xi, xi + nu * theta);
    let den = 1.0 - f_hat * alpha_unchecked(xi + nu * theta, xi + miss);
    let total_power = (den > 0.0 && f_hat.is_finite()).then(|| f_hat / den);
    SearchPoint { nu, theta, xi, v_tilde, v_theta, c_theta, q_theta, delta, delta1, delta2, f, f_hat, total_power }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AchResult {
    pub ebn0_db: f64,
    pub total_power: f64,
    /// The maximizing point at the best `ν`.
    pub point: SearchPoint,
}

/// Grid sizes for the achievability search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AchGrid {
    pub nu_points: usize,
    pub theta_points: usize,
    pub xi_points: usize,
    pub refinements: usize,
}

impl Default for AchGrid {
    fn default() -> Self {
        Self { nu_points: 32, theta_points: 256, xi_points: 64, refinements: 2 }
    }
}

/// Supremum over `(θ, ξ)` for one `ν`; `None` if any examined point is infeasible.
fn sup_over_theta_xi(params: &AchGrid, ap: &AsymptoticParams, nu: f64) -> Option<SearchPoint> {
    let eps_prime = ap.epsilon - (1.0 - nu);
    let lo = eps_prime / nu;
    if lo >= 1.0 {
        return None;
    }
    // θ clustered at the open lower edge
    let thetas: Vec<f64> = log_grid(1e-8, 1.0, params.theta_points).into_iter().map(|s| lo + (1.0 - lo) * s).collect();
    let scan = |thetas: &[f64], xi_frac: &dyn Fn(f64) -> Vec<f64>| -> Option<(SearchPoint, usize)> {
        let mut best: Option<(SearchPoint, usize)> = None;
        for (i, &theta) in thetas.iter().enumerate() {
            for xi in xi_frac(theta) {
                let sp = search_point(ap, nu, theta, xi);
                let p = sp.total_power?;
                if best.as_ref().is_none_or(|(b, _)| p > b.total_power.unwrap_or(0.0)) {
                    best = Some((sp, i));
                }
            }
        }
        best
    };
    let xi_points = params.xi_points;
    let full = |theta: f64| linear_grid(0.0, nu * (1.0 - theta), xi_points);
    let (mut best, idx) = scan(&thetas, &full)?;
    let (mut t_lo, mut t_hi) = (thetas[idx.saturating_sub(1)], thetas[(idx + 1).min(thetas.len() - 1)]);
    let mut xi_span = nu / (xi_points - 1) as f64;
    for _ in 0..params.refinements {
        let ts = linear_grid(t_lo, t_hi, 33);
        let centre = best.xi;
        let span = xi_span;
        let local = |theta: f64| {
            let top = nu * (1.0 - theta);
            linear_grid((centre - span).max(0.0), (centre + span).min(top).max(0.0), 33)
        };
        let (cand, i) = scan(&ts, &local)?;
        if cand.total_power >= best.total_power {
            best = cand;
        }
        t_lo = ts[i.saturating_sub(1)];
        t_hi = ts[(i + 1).min(ts.len() - 1)];
        xi_span /= 16.0;
    }
    Some(best)
}

/// Energy per bit above which the projection decoder attains the target,
/// minimized over the decoded fraction `ν`.
pub fn ach_theorem4(ap: &AsymptoticParams, grid: &AchGrid) -> Result<AchResult> {
    ap.validate()?;
    let mut best: Option<SearchPoint> = None;
    for i in 1..=grid.nu_points {
        let nu = 1.0 - ap.epsilon + ap.epsilon * i as f64 / grid.nu_points as f64;
        if let Some(sp) = sup_over_theta_xi(grid, ap, nu) {
            if best.as_ref().is_none_or(|b| sp.total_power < b.total_power) {
                best = Some(sp);
            }
        }
    }
    let point = best.ok_or_else(|| Error::Infeasible("every decoded fraction has an infeasible point".into()))?;
    let total_power = point.total_power.expect("feasible point");
    Ok(AchResult { ebn0_db: ap.ebn0_db(total_power), total_power, point })
}

// ---------------------------------------------------------------------------
// replica-symmetric prediction

/// Scalar channel `Y = X + √τ Z` with `X ~ CN(0,1)` w.p. `p = 1/M₁`, else 0.
#[derive(Debug, Clone, Copy)]
pub struct ScalarChannel {
    pub tau: f64,
    ln_m1: f64,
}

impl ScalarChannel {
    pub fn new(tau: f64, ln_m1: f64) -> Self {
        Self { tau, ln_m1 }
    }

    fn p(&self) -> f64 {
        (-self.ln_m1).exp()
    }

    fn active_var(&self) -> f64 {
        1.0 + self.tau
    }

    /// `ln[p f₁(r) / ((1-p) f₀(r))]` with `r = |y|²`.
    fn ln_odds(&self, r: f64) -> f64 {
        let (a, t) = (self.active_var(), self.tau);
        -self.ln_m1 - r / a - a.ln() + r / t + t.ln() - (-self.p()).ln_1p()
    }

    /// `P{X ≠ 0 | |Y|² = r}`.
    pub fn posterior(&self, r: f64) -> f64 {
        let z = self.ln_odds(r);
        1.0 / (1.0 + (-z).exp())
    }

    /// `M₁ · I(X; Y)` in nats.
    pub fn scaled_mutual_information(&self) -> f64 {
        let (a, t) = (self.active_var(), self.tau);
        let p = self.p();
        let m1 = self.ln_m1.exp();
        // radial integrand of  E h(π(Y)) / p
        let integrand = |r: f64| {
            let lz = self.ln_odds(r);
            let ln_pi = -softplus(-lz);
            let f1 = (-r / a).exp() / a;
            let f0 = (-r / t).exp() / t;
            let inactive = if lz < -30.0 {
                // ln(1 + z) / p with z tiny
                f0 * (lz + self.ln_m1).exp() * (1.0 - 0.5 * lz.exp())
            } else {
                f0 * softplus(lz) * m1
            };
            -f1 * ln_pi + (1.0 - p) * inactive
        };
        let r_max = a * (self.ln_m1 + 60.0) + t * 60.0;
        let mut cuts = vec![0.0];
        let mut x = (t * 1e-3).min(a * 1e-3);
        while x < r_max {
            cuts.push(x);
            x *= 1.15;
        }
        // resolve the posterior transition
        let r_star = t * a * (self.ln_m1 + (a / t).ln());
        let width = t * a;
        for k in -40..=40 {
            let c = r_star + k as f64 * width;
            if c > 0.0 && c < r_max {
                cuts.push(c);
            }
        }
        cuts.push(r_max);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let gl = GaussLegendre::new(10);
        let expected_h: f64 = cuts.windows(2).map(|w| gl.integrate(w[0], w[1], integrand)).sum();
        (1.0 / t).ln_1p() + scaled_entropy(1.0, m1) - expected_h
    }

    /// Radius `r_T` with `P{|Y|² > r_T} = p`.
    pub fn threshold_radius(&self) -> f64 {
        let (a, t) = (self.active_var(), self.tau);
        let p = self.p();
        let ln_p = -self.ln_m1;
        let g = |r: f64| crate::numerics::log_add_exp(ln_p - r / a, (-p).ln_1p() - r / t) - ln_p;
        let mut hi = t * (self.ln_m1 + 1.0);
        while g(hi) > 0.0 {
            hi *= 2.0;
        }
        bisect_root(0.0, hi, hi * 1e-15, g)
    }

    /// Miss probability of the active symbol under the threshold rule.
    pub fn pupe(&self) -> f64 {
        -(-self.threshold_radius() / self.active_var()).exp_m1()
    }
}

fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicaState {
    pub total_power: f64,
    pub tau_grid: Vec<f64>,
    /// Objective in bits scaled by `M₁`.
    pub objective: Vec<f64>,
    pub sigma2: f64,
    /// Posterior cutoff `T`.
    pub threshold: f64,
    pub pupe: f64,
    /// Two separated local minima agree to within 1e-9.
    pub ambiguous_minimizer: bool,
}

/// `M₁` times the free-energy objective, in bits.
pub fn replica_objective(ap: &AsymptoticParams, total_power: f64, tau: f64) -> f64 {
    let ch = ScalarChannel::new(tau, ap.ln_m1());
    ((tau).log2() + ap.log2_m1) / ap.user_density + LOG2_E / (tau * total_power) + ch.scaled_mutual_information() * LOG2_E
}

const TAU_POINTS: usize = 240;

/// Solves the fixed point for `σ²` at one total power.
pub fn replica_state(ap: &AsymptoticParams, total_power: f64) -> ReplicaState {
    let tau_lo = 1e-4 * (1.0f64).min(1.0 / total_power);
    let tau_grid = log_grid(tau_lo, 1e4, TAU_POINTS);
    let objective: Vec<f64> = tau_grid.iter().map(|&t| replica_objective(ap, total_power, t)).collect();
    let best = (0..TAU_POINTS).min_by(|&a, &b| objective[a].total_cmp(&objective[b])).expect("nonempty grid");
    let minima: Vec<usize> = (0..TAU_POINTS)
        .filter(|&i| (i == 0 || objective[i] <= objective[i - 1]) && (i + 1 == TAU_POINTS || objective[i] <= objective[i + 1]))
        .collect();
    let ambiguous_minimizer = minima.iter().any(|&i| i.abs_diff(best) > 2 && (objective[i] - objective[best]).abs() < 1e-9);
    // golden section on ln τ between the grid neighbours
    let (mut lo, mut hi) = (tau_grid[best.saturating_sub(1)].ln(), tau_grid[(best + 1).min(TAU_POINTS - 1)].ln());
    let f = |lt: f64| replica_objective(ap, total_power, lt.exp());
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let (mut x1, mut x2) = (hi - phi * (hi - lo), lo + phi * (hi - lo));
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..60 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let refined = 0.5 * (lo + hi);
    let sigma2 = if f(refined) <= objective[best] { refined.exp() } else { tau_grid[best] };
    let ch = ScalarChannel::new(sigma2, ap.ln_m1());
    let radius = ch.threshold_radius();
    ReplicaState {
        total_power,
        tau_grid,
        objective,
        sigma2,
        threshold: ch.posterior(radius),
        pupe: ch.pupe(),
        ambiguous_minimizer,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicaResult {
    pub ebn0_db: f64,
    pub sigma2: f64,
    pub threshold: f64,
    pub pupe: f64,
    pub ambiguous_minimizer: bool,
}

/// Smallest energy per bit whose replica-symmetric scalar channel meets the target.
pub fn replica_optimal(ap: &AsymptoticParams) -> Result<ReplicaResult> {
    ap.validate()?;
    let db = bisect_threshold(SEARCH_DB.0, SEARCH_DB.1, TOL_DB, |db| replica_state(ap, ap.total_power(db)).pupe <= ap.epsilon)
        .ok_or_else(|| Error::Infeasible("replica prediction misses the target over the search window".into()))?;
    let s = replica_state(ap, ap.total_power(db));
    Ok(ReplicaResult { ebn0_db: db, sigma2: s.sigma2, threshold: s.threshold, pupe: s.pupe, ambiguous_minimizer: s.ambiguous_minimizer })
}

// ---------------------------------------------------------------------------
// converses

/// Left side of the Fano condition at `θ`, in bits.
fn fano_rate(ap: &AsymptoticParams, theta: f64) -> f64 {
    let mu = ap.user_density;
    let log2_m1_minus_one = ap.log2_m1 + (-(-ap.ln_m1()).exp()).ln_1p() * LOG2_E;
    mu * theta * ap.log2_m1 - ap.epsilon * mu * log2_m1_minus_one - mu * entropy_bits(ap.epsilon)
}

/// Power needed for the Fano condition at one `θ`.
fn fano_power(ap: &AsymptoticParams, theta: f64) -> f64 {
    let l = fano_rate(ap, theta);
    if l <= 0.0 {
        return 0.0;
    }
    (l.exp2() - 1.0) / alpha_unchecked(1.0 - theta, 1.0)
}

/// Fano-type converse: the least total power meeting the condition for every
/// `θ ∈ [0, 1]`, found as the largest per-`θ` requirement.
pub fn conv_fano(ap: &AsymptoticParams) -> Result<f64> {
    ap.validate()?;
    let thetas = linear_grid(0.0, 1.0, 1001);
    let powers: Vec<f64> = thetas.iter().map(|&t| fano_power(ap, t)).collect();
    let i = (0..thetas.len()).max_by(|&a, &b| powers[a].total_cmp(&powers[b])).expect("nonempty grid");
    let mut best = powers[i];
    let (lo, hi) = (thetas[i.saturating_sub(1)], thetas[(i + 1).min(thetas.len() - 1)]);
    for t in linear_grid(lo, hi, 1001) {
        best = best.max(fano_power(ap, t));
    }
    Ok(ap.ebn0_db(best))
}

/// `P{fail}` of the single-user list converse at total power `p_tot`.
fn single_user_failure(ap: &AsymptoticParams, p_tot: f64) -> f64 {
    let c = q_inv((-ap.ln_m1()).exp());
    let beta = 2.0 * p_tot / ap.user_density;
    // E Q(√(β G) - c), G ~ Exp(1), with u = √(β G)
    let gl = GaussLegendre::new(16);
    gl.integrate_composite(0.0, c + 40.0, 400, |u| (-u * u / beta).exp() * q_func(u - c) * 2.0 * u / beta)
}

/// Single-user converse under quasi-static fading.
pub fn conv_single_user(ap: &AsymptoticParams) -> Result<f64> {
    ap.validate()?;
    bisect_threshold(SEARCH_DB.0, SEARCH_DB.1, TOL_DB, |db| single_user_failure(ap, ap.total_power(db)) <= ap.epsilon)
        .ok_or_else(|| Error::Infeasible("single-user converse exceeds the search window".into()))
}

/// Larger of the two general converses, in dB.
pub fn conv(ap: &AsymptoticParams) -> Result<f64> {
    Ok(conv_fano(ap)?.max(conv_single_user(ap)?))
}

/// `F(r, γ)`.
pub fn iid_f(r: f64, gamma: f64) -> f64 {
    let (a, b) = iid_roots(r, gamma);
    4.0 * gamma * gamma * r / ((a + b) * (a + b))
}

/// `V(r, γ)`.
pub fn iid_v(r: f64, gamma: f64) -> f64 {
    scaled_iid_v(r, gamma, 1.0)
}

fn iid_roots(r: f64, gamma: f64) -> (f64, f64) {
    let s = r.sqrt();
    ((gamma * (s + 1.0).powi(2) + 1.0).sqrt(), (gamma * (s - 1.0).powi(2) + 1.0).sqrt())
}

/// `scale · V(r, γ)`, arranged so that `r → 0` with `scale · r` fixed loses no precision.
fn scaled_iid_v(r: f64, gamma: f64, scale: f64) -> f64 {
    if gamma <= 0.0 {
        return 0.0;
    }
    let (a, b) = iid_roots(r, gamma);
    let sum2 = (a + b) * (a + b);
    let f = 4.0 * gamma * gamma * r / sum2;
    // a²b² - γ²(1 - r)²
    let d = 2.0 * gamma * (1.0 + r) + 1.0;
    let ab = (gamma * gamma * (1.0 - r) * (1.0 - r) + d).sqrt();
    let gap = gamma * (r - 1.0).abs();
    let (one_plus_gamma_minus_f, one_plus_x) =
        if r >= 1.0 { (0.5 * (1.0 + d / (ab + gap)), 0.5 * (1.0 + gap + ab)) } else { (0.5 * (1.0 + gap + ab), 0.5 * (1.0 + d / (ab + gap))) };
    if r >= 1e-3 {
        return scale * (r * one_plus_gamma_minus_f.ln() + one_plus_x.ln() - f / gamma);
    }
    // (a + b)² - 4(γ + 1), over r
    let cross = 2.0 * gamma + 2.0 * (2.0 * gamma * (gamma + 1.0) + gamma * gamma * r - 4.0 * gamma * gamma) / (ab + gamma + 1.0);
    // x = rγ - F
    let x = r * gamma * (cross * r + 4.0) / sum2;
    // rγ - F(1 + 1/γ)
    let tail = r * gamma * r * cross / sum2;
    scale * r * one_plus_gamma_minus_f.ln() + scale * (ln_1p_minus_x(x) + tail)
}

/// Left and right sides (bits, scaled by `M₁`) of the iid-codebook condition.
fn iid_sides(ap: &AsymptoticParams, p_tot: f64) -> (f64, f64) {
    let m1 = ap.log2_m1.exp2();
    let lhs = (scaled_entropy(1.0, m1) - entropy_nats(ap.epsilon) - scaled_entropy(ap.epsilon, m1 - 1.0)) * LOG2_E;
    let mu = ap.user_density;
    let rhs = (scaled_iid_v(1.0 / (mu * m1), p_tot, m1) - iid_v(1.0 / mu, p_tot)) * LOG2_E;
    (lhs, rhs)
}

/// Converse for codebooks with iid entries, without the general converse floor.
pub fn conv_iid_raw(ap: &AsymptoticParams) -> Result<f64> {
    ap.validate()?;
    bisect_threshold(SEARCH_DB.0, SEARCH_DB.1, TOL_DB, |db| {
        let (lhs, rhs) = iid_sides(ap, ap.total_power(db));
        lhs <= rhs
    })
    .ok_or_else(|| Error::Infeasible("iid converse exceeds the search window".into()))
}

/// iid-codebook converse; every general converse also binds iid codebooks.
pub fn conv_iid(ap: &AsymptoticParams) -> Result<f64> {
    Ok(conv_iid_raw(ap)?.max(conv(ap)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn alpha_and_entropy_values() {
        assert_eq!(alpha(1.0, 1.0).unwrap(), 0.0);
        assert_eq!(alpha(0.0, 1.0).unwrap(), 1.0);
        assert!(alpha(-0.1, 1.0).is_err());
        assert!((entropy_nats(0.5) - LN_2).abs() < 1e-15);
        assert!((entropy_bits(0.5) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn scaled_entropy_matches_direct_formula() {
        for (c, m) in [(0.3, 10.0), (1.0, 1e3), (0.9, 77.0)] {
            assert!((scaled_entropy(c, m) - m * entropy_nats(c / m)).abs() < 1e-12);
        }
        // m h(1/m) -> ln m + 1
        let m = 2f64.powi(100);
        assert!((scaled_entropy(1.0, m) - (m.ln() + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn delta2_solves_its_equation() {
        for q in [1e-6, 1e-3, 0.05, 0.4, 2.0] {
            let x = delta2_star(q);
            assert!(x > 0.0 && x < 1.0);
            assert!((-(-x).ln_1p() - x - q).abs() < 1e-10, "{q} {x}");
        }
    }

    fn naive_f(r: f64, g: f64) -> f64 {
        0.25 * ((g * (r.sqrt() + 1.0).powi(2) + 1.0).sqrt() - (g * (r.sqrt() - 1.0).powi(2) + 1.0).sqrt()).powi(2)
    }

    fn naive_v(r: f64, g: f64) -> f64 {
        let f = naive_f(r, g);
        r * (1.0 + g - f).ln() + (1.0 + r * g - f).ln() - f / g
    }

    #[test]
    fn iid_functions_match_their_definitions() {
        assert_eq!(iid_f(3.0, 0.0), 0.0);
        assert_eq!(iid_v(3.0, 0.0), 0.0);
        for g in [0.1, 1.0, 7.0, 300.0] {
            assert!((iid_f(1.0, g) - 0.25 * ((4.0 * g + 1.0).sqrt() - 1.0).powi(2)).abs() < 1e-12 * g.max(1.0));
            for r in [0.05, 0.5, 2.0, 10.0] {
                assert!((iid_v(r, g) - naive_v(r, g)).abs() < 1e-10 * (1.0 + naive_v(r, g).abs()), "{r} {g}");
                assert!((iid_f(r, g) - naive_f(r, g)).abs() < 1e-10 * (1.0 + g));
            }
        }
    }

    #[test]
    fn scaled_v_has_the_small_ratio_limit() {
        // scale · V(c / scale, γ) -> c ln(1 + γ)
        for g in [0.5, 10.0, 1e4] {
            for c in [0.2, 20.0] {
                let scale = 2f64.powi(100);
                let v = scaled_iid_v(c / scale, g, scale);
                assert!((v - c * (1.0 + g).ln()).abs() < 1e-9 * (1.0 + v.abs()), "{g} {c} {v}");
            }
        }
    }

    /// `I(X; Y)` from the definition `h(Y) - h(Y | X)` by radial trapezoid.
    fn mutual_information_oracle(p: f64, tau: f64) -> f64 {
        let a = 1.0 + tau;
        let density = |r: f64| p * (-r / a).exp() / (std::f64::consts::PI * a) + (1.0 - p) * (-r / tau).exp() / (std::f64::consts::PI * tau);
        let r_max = 80.0 * a;
        let steps = 2_000_000;
        let h = r_max / steps as f64;
        let mut acc = 0.0;
        for i in 0..=steps {
            let r = i as f64 * h;
            let q = density(r);
            let w = if i == 0 || i == steps { 0.5 } else { 1.0 };
            acc += w * std::f64::consts::PI * q * q.ln();
        }
        -acc * h - (std::f64::consts::PI * std::f64::consts::E * tau).ln()
    }

    #[test]
    fn mutual_information_matches_definition() {
        let p: f64 = 0.05;
        for tau in [0.3, 1.0, 4.0] {
            let ch = ScalarChannel::new(tau, -p.ln());
            let got = ch.scaled_mutual_information() * p;
            let want = mutual_information_oracle(p, tau);
            assert!((got - want).abs() < 1e-6, "{tau} {got} {want}");
        }
    }

    #[test]
    fn mutual_information_is_stable_at_tiny_activity() {
        let ln_m1 = 100.0 * LN_2;
        for tau in [1e-6, 1e-3, 0.1, 10.0] {
            let ch = ScalarChannel::new(tau, ln_m1);
            let v = ch.scaled_mutual_information();
            // between the activity entropy alone and activity entropy plus full-information content
            assert!(v > 0.0 && v <= scaled_entropy(1.0, ln_m1.exp()) + (1.0 / tau).ln_1p() + 1e-9, "{tau} {v}");
        }
    }

    #[test]
    fn posterior_matches_bayes_rule_and_threshold_is_consistent() {
        let p: f64 = 0.02;
        let tau = 0.7;
        let a = 1.0 + tau;
        let ch = ScalarChannel::new(tau, -p.ln());
        let mut prev = 0.0;
        for i in 0..200 {
            let r = i as f64 * 0.05;
            let f1 = p * (-r / a).exp() / a;
            let f0 = (1.0 - p) * (-r / tau).exp() / tau;
            let post = ch.posterior(r);
            assert!((post - f1 / (f1 + f0)).abs() < 1e-12);
            assert!(post >= prev);
            prev = post;
        }
        let r_t = ch.threshold_radius();
        let above = p * (-r_t / a).exp() + (1.0 - p) * (-r_t / tau).exp();
        assert!((above / p - 1.0).abs() < 1e-6);
        let big = ScalarChannel::new(0.01, 100.0 * LN_2);
        let r_t = big.threshold_radius();
        let log_above = crate::numerics::log_add_exp(-100.0 * LN_2 - r_t / 1.01, -r_t / 0.01);
        assert!((log_above + 100.0 * LN_2).abs() < 1e-6);
    }

    #[test]
    fn replica_error_grows_as_power_falls() {
        let ap = AsymptoticParams::new(0.05, 100.0, 0.1).unwrap();
        let mut prev = 0.0;
        for db in [30.0, 20.0, 12.0, 9.0, 6.0, 0.0, -10.0] {
            let s = replica_state(&ap, ap.total_power(db));
            assert!(s.sigma2 > 0.0 && s.threshold > 0.0 && s.threshold < 1.0);
            assert!(s.pupe >= prev - 1e-12, "{db} {} {prev}", s.pupe);
            prev = s.pupe;
        }
        assert!(prev > 0.9);
    }

    #[test]
    fn fano_condition_at_full_fraction() {
        let ap = AsymptoticParams::new(0.1, 100.0, 0.05).unwrap();
        let m1 = 2f64.powi(100);
        let want = 0.1 * 100.0 * (1.0 - 0.05 * (m1 - 1.0).log2() / 100.0) - 0.1 * entropy_bits(0.05);
        assert!((fano_rate(&ap, 1.0) - want).abs() < 1e-12);
        assert!((fano_power(&ap, 1.0) - (want.exp2() - 1.0)).abs() < 1e-9 * want.exp2());
    }

    #[test]
    fn single_user_converse_grows_with_payload() {
        let mut prev = f64::NEG_INFINITY;
        for bits in [10.0, 30.0, 100.0, 300.0] {
            let db = conv_single_user(&AsymptoticParams::new(0.05, bits, 0.1).unwrap()).unwrap();
            assert!(db > prev);
            prev = db;
        }
    }

    #[test]
    fn converses_vanish_near_vacuous_reliability() {
        let ap = AsymptoticParams::new(0.1, 3.0, 0.8749).unwrap();
        assert!(conv_fano(&ap).unwrap() < -20.0);
        assert!(conv_single_user(&ap).unwrap() < -20.0);
    }

    #[test]
    fn projection_bound_inside_the_plotted_window() {
        let ap = AsymptoticParams::new(0.05, 100.0, 0.1).unwrap();
        let r = ach_theorem4(&ap, &AchGrid::default()).unwrap();
        assert!(r.ebn0_db > 7.5 && r.ebn0_db < 24.5, "{}", r.ebn0_db);
        let p = r.point;
        assert!(p.v_theta > 0.0 && p.v_theta < 1.0 && p.delta2 > 0.0 && p.delta2 < 1.0);
        assert!(p.theta > (ap.epsilon - 1.0 + p.nu) / p.nu && p.xi <= p.nu * (1.0 - p.theta) + 1e-12);
    }

    #[test]
    fn vanishing_slack_is_infeasible_or_expensive() {
        // ν = 1 - ε leaves ε' = 0; only ν strictly above it is searched
        let ap = AsymptoticParams::new(0.05, 100.0, 1e-6).unwrap();
        match ach_theorem4(&ap, &AchGrid { nu_points: 4, ..AchGrid::default() }) {
            Ok(r) => assert!(r.ebn0_db > ach_theorem4(&AsymptoticParams { epsilon: 0.1, ..ap }, &AchGrid::default()).unwrap().ebn0_db),
            Err(e) => assert!(matches!(e, Error::Infeasible(_))),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn bounds_are_nondecreasing_in_density(mu in 0.01f64..0.15, step in 0.005f64..0.04, eps in prop_oneof![Just(0.1), Just(1e-3)]) {
            let a = AsymptoticParams::new(mu, 100.0, eps).unwrap();
            let b = AsymptoticParams::new(mu + step, 100.0, eps).unwrap();
            prop_assert!(conv(&b).unwrap() >= conv(&a).unwrap() - TOL_DB);
            prop_assert!(conv_iid(&b).unwrap() >= conv_iid(&a).unwrap() - TOL_DB);
            let grid = AchGrid { nu_points: 8, theta_points: 96, xi_points: 24, refinements: 1 };
            let (x, y) = (ach_theorem4(&a, &grid).unwrap().ebn0_db, ach_theorem4(&b, &grid).unwrap().ebn0_db);
            prop_assert!(y >= x - 0.05, "{} {}", x, y);
        }
    }
}
