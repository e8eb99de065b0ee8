//! Numerical certificates for the adaptive smooth second-order family.
//!
//! For a gain configuration with `m > 2` this builds the quadratic Lyapunov
//! matrix `P` on `ξ = [L₀^{(m−1)/m}⌈s⌋^{(m−1)/m}, L₀^{(2m−2)/m}s, φ]`, the
//! dissipation matrices `Ω₁`, `Ω₂`, the diagonal `Q` bounding the adaptation
//! term, and the constants `n₁..n₄` of the resulting differential
//! inequality. The finite-time and ultimate-boundedness helpers evaluate
//! the settling-time and residual-set formulas for given constants.

use crate::error::{domain, Error, Result};
use crate::gains::{check_feasibility, Feasibility, GainConfig};
use crate::numerics::{rk4_step, sig_pow_unchecked, SymMatrix3};

/// Positive-definiteness verdicts from three independent tests.
#[derive(Debug, Clone, PartialEq)]
pub struct DefinitenessCheck {
    pub name: &'static str,
    pub minors: (f64, f64, f64),
    pub eigenvalues: [f64; 3],
    pub by_minors: bool,
    pub by_eigenvalues: bool,
    pub by_cholesky: bool,
}

impl DefinitenessCheck {
    pub fn new(name: &'static str, m: &SymMatrix3) -> Self {
        let minors = m.leading_principal_minors();
        let eigenvalues = m.eigenvalues();
        Self {
            name,
            minors,
            eigenvalues,
            by_minors: m.is_positive_definite_by_minors(),
            by_eigenvalues: eigenvalues[0] > 0.0,
            by_cholesky: m.cholesky().is_some(),
        }
    }

    pub fn agree(&self) -> bool {
        self.by_minors == self.by_eigenvalues && self.by_minors == self.by_cholesky
    }

    pub fn positive_definite(&self) -> bool {
        self.by_minors && self.by_eigenvalues && self.by_cholesky
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub gains: GainConfig,
    /// Adaptive scalar at which the L₀-dependent quantities are evaluated.
    pub l0: f64,
    pub p: SymMatrix3,
    pub omega1: SymMatrix3,
    pub omega2: SymMatrix3,
    pub q_diag: [f64; 3],
    /// Fractional exponent of the decay inequality, `(2m−3)/(2m−2)`.
    pub p1: f64,
    /// `‖[−k₁, −k₂, 2]‖₂`
    pub sigma1_norm: f64,
    pub n1: f64,
    /// `n₂ / δ`; multiply by a disturbance-rate bound to get `n₂`.
    pub n2_per_delta: f64,
    pub n3: f64,
    pub n4: f64,
    pub p_check: DefinitenessCheck,
    pub omega1_check: DefinitenessCheck,
    pub omega2_check: DefinitenessCheck,
    pub feasibility: Feasibility,
    pub feasible: bool,
    pub failures: Vec<String>,
}

impl Certificate {
    pub fn lambda_min_p(&self) -> f64 {
        self.p_check.eigenvalues[0]
    }

    pub fn lambda_max_p(&self) -> f64 {
        self.p_check.eigenvalues[2]
    }

    /// Coefficient of `V^{p₁}` at the snapshot, `L₀·n₁`.
    pub fn fractional_rate(&self) -> f64 {
        self.l0 * self.n1
    }

    /// Coefficient of `V` at the snapshot for a given adaptation rate
    /// `L̇₀`: `L₀^{(2m−2)/m}n₃ − ((2m−2)/m)·n₄·L̇₀/L₀`.
    pub fn linear_rate(&self, l0_dot: f64) -> f64 {
        let m = self.gains.m;
        let e = (2.0 * m - 2.0) / m;
        self.l0.powf(e) * self.n3 - e * self.n4 * l0_dot / self.l0
    }

    /// `n₂` for disturbance-rate bound `delta`.
    pub fn disturbance_rate(&self, delta: f64) -> f64 {
        delta * self.n2_per_delta
    }
}

/// Builds the certificate for `cfg` evaluated at adaptive scalar `l0`.
pub fn build_certificate(cfg: &GainConfig, l0: f64) -> Result<Certificate> {
    let m = cfg.m;
    if !(m > 2.0) {
        return Err(domain(format!("certificate needs m > 2, got m = {m}")));
    }
    if !(l0.is_finite() && l0 > 0.0) {
        return Err(domain(format!("certificate needs L0 > 0, got {l0}")));
    }
    let (k1, k2, k3, k4) = (cfg.k1, cfg.k2, cfg.k3, cfg.k4);

    let p = SymMatrix3::new(
        2.0 * m / (m - 1.0) * k3 + k1 * k1,
        k1 * k2,
        -k1,
        2.0 * k4 + k2 * k2,
        -k2,
        2.0,
    )
    .scaled(0.5);
    let omega1 = SymMatrix3::new(
        k3 * m + k1 * k1 * (m - 1.0),
        0.0,
        -k1 * (m - 1.0),
        k4 * m + k2 * k2 * (3.0 * m - 1.0),
        -k2 * (2.0 * m - 1.0),
        m - 1.0,
    )
    .scaled(k1 / m);
    let omega2 = SymMatrix3::new(k3 + k1 * k1 * (3.0 * m - 2.0) / m, 0.0, 0.0, k4 + k2 * k2, -k2, 1.0).scaled(k2);
    let q_diag = [
        2.0 * m / (m - 1.0) * k3 + k1 * k1 + (3.0 * k1 * k2 + k1) / 2.0,
        4.0 * k4 + 2.0 * k2 * k2 + k2 + 1.5 * k1 * k2,
        (k1 + 2.0 * k2) / 2.0,
    ];
    let p1 = (2.0 * m - 3.0) / (2.0 * m - 2.0);
    let sigma1_norm = (k1 * k1 + k2 * k2 + 4.0).sqrt();

    let p_check = DefinitenessCheck::new("P", &p);
    let omega1_check = DefinitenessCheck::new("Omega1", &omega1);
    let omega2_check = DefinitenessCheck::new("Omega2", &omega2);
    let feasibility = check_feasibility(cfg)?;

    let (lmin_p, lmax_p) = (p_check.eigenvalues[0], p_check.eigenvalues[2]);
    let n1 = omega1_check.eigenvalues[0] / lmax_p.powf(p1);
    let n2_per_delta = sigma1_norm / lmin_p.sqrt();
    let n3 = omega2_check.eigenvalues[0] / lmax_p;
    let q_max = q_diag.iter().fold(f64::NEG_INFINITY, |a, b| a.max(*b));
    let n4 = q_max / (2.0 * lmin_p);

    let mut failures = Vec::new();
    if !feasibility.feasible {
        failures.push(format!(
            "gain inequality fails: lhs {} <= rhs {}",
            feasibility.lhs, feasibility.rhs
        ));
    }
    for c in [&p_check, &omega1_check, &omega2_check] {
        if !c.positive_definite() {
            failures.push(format!(
                "{} not positive definite (minors {:?}, eigenvalues {:?})",
                c.name, c.minors, c.eigenvalues
            ));
        }
        if !c.agree() {
            failures.push(format!("{} definiteness tests disagree", c.name));
        }
    }
    if let Some(i) = q_diag.iter().position(|q| !(*q > 0.0)) {
        failures.push(format!("q{} = {} not positive", i + 1, q_diag[i]));
    }

    Ok(Certificate {
        gains: *cfg,
        l0,
        p,
        omega1,
        omega2,
        q_diag,
        p1,
        sigma1_norm,
        n1,
        n2_per_delta,
        n3,
        n4,
        p_check,
        omega1_check,
        omega2_check,
        feasibility,
        feasible: failures.is_empty(),
        failures,
    })
}

/// Fast finite-time settling bound for `V̇ ≤ −c₁V^p − c₂V`:
/// `T = ln(1 + c₂V₀^{1−p}/c₁) / (c₂(1−p))`.
pub fn settling_time_lemma1(c1: f64, c2: f64, p: f64, v0: f64) -> Result<f64> {
    if !(c1 > 0.0 && c1.is_finite()) || !(c2 > 0.0 && c2.is_finite()) {
        return Err(domain(format!("settling time needs c1, c2 > 0, got {c1}, {c2}")));
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(domain(format!("settling time needs p in (0, 1), got {p}")));
    }
    if !(v0 >= 0.0 && v0.is_finite()) {
        return Err(domain(format!("settling time needs V0 >= 0, got {v0}")));
    }
    Ok((1.0 + c2 * v0.powf(1.0 - p) / c1).ln() / (c2 * (1.0 - p)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma2Params {
    /// Coefficient of `V^{p₁}`
    pub c1: f64,
    /// Coefficient of `V`
    pub c2: f64,
    /// Coefficient of the disturbance term `V^{p₂}`
    pub c3: f64,
    pub p1: f64,
    pub p2: f64,
    pub theta1: f64,
    pub theta2: f64,
}

impl Lemma2Params {
    /// `θ₁ = c₁/2`, `θ₂ = c₂/2`.
    pub fn with_default_thetas(c1: f64, c2: f64, c3: f64, p1: f64, p2: f64) -> Self {
        Self { c1, c2, c3, p1, p2, theta1: 0.5 * c1, theta2: 0.5 * c2 }
    }

    fn validate(&self) -> Result<()> {
        let Self { c1, c2, c3, p1, p2, theta1, theta2 } = *self;
        if !(c1 > 0.0 && c2 > 0.0 && c3 >= 0.0) || ![c1, c2, c3].iter().all(|v| v.is_finite()) {
            return Err(domain(format!("need c1, c2 > 0 and c3 >= 0, got {c1}, {c2}, {c3}")));
        }
        if !(0.0 < p2 && p2 < p1 && p1 < 1.0) {
            return Err(domain(format!("need 0 < p2 < p1 < 1, got p1 = {p1}, p2 = {p2}")));
        }
        if !(0.0 < theta1 && theta1 < c1) {
            return Err(domain(format!("theta1 must lie in (0, c1 = {c1}), got {theta1}")));
        }
        if !(0.0 < theta2 && theta2 < c2) {
            return Err(domain(format!("theta2 must lie in (0, c2 = {c2}), got {theta2}")));
        }
        Ok(())
    }

    /// `θ₃^{1−p₂}θ₂^{p₁−p₂}c₃^{1−p₂} − θ₁^{1−p₂}(1−θ₃)^{p₁−p₂}`; the split
    /// parameter `θ₃` is its root in (0, 1).
    pub fn theta3_residual(&self, theta3: f64) -> f64 {
        let a = 1.0 - self.p2;
        let b = self.p1 - self.p2;
        theta3.powf(a) * self.theta2.powf(b) * self.c3.powf(a) - self.theta1.powf(a) * (1.0 - theta3).powf(b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub params: Lemma2Params,
    /// `None` when `c₃ = 0` (no disturbance: the residual set is the origin).
    pub theta3: Option<f64>,
    pub theta3_residual: f64,
    /// Settling-time bound, when an initial `V` was supplied.
    pub settling_time: Option<f64>,
    /// Level `V*` of the residual set `{V < V*}` from the first form.
    pub level_d1: f64,
    /// Level from the second form; equal to `level_d1` at the root.
    pub level_d2: f64,
    /// `Δ₂ = λ_min(P)^{−1/2}(1−θ₃)c₃/θ₂`, when `λ_min(P)` was supplied.
    pub residual_radius: Option<f64>,
}

/// Ultimate-boundedness data for `V̇ ≤ −c₁V^{p₁} − c₂V + c₃V^{p₂}`.
pub fn residual_set_lemma2(params: &Lemma2Params, v0: Option<f64>, lambda_min_p: Option<f64>) -> Result<BoundReport> {
    params.validate()?;
    let settling_time = match v0 {
        Some(v0) => Some(settling_time_lemma1(params.c1 - params.theta1, params.c2 - params.theta2, params.p1, v0)?),
        None => None,
    };
    if let Some(l) = lambda_min_p {
        if !(l > 0.0) {
            return Err(domain(format!("lambda_min(P) must be > 0, got {l}")));
        }
    }

    if params.c3 == 0.0 {
        return Ok(BoundReport {
            params: *params,
            theta3: None,
            theta3_residual: 0.0,
            settling_time,
            level_d1: 0.0,
            level_d2: 0.0,
            residual_radius: lambda_min_p.map(|_| 0.0),
        });
    }

    let theta3 = bisect_unit_interval(|x| params.theta3_residual(x))?;
    let residual = params.theta3_residual(theta3);
    let (p1, p2, c3) = (params.p1, params.p2, params.c3);
    let level_d1 = (theta3 * c3 / params.theta1).powf(1.0 / (p1 - p2));
    let level_d2 = ((1.0 - theta3) * c3 / params.theta2).powf(1.0 / (1.0 - p2));
    let residual_radius = lambda_min_p.map(|l| (1.0 - theta3) * c3 / (params.theta2 * l.sqrt()));

    Ok(BoundReport {
        params: *params,
        theta3: Some(theta3),
        theta3_residual: residual,
        settling_time,
        level_d1,
        level_d2,
        residual_radius,
    })
}

fn bisect_unit_interval(f: impl Fn(f64) -> f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return Err(Error::NoRoot { f_lo, f_hi });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Certificate-backed bounds: plugs the snapshot decay rates, the
/// disturbance-rate bound `delta` and `p₂ = 1/2` into
/// [`residual_set_lemma2`] with the default θ's.
pub fn certificate_bounds(cert: &Certificate, delta: f64, v0: Option<f64>) -> Result<BoundReport> {
    if !cert.feasible {
        return Err(domain(format!("certificate infeasible: {}", cert.failures.join("; "))));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(domain(format!("disturbance-rate bound must be >= 0, got {delta}")));
    }
    let params = Lemma2Params::with_default_thetas(
        cert.fractional_rate(),
        cert.linear_rate(0.0),
        cert.disturbance_rate(delta),
        cert.p1,
        0.5,
    );
    residual_set_lemma2(&params, v0, Some(cert.lambda_min_p()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtinctionSample {
    pub v0: f64,
    /// First time the integrated `V` falls to `EXTINCTION_FRACTION·V₀`.
    pub extinction_time: f64,
    pub bound: f64,
}

impl ExtinctionSample {
    pub fn within_bound(&self) -> bool {
        self.extinction_time <= self.bound
    }
}

/// Extinction is declared once `V` drops below this fraction of `V₀`.
pub const EXTINCTION_FRACTION: f64 = 1e-9;

/// Steps per settling-time bound used to integrate the scalar comparison
/// system.
const STEPS_PER_BOUND: f64 = 50_000.0;

/// Integrates `V̇ = −c₁V^p − c₂V` from each `V₀` with RK4 and compares the
/// extinction time with [`settling_time_lemma1`].
pub fn verify_lemma1_bound(c1: f64, c2: f64, p: f64, v0s: &[f64]) -> Result<Vec<ExtinctionSample>> {
    v0s.iter()
        .map(|&v0| {
            let bound = settling_time_lemma1(c1, c2, p, v0)?;
            if v0 == 0.0 {
                return Ok(ExtinctionSample { v0, extinction_time: 0.0, bound });
            }
            let h = bound / STEPS_PER_BOUND;
            let target = EXTINCTION_FRACTION * v0;
            let rhs = |_: f64, v: &[f64; 1]| [-c1 * sig_pow_unchecked(v[0], p) - c2 * v[0]];
            let (mut t, mut v) = (0.0, [v0]);
            let max_steps = (2.0 * STEPS_PER_BOUND) as usize;
            for _ in 0..max_steps {
                let next = rk4_step(rhs, &v, t, h)?;
                if next[0] <= target {
                    // V is convex and decreasing, so the chord crosses the
                    // target no earlier than the solution does.
                    let w = (v[0] - target) / (v[0] - next[0]);
                    return Ok(ExtinctionSample { v0, extinction_time: t + w * h, bound });
                }
                v = next;
                t += h;
            }
            Ok(ExtinctionSample { v0, extinction_time: f64::INFINITY, bound })
        })
        .collect()
}
