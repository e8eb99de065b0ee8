//! Adaptive gain family `L₁..L₄(t)` driven by one scalar `L₀(t)`.
//!
//! `L₁ = k₁L₀^{(m−1)/m}`, `L₂ = k₂L₀^{(2m−2)/m}`, `L₃ = k₃L₀^{(2m−2)/m}`,
//! `L₄ = k₄L₀^{(4m−4)/m}`; `L₀` grows at rate κ while `|s| ≥ ε`.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::{sgn, sig_pow_unchecked};

pub const DEFAULT_EPSILON: f64 = 1e-3;
pub const DEFAULT_L0_INIT: f64 = 1.0;

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_l0_init() -> f64 {
    DEFAULT_L0_INIT
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainConfig {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    /// Homogeneity degree; `m > 2` for the smooth laws, `m = 2` for the
    /// comparison (super-twisting) family.
    pub m: f64,
    /// Adaptation rate [1/s]
    pub kappa: f64,
    /// Dead-zone half-width in surface units
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_l0_init")]
    pub l0_init: f64,
}

/// Whether a configuration belongs to the smooth family or the `m = 2`
/// comparison family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GainFamily {
    Smooth,
    Comparison,
}

impl GainConfig {
    pub fn new(k: [f64; 4], m: f64, kappa: f64) -> Self {
        Self {
            k1: k[0],
            k2: k[1],
            k3: k[2],
            k4: k[3],
            m,
            kappa,
            epsilon: DEFAULT_EPSILON,
            l0_init: DEFAULT_L0_INIT,
        }
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_l0_init(mut self, l0_init: f64) -> Self {
        self.l0_init = l0_init;
        self
    }

    pub fn family(&self) -> GainFamily {
        if self.m == 2.0 {
            GainFamily::Comparison
        } else {
            GainFamily::Smooth
        }
    }

    /// Checks signs and ranges; does not check the feasibility inequality.
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("k1", self.k1), ("k2", self.k2), ("k3", self.k3), ("k4", self.k4), ("kappa", self.kappa)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{key} must be finite and > 0, got {v}")));
            }
        }
        if !(self.m.is_finite() && self.m >= 2.0) {
            return Err(Error::Config(format!("m must be 2 (comparison family) or > 2, got {}", self.m)));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::Config(format!("epsilon must be >= 0, got {}", self.epsilon)));
        }
        if !(self.l0_init.is_finite() && self.l0_init > 0.0) {
            return Err(Error::Config(format!("l0_init must be > 0, got {}", self.l0_init)));
        }
        Ok(())
    }

    /// Exponent `(m−1)/m` of the proportional fractional term.
    pub fn outer_exponent(&self) -> f64 {
        (self.m - 1.0) / self.m
    }

    /// Exponent `(m−2)/m` of the integral fractional term (0 for `m = 2`).
    pub fn inner_exponent(&self) -> f64 {
        (self.m - 2.0) / self.m
    }

    /// `⌈s⌋^{(m−1)/m}`.
    #[inline]
    pub fn outer_term(&self, s: f64) -> f64 {
        sig_pow_unchecked(s, self.outer_exponent())
    }

    /// `⌈s⌋^{(m−2)/m}`, which degenerates to `sgn(s)` when `m = 2`.
    #[inline]
    pub fn inner_term(&self, s: f64) -> f64 {
        match self.family() {
            GainFamily::Comparison => sgn(s),
            GainFamily::Smooth => sig_pow_unchecked(s, self.inner_exponent()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub lhs: f64,
    pub rhs: f64,
    pub feasible: bool,
    /// `lhs − rhs`
    pub margin: f64,
    /// `m ≤ 2`: the inequality is evaluated literally but the stability
    /// argument it belongs to does not cover this regime.
    pub out_of_family: bool,
}

/// `m²k₃k₄ > (m³k₃/(m−1) + (4m²−4m+1)k₁²)k₂²`.
pub fn check_feasibility(cfg: &GainConfig) -> Result<Feasibility> {
    let m = cfg.m;
    if !(m > 1.0) {
        return Err(domain(format!("feasibility needs m > 1, got {m}")));
    }
    let lhs = m * m * cfg.k3 * cfg.k4;
    let rhs = (m.powi(3) * cfg.k3 / (m - 1.0) + (4.0 * m * m - 4.0 * m + 1.0) * cfg.k1 * cfg.k1) * cfg.k2 * cfg.k2;
    Ok(Feasibility {
        lhs,
        rhs,
        feasible: lhs > rhs,
        margin: lhs - rhs,
        out_of_family: m <= 2.0,
    })
}

/// Current adaptive scalar of one controller channel or observer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainState {
    pub l0: f64,
}

impl GainState {
    pub fn new(cfg: &GainConfig) -> Self {
        Self { l0: cfg.l0_init }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveGains {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
}

pub fn gain_values(cfg: &GainConfig, st: &GainState) -> AdaptiveGains {
    let m = cfg.m;
    let l0 = st.l0;
    let half = l0.powf((2.0 * m - 2.0) / m);
    AdaptiveGains {
        l1: cfg.k1 * l0.powf((m - 1.0) / m),
        l2: cfg.k2 * half,
        l3: cfg.k3 * half,
        l4: cfg.k4 * l0.powf((4.0 * m - 4.0) / m),
    }
}

/// Dead-zone adaptation: `L₀ += κh` when `|s| ≥ ε`, otherwise unchanged.
pub fn adapt_step(st: GainState, s: f64, cfg: &GainConfig, h: f64) -> GainState {
    if s.abs() >= cfg.epsilon {
        GainState { l0: st.l0 + cfg.kappa * h }
    } else {
        st
    }
}
