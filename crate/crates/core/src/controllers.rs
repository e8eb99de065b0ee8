//! Per-channel control laws for the relative-degree-two error channel
//! `ė₁ = e₂, ė₂ = g·v + f + d`.
//!
//! * [`AdaptiveSmc::afssosmc`]: the adaptive fast smooth second-order law on
//!   the non-singular integral surface (`m > 2`).
//! * [`AdaptiveSmc::intsm_afsosmc`]: the comparison law, same structure with
//!   `m = 2` on the INTSM surface; its integral term switches on `sgn(s)`.
//! * [`Smc`]: the conventional first-order law used to isolate observers.
//!
//! All laws return the auxiliary input `v`. Internal integrals are exposed
//! through [`ControlLaw::internals`] / [`ControlLaw::internal_rates`] so a
//! simulator can carry them inside its own integration step.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::gains::{adapt_step, check_feasibility, gain_values, GainConfig, GainFamily, GainState};
use crate::numerics::{rk4_step, sgn};
use crate::surfaces::{NsiSurfaceConfig, Surface, SurfaceState};

/// One tracking channel in the unified form at a sampling instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorChannel {
    /// Position error [rad]
    pub e1: f64,
    /// Rate error [rad/s]
    pub e2: f64,
    /// Known drift, including the reference feedforward `−ẍ_ref` [rad/s²]
    pub f: f64,
    /// Control effectiveness [rad/s² per N], bounded away from zero
    pub g: f64,
}

impl ErrorChannel {
    pub fn new(e1: f64, e2: f64, f: f64, g: f64) -> Self {
        Self { e1, e2, f, g }
    }
}

/// `(ė₁, ė₂) = (e₂, g·v + f + d)`.
pub fn closed_loop_error_rhs(ch: &ErrorChannel, v: f64, d: f64) -> (f64, f64) {
    (ch.e2, ch.g * v + ch.f + d)
}

pub trait ControlLaw: Send + std::fmt::Debug {
    fn name(&self) -> &'static str;

    /// Auxiliary control from the current internal state.
    fn control(&self, ch: &ErrorChannel) -> Result<f64>;

    /// Sliding variable for the given errors and current internal state.
    fn surface(&self, e1: f64, e2: f64) -> f64;

    /// Integrated internal quantities: `[surface integral, φ integral]`.
    fn internals(&self) -> [f64; 2] {
        [0.0; 2]
    }

    fn set_internals(&mut self, _x: [f64; 2]) {}

    /// Time derivative of [`ControlLaw::internals`] at errors `(e1, e2)` and
    /// internal value `x`, with the adaptive gains frozen at their current
    /// values.
    fn internal_rates(&self, _e1: f64, _e2: f64, _x: &[f64; 2]) -> [f64; 2] {
        [0.0; 2]
    }

    /// Gain adaptation over one step given the surface value at its start.
    fn adapt(&mut self, _s: f64, _h: f64) {}

    /// Current adaptive scalar, for laws that have one.
    fn l0(&self) -> Option<f64> {
        None
    }

    /// Standalone step with errors held over `h`: compute `v`, advance the
    /// internals, then adapt.
    fn step(&mut self, ch: &ErrorChannel, h: f64) -> Result<f64> {
        let v = self.control(ch)?;
        let s = self.surface(ch.e1, ch.e2);
        let x = self.internals();
        let next = rk4_step(|_, y| self.internal_rates(ch.e1, ch.e2, y), &x, 0.0, h)?;
        self.set_internals(next);
        self.adapt(s, h);
        Ok(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveSmcState {
    pub surface: SurfaceState,
    /// `∫[L₃⌈s⌋^{(m−2)/m} + L₄s] dτ`
    pub phi_integral: f64,
    pub gain: GainState,
}

/// Adaptive second-order sliding-mode law
/// `v = g⁻¹{−L₁⌈s⌋^{(m−1)/m} − L₂s − ż_int − f − ∫[L₃⌈s⌋^{(m−2)/m} + L₄s]dτ}`
/// where `ż_int` is the integrand of the chosen surface.
#[derive(Debug, Clone)]
pub struct AdaptiveSmc {
    name: &'static str,
    gains: GainConfig,
    surface: Surface,
    state: AdaptiveSmcState,
}

impl AdaptiveSmc {
    /// Proposed controller. Requires `m > 2` and the feasibility inequality.
    pub fn afssosmc(gains: GainConfig, surface: NsiSurfaceConfig) -> Result<Self> {
        gains.validate()?;
        surface.validate()?;
        if gains.family() != GainFamily::Smooth {
            return Err(Error::Config(format!("afssosmc needs m > 2, got m = {}", gains.m)));
        }
        let f = check_feasibility(&gains)?;
        if !f.feasible {
            return Err(Error::Infeasible { lhs: f.lhs, rhs: f.rhs });
        }
        Ok(Self::build("afssosmc", gains, Surface::NonSingularIntegral(surface)))
    }

    /// Comparison controller on the INTSM surface. Requires `m = 2`.
    pub fn intsm_afsosmc(gains: GainConfig) -> Result<Self> {
        gains.validate()?;
        if gains.family() != GainFamily::Comparison {
            return Err(Error::Config(format!("intsm_afsosmc needs m = 2, got m = {}", gains.m)));
        }
        Ok(Self::build("intsm_afsosmc", gains, Surface::Intsm))
    }

    fn build(name: &'static str, gains: GainConfig, surface: Surface) -> Self {
        Self {
            name,
            gains,
            surface,
            state: AdaptiveSmcState {
                surface: SurfaceState::default(),
                phi_integral: 0.0,
                gain: GainState::new(&gains),
            },
        }
    }

    pub fn state(&self) -> &AdaptiveSmcState {
        &self.state
    }

    pub fn set_state(&mut self, st: AdaptiveSmcState) {
        self.state = st;
    }

    pub fn gains(&self) -> &GainConfig {
        &self.gains
    }
}

impl ControlLaw for AdaptiveSmc {
    fn name(&self) -> &'static str {
        self.name
    }

    fn control(&self, ch: &ErrorChannel) -> Result<f64> {
        if !(ch.g.is_finite() && ch.g.abs() > 0.0) {
            return Err(domain(format!("control effectiveness must be nonzero, got {}", ch.g)));
        }
        let s = self.surface(ch.e1, ch.e2);
        let l = gain_values(&self.gains, &self.state.gain);
        let terms = [
            ("L1 term", -l.l1 * self.gains.outer_term(s)),
            ("L2 term", -l.l2 * s),
            ("surface integrand", -self.surface.integrand(ch.e1, ch.e2)),
            ("drift", -ch.f),
            ("phi integral", -self.state.phi_integral),
        ];
        if let Some((term, _)) = terms.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NumericBlowup { time: f64::NAN, term: format!("{} {term}", self.name) });
        }
        Ok(terms.iter().map(|(_, v)| v).sum::<f64>() / ch.g)
    }

    fn surface(&self, _e1: f64, e2: f64) -> f64 {
        self.surface.value(e2, self.state.surface.integral)
    }

    fn internals(&self) -> [f64; 2] {
        [self.state.surface.integral, self.state.phi_integral]
    }

    fn set_internals(&mut self, x: [f64; 2]) {
        self.state.surface.integral = x[0];
        self.state.phi_integral = x[1];
    }

    fn internal_rates(&self, e1: f64, e2: f64, x: &[f64; 2]) -> [f64; 2] {
        let s = self.surface.value(e2, x[0]);
        let l = gain_values(&self.gains, &self.state.gain);
        [
            self.surface.integrand(e1, e2),
            l.l3 * self.gains.inner_term(s) + l.l4 * s,
        ]
    }

    fn adapt(&mut self, s: f64, h: f64) {
        self.state.gain = adapt_step(self.state.gain, s, &self.gains, h);
    }

    fn l0(&self) -> Option<f64> {
        Some(self.state.gain.l0)
    }

    fn step(&mut self, ch: &ErrorChannel, h: f64) -> Result<f64> {
        let v = self.control(ch)?;
        let s = self.surface(ch.e1, ch.e2);
        let next = rk4_step(|_, y| self.internal_rates(ch.e1, ch.e2, y), &self.internals(), 0.0, h)?;
        self.set_internals(next);
        self.state.surface.s = self.surface(ch.e1, ch.e2);
        self.adapt(s, h);
        Ok(v)
    }
}

/// One step of the proposed law from an explicit state; returns `v` and the
/// advanced state.
pub fn afssosmc_control(
    ch: &ErrorChannel,
    st: AdaptiveSmcState,
    cfg: &GainConfig,
    scfg: &NsiSurfaceConfig,
    h: f64,
) -> Result<(f64, AdaptiveSmcState)> {
    let mut law = AdaptiveSmc::afssosmc(*cfg, *scfg)?;
    law.set_state(st);
    let v = law.step(ch, h)?;
    Ok((v, *law.state()))
}

/// One step of the comparison law from an explicit state.
pub fn intsm_afsosmc_control(
    ch: &ErrorChannel,
    st: AdaptiveSmcState,
    cfg: &GainConfig,
    h: f64,
) -> Result<(f64, AdaptiveSmcState)> {
    let mut law = AdaptiveSmc::intsm_afsosmc(*cfg)?;
    law.set_state(st);
    let v = law.step(ch, h)?;
    Ok((v, *law.state()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmcConfig {
    /// Surface slope [1/s]
    pub c_t: f64,
    /// Proportional reaching gain [1/s]
    pub k_t: f64,
    /// Switching gain [rad/s²]; must exceed the disturbance bound
    #[serde(default = "default_eta")]
    pub eta: f64,
}

pub const DEFAULT_ETA: f64 = 1.0;

fn default_eta() -> f64 {
    DEFAULT_ETA
}

impl SmcConfig {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("c_t", self.c_t), ("k_t", self.k_t), ("eta", self.eta)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{key} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Conventional sliding-mode law on `s_t = e₂ + c_t·e₁`:
/// `v = g⁻¹(−f − c_t e₂ − η sgn(s_t) − k_t s_t)`.
pub fn smc_control(ch: &ErrorChannel, cfg: &SmcConfig) -> f64 {
    let s = ch.e2 + cfg.c_t * ch.e1;
    (-ch.f - cfg.c_t * ch.e2 - cfg.eta * sgn(s) - cfg.k_t * s) / ch.g
}

#[derive(Debug, Clone)]
pub struct Smc {
    cfg: SmcConfig,
}

impl Smc {
    pub fn new(cfg: SmcConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }
}

impl ControlLaw for Smc {
    fn name(&self) -> &'static str {
        "smc"
    }

    fn control(&self, ch: &ErrorChannel) -> Result<f64> {
        let v = smc_control(ch, &self.cfg);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NumericBlowup { time: f64::NAN, term: "smc control".into() })
        }
    }

    fn surface(&self, e1: f64, e2: f64) -> f64 {
        e2 + self.cfg.c_t * e1
    }
}
