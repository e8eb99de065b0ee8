//! Adaptive-gain sliding-mode disturbance observers.
//!
//! The auxiliary estimate follows `ê̇₂ = (g·v + f) + d̂` with
//! `d̂ = L₁⌈s_d⌋^{(m−1)/m} + L₂s_d + φ_d`,
//! `φ̇_d = L₃⌈s_d⌋^{(m−2)/m} + L₄s_d` and `s_d = e₂ − ê₂`.
//! With `m > 2` this is the smooth observer (ASSOSMO); `m = 2` gives the
//! super-twisting-type comparison observer (ASOSMO), whose `φ̇_d` switches.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gains::{adapt_step, check_feasibility, gain_values, GainConfig, GainFamily, GainState};
use crate::numerics::rk4_step;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObserverFamily {
    Assosmo,
    Asosmo,
}

impl ObserverFamily {
    pub fn as_str(&self) -> &'static str {
        match self {
            ObserverFamily::Assosmo => "assosmo",
            ObserverFamily::Asosmo => "asosmo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverState {
    /// Auxiliary rate estimate [rad/s]
    pub e2_hat: f64,
    /// Internal integral [rad/s²]
    pub phi_d: f64,
    pub gain: GainState,
}

#[derive(Debug, Clone)]
pub struct DisturbanceObserver {
    family: ObserverFamily,
    gains: GainConfig,
    state: ObserverState,
}

impl DisturbanceObserver {
    /// Builds an observer initialised on the measured rate error `e2_0`
    /// (zero initial surface, `φ_d = 0`).
    pub fn new(family: ObserverFamily, gains: GainConfig, e2_0: f64) -> Result<Self> {
        gains.validate()?;
        match (family, gains.family()) {
            (ObserverFamily::Assosmo, GainFamily::Smooth) => {
                let f = check_feasibility(&gains)?;
                if !f.feasible {
                    return Err(Error::Infeasible { lhs: f.lhs, rhs: f.rhs });
                }
            }
            (ObserverFamily::Asosmo, GainFamily::Comparison) => {}
            (fam, _) => {
                return Err(Error::Config(format!(
                    "observer family {} does not accept m = {}",
                    fam.as_str(),
                    gains.m
                )))
            }
        }
        Ok(Self {
            family,
            gains,
            state: ObserverState { e2_hat: e2_0, phi_d: 0.0, gain: GainState::new(&gains) },
        })
    }

    pub fn family(&self) -> ObserverFamily {
        self.family
    }

    pub fn gains(&self) -> &GainConfig {
        &self.gains
    }

    pub fn state(&self) -> &ObserverState {
        &self.state
    }

    pub fn set_state(&mut self, st: ObserverState) {
        self.state = st;
    }

    pub fn internals(&self) -> [f64; 2] {
        [self.state.e2_hat, self.state.phi_d]
    }

    pub fn set_internals(&mut self, x: [f64; 2]) {
        self.state.e2_hat = x[0];
        self.state.phi_d = x[1];
    }

    /// `d̂` for the measured `e2` and internal values `x = [ê₂, φ_d]`.
    pub fn estimate_at(&self, e2: f64, x: &[f64; 2]) -> f64 {
        let sd = e2 - x[0];
        let l = gain_values(&self.gains, &self.state.gain);
        l.l1 * self.gains.outer_term(sd) + l.l2 * sd + x[1]
    }

    pub fn estimate(&self, e2: f64) -> f64 {
        self.estimate_at(e2, &self.internals())
    }

    pub fn surface(&self, e2: f64) -> f64 {
        e2 - self.state.e2_hat
    }

    /// Rates of `[ê₂, φ_d]` given the known part of the channel
    /// acceleration, `g·v + f`.
    pub fn rates(&self, e2: f64, known: f64, x: &[f64; 2]) -> [f64; 2] {
        let sd = e2 - x[0];
        let l = gain_values(&self.gains, &self.state.gain);
        let d_hat = l.l1 * self.gains.outer_term(sd) + l.l2 * sd + x[1];
        [known + d_hat, l.l3 * self.gains.inner_term(sd) + l.l4 * sd]
    }

    pub fn adapt(&mut self, sd: f64, h: f64) {
        self.state.gain = adapt_step(self.state.gain, sd, &self.gains, h);
    }

    pub fn l0(&self) -> f64 {
        self.state.gain.l0
    }

    /// Standalone step with `e2` and the known acceleration held over `h`.
    /// Returns the estimate at the start of the step.
    pub fn step(&mut self, e2: f64, known: f64, h: f64) -> Result<f64> {
        let d_hat = self.estimate(e2);
        if !d_hat.is_finite() {
            return Err(Error::NumericBlowup { time: f64::NAN, term: format!("{} estimate", self.family.as_str()) });
        }
        let sd = self.surface(e2);
        let next = rk4_step(|_, y| self.rates(e2, known, y), &self.internals(), 0.0, h)?;
        self.set_internals(next);
        self.adapt(sd, h);
        Ok(d_hat)
    }
}

/// One observer step from an explicit state; the family follows from `cfg.m`.
pub fn observer_step(
    obs: ObserverState,
    e2: f64,
    known: f64,
    cfg: &GainConfig,
    h: f64,
) -> Result<(f64, ObserverState)> {
    let family = match cfg.family() {
        GainFamily::Smooth => ObserverFamily::Assosmo,
        GainFamily::Comparison => ObserverFamily::Asosmo,
    };
    let mut o = DisturbanceObserver::new(family, *cfg, obs.e2_hat)?;
    o.set_state(obs);
    let d_hat = o.step(e2, known, h)?;
    Ok((d_hat, *o.state()))
}
