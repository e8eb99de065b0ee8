//! Integral sliding surfaces `s = e₂ + ∫ integrand(e₁, e₂) dτ`.
//!
//! Two families are provided: the non-singular integral surface used by
//! the proposed controller, and the integral non-singular terminal (INTSM)
//! surface of the comparison controller.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::numerics::sig_pow_unchecked;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NsiSurfaceConfig {
    /// Position gain [1/s²]
    pub gamma_a: f64,
    /// Rate gain
    pub gamma_b: f64,
    /// Position exponent, in (0, 1). The rate exponent is `2p/(1+p)`.
    pub p: f64,
}

impl NsiSurfaceConfig {
    pub fn new(gamma_a: f64, gamma_b: f64, p: f64) -> Result<Self> {
        let cfg = Self { gamma_a, gamma_b, p };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_a.is_finite() && self.gamma_a > 0.0) {
            return Err(Error::Config(format!("gamma_a must be > 0, got {}", self.gamma_a)));
        }
        if !(self.gamma_b.is_finite() && self.gamma_b > 0.0) {
            return Err(Error::Config(format!("gamma_b must be > 0, got {}", self.gamma_b)));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return Err(Error::Config(format!("p must lie in (0, 1), got {}", self.p)));
        }
        Ok(())
    }

    pub fn rate_exponent(&self) -> f64 {
        2.0 * self.p / (1.0 + self.p)
    }
}

/// `z = γ_a·⌈e₁⌋^p + γ_b·⌈e₂⌋^{2p/(1+p)}`.
pub fn nsi_z(e1: f64, e2: f64, cfg: &NsiSurfaceConfig) -> f64 {
    cfg.gamma_a * sig_pow_unchecked(e1, cfg.p) + cfg.gamma_b * sig_pow_unchecked(e2, cfg.rate_exponent())
}

/// `z_c = e₁ + ⌈e₂⌋^{3/2}`.
pub fn intsm_zc(e1: f64, e2: f64) -> f64 {
    e1 + sig_pow_unchecked(e2, 1.5)
}

/// Integrand of the INTSM surface, `⌈z_c⌋^{1/3}`.
pub fn intsm_integrand(e1: f64, e2: f64) -> f64 {
    sig_pow_unchecked(intsm_zc(e1, e2), 1.0 / 3.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SurfaceState {
    /// Accumulated integral of the surface integrand [rad/s]
    pub integral: f64,
    /// Surface value at the last accepted step [rad/s]
    pub s: f64,
}

impl SurfaceState {
    pub fn with_integral(integral: f64, e2: f64) -> Self {
        Self { integral, s: e2 + integral }
    }
}

/// Which integral surface a controller slides on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Surface {
    NonSingularIntegral(NsiSurfaceConfig),
    Intsm,
}

impl Surface {
    pub fn integrand(&self, e1: f64, e2: f64) -> f64 {
        match self {
            Surface::NonSingularIntegral(cfg) => nsi_z(e1, e2, cfg),
            Surface::Intsm => intsm_integrand(e1, e2),
        }
    }

    pub fn value(&self, e2: f64, integral: f64) -> f64 {
        e2 + integral
    }

    /// Advances the integral over one step with the errors held at
    /// `(e1, e2)`, then recomputes `s`.
    pub fn step(&self, e1: f64, e2: f64, st: SurfaceState, h: f64) -> Result<SurfaceState> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(domain(format!("surface step size must be > 0, got {h}")));
        }
        let integral = st.integral + h * self.integrand(e1, e2);
        if !integral.is_finite() {
            return Err(Error::NumericBlowup { time: f64::NAN, term: "surface integral".into() });
        }
        Ok(SurfaceState::with_integral(integral, e2))
    }
}

pub fn nsi_surface_step(e1: f64, e2: f64, cfg: &NsiSurfaceConfig, st: SurfaceState, h: f64) -> Result<SurfaceState> {
    Surface::NonSingularIntegral(*cfg).step(e1, e2, st, h)
}

pub fn intsm_surface_step(e1: f64, e2: f64, st: SurfaceState, h: f64) -> Result<SurfaceState> {
    Surface::Intsm.step(e1, e2, st, h)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp1() -> NsiSurfaceConfig {
        NsiSurfaceConfig::new(5.0, 5.0, 0.6).unwrap()
    }

    #[test]
    fn nsi_z_examples() {
        let cfg = exp1();
        assert_eq!(nsi_z(0.0, 0.0, &cfg), 0.0);
        assert!((nsi_z(1.0, 0.0, &cfg) - 5.0).abs() < 1e-15);
        assert!((nsi_z(0.0, -1.0, &cfg) + 5.0).abs() < 1e-15);
        assert!((cfg.rate_exponent() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn config_rejects_out_of_range() {
        assert!(NsiSurfaceConfig::new(0.0, 1.0, 0.5).is_err());
        assert!(NsiSurfaceConfig::new(1.0, -1.0, 0.5).is_err());
        assert!(NsiSurfaceConfig::new(1.0, 1.0, 1.0).is_err());
        assert!(NsiSurfaceConfig::new(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn nsi_step_examples() {
        let cfg = exp1();
        let mut st = SurfaceState::default();
        for _ in 0..5000 {
            st = nsi_surface_step(0.0, 0.0, &cfg, st, 1e-3).unwrap();
        }
        assert_eq!(st, SurfaceState::default());

        let mut st = SurfaceState::default();
        for _ in 0..1000 {
            st = nsi_surface_step(1.0, 0.0, &cfg, st, 1e-3).unwrap();
        }
        assert!((st.integral - 5.0).abs() < 1e-6 && (st.s - 5.0).abs() < 1e-6);

        let jumped = SurfaceState::with_integral(0.0, 0.7);
        assert_eq!(jumped.s, 0.7);
    }

    #[test]
    fn intsm_examples() {
        assert_eq!(intsm_zc(0.0, 0.0), 0.0);
        assert_eq!(intsm_zc(1.0, 0.0), 1.0);
        assert!((intsm_zc(0.0, 4.0) - 8.0).abs() < 1e-12);

        let mut st = SurfaceState::default();
        for _ in 0..1000 {
            st = intsm_surface_step(8.0, 0.0, st, 1e-3).unwrap();
        }
        assert!((st.integral - 2.0).abs() < 1e-6);

        let mut st = SurfaceState::default();
        for _ in 0..2000 {
            st = intsm_surface_step(-1.0, 0.0, st, 1e-3).unwrap();
        }
        assert!((st.integral + 2.0).abs() < 1e-6);
    }

    #[test]
    fn step_rejects_bad_h() {
        assert!(intsm_surface_step(1.0, 0.0, SurfaceState::default(), 0.0).is_err());
    }
}
