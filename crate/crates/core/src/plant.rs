//! Elevation/pitch dynamics of the 3-DOF helicopter, the motor-voltage map
//! and lumped disturbance signals.

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// Physical constants of the bench helicopter (SI units).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeliParams {
    /// Moment of inertia of the elevation axis [kg·m²]
    pub j_alpha: f64,
    /// Moment of inertia of the pitch axis [kg·m²]
    pub j_beta: f64,
    /// Elevation axis to helicopter body [m]
    pub l_a: f64,
    /// Pitch axis to either motor [m]
    pub l_h: f64,
    /// Effective mass [kg]
    pub m_eff: f64,
    /// Gravitational acceleration [m/s²]
    pub g: f64,
    /// Propeller force-thrust constant [N/V]
    pub k_f: f64,
    pub v_min: f64,
    pub v_max: f64,
}

impl Default for HeliParams {
    fn default() -> Self {
        Self {
            j_alpha: 1.0348,
            j_beta: 0.0451,
            l_a: 0.66,
            l_h: 0.178,
            m_eff: 0.094,
            g: 9.81,
            k_f: 0.1188,
            v_min: -24.0,
            v_max: 24.0,
        }
    }
}

impl HeliParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("j_alpha", self.j_alpha),
            ("j_beta", self.j_beta),
            ("l_a", self.l_a),
            ("l_h", self.l_h),
            ("m_eff", self.m_eff),
            ("g", self.g),
            ("k_f", self.k_f),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("plant.{key} must be finite and > 0, got {v}")));
            }
        }
        if !(self.v_min.is_finite() && self.v_max.is_finite() && self.v_min < self.v_max) {
            return Err(Error::Config(format!(
                "plant voltage range needs v_min < v_max, got [{}, {}]",
                self.v_min, self.v_max
            )));
        }
        Ok(())
    }

    /// Control effectiveness of the elevation channel, `L_a / J_α`.
    pub fn elevation_gain(&self) -> f64 {
        self.l_a / self.j_alpha
    }

    /// Control effectiveness of the pitch channel, `L_h / J_β`.
    pub fn pitch_gain(&self) -> f64 {
        self.l_h / self.j_beta
    }

    /// Gravity term of the elevation acceleration at elevation `x1`.
    pub fn gravity_accel(&self, x1: f64) -> f64 {
        -self.g / self.j_alpha * self.m_eff * self.l_a * x1.cos()
    }

    /// Total lift that holds the arm level, `m·g` [N].
    pub fn hover_thrust(&self) -> f64 {
        self.m_eff * self.g
    }
}

/// Mechanical operating domain, radians.
pub const ELEVATION_MIN: f64 = -27.5 * std::f64::consts::PI / 180.0;
pub const ELEVATION_MAX: f64 = 30.0 * std::f64::consts::PI / 180.0;
pub const PITCH_LIMIT: f64 = 45.0 * std::f64::consts::PI / 180.0;

/// Default floor on `|cos(pitch)|` below which the elevation input map is
/// treated as singular.
pub const DEFAULT_COS_FLOOR: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlantState {
    /// Elevation α [rad]
    pub x1: f64,
    /// Elevation rate [rad/s]
    pub x2: f64,
    /// Pitch β [rad]
    pub x3: f64,
    /// Pitch rate [rad/s]
    pub x4: f64,
}

impl PlantState {
    pub fn new(x1: f64, x2: f64, x3: f64, x4: f64) -> Self {
        Self { x1, x2, x3, x4 }
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.x1, self.x2, self.x3, self.x4]
    }

    pub fn from_array(a: [f64; 4]) -> Self {
        Self::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }

    pub fn elevation_in_domain(&self) -> bool {
        (ELEVATION_MIN..=ELEVATION_MAX).contains(&self.x1)
    }

    pub fn pitch_in_domain(&self) -> bool {
        (-PITCH_LIMIT..=PITCH_LIMIT).contains(&self.x3)
    }

    pub fn in_domain(&self) -> bool {
        self.elevation_in_domain() && self.pitch_in_domain()
    }
}

/// Time derivative of the plant state under thrust inputs `u1`, `u2` [N]
/// and lumped disturbances `d1`, `d2` [rad/s²].
pub fn plant_deriv(s: &PlantState, u1: f64, u2: f64, d1: f64, d2: f64, p: &HeliParams) -> [f64; 4] {
    [
        s.x2,
        p.elevation_gain() * s.x3.cos() * u1 + p.gravity_accel(s.x1) + d1,
        s.x4,
        p.pitch_gain() * u2 + d2,
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotorVoltages {
    pub front: f64,
    pub back: f64,
    /// At least one motor hit its voltage limit.
    pub saturated: bool,
}

impl MotorVoltages {
    /// Thrust inputs produced by these voltages.
    pub fn to_controls(&self, p: &HeliParams) -> (f64, f64) {
        (p.k_f * (self.front + self.back), p.k_f * (self.front - self.back))
    }
}

/// Inverts the thrust map `u1 = K_f(V_f + V_b)`, `u2 = K_f(V_f − V_b)` and
/// optionally clamps each voltage to the motor range.
pub fn controls_to_voltages(u1: f64, u2: f64, p: &HeliParams, clamp: bool) -> MotorVoltages {
    let front = (u1 + u2) / (2.0 * p.k_f);
    let back = (u1 - u2) / (2.0 * p.k_f);
    if !clamp {
        return MotorVoltages { front, back, saturated: false };
    }
    let cf = front.clamp(p.v_min, p.v_max);
    let cb = back.clamp(p.v_min, p.v_max);
    MotorVoltages {
        front: cf,
        back: cb,
        saturated: cf != front || cb != back,
    }
}

/// Auxiliary inputs `(v1, v2)` to thrusts: `u1 = v1 / cos(x3)`, `u2 = v2`.
pub fn aux_to_physical(v1: f64, v2: f64, x3: f64, cos_floor: f64) -> Result<(f64, f64)> {
    let c = x3.cos();
    if c.abs() < cos_floor {
        return Err(Error::Singularity { pitch: x3, cos: c, floor: cos_floor });
    }
    Ok((v1 / c, v2))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceSpec {
    #[default]
    None,
    Constant {
        offset: f64,
    },
    /// `amplitude·sin(frequency·t + phase) + offset`
    Sinusoid {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default)]
        offset: f64,
    },
    /// Piecewise-linear in time; `times` strictly increasing.
    Table {
        times: Vec<f64>,
        values: Vec<f64>,
    },
}

impl DisturbanceSpec {
    pub fn sinusoid(amplitude: f64, frequency: f64, phase: f64, offset: f64) -> Self {
        DisturbanceSpec::Sinusoid { amplitude, frequency, phase, offset }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            DisturbanceSpec::None => Ok(()),
            DisturbanceSpec::Constant { offset } => finite("offset", *offset),
            DisturbanceSpec::Sinusoid { amplitude, frequency, phase, offset } => {
                finite("amplitude", *amplitude)?;
                finite("frequency", *frequency)?;
                finite("phase", *phase)?;
                finite("offset", *offset)
            }
            DisturbanceSpec::Table { times, values } => {
                if times.len() != values.len() || times.len() < 2 {
                    return Err(Error::Config(format!(
                        "disturbance table needs matching times/values with >= 2 entries, got {} and {}",
                        times.len(),
                        values.len()
                    )));
                }
                if times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Config("disturbance table times must be strictly increasing".into()));
                }
                for v in times.iter().chain(values) {
                    finite("table entry", *v)?;
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(domain(format!("disturbance evaluated at negative time {t}")));
        }
        Ok(match self {
            DisturbanceSpec::None => 0.0,
            DisturbanceSpec::Constant { offset } => *offset,
            DisturbanceSpec::Sinusoid { amplitude, frequency, phase, offset } => {
                amplitude * (frequency * t + phase).sin() + offset
            }
            DisturbanceSpec::Table { times, values } => {
                let (start, end) = (times[0], times[times.len() - 1]);
                if t < start || t > end {
                    return Err(Error::Extrapolation { t, start, end });
                }
                let i = times.partition_point(|&x| x <= t).clamp(1, times.len() - 1);
                let (t0, t1) = (times[i - 1], times[i]);
                let w = (t - t0) / (t1 - t0);
                values[i - 1] + w * (values[i] - values[i - 1])
            }
        })
    }

    /// Upper bound on `|d(t)|`.
    pub fn magnitude_bound(&self) -> f64 {
        match self {
            DisturbanceSpec::None => 0.0,
            DisturbanceSpec::Constant { offset } => offset.abs(),
            DisturbanceSpec::Sinusoid { amplitude, offset, .. } => amplitude.abs() + offset.abs(),
            DisturbanceSpec::Table { values, .. } => values.iter().fold(0.0, |m, v| m.max(v.abs())),
        }
    }

    /// Upper bound on `|ḋ(t)|`.
    pub fn rate_bound(&self) -> f64 {
        match self {
            DisturbanceSpec::None | DisturbanceSpec::Constant { .. } => 0.0,
            DisturbanceSpec::Sinusoid { amplitude, frequency, .. } => (amplitude * frequency).abs(),
            DisturbanceSpec::Table { times, values } => times
                .windows(2)
                .zip(values.windows(2))
                .map(|(t, v)| ((v[1] - v[0]) / (t[1] - t[0])).abs())
                .fold(0.0, f64::max),
        }
    }
}

/// Public wrapper matching the operation name used elsewhere.
pub fn eval_disturbance(spec: &DisturbanceSpec, t: f64) -> Result<f64> {
    spec.eval(t)
}

fn finite(key: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("disturbance {key} must be finite, got {v}")))
    }
}
