//! Scenario files: a versioned TOML schema describing one closed-loop run.
//!
//! Angles may be given as plain numbers (radians) or as strings with an
//! explicit unit suffix, e.g. `"-24deg"` or `"0.1rad"`.

use serde::{Deserialize, Serialize};

use crate::controllers::{AdaptiveSmc, ControlLaw, Smc, SmcConfig};
use crate::error::{Error, Result};
use crate::gains::{GainConfig, DEFAULT_EPSILON, DEFAULT_L0_INIT};
use crate::observer::{DisturbanceObserver, ObserverFamily};
use crate::plant::{DisturbanceSpec, HeliParams, PlantState, DEFAULT_COS_FLOOR};
use crate::surfaces::NsiSurfaceConfig;

pub const SCHEMA_VERSION: u32 = 1;

/// Angle in radians, parsed from a number or a unit-suffixed string.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "AngleRepr", into = "f64")]
pub struct Angle(pub f64);

#[derive(Deserialize)]
#[serde(untagged)]
enum AngleRepr {
    Number(f64),
    Text(String),
}

impl TryFrom<AngleRepr> for Angle {
    type Error = String;

    fn try_from(r: AngleRepr) -> std::result::Result<Self, String> {
        match r {
            AngleRepr::Number(v) => Ok(Angle(v)),
            AngleRepr::Text(s) => parse_angle(&s).map(Angle),
        }
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

pub fn parse_angle(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim();
    let (num, to_rad) = if let Some(n) = t.strip_suffix("deg") {
        (n, std::f64::consts::PI / 180.0)
    } else if let Some(n) = t.strip_suffix("rad") {
        (n, 1.0)
    } else {
        return Err(format!("angle \"{s}\" needs a unit suffix (deg or rad)"));
    };
    num.trim()
        .parse::<f64>()
        .map(|v| v * to_rad)
        .map_err(|e| format!("angle \"{s}\": {e}"))
}

/// Desired trajectory `amplitude·sin(frequency·t + phase) + offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    pub amplitude: Angle,
    /// [rad/s]
    pub frequency: f64,
    #[serde(default)]
    pub phase: Angle,
    #[serde(default)]
    pub offset: Angle,
}

impl ReferenceSpec {
    pub fn elevation_default() -> Self {
        Self {
            amplitude: Angle(0.2),
            frequency: 0.08,
            phase: Angle(-std::f64::consts::FRAC_PI_2),
            offset: Angle(0.0),
        }
    }

    pub fn pitch_default() -> Self {
        Self { amplitude: Angle(0.1), frequency: 0.06, phase: Angle(0.0), offset: Angle(0.0) }
    }

    /// Position, velocity and acceleration at time `t`.
    pub fn eval(&self, t: f64) -> (f64, f64, f64) {
        let (a, w) = (self.amplitude.0, self.frequency);
        let arg = w * t + self.phase.0;
        let (s, c) = arg.sin_cos();
        (a * s + self.offset.0, a * w * c, -a * w * w * s)
    }

    fn validate(&self, key: &str) -> Result<()> {
        for v in [self.amplitude.0, self.frequency, self.phase.0, self.offset.0] {
            if !v.is_finite() {
                return Err(Error::Config(format!("reference.{key}: non-finite value")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct References {
    #[serde(default = "ReferenceSpec::elevation_default")]
    pub elevation: ReferenceSpec,
    #[serde(default = "ReferenceSpec::pitch_default")]
    pub pitch: ReferenceSpec,
}

impl Default for References {
    fn default() -> Self {
        Self { elevation: ReferenceSpec::elevation_default(), pitch: ReferenceSpec::pitch_default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub elevation: Angle,
    #[serde(default)]
    pub elevation_rate: f64,
    #[serde(default)]
    pub pitch: Angle,
    #[serde(default)]
    pub pitch_rate: f64,
}

impl InitialState {
    pub fn to_plant_state(&self) -> PlantState {
        PlantState::new(self.elevation.0, self.elevation_rate, self.pitch.0, self.pitch_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Disturbances {
    #[serde(default)]
    pub elevation: DisturbanceSpec,
    #[serde(default)]
    pub pitch: DisturbanceSpec,
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

fn default_l0_init() -> f64 {
    DEFAULT_L0_INIT
}

fn default_m2() -> f64 {
    2.0
}

fn default_eta() -> f64 {
    crate::controllers::DEFAULT_ETA
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerConfig {
    Afssosmc {
        k1: f64,
        k2: f64,
        k3: f64,
        k4: f64,
        m: f64,
        kappa: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_l0_init")]
        l0_init: f64,
        gamma_a: f64,
        gamma_b: f64,
        p: f64,
    },
    IntsmAfsosmc {
        k1: f64,
        k2: f64,
        k3: f64,
        k4: f64,
        #[serde(default = "default_m2")]
        m: f64,
        kappa: f64,
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "default_l0_init")]
        l0_init: f64,
    },
    Smc {
        c_t: f64,
        k_t: f64,
        #[serde(default = "default_eta")]
        eta: f64,
    },
}

impl ControllerConfig {
    pub fn kind(&self) -> &'static str {
        match self {
            ControllerConfig::Afssosmc { .. } => "afssosmc",
            ControllerConfig::IntsmAfsosmc { .. } => "intsm_afsosmc",
            ControllerConfig::Smc { .. } => "smc",
        }
    }

    pub fn gain_config(&self) -> Option<GainConfig> {
        match *self {
            ControllerConfig::Afssosmc { k1, k2, k3, k4, m, kappa, epsilon, l0_init, .. }
            | ControllerConfig::IntsmAfsosmc { k1, k2, k3, k4, m, kappa, epsilon, l0_init } => Some(
                GainConfig::new([k1, k2, k3, k4], m, kappa).with_epsilon(epsilon).with_l0_init(l0_init),
            ),
            ControllerConfig::Smc { .. } => None,
        }
    }

    pub fn build(&self) -> Result<Box<dyn ControlLaw>> {
        Ok(match *self {
            ControllerConfig::Afssosmc { gamma_a, gamma_b, p, .. } => {
                let gains = self.gain_config().expect("adaptive law");
                Box::new(AdaptiveSmc::afssosmc(gains, NsiSurfaceConfig { gamma_a, gamma_b, p })?)
            }
            ControllerConfig::IntsmAfsosmc { .. } => {
                Box::new(AdaptiveSmc::intsm_afsosmc(self.gain_config().expect("adaptive law"))?)
            }
            ControllerConfig::Smc { c_t, k_t, eta } => Box::new(Smc::new(SmcConfig { c_t, k_t, eta })?),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Controllers {
    pub elevation: ControllerConfig,
    pub pitch: ControllerConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverConfig {
    pub family: ObserverFamily,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub k4: f64,
    pub m: f64,
    pub kappa: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_l0_init")]
    pub l0_init: f64,
}

impl ObserverConfig {
    pub fn gain_config(&self) -> GainConfig {
        GainConfig::new([self.k1, self.k2, self.k3, self.k4], self.m, self.kappa)
            .with_epsilon(self.epsilon)
            .with_l0_init(self.l0_init)
    }

    pub fn build(&self, e2_0: f64) -> Result<DisturbanceObserver> {
        DisturbanceObserver::new(self.family, self.gain_config(), e2_0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Observers {
    pub elevation: Option<ObserverConfig>,
    pub pitch: Option<ObserverConfig>,
}

pub const DEFAULT_STEADY_WINDOW: f64 = 0.25;
pub const DEFAULT_TOLERANCE: f64 = 1e-3;

fn default_steady_window() -> f64 {
    DEFAULT_STEADY_WINDOW
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Trailing fraction of the run treated as steady state.
    #[serde(default = "default_steady_window")]
    pub steady_window: f64,
    /// Convergence threshold on `|e1|` [rad].
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { steady_window: DEFAULT_STEADY_WINDOW, tolerance: DEFAULT_TOLERANCE }
    }
}

impl MetricsConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.steady_window > 0.0 && self.steady_window <= 1.0) {
            return Err(Error::Config(format!("metrics.steady_window must lie in (0, 1], got {}", self.steady_window)));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::Config(format!("metrics.tolerance must be > 0, got {}", self.tolerance)));
        }
        Ok(())
    }
}

fn default_duration() -> f64 {
    60.0
}

fn default_step() -> f64 {
    1e-3
}

fn default_true() -> bool {
    true
}

fn default_cos_floor() -> f64 {
    DEFAULT_COS_FLOOR
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema_version: u32,
    pub name: String,
    /// [s]
    #[serde(default = "default_duration")]
    pub duration: f64,
    /// Fixed integration and control step [s]
    #[serde(default = "default_step")]
    pub step: f64,
    /// Clamp motor voltages to the plant's range.
    #[serde(default = "default_true")]
    pub saturation: bool,
    #[serde(default = "default_cos_floor")]
    pub cos_floor: f64,
    #[serde(default)]
    pub metrics: MetricsConfig,
    #[serde(default)]
    pub plant: HeliParams,
    pub initial: InitialState,
    #[serde(default)]
    pub reference: References,
    #[serde(default)]
    pub disturbance: Disturbances,
    pub controller: Controllers,
    #[serde(default)]
    pub observer: Observers,
}

impl Scenario {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let value: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Self::from_table(value)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let sc: Scenario = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        sc.validate()?;
        Ok(sc)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario serialises")
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.step).round() as usize
    }

    /// Range, sign and consistency checks, including building every
    /// controller and observer so infeasible gains are refused up front.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.name.trim().is_empty() {
            return Err(Error::Config("name must not be empty".into()));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            return Err(Error::Config(format!("step must be > 0, got {}", self.step)));
        }
        if !(self.duration >= self.step && self.duration.is_finite()) {
            return Err(Error::Config(format!("duration must be >= step, got {}", self.duration)));
        }
        if !(self.cos_floor > 0.0 && self.cos_floor < 1.0) {
            return Err(Error::Config(format!("cos_floor must lie in (0, 1), got {}", self.cos_floor)));
        }
        self.metrics.validate()?;
        self.plant.validate()?;
        if !self.initial.to_plant_state().is_finite() {
            return Err(Error::Config("initial state must be finite".into()));
        }
        self.reference.elevation.validate("elevation")?;
        self.reference.pitch.validate("pitch")?;

        for (key, d, ctrl, obs) in [
            ("elevation", &self.disturbance.elevation, &self.controller.elevation, &self.observer.elevation),
            ("pitch", &self.disturbance.pitch, &self.controller.pitch, &self.observer.pitch),
        ] {
            d.validate().map_err(|e| prefix(&format!("disturbance.{key}"), e))?;
            if let DisturbanceSpec::Table { times, .. } = d {
                if times[0] > 0.0 || times[times.len() - 1] < self.duration {
                    return Err(Error::Config(format!(
                        "disturbance.{key}: table must cover [0, {}]",
                        self.duration
                    )));
                }
            }
            ctrl.build().map_err(|e| prefix(&format!("controller.{key}"), e))?;
            if let ControllerConfig::Smc { eta, .. } = ctrl {
                let bound = d.magnitude_bound();
                if !(*eta > bound) {
                    return Err(Error::Config(format!(
                        "controller.{key}: eta = {eta} must exceed the disturbance bound {bound}"
                    )));
                }
            }
            if let Some(o) = obs {
                o.build(0.0).map_err(|e| prefix(&format!("observer.{key}"), e))?;
            }
        }
        Ok(())
    }
}

fn prefix(key: &str, e: Error) -> Error {
    match e {
        Error::Config(msg) => Error::Config(format!("{key}: {msg}")),
        Error::Infeasible { .. } => e,
        other => Error::Config(format!("{key}: {other}")),
    }
}

/// Sets `path` (dot-separated, e.g. `controller.elevation.k4`) to `raw`,
/// parsed as a TOML value when possible and as a string otherwise.
pub fn apply_override(table: &mut toml::Table, path: &str, raw: &str) -> Result<()> {
    let keys: Vec<&str> = path.split('.').map(str::trim).collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(Error::Config(format!("override key \"{path}\" is malformed")));
    }
    let value = parse_override_value(raw);
    let (last, parents) = keys.split_last().expect("non-empty");
    let mut cur = table;
    for k in parents {
        let entry = cur
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(Error::Config(format!("override key \"{path}\": \"{k}\" is not a table"))),
        };
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

fn parse_override_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match toml::from_str::<toml::Table>(&doc) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// The bundled scenario files reproducing the three comparative
/// experiments, as `(file name, contents)`.
pub const BUNDLED: &[(&str, &str)] = &[
    ("experiment1_afssosmc.toml", include_str!("../scenarios/experiment1_afssosmc.toml")),
    ("experiment1_intsm_afsosmc.toml", include_str!("../scenarios/experiment1_intsm_afsosmc.toml")),
    ("experiment2_afssosmc.toml", include_str!("../scenarios/experiment2_afssosmc.toml")),
    ("experiment2_intsm_afsosmc.toml", include_str!("../scenarios/experiment2_intsm_afsosmc.toml")),
    ("experiment3_assosmo.toml", include_str!("../scenarios/experiment3_assosmo.toml")),
    ("experiment3_asosmo.toml", include_str!("../scenarios/experiment3_asosmo.toml")),
];

/// Bundled scenario files of one experiment (1, 2 or 3): proposed method
/// first, comparison second.
pub fn experiment_files(id: u32) -> Result<[(&'static str, &'static str); 2]> {
    match id {
        1 => Ok([BUNDLED[0], BUNDLED[1]]),
        2 => Ok([BUNDLED[2], BUNDLED[3]]),
        3 => Ok([BUNDLED[4], BUNDLED[5]]),
        _ => Err(Error::Config(format!("experiment id must be 1, 2 or 3, got {id}"))),
    }
}

pub fn experiment(id: u32) -> Result<[Scenario; 2]> {
    let [a, b] = experiment_files(id)?;
    Ok([Scenario::from_toml_str(a.1)?, Scenario::from_toml_str(b.1)?])
}
