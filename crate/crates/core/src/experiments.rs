//! Closed-loop run engine, sample records, metrics and run comparison.
//!
//! Each step holds the control computed from the sampled state (zero-order
//! hold) while one RK4 step advances the plant together with every
//! controller and observer integral. Adaptive scalars are then advanced by
//! explicit Euler using the surface values at the start of the step.

use std::io::{Read, Write};

use crate::controllers::{ControlLaw, ErrorChannel};
use crate::error::{Error, Result};
use crate::numerics::{rk4_step, total_variation};
use crate::observer::DisturbanceObserver;
use crate::plant::{aux_to_physical, controls_to_voltages, plant_deriv, DisturbanceSpec, HeliParams, PlantState};
use crate::scenario::{MetricsConfig, ReferenceSpec, Scenario};

/// Position, velocity and acceleration of a reference at `t`.
pub fn reference_eval(spec: &ReferenceSpec, t: f64) -> (f64, f64, f64) {
    spec.eval(t)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Elevation,
    Pitch,
}

impl Channel {
    pub const ALL: [Channel; 2] = [Channel::Elevation, Channel::Pitch];

    pub fn as_str(&self) -> &'static str {
        match self {
            Channel::Elevation => "elevation",
            Channel::Pitch => "pitch",
        }
    }

    fn prefix(&self) -> &'static str {
        match self {
            Channel::Elevation => "elev",
            Channel::Pitch => "pitch",
        }
    }
}

/// Per-channel part of a [`SimRecord`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ChannelSample {
    pub reference: f64,
    pub reference_dot: f64,
    pub reference_ddot: f64,
    /// Position error [rad]
    pub e1: f64,
    /// Rate error [rad/s]
    pub e2: f64,
    /// Sliding variable of the channel's controller
    pub s: f64,
    /// Auxiliary control [N]
    pub v: f64,
    pub l0: Option<f64>,
    /// True lumped disturbance [rad/s²]
    pub d: f64,
    pub d_hat: Option<f64>,
    pub observer_l0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimRecord {
    pub t: f64,
    pub x: PlantState,
    pub elevation: ChannelSample,
    pub pitch: ChannelSample,
    /// Applied thrust inputs after saturation [N]
    pub u1: f64,
    pub u2: f64,
    pub v_front: f64,
    pub v_back: f64,
    pub saturated: bool,
    pub domain_violation: bool,
}

impl SimRecord {
    pub fn channel(&self, ch: Channel) -> &ChannelSample {
        match ch {
            Channel::Elevation => &self.elevation,
            Channel::Pitch => &self.pitch,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Termination {
    pub time: f64,
    pub cause: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub name: String,
    pub records: Vec<SimRecord>,
    pub metrics: MetricsReport,
    /// Set when the run stopped before its configured duration.
    pub termination: Option<Termination>,
}

struct ChannelUnit {
    law: Box<dyn ControlLaw>,
    observer: Option<DisturbanceObserver>,
    reference: ReferenceSpec,
    disturbance: DisturbanceSpec,
}

/// Augmented state: plant (4), controller integrals (2 per channel),
/// observer internals (2 per channel).
const STATE_LEN: usize = 12;

fn ctrl_slot(i: usize) -> usize {
    4 + 2 * i
}

fn obs_slot(i: usize) -> usize {
    8 + 2 * i
}

/// Runs a validated scenario. Refuses (returns `Err`) on invalid or
/// infeasible configuration; numeric failures during the run truncate the
/// record and are reported through [`RunOutput::termination`].
pub fn run_scenario(sc: &Scenario) -> Result<RunOutput> {
    sc.validate()?;
    let p = sc.plant;
    let h = sc.step;
    let n_steps = sc.steps();
    let x0 = sc.initial.to_plant_state();

    let mut units = Vec::with_capacity(2);
    for (i, ch) in Channel::ALL.iter().enumerate() {
        let (reference, disturbance, ctrl, obs) = match ch {
            Channel::Elevation => (
                sc.reference.elevation,
                sc.disturbance.elevation.clone(),
                sc.controller.elevation,
                sc.observer.elevation,
            ),
            Channel::Pitch => (sc.reference.pitch, sc.disturbance.pitch.clone(), sc.controller.pitch, sc.observer.pitch),
        };
        let (_, rd, _) = reference.eval(0.0);
        let e2_0 = if i == 0 { x0.x2 - rd } else { x0.x4 - rd };
        let observer = match obs {
            Some(o) => Some(o.build(e2_0)?),
            None => None,
        };
        units.push(ChannelUnit { law: ctrl.build()?, observer, reference, disturbance });
    }

    let mut y = [0.0; STATE_LEN];
    y[..4].copy_from_slice(&x0.as_array());
    for (i, u) in units.iter().enumerate() {
        y[ctrl_slot(i)..ctrl_slot(i) + 2].copy_from_slice(&u.law.internals());
        if let Some(o) = &u.observer {
            y[obs_slot(i)..obs_slot(i) + 2].copy_from_slice(&o.internals());
        }
    }

    let mut records = Vec::with_capacity(n_steps + 1);
    let mut termination = None;

    for k in 0..=n_steps {
        let t = k as f64 * h;
        let x = PlantState::from_array([y[0], y[1], y[2], y[3]]);

        let sample = match sample_at(t, &x, &units, &p, sc) {
            Ok(s) => s,
            Err(e) => {
                termination = Some(termination_from(e, t));
                break;
            }
        };
        records.push(sample.record);
        if k == n_steps {
            break;
        }

        let (u1, u2) = (sample.record.u1, sample.record.u2);
        let rhs = |tt: f64, z: &[f64; STATE_LEN]| augmented_rhs(tt, z, u1, u2, &units, &p);
        match rk4_step(rhs, &y, t, h) {
            Ok(next) => y = next,
            Err(e) => {
                termination = Some(termination_from(e, t + h));
                break;
            }
        }
        for (i, u) in units.iter_mut().enumerate() {
            u.law.set_internals([y[ctrl_slot(i)], y[ctrl_slot(i) + 1]]);
            u.law.adapt(sample.surfaces[i], h);
            if let Some(o) = u.observer.as_mut() {
                o.set_internals([y[obs_slot(i)], y[obs_slot(i) + 1]]);
                o.adapt(sample.observer_surfaces[i], h);
            }
        }
    }

    let metrics = if records.len() < 2 {
        MetricsReport::degenerate(&records, &sc.metrics, termination.clone())
    } else {
        compute_metrics(&records, &sc.metrics, termination.as_ref())?
    };
    Ok(RunOutput { name: sc.name.clone(), records, metrics, termination })
}

fn termination_from(e: Error, t: f64) -> Termination {
    let cause = match e {
        Error::NumericBlowup { term, .. } => format!("numeric blowup in {term}"),
        other => other.to_string(),
    };
    Termination { time: t, cause }
}

struct Sample {
    record: SimRecord,
    surfaces: [f64; 2],
    observer_surfaces: [f64; 2],
}

fn channel_drift(ch: Channel, x: &PlantState, ref_ddot: f64, p: &HeliParams) -> (f64, f64) {
    match ch {
        Channel::Elevation => (p.gravity_accel(x.x1) - ref_ddot, p.elevation_gain()),
        Channel::Pitch => (-ref_ddot, p.pitch_gain()),
    }
}

fn channel_errors(ch: Channel, x: &PlantState, r: f64, rd: f64) -> (f64, f64) {
    match ch {
        Channel::Elevation => (x.x1 - r, x.x2 - rd),
        Channel::Pitch => (x.x3 - r, x.x4 - rd),
    }
}

fn sample_at(t: f64, x: &PlantState, units: &[ChannelUnit], p: &HeliParams, sc: &Scenario) -> Result<Sample> {
    let mut chans = [ChannelSample::default(); 2];
    let mut surfaces = [0.0; 2];
    let mut observer_surfaces = [0.0; 2];
    for (i, (ch, u)) in Channel::ALL.iter().zip(units).enumerate() {
        let (r, rd, rdd) = u.reference.eval(t);
        let (e1, e2) = channel_errors(*ch, x, r, rd);
        let (f, g) = channel_drift(*ch, x, rdd, p);
        let v = u.law.control(&ErrorChannel::new(e1, e2, f, g)).map_err(|e| match e {
            Error::NumericBlowup { term, .. } => Error::NumericBlowup { time: t, term },
            other => other,
        })?;
        let s = u.law.surface(e1, e2);
        surfaces[i] = s;
        let (d_hat, observer_l0) = match &u.observer {
            Some(o) => {
                observer_surfaces[i] = o.surface(e2);
                (Some(o.estimate(e2)), Some(o.l0()))
            }
            None => (None, None),
        };
        chans[i] = ChannelSample {
            reference: r,
            reference_dot: rd,
            reference_ddot: rdd,
            e1,
            e2,
            s,
            v,
            l0: u.law.l0(),
            d: u.disturbance.eval(t)?,
            d_hat,
            observer_l0,
        };
    }
    let (u1, u2) = aux_to_physical(chans[0].v, chans[1].v, x.x3, sc.cos_floor)?;
    let volts = controls_to_voltages(u1, u2, p, sc.saturation);
    let (u1a, u2a) = if volts.saturated { volts.to_controls(p) } else { (u1, u2) };
    Ok(Sample {
        record: SimRecord {
            t,
            x: *x,
            elevation: chans[0],
            pitch: chans[1],
            u1: u1a,
            u2: u2a,
            v_front: volts.front,
            v_back: volts.back,
            saturated: volts.saturated,
            domain_violation: !x.in_domain(),
        },
        surfaces,
        observer_surfaces,
    })
}

fn augmented_rhs(
    t: f64,
    z: &[f64; STATE_LEN],
    u1: f64,
    u2: f64,
    units: &[ChannelUnit],
    p: &HeliParams,
) -> [f64; STATE_LEN] {
    let x = PlantState::from_array([z[0], z[1], z[2], z[3]]);
    // Tables are checked to cover the run, so evaluation cannot fail here;
    // NaN would surface as a blowup regardless.
    let d: Vec<f64> = units.iter().map(|u| u.disturbance.eval(t).unwrap_or(f64::NAN)).collect();
    let dx = plant_deriv(&x, u1, u2, d[0], d[1], p);

    let mut out = [0.0; STATE_LEN];
    out[..4].copy_from_slice(&dx);
    for (i, (ch, u)) in Channel::ALL.iter().zip(units).enumerate() {
        let (r, rd, rdd) = u.reference.eval(t);
        let (e1, e2) = channel_errors(*ch, &x, r, rd);
        let cs = ctrl_slot(i);
        let rates = u.law.internal_rates(e1, e2, &[z[cs], z[cs + 1]]);
        out[cs..cs + 2].copy_from_slice(&rates);
        if let Some(o) = &u.observer {
            // Everything in the channel acceleration except the disturbance.
            let accel = if i == 0 { dx[1] } else { dx[3] };
            let known = accel - d[i] - rdd;
            let os = obs_slot(i);
            let r = o.rates(e2, known, &[z[os], z[os + 1]]);
            out[os..os + 2].copy_from_slice(&r);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverMetrics {
    /// RMS of `d̂ − d` over the steady window
    pub rms_error: f64,
    /// Max of `|d̂ − d|` over the steady window
    pub max_error: f64,
    /// Total variation of `d̂` over the steady window
    pub estimate_tv: f64,
    pub l0_final: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelMetrics {
    /// Earliest sample time after which `|e1|` stays below the tolerance.
    pub convergence_time: Option<f64>,
    /// Max `|e1|` over the steady window.
    pub steady_band: f64,
    /// Total variation of `v` over the steady window.
    pub control_tv: f64,
    pub l0_final: Option<f64>,
    pub observer: Option<ObserverMetrics>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub tolerance: f64,
    pub window: (f64, f64),
    pub samples: usize,
    pub saturated_samples: usize,
    pub domain_violation_samples: usize,
    pub elevation: ChannelMetrics,
    pub pitch: ChannelMetrics,
    pub termination: Option<Termination>,
}

impl MetricsReport {
    /// Report for a run that stopped before producing two samples.
    fn degenerate(records: &[SimRecord], cfg: &MetricsConfig, termination: Option<Termination>) -> Self {
        let empty = ChannelMetrics {
            convergence_time: None,
            steady_band: f64::NAN,
            control_tv: f64::NAN,
            l0_final: None,
            observer: None,
        };
        let t = records.first().map_or(0.0, |r| r.t);
        MetricsReport {
            tolerance: cfg.tolerance,
            window: (t, t),
            samples: records.len(),
            saturated_samples: records.iter().filter(|r| r.saturated).count(),
            domain_violation_samples: records.iter().filter(|r| r.domain_violation).count(),
            elevation: empty,
            pitch: empty,
            termination,
        }
    }

    pub fn channel(&self, ch: Channel) -> &ChannelMetrics {
        match ch {
            Channel::Elevation => &self.elevation,
            Channel::Pitch => &self.pitch,
        }
    }

    /// `key = value` lines, one metric per line.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&v);
            out.push('\n');
        };
        kv("tolerance_rad", fmt_f(self.tolerance));
        kv("steady_window_start_s", fmt_f(self.window.0));
        kv("steady_window_end_s", fmt_f(self.window.1));
        kv("samples", self.samples.to_string());
        kv("saturated_samples", self.saturated_samples.to_string());
        kv("domain_violation_samples", self.domain_violation_samples.to_string());
        for ch in Channel::ALL {
            let m = self.channel(ch);
            let p = ch.as_str();
            kv(&format!("{p}.convergence_time_s"), fmt_opt(m.convergence_time));
            kv(&format!("{p}.steady_band_rad"), fmt_f(m.steady_band));
            kv(&format!("{p}.control_tv"), fmt_f(m.control_tv));
            kv(&format!("{p}.l0_final"), fmt_opt(m.l0_final));
            if let Some(o) = &m.observer {
                kv(&format!("{p}.observer.rms_error"), fmt_f(o.rms_error));
                kv(&format!("{p}.observer.max_error"), fmt_f(o.max_error));
                kv(&format!("{p}.observer.estimate_tv"), fmt_f(o.estimate_tv));
                kv(&format!("{p}.observer.l0_final"), fmt_f(o.l0_final));
            }
        }
        match &self.termination {
            Some(t) => {
                kv("terminated_at_s", fmt_f(t.time));
                kv("termination_cause", format!("\"{}\"", t.cause));
            }
            None => kv("terminated_at_s", String::new()),
        }
        out
    }
}

/// Metrics computed from stored records only.
pub fn compute_metrics(records: &[SimRecord], cfg: &MetricsConfig, termination: Option<&Termination>) -> Result<MetricsReport> {
    if records.len() < 2 {
        return Err(Error::Record(format!("need at least 2 samples for metrics, got {}", records.len())));
    }
    let t_end = records[records.len() - 1].t;
    let t0 = t_end * (1.0 - cfg.steady_window);
    let times: Vec<f64> = records.iter().map(|r| r.t).collect();

    let channel = |ch: Channel| -> Result<ChannelMetrics> {
        let samples: Vec<&ChannelSample> = records.iter().map(|r| r.channel(ch)).collect();
        let last_bad = samples.iter().rposition(|c| !(c.e1.abs() < cfg.tolerance));
        let convergence_time = match last_bad {
            None => Some(times[0]),
            Some(i) if i + 1 < samples.len() => Some(times[i + 1]),
            Some(_) => None,
        };
        let in_window = |t: f64| t >= t0 && t <= t_end;
        let steady_band = samples
            .iter()
            .zip(&times)
            .filter(|(_, t)| in_window(**t))
            .fold(0.0_f64, |m, (c, _)| m.max(c.e1.abs()));
        let v: Vec<f64> = samples.iter().map(|c| c.v).collect();
        let control_tv = total_variation(&times, &v, t0, t_end)?;
        let last = samples[samples.len() - 1];

        let observer = match last.d_hat {
            Some(_) => {
                let err: Vec<(f64, f64)> = samples
                    .iter()
                    .zip(&times)
                    .filter(|(_, t)| in_window(**t))
                    .map(|(c, t)| (*t, c.d_hat.unwrap_or(f64::NAN) - c.d))
                    .collect();
                let n = err.len() as f64;
                let rms_error = (err.iter().map(|(_, e)| e * e).sum::<f64>() / n).sqrt();
                let max_error = err.iter().fold(0.0_f64, |m, (_, e)| m.max(e.abs()));
                let est: Vec<f64> = samples.iter().map(|c| c.d_hat.unwrap_or(f64::NAN)).collect();
                Some(ObserverMetrics {
                    rms_error,
                    max_error,
                    estimate_tv: total_variation(&times, &est, t0, t_end)?,
                    l0_final: last.observer_l0.unwrap_or(f64::NAN),
                })
            }
            None => None,
        };
        Ok(ChannelMetrics { convergence_time, steady_band, control_tv, l0_final: last.l0, observer })
    };

    Ok(MetricsReport {
        tolerance: cfg.tolerance,
        window: (t0, t_end),
        samples: records.len(),
        saturated_samples: records.iter().filter(|r| r.saturated).count(),
        domain_violation_samples: records.iter().filter(|r| r.domain_violation).count(),
        elevation: channel(Channel::Elevation)?,
        pitch: channel(Channel::Pitch)?,
        termination: termination.cloned(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub metric: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
}

impl ComparisonRow {
    /// `b − a`
    pub fn difference(&self) -> Option<f64> {
        Some(self.b? - self.a?)
    }

    /// `b / a`
    pub fn ratio(&self) -> Option<f64> {
        let (a, b) = (self.a?, self.b?);
        if a == 0.0 {
            if b == 0.0 {
                Some(1.0)
            } else {
                None
            }
        } else {
            Some(b / a)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub label_a: String,
    pub label_b: String,
    pub rows: Vec<ComparisonRow>,
}

impl Comparison {
    pub fn row(&self, metric: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.metric == metric)
    }

    pub fn render(&self) -> String {
        let width = self.rows.iter().map(|r| r.metric.len()).max().unwrap_or(6).max(6);
        let mut out = format!(
            "{:<width$}  {:>16}  {:>16}  {:>16}  {:>12}\n",
            "metric", self.label_a, self.label_b, "b - a", "b / a"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<width$}  {:>16}  {:>16}  {:>16}  {:>12}\n",
                r.metric,
                fmt_cell(r.a),
                fmt_cell(r.b),
                fmt_cell(r.difference()),
                fmt_cell(r.ratio())
            ));
        }
        out
    }
}

fn fmt_cell(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6e}"),
        None => "-".into(),
    }
}

/// Paired metrics of two runs on the same time grid.
pub fn compare_runs(
    label_a: &str,
    a: &[SimRecord],
    label_b: &str,
    b: &[SimRecord],
    cfg: &MetricsConfig,
) -> Result<Comparison> {
    if a.len() != b.len() {
        return Err(Error::GridMismatch(format!("{} samples vs {}", a.len(), b.len())));
    }
    if let Some((ra, rb)) = a.iter().zip(b).find(|(ra, rb)| (ra.t - rb.t).abs() > 1e-9 * ra.t.abs().max(1.0)) {
        return Err(Error::GridMismatch(format!("t = {} vs t = {}", ra.t, rb.t)));
    }
    let ma = compute_metrics(a, cfg, None)?;
    let mb = compute_metrics(b, cfg, None)?;
    let mut rows = Vec::new();
    for ch in Channel::ALL {
        let (ca, cb) = (ma.channel(ch), mb.channel(ch));
        let p = ch.as_str();
        let mut push = |name: &str, x: Option<f64>, y: Option<f64>| {
            rows.push(ComparisonRow { metric: format!("{p}.{name}"), a: x, b: y });
        };
        push("convergence_time_s", ca.convergence_time, cb.convergence_time);
        push("steady_band_rad", Some(ca.steady_band), Some(cb.steady_band));
        push("control_tv", Some(ca.control_tv), Some(cb.control_tv));
        push("l0_final", ca.l0_final, cb.l0_final);
        if ca.observer.is_some() || cb.observer.is_some() {
            push("observer.rms_error", ca.observer.map(|o| o.rms_error), cb.observer.map(|o| o.rms_error));
            push("observer.max_error", ca.observer.map(|o| o.max_error), cb.observer.map(|o| o.max_error));
            push("observer.estimate_tv", ca.observer.map(|o| o.estimate_tv), cb.observer.map(|o| o.estimate_tv));
            push("observer.l0_final", ca.observer.map(|o| o.l0_final), cb.observer.map(|o| o.l0_final));
        }
    }
    Ok(Comparison { label_a: label_a.into(), label_b: label_b.into(), rows })
}

const CHANNEL_COLUMNS: [&str; 11] = [
    "ref_rad",
    "ref_dot_rad_s",
    "ref_ddot_rad_s2",
    "e1_rad",
    "e2_rad_s",
    "s_rad_s",
    "v_n",
    "l0",
    "d_rad_s2",
    "dhat_rad_s2",
    "obs_l0",
];

/// Column names of the record CSV, in their stable order.
pub fn csv_header() -> Vec<String> {
    let mut cols: Vec<String> = ["t_s", "x1_rad", "x2_rad_s", "x3_rad", "x4_rad_s"].iter().map(|s| s.to_string()).collect();
    for ch in Channel::ALL {
        cols.extend(CHANNEL_COLUMNS.iter().map(|c| format!("{}_{c}", ch.prefix())));
    }
    cols.extend(["u1_n", "u2_n", "vf_v", "vb_v", "saturated", "domain_violation"].iter().map(|s| s.to_string()));
    cols
}

fn fmt_f(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_f).unwrap_or_default()
}

fn channel_fields(c: &ChannelSample) -> [String; 11] {
    [
        fmt_f(c.reference),
        fmt_f(c.reference_dot),
        fmt_f(c.reference_ddot),
        fmt_f(c.e1),
        fmt_f(c.e2),
        fmt_f(c.s),
        fmt_f(c.v),
        fmt_opt(c.l0),
        fmt_f(c.d),
        fmt_opt(c.d_hat),
        fmt_opt(c.observer_l0),
    ]
}

pub fn write_csv<W: Write>(records: &[SimRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Record(e.to_string());
    w.write_record(csv_header()).map_err(io)?;
    for r in records {
        let mut row = vec![fmt_f(r.t), fmt_f(r.x.x1), fmt_f(r.x.x2), fmt_f(r.x.x3), fmt_f(r.x.x4)];
        row.extend(channel_fields(&r.elevation));
        row.extend(channel_fields(&r.pitch));
        row.extend([
            fmt_f(r.u1),
            fmt_f(r.u2),
            fmt_f(r.v_front),
            fmt_f(r.v_back),
            u8::from(r.saturated).to_string(),
            u8::from(r.domain_violation).to_string(),
        ]);
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Record(e.to_string()))
}

/// Column names of a single-channel view CSV.
pub fn channel_csv_header(ch: Channel) -> Vec<String> {
    let mut cols = vec!["t_s".to_string()];
    cols.extend(CHANNEL_COLUMNS.iter().map(|c| format!("{}_{c}", ch.prefix())));
    cols.extend(["saturated", "domain_violation"].iter().map(|s| s.to_string()));
    cols
}

/// Time, the channel's columns and the run flags only.
pub fn write_channel_csv<W: Write>(records: &[SimRecord], ch: Channel, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Record(e.to_string());
    w.write_record(channel_csv_header(ch)).map_err(io)?;
    for r in records {
        let mut row = vec![fmt_f(r.t)];
        row.extend(channel_fields(r.channel(ch)));
        row.extend([u8::from(r.saturated).to_string(), u8::from(r.domain_violation).to_string()]);
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::Record(e.to_string()))
}

/// Reads a record CSV written by [`write_csv`]; the header must match.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<SimRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let io = |e: csv::Error| Error::Record(e.to_string());
    let header: Vec<String> = rd.headers().map_err(io)?.iter().map(str::to_string).collect();
    let want = csv_header();
    if header != want {
        let missing: Vec<&String> = want.iter().filter(|c| !header.contains(c)).collect();
        return Err(Error::Record(format!("unexpected CSV header; missing columns: {missing:?}")));
    }
    let mut out = Vec::new();
    for (line, row) in rd.records().enumerate() {
        let row = row.map_err(io)?;
        let num = |i: usize| -> Result<f64> {
            row[i].parse::<f64>().map_err(|e| Error::Record(format!("row {}, column {}: {e}", line + 2, want[i])))
        };
        let opt = |i: usize| -> Result<Option<f64>> {
            if row[i].is_empty() {
                Ok(None)
            } else {
                num(i).map(Some)
            }
        };
        let chan = |base: usize| -> Result<ChannelSample> {
            Ok(ChannelSample {
                reference: num(base)?,
                reference_dot: num(base + 1)?,
                reference_ddot: num(base + 2)?,
                e1: num(base + 3)?,
                e2: num(base + 4)?,
                s: num(base + 5)?,
                v: num(base + 6)?,
                l0: opt(base + 7)?,
                d: num(base + 8)?,
                d_hat: opt(base + 9)?,
                observer_l0: opt(base + 10)?,
            })
        };
        let tail = 5 + 2 * CHANNEL_COLUMNS.len();
        out.push(SimRecord {
            t: num(0)?,
            x: PlantState::new(num(1)?, num(2)?, num(3)?, num(4)?),
            elevation: chan(5)?,
            pitch: chan(5 + CHANNEL_COLUMNS.len())?,
            u1: num(tail)?,
            u2: num(tail + 1)?,
            v_front: num(tail + 2)?,
            v_back: num(tail + 3)?,
            saturated: &row[tail + 4] == "1",
            domain_violation: &row[tail + 5] == "1",
        });
    }
    Ok(out)
}
