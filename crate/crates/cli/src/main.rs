use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;

use heli_smc::certify::{build_certificate, certificate_bounds, Certificate};
use heli_smc::experiments::{
    compare_runs, read_csv, run_scenario, write_channel_csv, write_csv, Channel, RunOutput,
};
use heli_smc::gains::{check_feasibility, GainConfig, GainFamily, DEFAULT_EPSILON};
use heli_smc::scenario::{apply_override, experiment_files, MetricsConfig, Scenario};
use heli_smc::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_REFUSED: u8 = 3;
const EXIT_TERMINATED: u8 = 4;

#[derive(Parser)]
#[command(name = "heli-smc", version, about = "Adaptive smooth sliding-mode control of a 3-DOF helicopter (elevation and pitch)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario files and write a CSV and metrics file per run.
    Simulate(SimulateArgs),
    /// Check the gain constraints and print the stability certificate.
    Certify(CertifyArgs),
    /// Run the paired bundled scenarios of experiment 1, 2 or 3.
    Reproduce(ReproduceArgs),
    /// Compare two record CSVs on the same time grid.
    Compare(CompareArgs),
}

#[derive(Args, Clone)]
struct RunOptions {
    /// Override a scenario key, e.g. `controller.elevation.k4=40`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Number of scenarios run concurrently.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
    #[command(flatten)]
    metrics: MetricsOptions,
}

#[derive(Args, Clone, Copy)]
struct MetricsOptions {
    /// Fraction of the run, at its end, used as the steady window.
    #[arg(long)]
    steady_window: Option<f64>,
    /// Convergence tolerance on |e1| [rad].
    #[arg(long)]
    tolerance: Option<f64>,
}

impl MetricsOptions {
    fn apply(&self, table: &mut toml::Table) -> heli_smc::Result<()> {
        if let Some(w) = self.steady_window {
            apply_override(table, "metrics.steady_window", &w.to_string())?;
        }
        if let Some(t) = self.tolerance {
            apply_override(table, "metrics.tolerance", &t.to_string())?;
        }
        Ok(())
    }

    fn config(&self) -> heli_smc::Result<MetricsConfig> {
        let mut cfg = MetricsConfig::default();
        if let Some(w) = self.steady_window {
            cfg.steady_window = w;
        }
        if let Some(t) = self.tolerance {
            cfg.tolerance = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file (TOML); repeat for several runs.
    #[arg(long = "config", required = true)]
    configs: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    run: RunOptions,
}

#[derive(Args)]
struct ReproduceArgs {
    /// Experiment number.
    #[arg(value_parser = clap::value_parser!(u32).range(1..=3))]
    experiment: u32,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[command(flatten)]
    run: RunOptions,
}

#[derive(Args)]
struct CompareArgs {
    a: PathBuf,
    b: PathBuf,
    /// Also write the table to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    metrics: MetricsOptions,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long, default_value_t = 2.0)]
    k1: f64,
    #[arg(long, default_value_t = 2.5)]
    k2: f64,
    #[arg(long, default_value_t = 4.0)]
    k3: f64,
    #[arg(long, default_value_t = 30.0)]
    k4: f64,
    #[arg(long, default_value_t = 3.0)]
    m: f64,
    /// Adaptive scalar snapshot at which the certificate is evaluated.
    #[arg(long, default_value_t = 1.0)]
    l0: f64,
    /// Adaptation rate used for the worst-case linear decay coefficient.
    #[arg(long, default_value_t = 5.0)]
    kappa: f64,
    /// Hypothetical bound on the disturbance rate, for the residual set.
    #[arg(long)]
    delta: Option<f64>,
    /// Initial Lyapunov level, for the settling-time bound.
    #[arg(long)]
    v0: Option<f64>,
    /// Print `key = value` lines instead of the text report.
    #[arg(long)]
    key_value: bool,
}

struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let err = e.into();
        let code = match err.downcast_ref::<Error>() {
            Some(Error::Infeasible { .. }) => EXIT_REFUSED,
            Some(Error::Config(_) | Error::Domain(_) | Error::GridMismatch(_) | Error::Record(_)) => EXIT_CONFIG,
            _ => 1,
        };
        Failure { code, err }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Certify(a) => certify(a),
        Command::Reproduce(a) => reproduce(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}

fn load_scenario(label: &str, text: &str, opts: &RunOptions) -> Result<Scenario, Failure> {
    let wrap = |e: Error| Failure { code: code_of(&e), err: anyhow::Error::new(e).context(label.to_string()) };
    let mut table: toml::Table =
        toml::from_str(text).map_err(|e| wrap(Error::Config(e.to_string())))?;
    for kv in &opts.overrides {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| wrap(Error::Config(format!("--set expects KEY=VALUE, got \"{kv}\""))))?;
        apply_override(&mut table, k, v).map_err(wrap)?;
    }
    opts.metrics.apply(&mut table).map_err(wrap)?;
    Scenario::from_table(table).map_err(wrap)
}

fn code_of(e: &Error) -> u8 {
    match e {
        Error::Infeasible { .. } => EXIT_REFUSED,
        _ => EXIT_CONFIG,
    }
}

fn run_all(scenarios: &[Scenario], jobs: u32) -> Result<Vec<RunOutput>, Failure> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs as usize).build()?;
    let runs: Vec<heli_smc::Result<RunOutput>> = pool.install(|| scenarios.par_iter().map(run_scenario).collect());
    let mut out = Vec::with_capacity(runs.len());
    for (sc, r) in scenarios.iter().zip(runs) {
        out.push(r.map_err(|e| Failure { code: code_of(&e), err: anyhow::Error::new(e).context(sc.name.clone()) })?);
    }
    Ok(out)
}

fn write_file(path: &Path, f: impl FnOnce(BufWriter<fs::File>) -> heli_smc::Result<()>) -> anyhow::Result<()> {
    let file = fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
    f(BufWriter::new(file)).with_context(|| format!("writing {}", path.display()))
}

fn write_metrics(dir: &Path, run: &RunOutput) -> anyhow::Result<()> {
    let path = dir.join(format!("{}.metrics.txt", run.name));
    fs::write(&path, run.metrics.to_key_values()).with_context(|| format!("writing {}", path.display()))
}

fn print_summary(run: &RunOutput) {
    for ch in Channel::ALL {
        let m = run.metrics.channel(ch);
        let conv = match m.convergence_time {
            Some(t) => format!("converged at {t:.3} s"),
            None => "not converged".into(),
        };
        let l0 = m.l0_final.map(|l| format!(", L0 {l:.4}")).unwrap_or_default();
        let obs = m
            .observer
            .map(|o| format!(", observer rms {:.3e} tv {:.4}", o.rms_error, o.estimate_tv))
            .unwrap_or_default();
        println!(
            "{} {}: {conv}, steady band {:.3e} rad, control tv {:.4}{l0}{obs}",
            run.name,
            ch.as_str(),
            m.steady_band,
            m.control_tv
        );
    }
    if let Some(t) = &run.termination {
        println!("{} terminated at {:.4} s: {}", run.name, t.time, t.cause);
    }
}

fn terminated(runs: &[RunOutput]) -> Result<(), Failure> {
    let stopped: Vec<String> = runs
        .iter()
        .filter_map(|r| r.termination.as_ref().map(|t| format!("{} at {:.4} s ({})", r.name, t.time, t.cause)))
        .collect();
    if stopped.is_empty() {
        Ok(())
    } else {
        Err(Failure {
            code: EXIT_TERMINATED,
            err: anyhow::anyhow!("run terminated early: {}", stopped.join("; ")),
        })
    }
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let mut scenarios = Vec::new();
    for path in &a.configs {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        scenarios.push(load_scenario(&path.display().to_string(), &text, &a.run)?);
    }
    let mut names: Vec<&str> = scenarios.iter().map(|s| s.name.as_str()).collect();
    names.sort_unstable();
    if let Some(w) = names.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::Config(format!("two scenarios share the name \"{}\"", w[0])).into());
    }
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;

    let runs = run_all(&scenarios, a.run.jobs)?;
    for run in &runs {
        write_file(&a.out.join(format!("{}.csv", run.name)), |w| write_csv(&run.records, w))?;
        write_metrics(&a.out, run)?;
        print_summary(run);
    }
    terminated(&runs)
}

fn reproduce(a: ReproduceArgs) -> Result<(), Failure> {
    let files = experiment_files(a.experiment)?;
    let scenarios = files
        .iter()
        .map(|(file, text)| load_scenario(file, text, &a.run))
        .collect::<Result<Vec<_>, _>>()?;
    let scen_dir = a.out.join("scenarios");
    fs::create_dir_all(&scen_dir).with_context(|| format!("creating {}", scen_dir.display()))?;
    for sc in &scenarios {
        fs::write(scen_dir.join(format!("{}.toml", sc.name)), sc.to_toml_string())
            .with_context(|| format!("writing scenario {}", sc.name))?;
    }

    let runs = run_all(&scenarios, a.run.jobs)?;
    for run in &runs {
        if a.experiment == 3 {
            write_file(&a.out.join(format!("{}.csv", run.name)), |w| write_csv(&run.records, w))?;
        } else {
            for ch in Channel::ALL {
                let path = a.out.join(format!("{}_{}.csv", run.name, ch.as_str()));
                write_file(&path, |w| write_channel_csv(&run.records, ch, w))?;
            }
        }
        write_metrics(&a.out, run)?;
        print_summary(run);
    }
    terminated(&runs)?;

    let metrics = &scenarios[0].metrics;
    let cmp = compare_runs(&runs[0].name, &runs[0].records, &runs[1].name, &runs[1].records, metrics)?;
    let table = cmp.render();
    fs::write(a.out.join("comparison.txt"), &table).context("writing comparison.txt")?;
    print!("{table}");
    Ok(())
}

fn compare(a: CompareArgs) -> Result<(), Failure> {
    let read = |p: &Path| -> Result<_, Failure> {
        let f = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
        read_csv(std::io::BufReader::new(f)).map_err(|e| Failure {
            code: EXIT_CONFIG,
            err: anyhow::Error::new(e).context(p.display().to_string()),
        })
    };
    let (ra, rb) = (read(&a.a)?, read(&a.b)?);
    let label = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let cmp = compare_runs(&label(&a.a), &ra, &label(&a.b), &rb, &a.metrics.config()?)?;
    let table = cmp.render();
    if let Some(out) = &a.out {
        fs::write(out, &table).with_context(|| format!("writing {}", out.display()))?;
    }
    print!("{table}");
    Ok(())
}

fn certify(a: CertifyArgs) -> Result<(), Failure> {
    let cfg = GainConfig {
        k1: a.k1,
        k2: a.k2,
        k3: a.k3,
        k4: a.k4,
        m: a.m,
        kappa: a.kappa,
        epsilon: DEFAULT_EPSILON,
        l0_init: a.l0,
    };
    if a.m.is_nan() || a.m <= 1.0 {
        return Err(Error::Domain(format!("m must be > 1, got {}", a.m)).into());
    }
    let feas = check_feasibility(&cfg)?;
    let mut kv: Vec<(String, String)> = vec![
        ("k1".into(), a.k1.to_string()),
        ("k2".into(), a.k2.to_string()),
        ("k3".into(), a.k3.to_string()),
        ("k4".into(), a.k4.to_string()),
        ("m".into(), a.m.to_string()),
        ("l0".into(), a.l0.to_string()),
        ("feasibility.lhs".into(), feas.lhs.to_string()),
        ("feasibility.rhs".into(), feas.rhs.to_string()),
        ("feasibility.margin".into(), feas.margin.to_string()),
        ("feasibility.feasible".into(), feas.feasible.to_string()),
    ];
    let mut text = String::new();
    let _ = writeln!(text, "gains: k1 = {}, k2 = {}, k3 = {}, k4 = {}, m = {}", a.k1, a.k2, a.k3, a.k4, a.m);
    let verdict = if feas.feasible {
        format!("feasible, margin {}", round_display(feas.margin))
    } else {
        format!("infeasible, margin {}", round_display(feas.margin))
    };
    let _ = writeln!(text, "gain inequality: lhs {} vs rhs {}: {verdict}", round_display(feas.lhs), round_display(feas.rhs));

    if cfg.family() == GainFamily::Comparison || feas.out_of_family {
        let _ = writeln!(
            text,
            "comparison family (m={}): smooth-family gain inequality regime not applicable; no certificate",
            a.m
        );
        kv.push(("family".into(), "comparison".into()));
        return emit(a.key_value, &text, &kv);
    }
    kv.push(("family".into(), "smooth".into()));

    let cert = build_certificate(&cfg, a.l0)?;
    certificate_text(&cert, a.kappa, &mut text, &mut kv);

    if let Some(delta) = a.delta {
        if cert.feasible {
            let b = certificate_bounds(&cert, delta, a.v0)?;
            let _ = writeln!(text, "bounds (delta = {delta}, p2 = 0.5, thetas = c/2):");
            let _ = writeln!(text, "  c1 = {:.6}, c2 = {:.6}, c3 = {:.6}", b.params.c1, b.params.c2, b.params.c3);
            match b.theta3 {
                Some(t3) => {
                    let _ = writeln!(text, "  theta3 = {t3:.12} (residual {:.3e})", b.theta3_residual);
                    kv.push(("bounds.theta3".into(), t3.to_string()));
                }
                None => {
                    let _ = writeln!(text, "  theta3 undefined (zero disturbance rate)");
                }
            }
            if let Some(t) = b.settling_time {
                let _ = writeln!(text, "  settling time bound = {t:.6} s");
                kv.push(("bounds.settling_time_s".into(), t.to_string()));
            }
            let _ = writeln!(text, "  level D1 = {:.6e}, level D2 = {:.6e}", b.level_d1, b.level_d2);
            if let Some(r) = b.residual_radius {
                let _ = writeln!(text, "  residual radius = {r:.6e}");
                kv.push(("bounds.residual_radius".into(), r.to_string()));
            }
            kv.push(("bounds.delta".into(), delta.to_string()));
            kv.push(("bounds.level_d1".into(), b.level_d1.to_string()));
            kv.push(("bounds.level_d2".into(), b.level_d2.to_string()));
        } else {
            let _ = writeln!(text, "bounds skipped: certificate infeasible");
        }
    } else if let Some(v0) = a.v0 {
        let t = heli_smc::certify::settling_time_lemma1(cert.fractional_rate(), cert.linear_rate(0.0), cert.p1, v0)?;
        let _ = writeln!(text, "settling time bound (V0 = {v0}, no disturbance) = {t:.6} s");
        kv.push(("bounds.settling_time_s".into(), t.to_string()));
    }
    emit(a.key_value, &text, &kv)
}

fn certificate_text(cert: &Certificate, kappa: f64, text: &mut String, kv: &mut Vec<(String, String)>) {
    let _ = writeln!(text, "certificate at L0 = {}:", cert.l0);
    for (name, mat, check) in [
        ("P", &cert.p, &cert.p_check),
        ("Omega1", &cert.omega1, &cert.omega1_check),
        ("Omega2", &cert.omega2, &cert.omega2_check),
    ] {
        let a = mat.to_array();
        let _ = writeln!(text, "  {name} =");
        for row in a {
            let _ = writeln!(text, "    [{:>12.6} {:>12.6} {:>12.6}]", row[0], row[1], row[2]);
        }
        let _ = writeln!(
            text,
            "    minors {:.6e}, {:.6e}, {:.6e}; eigenvalues {:.6e}, {:.6e}, {:.6e}; positive definite: {}{}",
            check.minors.0,
            check.minors.1,
            check.minors.2,
            check.eigenvalues[0],
            check.eigenvalues[1],
            check.eigenvalues[2],
            check.positive_definite(),
            if check.agree() { "" } else { " (tests disagree)" }
        );
        let key = name.to_lowercase();
        kv.push((format!("{key}.lambda_min"), check.eigenvalues[0].to_string()));
        kv.push((format!("{key}.lambda_max"), check.eigenvalues[2].to_string()));
        kv.push((format!("{key}.positive_definite"), check.positive_definite().to_string()));
    }
    let q = cert.q_diag;
    let _ = writeln!(text, "  Q = diag({:.6}, {:.6}, {:.6})", q[0], q[1], q[2]);
    let _ = writeln!(text, "  p1 = {:.6}", cert.p1);
    let _ = writeln!(
        text,
        "  n1 = {:.6e}, n2 / delta = {:.6e}, n3 = {:.6e}, n4 = {:.6e}",
        cert.n1, cert.n2_per_delta, cert.n3, cert.n4
    );
    let _ = writeln!(
        text,
        "  decay: fractional {:.6e}; linear {:.6e} with L0 held, {:.6e} while adapting at rate {kappa} (holds in finite time once positive)",
        cert.fractional_rate(),
        cert.linear_rate(0.0),
        cert.linear_rate(kappa)
    );
    let status = if cert.feasible { "certified".to_string() } else { format!("not certified: {}", cert.failures.join("; ")) };
    let _ = writeln!(text, "  status: {status}");
    for (k, v) in [
        ("q1", q[0]),
        ("q2", q[1]),
        ("q3", q[2]),
        ("p1", cert.p1),
        ("n1", cert.n1),
        ("n2_per_delta", cert.n2_per_delta),
        ("n3", cert.n3),
        ("n4", cert.n4),
        ("rate.fractional", cert.fractional_rate()),
        ("rate.linear_held", cert.linear_rate(0.0)),
        ("rate.linear_adapting", cert.linear_rate(kappa)),
    ] {
        kv.push((k.into(), v.to_string()));
    }
    kv.push(("certified".into(), cert.feasible.to_string()));
}

fn emit(key_value: bool, text: &str, kv: &[(String, String)]) -> Result<(), Failure> {
    if key_value {
        for (k, v) in kv {
            println!("{k} = {v}");
        }
    } else {
        print!("{text}");
    }
    Ok(())
}

/// Prints with at most 6 decimals and no trailing zeros.
fn round_display(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}
