//! `stefan-track`: plan, simulate and check safe tracking of a Stefan-problem interface.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};

use stefan_core::controller::Assumption6Report;
use stefan_core::diagnostics::{energy_decay_residual, fit_decay_rate};
use stefan_core::planner::{check_assumption5, check_convergence, verify_coefficient_bound};
use stefan_core::records::{format_float, write_field, write_plan, write_records, write_report, PlanRecord};
use stefan_core::reference::check_assumption4;
use stefan_core::scenario::{Mode, Scenario, ScenarioConfig, SimulationOutput};
use stefan_core::solver::RunStatus;
use stefan_core::{verify, StefanError};

const EXIT_CONFIG: u8 = 1;
const EXIT_PREFLIGHT: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(name = "stefan-track", version, about)]
struct Cli {
    #[command(subcommand)]
    mode: Command,

    /// Scenario file (TOML); an empty file selects the zinc scenario.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override one key, e.g. `--set controller.c=0.004`.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE", global = true)]
    overrides: Vec<String>,

    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Also write a downsampled temperature field (field.csv).
    #[arg(long, global = true)]
    field: bool,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Feedforward flux and reference energy along the reference (plan.csv).
    Plan,
    /// Energy-shaping closed loop (trajectory.csv, decay_fit.txt, safety_report.txt).
    SimulateClosedloop,
    /// Reference flux applied open loop (trajectory.csv, decay_fit.txt, safety_report.txt).
    SimulateFeedforward,
    /// Pre-flight checks of the reference, the series and the initial energy.
    CheckSafety,
    /// Algebraic, series and conservation self-checks.
    Verify,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl From<StefanError> for Failure {
    fn from(e: StefanError) -> Self {
        let code = if e.is_numerical() {
            EXIT_NUMERICAL
        } else {
            EXIT_CONFIG
        };
        Self {
            code,
            error: e.into(),
        }
    }
}

fn fail(code: u8, error: anyhow::Error) -> Failure {
    Failure { code, error }
}

type Lines = Vec<(String, String)>;

fn push(lines: &mut Lines, key: &str, value: impl ToString) {
    lines.push((key.to_owned(), value.to_string()));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("stefan-track: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn execute(cli: &Cli) -> Result<u8, Failure> {
    let config = match &cli.config {
        Some(path) => ScenarioConfig::load(path, &cli.overrides)?,
        None => ScenarioConfig::from_toml_str("", &cli.overrides)?,
    };
    let scenario = Scenario::new(config)?;
    fs::create_dir_all(&cli.out)
        .with_context(|| format!("creating {}", cli.out.display()))
        .map_err(|e| fail(EXIT_CONFIG, e))?;

    let echo = echo(&scenario);
    for (k, v) in &echo {
        println!("{k}: {v}");
    }

    match cli.mode {
        Command::Plan => plan(&scenario, &cli.out),
        Command::SimulateClosedloop => simulate(&scenario, Mode::ClosedLoop, cli),
        Command::SimulateFeedforward => simulate(&scenario, Mode::Feedforward, cli),
        Command::CheckSafety => check_safety(&scenario, &cli.out),
        Command::Verify => run_verify(&scenario, &cli.out),
    }
}

fn echo(sc: &Scenario) -> Lines {
    let mut l = Lines::new();
    push(&mut l, "config_hash", sc.config.hash());
    push(&mut l, "alpha_m2ps", format_float(sc.phys.alpha));
    push(&mut l, "beta_m2psK", format_float(sc.phys.beta));
    push(&mut l, "amplitude_A_mps", format_float(sc.reference.amplitude()));
    push(&mut l, "s_bar_m", format_float(sc.reference.s_bar()));
    push(&mut l, "gevrey_M", format_float(sc.certificate.magnitude));
    push(&mut l, "gevrey_R", format_float(sc.certificate.scale));
    push(&mut l, "gevrey_d", sc.certificate.exponent);
    if let Some(f) = sc.planner.series_f() {
        push(&mut l, "series_F", format_float(f));
    }
    l
}

fn write_lines(path: &Path, lines: &Lines) -> Result<(), Failure> {
    write_report(path, lines).map_err(Failure::from)
}

fn plan(sc: &Scenario, out: &Path) -> Result<u8, Failure> {
    let cfg = &sc.config;
    let dt = sc.solver.config().dt * cfg.run.log_every as f64;
    let rows = (cfg.run.horizon / dt).round() as usize;
    let mut records = Vec::with_capacity(rows + 1);
    for i in 0..=rows {
        let t = (i as f64 * dt).min(cfg.run.horizon);
        let p = sc.planner.plan_at(t)?;
        records.push(PlanRecord {
            t,
            s_r: p.interface(),
            sdot_r: p.interface_velocity(),
            q_ff: p.feedforward_flux()?,
            energy_ref: p.energy()?,
        });
    }
    write_plan(&out.join("plan.csv"), &cfg.provenance(), &records)?;
    let negative = records.iter().filter(|r| r.q_ff < 0.0).count();
    println!("plan_rows: {}", records.len());
    println!("q_ff_negative_rows: {negative}");
    Ok(0)
}

fn simulate(sc: &Scenario, mode: Mode, cli: &Cli) -> Result<u8, Failure> {
    let out = sc.simulate(mode)?;
    let provenance = sc.config.provenance();
    write_records(&cli.out.join("trajectory.csv"), &provenance, &out.records)?;
    if cli.field {
        write_field(&cli.out.join("field.csv"), &provenance, &out.field)?;
    }
    write_lines(&cli.out.join("decay_fit.txt"), &decay_summary(sc, &out))?;
    let safety = runtime_safety(sc, &out);
    write_lines(&cli.out.join("safety_report.txt"), &safety)?;
    for (k, v) in safety
        .iter()
        .filter(|(k, _)| k.starts_with("violations") || k == "status")
    {
        println!("{k}: {v}");
    }

    if let RunStatus::Aborted { t, error } = out.status {
        return Err(fail(
            EXIT_NUMERICAL,
            anyhow!("simulation aborted at t = {t} s: {error}"),
        ));
    }
    if mode == Mode::ClosedLoop && out.violations.total() > 0 {
        return Err(fail(
            EXIT_RUNTIME,
            anyhow!(
                "closed loop violated the safety conditions ({} step flags)",
                out.violations.total()
            ),
        ));
    }
    Ok(0)
}

fn runtime_safety(sc: &Scenario, out: &SimulationOutput) -> Lines {
    let mut l = Lines::new();
    let mode = match out.mode {
        Mode::ClosedLoop => "closed-loop",
        Mode::Feedforward => "feedforward",
    };
    push(&mut l, "mode", mode);
    push(
        &mut l,
        "status",
        match &out.status {
            RunStatus::Completed => "completed".to_owned(),
            RunStatus::Aborted { t, error } => format!("aborted at t = {t} s: {error}"),
        },
    );
    push(&mut l, "steps", out.steps);
    push(&mut l, "violations_flux_nonneg", out.violations.flux);
    push(&mut l, "violations_temp_valid", out.violations.temperature);
    push(&mut l, "violations_sdot_nonneg", out.violations.velocity);
    push(&mut l, "violations_interface_band", out.violations.interface);
    let min_q = out.records.iter().min_by(|a, b| a.q_c.total_cmp(&b.q_c));
    if let Some(r) = min_q {
        push(&mut l, "min_flux_Wpm2", format_float(r.q_c));
        push(&mut l, "min_flux_at_s", format_float(r.t));
    }
    let min_t = out.records.iter().map(|r| r.t_min).fold(f64::INFINITY, f64::min);
    push(&mut l, "min_temperature_C", format_float(min_t));
    push(&mut l, "s0_m", format_float(sc.initial_interface()));
    push(
        &mut l,
        "max_s_m",
        format_float(out.records.iter().map(|r| r.s).fold(f64::MIN, f64::max)),
    );
    push(&mut l, "s_bar_m", format_float(sc.reference.s_bar()));
    l
}

fn decay_summary(sc: &Scenario, out: &SimulationOutput) -> Lines {
    let mut l = Lines::new();
    let c = sc.config.controller.c;
    let recs = &out.records;
    push(&mut l, "gain_c_per_s", format_float(c));
    if let Some(first) = recs.first() {
        push(
            &mut l,
            "energy_error_initial",
            format_float(first.energy - first.energy_ref),
        );
    }
    match energy_decay_residual(recs, c) {
        Ok(r) => push(&mut l, "energy_decay_residual", format_float(r)),
        Err(e) => push(&mut l, "energy_decay_residual", format!("unavailable ({e})")),
    }
    let (ts, vs): (Vec<f64>, Vec<f64>) = recs
        .iter()
        .map(|r| (r.t, (r.energy - r.energy_ref).abs()))
        .unzip();
    match fit_decay_rate(&ts, &vs) {
        Ok(f) => {
            push(&mut l, "energy_fit_rate_per_s", format_float(f.rate));
            push(&mut l, "energy_fit_r_squared", format_float(f.r_squared));
            push(
                &mut l,
                "energy_fit_rate_rel_error",
                format_float((f.rate - c).abs() / c),
            );
        }
        Err(e) => push(&mut l, "energy_fit_rate_per_s", format!("unavailable ({e})")),
    }

    if let Some(phi0) = recs.first().and_then(|r| r.phi) {
        push(&mut l, "phi_initial", format_float(phi0));
        if let Some(r) = out.record_near(3600.0).filter(|r| (r.t - 3600.0).abs() < 1.0) {
            if let Some(p) = r.phi {
                push(&mut l, "phi_60min", format_float(p));
                push(&mut l, "phi_60min_ratio", format_float(p / phi0));
            }
            push(
                &mut l,
                "interface_error_60min_m",
                format_float((r.s - sc.reference.position(r.t)).abs()),
            );
        }
    }
    let window: Vec<_> = recs
        .iter()
        .filter(|r| (600.0..=5400.0).contains(&r.t))
        .filter_map(|r| r.phi.map(|p| (r.t, p)))
        .collect();
    let (wt, wp): (Vec<f64>, Vec<f64>) = window.into_iter().unzip();
    match fit_decay_rate(&wt, &wp) {
        Ok(f) => {
            push(&mut l, "phi_fit_window_s", "600..5400");
            push(&mut l, "phi_fit_rate_per_s", format_float(f.rate));
            push(&mut l, "phi_fit_r_squared", format_float(f.r_squared));
        }
        Err(e) => push(&mut l, "phi_fit_rate_per_s", format!("unavailable ({e})")),
    }
    l
}

fn assumption6_lines(l: &mut Lines, r: &Assumption6Report<f64>) {
    push(l, "assumption6_initial_energy", format_float(r.initial_energy));
    push(
        l,
        "assumption6_initial_energy_ref",
        format_float(r.initial_energy_ref),
    );
    push(
        l,
        "assumption6_flux_min_predicted_Wpm2",
        format_float(r.min_predicted_flux),
    );
    push(
        l,
        "assumption6_flux_min_at_s",
        format_float(r.min_predicted_flux_at),
    );
    push(l, "assumption6_flux", pass(r.flux_condition));
    push(
        l,
        "assumption6_energy_max_excess",
        format_float(r.max_energy_excess),
    );
    push(
        l,
        "assumption6_energy_max_at_s",
        format_float(r.max_energy_excess_at),
    );
    push(l, "assumption6_energy", pass(r.energy_condition));
    push(l, "assumption6_samples", r.samples);
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "fail"
    }
}

fn check_safety(sc: &Scenario, out: &Path) -> Result<u8, Failure> {
    let horizon = sc.config.run.horizon;
    let samples = sc.config.run.safety_samples;
    let mut l = Lines::new();
    let mut ok = true;

    let a4 = check_assumption4(&sc.reference, sc.phys.length, horizon, samples);
    push(
        &mut l,
        "assumption4_min_velocity_mps",
        format_float(a4.min_velocity),
    );
    push(
        &mut l,
        "assumption4_min_velocity_at_s",
        format_float(a4.min_velocity_at),
    );
    push(&mut l, "assumption4", pass(a4.passed()));
    ok &= a4.passed();

    let times: Vec<f64> = (0..200).map(|i| horizon * i as f64 / 199.0).collect();
    let a5 = check_assumption5(&sc.planner, &times, 200)?;
    push(&mut l, "assumption5_min_margin_K", format_float(a5.min_margin));
    push(&mut l, "assumption5_min_at_x_m", format_float(a5.at_x));
    push(&mut l, "assumption5_min_at_s", format_float(a5.at_t));
    push(&mut l, "assumption5", pass(a5.passed));
    ok &= a5.passed;

    let a6 = sc.assumption6()?;
    assumption6_lines(&mut l, &a6);
    ok &= a6.passed();

    let plan0 = sc.planner.plan_at(0.0)?;
    let conv = check_convergence(&plan0, &sc.certificate, &sc.reference, &sc.phys);
    push(&mut l, "gevrey_violations", sc.certificate.violations);
    push(&mut l, "proposition2_ratio", format_float(conv.ratio));
    push(
        &mut l,
        "proposition2",
        pass(conv.convergent && sc.certificate.violations == 0),
    );
    ok &= conv.convergent && sc.certificate.violations == 0;

    let coeff_times: Vec<f64> = (0..50).map(|i| horizon * i as f64 / 49.0).collect();
    let n_max = 10.min(sc.planner.order());
    let bound = verify_coefficient_bound(&sc.planner, &sc.certificate, &coeff_times, n_max, 4)?;
    push(&mut l, "proposition1_checked", bound.checked);
    push(&mut l, "proposition1_violations", bound.violations.len());
    push(
        &mut l,
        "proposition1_worst_ratio",
        format_float(bound.worst_ratio),
    );
    push(&mut l, "proposition1", pass(bound.passed()));
    ok &= bound.passed();

    push(&mut l, "overall", pass(ok));
    write_lines(&out.join("safety_report.txt"), &l)?;
    for (k, v) in &l {
        println!("{k}: {v}");
    }
    if ok {
        Ok(0)
    } else {
        Err(fail(EXIT_PREFLIGHT, anyhow!("safety pre-flight failed")))
    }
}

fn run_verify(sc: &Scenario, out: &Path) -> Result<u8, Failure> {
    let checks = verify::run_all(sc)?;
    let mut l = Lines::new();
    for c in &checks {
        push(&mut l, c.name, format!("{} {}", pass(c.passed), c.detail));
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    push(
        &mut l,
        "overall",
        format!("{} ({} of {} failed)", pass(failed == 0), failed, checks.len()),
    );
    write_lines(&out.join("verify_report.txt"), &l)?;
    for (k, v) in &l {
        println!("{k}: {v}");
    }
    if failed == 0 {
        Ok(0)
    } else {
        Err(fail(
            EXIT_NUMERICAL,
            anyhow!("{failed} verification checks failed"),
        ))
    }
}
