//! Scenario files and the runs built from them.
//!
//! A scenario is a TOML document with the sections `[material]`, `[reference]`,
//! `[initial]`, `[solver]`, `[planner]`, `[controller]` and `[run]`. Every key
//! has a default; an empty file is the zinc melting scenario with the
//! exp-trig reference. Unknown keys are rejected.

use std::cell::RefCell;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::controller::{
    check_assumption6, Assumption6Report, ControlSample, EnergyShapingController, SafetyMonitor,
    ViolationCounts,
};
use crate::diagnostics::tracking_functional;
use crate::error::{Result, StefanError};
use crate::planner::{PhysicalParams, Planner, SeriesPlan};
use crate::records::TrajectoryRecord;
use crate::reference::{estimate_gevrey, GevreyCertificate, ReferenceParams, ReferenceTrajectory};
use crate::solver::{run, RunStatus, SimState, SolverConfig, StefanSolver};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialSection {
    /// W/(m K)
    pub conductivity: f64,
    /// kg/m^3
    pub density: f64,
    /// J/(kg K)
    pub specific_heat: f64,
    /// J/kg
    pub latent_heat: f64,
    /// s
    pub epsilon: f64,
    /// deg C
    pub melting_temperature: f64,
    /// m
    pub length: f64,
}

impl Default for MaterialSection {
    fn default() -> Self {
        Self {
            conductivity: 116.0,
            density: 6570.0,
            specific_heat: 389.57,
            latent_heat: 111_961.0,
            epsilon: 10.0,
            melting_temperature: 0.0,
            length: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReferenceSection {
    pub omega: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub v_min: f64,
    pub s_r0: f64,
    pub s_bar: f64,
}

impl Default for ReferenceSection {
    fn default() -> Self {
        Self {
            omega: 0.002,
            delta1: 4.0e-4,
            delta2: 4.0e-3,
            v_min: 7.0e-7,
            s_r0: 0.11,
            s_bar: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialProfile {
    /// `T0(x) = T_m + surface_excess (1 - x / s0)`.
    Linear,
    /// `T0 = T_r(., 0)`, `s0 = s_r(0)`, `v0 = sdot_r(0)`; `s0`, `v0` and
    /// `surface_excess` are ignored.
    Reference,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub profile: InitialProfile,
    pub s0: f64,
    pub v0: f64,
    /// `T0(0) - T_m` for the linear profile (K).
    pub surface_excess: f64,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            profile: InitialProfile::Linear,
            s0: 0.1,
            v0: 0.0,
            surface_excess: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSection {
    pub n_grid: usize,
    pub dt: f64,
    pub theta: f64,
    /// Defaults to `s0 / 2`.
    pub s_floor: Option<f64>,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            n_grid: 200,
            dt: 0.05,
            theta: 1.0,
            s_floor: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSection {
    pub order: usize,
    pub gevrey_exponent: f64,
    pub gevrey_m_max: usize,
    pub gevrey_samples: usize,
}

impl Default for PlannerSection {
    fn default() -> Self {
        Self {
            order: 30,
            gevrey_exponent: 2.0,
            gevrey_m_max: 10,
            gevrey_samples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    /// Gain `c` (1/s).
    pub c: f64,
}

impl Default for ControllerSection {
    fn default() -> Self {
        Self { c: 0.002 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    /// s
    pub horizon: f64,
    /// Solver steps between logged rows.
    pub log_every: usize,
    /// Points of the uniform grid used by the initial-energy check.
    pub safety_samples: usize,
    /// Time and space resolution of the optional field dump.
    pub field_points: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            horizon: 6000.0,
            log_every: 20,
            safety_samples: 10_000,
            field_points: 200,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub material: MaterialSection,
    pub reference: ReferenceSection,
    pub initial: InitialSection,
    pub solver: SolverSection,
    pub planner: PlannerSection,
    pub controller: ControllerSection,
    pub run: RunSection,
}

fn config_err(e: impl std::fmt::Display) -> StefanError {
    StefanError::Config(e.to_string())
}

/// Parses `key=value` with a dotted `section.key`. The value is read as a TOML
/// literal, falling back to a bare string.
fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment.split_once('=').ok_or_else(|| {
        config_err(format!(
            "override `{assignment}` is not of the form section.key=value"
        ))
    })?;
    let (section, field) = key
        .trim()
        .split_once('.')
        .ok_or_else(|| config_err(format!("override key `{}` needs a section prefix", key.trim())))?;
    let raw = raw.trim();
    let value = format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_owned()));
    let entry = table
        .entry(section.to_owned())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    match entry {
        toml::Value::Table(t) => {
            t.insert(field.to_owned(), value);
            Ok(())
        }
        _ => Err(config_err(format!("`{section}` is not a section"))),
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(config_err)?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let config: Self = toml::Value::Table(table).try_into().map_err(config_err)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|source| StefanError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text, overrides)
    }

    pub fn physical(&self) -> PhysicalParams<f64> {
        let m = &self.material;
        PhysicalParams::from_material(
            m.conductivity,
            m.density,
            m.specific_heat,
            m.latent_heat,
            m.epsilon,
            m.melting_temperature,
            m.length,
        )
    }

    pub fn reference_params(&self) -> ReferenceParams<f64> {
        let r = &self.reference;
        ReferenceParams {
            omega: r.omega,
            delta1: r.delta1,
            delta2: r.delta2,
            v_min: r.v_min,
            s_r0: r.s_r0,
            s_bar: r.s_bar,
        }
    }

    pub fn solver_config(&self) -> SolverConfig<f64> {
        SolverConfig {
            n_grid: self.solver.n_grid,
            dt: self.solver.dt,
            theta: self.solver.theta,
            s_floor: self.solver.s_floor,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let phys = self.physical();
        for (name, v) in [
            ("material.conductivity", self.material.conductivity),
            ("material.density", self.material.density),
            ("material.specific_heat", self.material.specific_heat),
            ("material.latent_heat", self.material.latent_heat),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config_err(format!("{name} must be positive, got {v}")));
            }
        }
        phys.validate().map_err(config_err)?;
        ReferenceTrajectory::new(self.reference_params()).map_err(config_err)?;
        if !(self.reference.s_bar < phys.length) {
            return Err(config_err(format!(
                "Assumption 4 violated: reference.s_bar = {} must be below material.length = {}",
                self.reference.s_bar, phys.length
            )));
        }
        self.solver_config().validate().map_err(config_err)?;
        if !(self.controller.c > 0.0 && self.controller.c.is_finite()) {
            return Err(config_err(format!(
                "controller.c must be positive, got {}",
                self.controller.c
            )));
        }
        if self.initial.profile == InitialProfile::Linear {
            let s0 = self.initial.s0;
            if !(s0 > 0.0 && s0 < phys.length) {
                return Err(config_err(format!(
                    "initial.s0 = {s0} must lie in (0, material.length = {})",
                    phys.length
                )));
            }
            if !(self.initial.v0 >= 0.0) {
                return Err(config_err(format!(
                    "Assumption 2 violated: initial.v0 = {} must be non-negative",
                    self.initial.v0
                )));
            }
            if !(self.initial.surface_excess >= 0.0) {
                return Err(config_err(
                    "Assumption 1 violated: initial.surface_excess must be non-negative",
                ));
            }
        }
        if !(self.run.horizon > 0.0 && self.run.horizon.is_finite()) {
            return Err(config_err("run.horizon must be positive"));
        }
        if self.run.log_every == 0 {
            return Err(config_err("run.log_every must be at least 1"));
        }
        if self.run.field_points < 2 || self.run.field_points > 200 {
            return Err(config_err("run.field_points must lie in [2, 200]"));
        }
        if self.planner.order < 2 {
            return Err(config_err("planner.order must be at least 2"));
        }
        Ok(())
    }

    /// Canonical TOML of the resolved configuration.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("scenario config serializes")
    }

    /// Hex SHA-256 of [`Self::canonical`].
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// `#` header lines for output files.
    pub fn provenance(&self) -> Vec<String> {
        vec![
            format!("config-hash: {}", self.hash()),
            format!("version: stefan-core {}", env!("CARGO_PKG_VERSION")),
        ]
    }
}

/// Resolved objects for one scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub phys: PhysicalParams<f64>,
    pub reference: ReferenceTrajectory<f64>,
    pub certificate: GevreyCertificate<f64>,
    pub planner: Planner<f64>,
    pub solver: StefanSolver<f64>,
}

impl Scenario {
    pub fn new(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let phys = config.physical();
        let reference = ReferenceTrajectory::new(config.reference_params())?;
        let certificate = estimate_gevrey(
            &reference,
            config.planner.gevrey_exponent,
            config.planner.gevrey_m_max,
            config.planner.gevrey_samples,
        )?;
        let planner = Planner::new(phys, reference.clone(), config.planner.order)?
            .with_certificate(certificate.clone());
        let solver = StefanSolver::new(phys, config.solver_config())?;
        Ok(Self {
            config,
            phys,
            reference,
            certificate,
            planner,
            solver,
        })
    }

    pub fn initial_state(&self) -> Result<SimState<f64>> {
        let init = &self.config.initial;
        match init.profile {
            InitialProfile::Linear => {
                let (s0, tm, dt) = (init.s0, self.phys.melting_temperature, init.surface_excess);
                self.solver.initialize(s0, init.v0, |x| tm + dt * (1.0 - x / s0))
            }
            InitialProfile::Reference => {
                let plan = self.planner.plan_at(0.0)?;
                let failure = RefCell::new(None);
                let state = self
                    .solver
                    .initialize(plan.interface(), plan.interface_velocity(), |x| {
                        plan.temperature(x).map(|v| v.value).unwrap_or_else(|e| {
                            failure.borrow_mut().get_or_insert(e);
                            f64::NAN
                        })
                    });
                match failure.into_inner() {
                    Some(e) => Err(e),
                    None => state,
                }
            }
        }
    }

    /// Position of the interface at `t = 0`.
    pub fn initial_interface(&self) -> f64 {
        match self.config.initial.profile {
            InitialProfile::Linear => self.config.initial.s0,
            InitialProfile::Reference => self.reference.initial_position(),
        }
    }

    pub fn monitor(&self) -> SafetyMonitor<f64> {
        SafetyMonitor::new(self.initial_interface(), self.reference.s_bar(), &self.phys)
    }

    /// Initial-energy conditions over `run.horizon`.
    pub fn assumption6(&self) -> Result<Assumption6Report<f64>> {
        let state = self.initial_state()?;
        check_assumption6(
            state.energy(&self.phys),
            &self.planner,
            self.config.controller.c,
            self.config.run.horizon,
            self.config.run.safety_samples,
        )
    }

    pub fn simulate(&self, mode: Mode) -> Result<SimulationOutput> {
        self.simulate_with(mode, |plan, _| plan.feedforward_flux())
    }

    /// Open-loop run with an arbitrary flux law `q(plan, state)`.
    pub fn simulate_open_loop(
        &self,
        flux: impl FnMut(&SeriesPlan<f64>, &SimState<f64>) -> Result<f64>,
    ) -> Result<SimulationOutput> {
        self.simulate_with(Mode::Feedforward, flux)
    }

    fn simulate_with(
        &self,
        mode: Mode,
        mut open_loop: impl FnMut(&SeriesPlan<f64>, &SimState<f64>) -> Result<f64>,
    ) -> Result<SimulationOutput> {
        let initial = self.initial_state()?;
        let cfg = &self.config.run;
        let monitor = self.monitor();
        let mut controller = EnergyShapingController::new(self.planner.clone(), self.config.controller.c)?;
        let last: RefCell<Option<ControlSample<f64>>> = RefCell::new(None);

        let steps = (cfg.horizon / self.solver.config().dt).round() as usize;
        let field_stride = steps.div_ceil(cfg.field_points - 1).max(1);
        let last_node = initial.nodes() - 1;
        let mut field_nodes: Vec<usize> = (0..cfg.field_points)
            .map(|j| j * last_node / (cfg.field_points - 1))
            .collect();
        field_nodes.dedup();

        let mut records = Vec::with_capacity(steps / cfg.log_every + 2);
        let mut field = Vec::new();
        let mut violations = ViolationCounts::default();
        let mut step = 0usize;

        let outcome = run(
            &self.solver,
            initial,
            cfg.horizon,
            1,
            |state| {
                let sample = match mode {
                    Mode::ClosedLoop => controller.sample(state)?,
                    Mode::Feedforward => {
                        let plan = self.planner.plan_at(state.t)?;
                        let flux = open_loop(&plan, state)?;
                        ControlSample {
                            flux,
                            feedforward: plan.feedforward_flux()?,
                            energy: state.energy(&self.phys),
                            energy_ref: plan.energy()?,
                            plan,
                        }
                    }
                };
                let q = sample.flux;
                *last.borrow_mut() = Some(sample);
                Ok(q)
            },
            |state, q| {
                let flags = monitor.check(state, q);
                violations.record(&flags);
                if step.is_multiple_of(cfg.log_every) || step == steps {
                    let guard = last.borrow();
                    let sample = guard.as_ref().expect("controller ran before logger");
                    records.push(TrajectoryRecord {
                        t: state.t,
                        s: state.s,
                        sdot: state.sdot,
                        q_c: q,
                        energy: sample.energy,
                        energy_ref: sample.energy_ref,
                        phi: tracking_functional(state, &sample.plan),
                        t_min: state.min_temperature(),
                        t_at0: state.temp[0],
                        safe_flux: flags.flux_nonneg,
                        safe_temp: flags.temp_valid,
                    });
                }
                if step.is_multiple_of(field_stride) {
                    field.extend(field_nodes.iter().map(|&i| (state.t, state.x(i), state.temp[i])));
                }
                step += 1;
                Ok(())
            },
        )?;

        Ok(SimulationOutput {
            mode,
            records,
            field,
            violations,
            steps: outcome.steps,
            final_state: outcome.final_state,
            status: outcome.status,
            initial_error: controller.initial_error(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    ClosedLoop,
    Feedforward,
}

#[derive(Debug)]
pub struct SimulationOutput {
    pub mode: Mode,
    pub records: Vec<TrajectoryRecord>,
    /// `(t, x, T)` samples, at most `field_points` times by `field_points` nodes.
    pub field: Vec<(f64, f64, f64)>,
    /// Safety-flag failures over every solver step.
    pub violations: ViolationCounts,
    pub steps: usize,
    pub final_state: SimState<f64>,
    pub status: RunStatus,
    pub initial_error: Option<f64>,
}

impl SimulationOutput {
    pub fn completed(&self) -> bool {
        matches!(self.status, RunStatus::Completed)
    }

    /// The logged record closest to time `t`.
    pub fn record_near(&self, t: f64) -> Option<&TrajectoryRecord> {
        self.records
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }
}
