//! Energy-shaping tracking control, its safety pre-flight and the runtime monitor.
//!
//! The control law is
//!
//! ```text
//! q_c = q_r - c (k / alpha) (E - E_r)
//! ```
//!
//! Since `dE/dt = (alpha/k) q_c` and `dE_r/dt = (alpha/k) q_r`, the energy
//! error obeys `d(E - E_r)/dt = -c (E - E_r)` and decays as `e^{-c t}`.

use crate::error::{Result, StefanError};
use crate::planner::{PhysicalParams, Planner, SeriesPlan, TEMPERATURE_TOLERANCE};
use crate::scalar::Real;
use crate::solver::SimState;

/// Slack on `q_c >= 0`.
pub const FLUX_TOLERANCE: f64 = 1e-12;
/// Slack on `s <= s_bar`.
pub const INTERFACE_TOLERANCE: f64 = 1e-6;
/// Slack on `sdot >= 0`.
pub const VELOCITY_TOLERANCE: f64 = 1e-12;

/// `q_ff - c (k/alpha) (E - E_r)`.
pub fn control_flux<T: Real>(q_ff: T, energy: T, energy_ref: T, gain: T, phys: &PhysicalParams<T>) -> T {
    q_ff - gain * (energy - energy_ref) / phys.flux_to_energy_rate()
}

/// One evaluation of the control law.
#[derive(Debug, Clone)]
pub struct ControlSample<T> {
    pub flux: T,
    pub feedforward: T,
    pub energy: T,
    pub energy_ref: T,
    pub plan: SeriesPlan<T>,
}

/// Full-state energy-shaping controller around a series plan.
#[derive(Debug, Clone)]
pub struct EnergyShapingController<T> {
    planner: Planner<T>,
    gain: T,
    initial_error: Option<T>,
}

impl<T: Real> EnergyShapingController<T> {
    pub fn new(planner: Planner<T>, gain: T) -> Result<Self> {
        if !(gain > T::zero() && gain.is_finite()) {
            return Err(StefanError::param(
                "c",
                format!("control gain must be positive, got {gain}"),
            ));
        }
        Ok(Self {
            planner,
            gain,
            initial_error: None,
        })
    }

    pub fn gain(&self) -> T {
        self.gain
    }

    pub fn planner(&self) -> &Planner<T> {
        &self.planner
    }

    /// `E(0) - E_r(0)` as seen on the first call.
    pub fn initial_error(&self) -> Option<T> {
        self.initial_error
    }

    pub fn sample(&mut self, state: &SimState<T>) -> Result<ControlSample<T>> {
        let phys = self.planner.phys();
        let plan = self.planner.plan_at(state.t)?;
        let feedforward = plan.feedforward_flux()?;
        let energy_ref = plan.energy()?;
        let energy = state.energy(phys);
        if self.initial_error.is_none() {
            self.initial_error = Some(energy - energy_ref);
        }
        Ok(ControlSample {
            flux: control_flux(feedforward, energy, energy_ref, self.gain, phys),
            feedforward,
            energy,
            energy_ref,
            plan,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption6Report<T> {
    pub initial_energy: T,
    pub initial_energy_ref: T,
    /// `min_t [q_r(t) - c (k/alpha) (E(0) - E_r(0)) e^{-ct}]`, the closed-loop flux the
    /// energy-decay law predicts. The flux condition on `E(0)` holds iff this is non-negative;
    /// it is that condition multiplied by the positive factor `c (k/alpha) e^{-ct}`, which
    /// avoids evaluating `e^{ct}`.
    pub min_predicted_flux: T,
    pub min_predicted_flux_at: T,
    pub flux_condition: bool,
    /// `max_t [E_r(t) + (E(0) - E_r(0)) e^{-ct} - (alpha/beta) s_bar]`; must be negative.
    pub max_energy_excess: T,
    pub max_energy_excess_at: T,
    pub energy_condition: bool,
    pub samples: usize,
}

impl<T> Assumption6Report<T> {
    pub fn passed(&self) -> bool {
        self.flux_condition && self.energy_condition
    }
}

/// Checks both initial-energy conditions on `samples` uniform points of `[0, horizon]`.
pub fn check_assumption6<T: Real>(
    initial_energy: T,
    planner: &Planner<T>,
    gain: T,
    horizon: T,
    samples: usize,
) -> Result<Assumption6Report<T>> {
    if !(gain > T::zero()) {
        return Err(StefanError::param("c", "control gain must be positive"));
    }
    let phys = planner.phys();
    let samples = samples.max(2);
    let energy_ref0 = planner.plan_at(T::zero())?.energy()?;
    let e0 = initial_energy - energy_ref0;
    let ceiling = phys.energy_weight() * planner.reference().s_bar();

    let mut report = Assumption6Report {
        initial_energy,
        initial_energy_ref: energy_ref0,
        min_predicted_flux: T::infinity(),
        min_predicted_flux_at: T::zero(),
        flux_condition: true,
        max_energy_excess: T::neg_infinity(),
        max_energy_excess_at: T::zero(),
        energy_condition: true,
        samples,
    };
    for i in 0..samples {
        let t = horizon * T::from_usize_lossy(i) / T::from_usize_lossy(samples - 1);
        let plan = planner.plan_at(t)?;
        let decay = (-gain * t).exp();
        let predicted = plan.feedforward_flux()? - gain * e0 * decay / phys.flux_to_energy_rate();
        if predicted < report.min_predicted_flux {
            report.min_predicted_flux = predicted;
            report.min_predicted_flux_at = t;
        }
        let excess = plan.energy()? + e0 * decay - ceiling;
        if excess > report.max_energy_excess {
            report.max_energy_excess = excess;
            report.max_energy_excess_at = t;
        }
    }
    report.flux_condition = report.min_predicted_flux >= -T::lit(FLUX_TOLERANCE);
    report.energy_condition = report.max_energy_excess < T::zero();
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SafetyFlags {
    pub flux_nonneg: bool,
    pub temp_valid: bool,
    pub sdot_nonneg: bool,
    pub interface_band: bool,
}

impl SafetyFlags {
    pub fn all(&self) -> bool {
        self.flux_nonneg && self.temp_valid && self.sdot_nonneg && self.interface_band
    }
}

/// Runtime check of the closed-loop safety conclusions. Monitoring only.
#[derive(Debug, Clone, Copy)]
pub struct SafetyMonitor<T> {
    pub s0: T,
    pub s_bar: T,
    pub length: T,
    pub melting_temperature: T,
}

impl<T: Real> SafetyMonitor<T> {
    pub fn new(s0: T, s_bar: T, phys: &PhysicalParams<T>) -> Self {
        Self {
            s0,
            s_bar,
            length: phys.length,
            melting_temperature: phys.melting_temperature,
        }
    }

    /// `s0 < s` is strict except at the initial instant, where `s = s0`.
    pub fn check(&self, state: &SimState<T>, q_c: T) -> SafetyFlags {
        let lower = state.s > self.s0 || (state.t == T::zero() && state.s == self.s0);
        SafetyFlags {
            flux_nonneg: q_c >= -T::lit(FLUX_TOLERANCE),
            temp_valid: state.min_temperature()
                >= self.melting_temperature - T::lit(10.0 * TEMPERATURE_TOLERANCE),
            sdot_nonneg: state.sdot >= -T::lit(VELOCITY_TOLERANCE),
            interface_band: lower
                && state.s <= self.s_bar + T::lit(INTERFACE_TOLERANCE)
                && state.s < self.length,
        }
    }
}

/// Per-flag violation counts over a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ViolationCounts {
    pub flux: usize,
    pub temperature: usize,
    pub velocity: usize,
    pub interface: usize,
}

impl ViolationCounts {
    pub fn record(&mut self, flags: &SafetyFlags) {
        self.flux += usize::from(!flags.flux_nonneg);
        self.temperature += usize::from(!flags.temp_valid);
        self.velocity += usize::from(!flags.sdot_nonneg);
        self.interface += usize::from(!flags.interface_band);
    }

    pub fn total(&self) -> usize {
        self.flux + self.temperature + self.velocity + self.interface
    }
}
