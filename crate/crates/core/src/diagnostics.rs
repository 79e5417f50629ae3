//! Post-hoc checks on simulation output: the tracking functional, the energy
//! decay law and exponential-rate fits.

use crate::error::{Result, StefanError};
use crate::planner::SeriesPlan;
use crate::records::TrajectoryRecord;
use crate::scalar::Real;
use crate::solver::SimState;

/// Smallest denominator used by [`energy_decay_residual`].
pub const RESIDUAL_FLOOR: f64 = 1e-12;

/// `Phi = int_0^s (T(x) - T_ref(x - (s - s_r)))^2 dx + (s - s_r)^2 + (sdot - sdot_r)^2`
/// on the solver grid, with an arbitrary reference profile.
pub fn tracking_functional_with<T: Real>(
    state: &SimState<T>,
    s_r: T,
    sdot_r: T,
    mut reference: impl FnMut(T) -> Result<T>,
) -> Result<T> {
    let shift = state.s - s_r;
    let mut failure = None;
    let integral = state.integrate(|x, u| match reference(x - shift) {
        Ok(r) => (u - r) * (u - r),
        Err(e) => {
            failure.get_or_insert(e);
            T::zero()
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    let ds = state.s - s_r;
    let dv = state.sdot - sdot_r;
    Ok(integral + ds * ds + dv * dv)
}

/// Tracking functional against a series plan. `None` when the shifted arguments
/// leave the series' radius or the truncation tail is too large.
pub fn tracking_functional<T: Real>(state: &SimState<T>, plan: &SeriesPlan<T>) -> Option<T> {
    tracking_functional_with(state, plan.interface(), plan.interface_velocity(), |x| {
        plan.temperature(x).map(|v| v.value)
    })
    .ok()
}

/// `max |(E - E_r) - e0 e^{-c t}| / max(|e0|, floor)` where `e0` is the first record's error.
pub fn energy_decay_residual(records: &[TrajectoryRecord], gain: f64) -> Result<f64> {
    let first = records.first().ok_or(StefanError::Empty("records"))?;
    let e0 = first.energy - first.energy_ref;
    let scale = e0.abs().max(RESIDUAL_FLOOR);
    Ok(records
        .iter()
        .map(|r| {
            let predicted = e0 * (-gain * (r.t - first.t)).exp();
            ((r.energy - r.energy_ref) - predicted).abs() / scale
        })
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    /// Negated slope of `ln(value)` against time (1/s).
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares fit of `ln(value) = intercept - rate * t`.
///
/// `r_squared` is 1 for exactly constant data.
pub fn fit_decay_rate(times: &[f64], values: &[f64]) -> Result<DecayFit> {
    if times.len() != values.len() {
        return Err(StefanError::param("values", "length differs from times"));
    }
    if times.len() < 10 {
        return Err(StefanError::param(
            "values",
            format!("need at least 10 points, got {}", times.len()),
        ));
    }
    if let Some(v) = values.iter().find(|v| !(**v > 0.0 && v.is_finite())) {
        return Err(StefanError::param(
            "values",
            format!("must be positive and finite, got {v}"),
        ));
    }
    let n = times.len() as f64;
    let logs: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let mt = times.iter().sum::<f64>() / n;
    let ml = logs.iter().sum::<f64>() / n;
    let (mut stt, mut stl, mut sll) = (0.0, 0.0, 0.0);
    for (t, l) in times.iter().zip(&logs) {
        let (dt, dl) = (t - mt, l - ml);
        stt += dt * dt;
        stl += dt * dl;
        sll += dl * dl;
    }
    if stt == 0.0 {
        return Err(StefanError::param("times", "all sample times coincide"));
    }
    let slope = stl / stt;
    let r_squared = if sll == 0.0 { 1.0 } else { stl * stl / (stt * sll) };
    Ok(DecayFit {
        rate: -slope,
        intercept: ml - slope * mt,
        r_squared,
        points: times.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{PhysicalParams, Planner};
    use crate::reference::{ReferenceParams, ReferenceTrajectory};
    use crate::solver::{SolverConfig, StefanSolver};
    use approx::assert_relative_eq;

    fn record(t: f64, e: f64, e_r: f64) -> TrajectoryRecord {
        TrajectoryRecord {
            t,
            s: 0.1,
            sdot: 0.0,
            q_c: 0.0,
            energy: e,
            energy_ref: e_r,
            phi: None,
            t_min: 0.0,
            t_at0: 0.0,
            safe_flux: true,
            safe_temp: true,
        }
    }

    fn paper_planner() -> Planner<f64> {
        let r = ReferenceTrajectory::new(ReferenceParams {
            omega: 0.002,
            delta1: 4.0e-4,
            delta2: 4.0e-3,
            v_min: 7.0e-7,
            s_r0: 0.11,
            s_bar: 0.15,
        })
        .unwrap();
        Planner::new(PhysicalParams::zinc(), r, 30).unwrap()
    }

    fn solver() -> StefanSolver<f64> {
        StefanSolver::new(PhysicalParams::zinc(), SolverConfig::default()).unwrap()
    }

    #[test]
    fn state_on_reference_has_zero_phi() {
        let planner = paper_planner();
        let plan = planner.plan_at(300.0).unwrap();
        let state = solver()
            .initialize(plan.interface(), plan.interface_velocity(), |x| {
                plan.temperature(x).unwrap().value
            })
            .unwrap();
        let phi = tracking_functional(&state, &plan).unwrap();
        assert!(phi < 1e-20, "{phi}");
    }

    #[test]
    fn interface_offset_bounds_phi_below() {
        let planner = paper_planner();
        let plan = planner.plan_at(300.0).unwrap();
        let s = plan.interface() + 1e-3;
        let shift = 1e-3;
        let state = solver()
            .initialize(s, plan.interface_velocity(), |x| {
                plan.temperature(x - shift).unwrap().value
            })
            .unwrap();
        let phi = tracking_functional(&state, &plan).unwrap();
        assert!(phi >= 1e-6);
        assert!(phi < 1e-6 + 1e-18);
    }

    #[test]
    fn phi_ignores_common_offset() {
        let st = solver();
        let state = st.initialize(0.1, 1e-6, |x| 10.0 * (1.0 - x / 0.1)).unwrap();
        let reference = |x: f64| Ok(8.0 * (1.0 - x / 0.11) + 0.3 * x);
        let base = tracking_functional_with(&state, 0.11, 2e-6, reference).unwrap();
        let mut lifted = state.clone();
        lifted.temp.iter_mut().for_each(|u| *u += 25.0);
        let moved =
            tracking_functional_with(&lifted, 0.11, 2e-6, |x| reference(x).map(|r| r + 25.0)).unwrap();
        assert_relative_eq!(base, moved, max_relative = 1e-12);
    }

    #[test]
    fn reference_failure_propagates() {
        let state = solver().initialize(0.1, 0.0, |_| 0.0).unwrap();
        let r = tracking_functional_with(&state, 0.1, 0.0, |_| Err(StefanError::JetExhausted));
        assert!(r.is_err());
    }

    #[test]
    fn exact_exponential_has_no_residual() {
        let recs: Vec<_> = (0..50)
            .map(|i| {
                let t = 60.0 * i as f64;
                record(t, 3.0 - 2.0 * (-0.002 * t).exp(), 3.0)
            })
            .collect();
        assert!(energy_decay_residual(&recs, 0.002).unwrap() < 1e-15);
    }

    #[test]
    fn wrong_gain_is_detected() {
        let recs: Vec<_> = (0..100)
            .map(|i| {
                let t = 60.0 * i as f64;
                record(t, (-0.002 * t).exp(), 0.0)
            })
            .collect();
        assert!(energy_decay_residual(&recs, 0.004).unwrap() > 0.2);
    }

    #[test]
    fn residual_is_scale_invariant() {
        let recs: Vec<_> = (0..40)
            .map(|i| {
                let t = 30.0 * i as f64;
                record(t, 1.0 + (-0.002 * t).exp() + 1e-3 * (t / 300.0).sin(), 1.0)
            })
            .collect();
        let scaled: Vec<_> = recs
            .iter()
            .map(|r| record(r.t, 7.5 * r.energy, 7.5 * r.energy_ref))
            .collect();
        let a = energy_decay_residual(&recs, 0.002).unwrap();
        let b = energy_decay_residual(&scaled, 0.002).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-9);
    }

    #[test]
    fn empty_records_rejected() {
        assert!(matches!(
            energy_decay_residual(&[], 0.002),
            Err(StefanError::Empty(_))
        ));
    }

    #[test]
    fn fits_pure_exponential() {
        let t: Vec<f64> = (0..20).map(|i| 100.0 * i as f64).collect();
        let v: Vec<f64> = t.iter().map(|t| (-0.003 * t).exp()).collect();
        let fit = fit_decay_rate(&t, &v).unwrap();
        assert_relative_eq!(fit.rate, 0.003, max_relative = 1e-10);
        assert_relative_eq!(fit.r_squared, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn constant_has_zero_rate() {
        let t: Vec<f64> = (0..12).map(f64::from).collect();
        let fit = fit_decay_rate(&t, &[4.0; 12]).unwrap();
        assert_eq!(fit.rate, 0.0);
    }

    #[test]
    fn fit_rejects_bad_input() {
        let t: Vec<f64> = (0..12).map(f64::from).collect();
        let mut v = vec![1.0; 12];
        v[3] = 0.0;
        assert!(fit_decay_rate(&t, &v).is_err());
        assert!(fit_decay_rate(&t[..5], &v[..5]).is_err());
    }
}
