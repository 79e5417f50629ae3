//! Self-checks run by the `verify` command: jet algebra, series identities,
//! coefficient bounds and energy conservation of the simulator.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::jet::Jet;
use crate::planner::verify_coefficient_bound;
use crate::scenario::Scenario;
use crate::solver::run;

pub const SEED: u64 = 0x5EED_57EF;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn bound(name: &'static str, value: f64, limit: f64) -> Self {
        Self {
            name,
            passed: value <= limit,
            detail: format!("{value:.3e} (limit {limit:.1e})"),
        }
    }
}

fn random_jet(rng: &mut ChaCha8Rng, order: usize) -> Jet<f64> {
    Jet::from_coeffs((0..=order).map(|_| rng.gen_range(-2.0..2.0)).collect())
}

/// Largest relative defect of the product rule over `cases` random pairs.
pub fn leibniz_defect(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let order = rng.gen_range(1..=8);
        let (a, b) = (random_jet(&mut rng, order), random_jet(&mut rng, order));
        let lhs = (&a * &b).derivative().expect("order >= 1");
        let da = a.derivative().expect("order >= 1");
        let db = b.derivative().expect("order >= 1");
        let rhs = &(&da * &b.truncate(order - 1)) + &(&a.truncate(order - 1) * &db);
        for (l, r) in lhs.coeffs().iter().zip(rhs.coeffs()) {
            worst = worst.max((l - r).abs() / l.abs().max(r.abs()).max(1.0));
        }
    }
    worst
}

/// Largest relative deviation of the Cauchy product from an exact integer polynomial product.
pub fn cauchy_defect(cases: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        let order = rng.gen_range(0..=8);
        let p: Vec<i64> = (0..=order).map(|_| rng.gen_range(-50..=50)).collect();
        let q: Vec<i64> = (0..=order).map(|_| rng.gen_range(-50..=50)).collect();
        let mut exact = vec![0i64; order + 1];
        for (i, a) in p.iter().enumerate() {
            for (j, b) in q.iter().enumerate().take(order + 1 - i) {
                exact[i + j] += a * b;
            }
        }
        let to_jet = |v: &[i64]| Jet::from_coeffs(v.iter().map(|&c| c as f64).collect());
        let got = &to_jet(&p) * &to_jet(&q);
        for (g, e) in got.coeffs().iter().zip(&exact) {
            worst = worst.max((g - *e as f64).abs() / (*e as f64).abs().max(1.0));
        }
    }
    worst
}

/// Relative deviation of `jet(e^{at}) * jet(cos bt)` from the closed-form jet of
/// `e^{at} cos bt`, order 10.
pub fn closed_form_defect() -> f64 {
    let exp_jet = |z: Complex64, t0: f64| {
        let mut c = (z * t0).exp();
        let mut coeffs = vec![c.re];
        for k in 1..=10 {
            c = c * z / k as f64;
            coeffs.push(c.re);
        }
        Jet::from_coeffs(coeffs)
    };
    let (a, b, t0) = (-0.4, 1.3, 0.7);
    let prod = &exp_jet(Complex64::new(a, 0.0), t0) * &exp_jet(Complex64::new(0.0, b), t0);
    let expect = exp_jet(Complex64::new(a, b), t0);
    prod.coeffs()
        .iter()
        .zip(expect.coeffs())
        .map(|(p, e)| (p - e).abs() / e.abs().max(1e-300))
        .fold(0.0, f64::max)
}

/// `max |alpha a_n - a'_{n-2} + sdot_r a_{n-1}| / scale` over `times` and all `n >= 2`,
/// together with the relative defect of the initial coefficient `a_1`.
pub fn recursion_defect(scenario: &Scenario, times: &[f64]) -> Result<f64> {
    let phys = &scenario.phys;
    let r = &scenario.reference;
    let mut worst: f64 = 0.0;
    for &t in times {
        let plan = scenario.planner.plan_at(t)?;
        let a1 = phys.beta * plan.coefficient(1).value() + phys.epsilon * r.acceleration(t) + r.velocity(t);
        worst = worst.max(a1.abs() / r.velocity(t).abs().max(f64::MIN_POSITIVE));
        for n in 2..=plan.order() {
            let lhs = phys.alpha * plan.coefficient(n).value();
            let lag = plan.coefficient(n - 2).derivative_value(1).unwrap_or(0.0);
            let prod = plan.interface_velocity() * plan.coefficient(n - 1).value();
            let scale = lhs.abs().max(lag.abs()).max(prod.abs());
            if scale > 0.0 {
                worst = worst.max((lhs - lag + prod).abs() / scale);
            }
        }
    }
    Ok(worst)
}

/// Largest `|T_r(s_r) - T_m|`.
pub fn interface_defect(scenario: &Scenario, times: &[f64]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for &t in times {
        let plan = scenario.planner.plan_at(t)?;
        let v = plan.temperature(plan.interface())?.value;
        worst = worst.max((v - scenario.phys.melting_temperature).abs());
    }
    Ok(worst)
}

/// Largest relative gap between the closed-form and the trapezoid (`n` panels)
/// value of `int_0^{s_r} (T_r - T_m) dx`.
pub fn energy_quadrature_defect(scenario: &Scenario, times: &[f64], n: usize) -> Result<f64> {
    let phys = &scenario.phys;
    let mut worst: f64 = 0.0;
    for &t in times {
        let plan = scenario.planner.plan_at(t)?;
        let s = plan.interface();
        let dx = s / n as f64;
        let mut integral = 0.0;
        for i in 0..=n {
            let w = if i == 0 || i == n { 0.5 } else { 1.0 };
            integral += w * (plan.temperature(i as f64 * dx)?.value - phys.melting_temperature);
        }
        integral *= dx;
        let closed = plan.energy()? - phys.energy_weight() * (phys.epsilon * plan.interface_velocity() + s);
        worst = worst.max((closed - integral).abs() / integral.abs());
    }
    Ok(worst)
}

/// Open-loop run at constant flux `q` for `duration`; returns
/// `|E(end) - E(0) - (alpha/k) q duration| / |E(end) - E(0)|`.
pub fn conservation_defect(scenario: &Scenario, q: f64, duration: f64) -> Result<f64> {
    let initial = scenario.initial_state()?;
    let e0 = initial.energy(&scenario.phys);
    let out = run(
        &scenario.solver,
        initial,
        duration,
        usize::MAX,
        |_| Ok(q),
        |_, _| Ok(()),
    )?;
    if let crate::solver::RunStatus::Aborted { error, .. } = out.status {
        return Err(error);
    }
    let gained = out.final_state.energy(&scenario.phys) - e0;
    let supplied = scenario.phys.flux_to_energy_rate() * q * duration;
    Ok((gained - supplied).abs() / gained.abs())
}

fn uniform(horizon: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| horizon * i as f64 / (count - 1) as f64)
        .collect()
}

/// Runs every check on `scenario`.
pub fn run_all(scenario: &Scenario) -> Result<Vec<Check>> {
    let horizon = scenario.config.run.horizon;
    let times = uniform(horizon, 50);
    let few = uniform(horizon, 7);

    let mut checks = vec![
        Check::bound("jet_leibniz", leibniz_defect(500, SEED), 1e-12),
        Check::bound("jet_cauchy_product", cauchy_defect(500, SEED + 1), 1e-12),
        Check::bound("jet_closed_form", closed_form_defect(), 1e-10),
        Check::bound("series_recursion", recursion_defect(scenario, &times)?, 1e-10),
        Check::bound("interface_temperature", interface_defect(scenario, &times)?, 0.0),
        Check::bound(
            "energy_closed_form",
            energy_quadrature_defect(scenario, &few, 10_000)?,
            1e-6,
        ),
    ];

    let n_max = 10.min(scenario.planner.order());
    let bound = verify_coefficient_bound(&scenario.planner, &scenario.certificate, &times, n_max, 4)?;
    checks.push(Check {
        name: "coefficient_bound",
        passed: bound.passed(),
        detail: format!(
            "{} violations in {} checks, worst ratio {:.3e}",
            bound.violations.len(),
            bound.checked,
            bound.worst_ratio
        ),
    });
    let ratio = scenario
        .planner
        .plan_at(0.0)?
        .convergence_ratio()
        .unwrap_or(f64::INFINITY);
    checks.push(Check {
        name: "convergence_ratio",
        passed: ratio < 1.0,
        detail: format!("F s_bar / R = {ratio:.6}"),
    });
    checks.push(Check::bound(
        "energy_conservation",
        conservation_defect(scenario, 3000.0, 600.0)?,
        5e-3,
    ));
    Ok(checks)
}
