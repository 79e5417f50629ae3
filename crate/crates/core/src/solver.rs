//! Front-fixed finite-difference simulator of the one-phase Stefan problem.
//!
//! The liquid region `[0, s(t)]` is mapped to `y in [0, 1]` with `y = x / s(t)`,
//! turning the heat equation into
//!
//! ```text
//! u_t = (alpha / s^2) u_yy + (y sdot / s) u_y
//! ```
//!
//! Diffusion is advanced with a theta scheme (tridiagonal solve), the advection
//! term and all `s`, `sdot` coefficients are frozen at the start of the step.
//! The flux condition `-k T_x(0) = q_c` is imposed through a ghost node, the
//! Dirichlet condition `T(s) = T_m` at the last node, and the interface law
//! `eps s'' = -s' - beta T_x(s)` is advanced semi-implicitly in `sdot` using the
//! second-order one-sided gradient of the freshly solved temperature.

use crate::error::{Result, StefanError};
use crate::planner::PhysicalParams;
use crate::scalar::Real;
use crate::tridiag;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig<T> {
    /// Interior nodes of the fixed grid; the grid has `n_grid + 2` nodes in total.
    pub n_grid: usize,
    /// Time step (s).
    pub dt: T,
    /// Implicitness of the diffusion step: 1 is backward Euler, 0.5 Crank-Nicolson.
    pub theta: T,
    /// Smallest admissible interface position (m); defaults to `s0 / 2`.
    pub s_floor: Option<T>,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            n_grid: 200,
            dt: T::lit(0.05),
            theta: T::one(),
            s_floor: None,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.n_grid < 16 {
            return Err(StefanError::param(
                "n_grid",
                format!("must be >= 16, got {}", self.n_grid),
            ));
        }
        if !(self.dt > T::zero() && self.dt.is_finite()) {
            return Err(StefanError::param("dt", "must be positive"));
        }
        if !(self.theta >= T::lit(0.5) && self.theta <= T::one()) {
            return Err(StefanError::param(
                "theta",
                format!("must lie in [0.5, 1], got {}", self.theta),
            ));
        }
        Ok(())
    }

    /// Grid spacing in the fixed coordinate.
    pub fn dy(&self) -> T {
        T::one() / T::from_usize_lossy(self.n_grid + 1)
    }
}

/// Snapshot of the plant at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState<T> {
    pub t: T,
    /// Interface position (m).
    pub s: T,
    /// Interface velocity (m/s).
    pub sdot: T,
    /// Temperatures at `x_i = s * i / (n_grid + 1)`; the last entry is `T_m`.
    pub temp: Vec<T>,
    pub s_floor: T,
}

impl<T: Real> SimState<T> {
    pub fn nodes(&self) -> usize {
        self.temp.len()
    }

    pub fn dy(&self) -> T {
        T::one() / T::from_usize_lossy(self.temp.len() - 1)
    }

    /// Physical position of node `i`.
    pub fn x(&self, i: usize) -> T {
        self.s * T::from_usize_lossy(i) * self.dy()
    }

    pub fn min_temperature(&self) -> T {
        self.temp.iter().copied().fold(T::infinity(), T::min)
    }

    /// Trapezoid rule for `int_0^s f(x, T(x)) dx` on the solver grid.
    pub fn integrate(&self, mut f: impl FnMut(T, T) -> T) -> T {
        let last = self.temp.len() - 1;
        let half = T::lit(0.5);
        let sum = self.temp.iter().enumerate().fold(T::zero(), |acc, (i, &u)| {
            let w = if i == 0 || i == last { half } else { T::one() };
            acc + w * f(self.x(i), u)
        });
        sum * self.s * self.dy()
    }

    /// `E = int_0^s (T - T_m) dx + (alpha/beta)(eps sdot + s)`.
    pub fn energy(&self, phys: &PhysicalParams<T>) -> T {
        let tm = phys.melting_temperature;
        self.integrate(|_, u| u - tm) + phys.energy_weight() * (phys.epsilon * self.sdot + self.s)
    }

    /// Interface gradient `T_x(s)` from the second-order one-sided stencil.
    pub fn interface_gradient(&self) -> T {
        let l = self.temp.len() - 1;
        let u = &self.temp;
        (T::lit(3.0) * u[l] - T::lit(4.0) * u[l - 1] + u[l - 2]) / (T::lit(2.0) * self.dy() * self.s)
    }
}

#[derive(Debug, Clone)]
pub struct StefanSolver<T> {
    phys: PhysicalParams<T>,
    config: SolverConfig<T>,
}

impl<T: Real> StefanSolver<T> {
    pub fn new(phys: PhysicalParams<T>, config: SolverConfig<T>) -> Result<Self> {
        phys.validate()?;
        config.validate()?;
        Ok(Self { phys, config })
    }

    pub fn phys(&self) -> &PhysicalParams<T> {
        &self.phys
    }

    pub fn config(&self) -> &SolverConfig<T> {
        &self.config
    }

    /// Samples the initial profile on the front-fixed grid after checking the
    /// admissibility conditions on `(s0, v0, T0)`.
    pub fn initialize(&self, s0: T, v0: T, profile: impl Fn(T) -> T) -> Result<SimState<T>> {
        let tm = self.phys.melting_temperature;
        let tol = T::lit(crate::planner::TEMPERATURE_TOLERANCE);
        if !(s0 > T::zero() && s0 < self.phys.length) {
            return Err(StefanError::AssumptionViolated {
                assumption: "initial interface condition (0 < s0 < L)",
                detail: format!("s0 = {s0}, L = {}", self.phys.length),
            });
        }
        if !(v0 >= T::zero()) {
            return Err(StefanError::AssumptionViolated {
                assumption: "initial velocity condition (v0 >= 0)",
                detail: format!("v0 = {v0}"),
            });
        }
        let nodes = self.config.n_grid + 2;
        let dy = self.config.dy();
        let mut temp: Vec<T> = (0..nodes)
            .map(|i| profile(s0 * T::from_usize_lossy(i) * dy))
            .collect();
        let end = temp[nodes - 1];
        if !((end - tm).abs() <= tol) {
            return Err(StefanError::AssumptionViolated {
                assumption: "initial profile condition (T0(s0) = T_m)",
                detail: format!("T0(s0) = {end}, T_m = {tm}"),
            });
        }
        if let Some(i) = temp.iter().position(|&u| !(u >= tm - tol)) {
            return Err(StefanError::AssumptionViolated {
                assumption: "initial profile condition (T0 >= T_m)",
                detail: format!("T0 = {} at x = {}", temp[i], s0 * T::from_usize_lossy(i) * dy),
            });
        }
        temp[nodes - 1] = tm;
        Ok(SimState {
            t: T::zero(),
            s: s0,
            sdot: v0,
            temp,
            s_floor: self.config.s_floor.unwrap_or(s0 * T::lit(0.5)),
        })
    }

    /// Advances one time step under boundary flux `q_c` (W/m^2).
    pub fn step(&self, state: &SimState<T>, q_c: T) -> Result<SimState<T>> {
        let p = &self.phys;
        let dt = self.config.dt;
        let theta = self.config.theta;
        let nodes = state.temp.len();
        let n = nodes - 1; // unknowns 0..n, node n is Dirichlet
        let dy = state.dy();
        let (s, sdot) = (state.s, state.sdot);
        let u = &state.temp;
        let two = T::lit(2.0);

        let lam = dt * p.alpha / (s * s * dy * dy);
        let lam_new = theta * lam;
        let lam_old = (T::one() - theta) * lam;
        let adv = dt * sdot / (s * two * dy);

        let mut sub = vec![-lam_new; n];
        let diag = vec![T::one() + two * lam_new; n];
        let mut sup = vec![-lam_new; n];
        let mut rhs = vec![T::zero(); n];

        // ghost node: u_{-1} = u_1 + 2 dy s q / k
        let ghost_flux = two * dy * s * q_c / p.conductivity;
        sub[0] = T::zero();
        sup[0] = -two * lam_new;
        rhs[0] = u[0] + lam_old * (two * u[1] - two * u[0]) + lam * ghost_flux;
        for i in 1..n {
            let y = T::from_usize_lossy(i) * dy;
            rhs[i] = u[i] + lam_old * (u[i + 1] - two * u[i] + u[i - 1]) + adv * y * (u[i + 1] - u[i - 1]);
        }
        rhs[n - 1] = rhs[n - 1] + lam_new * p.melting_temperature;
        sup[n - 1] = T::zero();
        tridiag::solve_in_place(&sub, &diag, &sup, &mut rhs);

        let mut temp = rhs;
        temp.push(p.melting_temperature);
        let l = n;
        let grad = (T::lit(3.0) * temp[l] - T::lit(4.0) * temp[l - 1] + temp[l - 2]) / (two * dy * s);

        let relax = dt / p.epsilon;
        let sdot_new = (sdot - relax * p.beta * grad) / (T::one() + relax);
        let s_new = s + dt * sdot_new;
        let t_new = state.t + dt;

        if !(s_new.is_finite() && sdot_new.is_finite()) || temp.iter().any(|v| !v.is_finite()) {
            return Err(StefanError::NonFinite {
                what: "solver state",
                t: t_new.as_f64(),
            });
        }
        if s_new < state.s_floor || s_new >= p.length {
            return Err(StefanError::DomainViolation {
                t: t_new.as_f64(),
                s: s_new.as_f64(),
                floor: state.s_floor.as_f64(),
                ceiling: p.length.as_f64(),
            });
        }
        Ok(SimState {
            t: t_new,
            s: s_new,
            sdot: sdot_new,
            temp,
            s_floor: state.s_floor,
        })
    }
}

#[derive(Debug)]
pub enum RunStatus {
    Completed,
    /// The step or the controller failed at time `t`; records up to that point are kept.
    Aborted {
        t: f64,
        error: StefanError,
    },
}

#[derive(Debug)]
pub struct RunOutcome<T> {
    pub final_state: SimState<T>,
    pub steps: usize,
    pub status: RunStatus,
}

/// Time-marches `initial` over `horizon` seconds.
///
/// `controller` maps the state at the start of each step to the flux applied
/// during it. `logger` sees every `log_every`-th state (including the first and,
/// when the step count is a multiple of `log_every`, the last) together with its flux.
/// Logger errors are propagated; step and controller errors end the run with
/// [`RunStatus::Aborted`].
pub fn run<T, C, L>(
    solver: &StefanSolver<T>,
    initial: SimState<T>,
    horizon: T,
    log_every: usize,
    mut controller: C,
    mut logger: L,
) -> Result<RunOutcome<T>>
where
    T: Real,
    C: FnMut(&SimState<T>) -> Result<T>,
    L: FnMut(&SimState<T>, T) -> Result<()>,
{
    let log_every = log_every.max(1);
    let dt = solver.config().dt;
    let steps = (horizon / dt).round().to_usize().unwrap_or(0);
    let t0 = initial.t;
    let mut state = initial;
    for k in 0..=steps {
        let q = match controller(&state) {
            Ok(q) => q,
            Err(error) => {
                return Ok(RunOutcome {
                    steps: k,
                    status: RunStatus::Aborted {
                        t: state.t.as_f64(),
                        error,
                    },
                    final_state: state,
                })
            }
        };
        if k % log_every == 0 {
            logger(&state, q)?;
        }
        if k == steps {
            break;
        }
        match solver.step(&state, q) {
            Ok(mut next) => {
                next.t = t0 + T::from_usize_lossy(k + 1) * dt;
                state = next;
            }
            Err(error) => {
                return Ok(RunOutcome {
                    steps: k,
                    status: RunStatus::Aborted {
                        t: state.t.as_f64(),
                        error,
                    },
                    final_state: state,
                })
            }
        }
    }
    Ok(RunOutcome {
        final_state: state,
        steps,
        status: RunStatus::Completed,
    })
}
