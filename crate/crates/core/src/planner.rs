//! Series-expansion solution of the inverse Stefan problem.
//!
//! The reference temperature is expanded around the reference interface,
//!
//! ```text
//! T_r(x, t) = T_m + sum_{n>=1} a_n(t) / n! (x - s_r(t))^n,
//! ```
//!
//! with `a_0 = 0`, `a_1 = -(eps s_r'' + s_r') / beta` and, for `n >= 2`,
//! `a_n = (a_{n-2}' - s_r' a_{n-1}) / alpha`. Each `a_n` is carried as a jet in
//! time so the derivative consumed by the recursion is available exactly.
//!
//! The energy weight of the interface term is `alpha / beta`, which makes the
//! energy balance read `dE/dt = (alpha / k) q_c` (see `PhysicalParams::energy_weight`).

use crate::error::{Result, StefanError};
use crate::jet::Jet;
use crate::reference::{GevreyCertificate, ReferenceTrajectory};
use crate::scalar::{ln_factorial, Real};

/// Default series truncation order.
pub const DEFAULT_ORDER: usize = 30;
/// The last retained term must stay below this fraction of the summed term magnitudes.
pub const TAIL_TOLERANCE: f64 = 1e-9;
/// Slack for `T_r >= T_m` checks.
pub const TEMPERATURE_TOLERANCE: f64 = 1e-9;

/// Material and interface constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams<T> {
    /// Thermal diffusivity (m^2/s).
    pub alpha: T,
    /// Thermal conductivity (W/(m K)).
    pub conductivity: T,
    /// Stefan coefficient (m^2/(s K)).
    pub beta: T,
    /// Interface relaxation time (s).
    pub epsilon: T,
    /// Melting temperature (deg C).
    pub melting_temperature: T,
    /// Length of the material (m).
    pub length: T,
}

impl<T: Real> PhysicalParams<T> {
    /// `alpha = k / (rho c_p)`, `beta = k / (rho dH)`.
    pub fn from_material(
        conductivity: T,
        density: T,
        specific_heat: T,
        latent_heat: T,
        epsilon: T,
        melting_temperature: T,
        length: T,
    ) -> Self {
        Self {
            alpha: conductivity / (density * specific_heat),
            conductivity,
            beta: conductivity / (density * latent_heat),
            epsilon,
            melting_temperature,
            length,
        }
    }

    /// Zinc with `eps = 10 s`, `T_m = 0 C`, `L = 0.2 m`.
    pub fn zinc() -> Self {
        Self::from_material(
            T::lit(116.0),
            T::lit(6570.0),
            T::lit(389.57),
            T::lit(111_961.0),
            T::lit(10.0),
            T::zero(),
            T::lit(0.2),
        )
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("alpha", self.alpha),
            ("conductivity", self.conductivity),
            ("beta", self.beta),
            ("epsilon", self.epsilon),
            ("length", self.length),
        ] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(StefanError::param(name, format!("must be positive, got {v}")));
            }
        }
        if !self.melting_temperature.is_finite() {
            return Err(StefanError::param("melting_temperature", "must be finite"));
        }
        Ok(())
    }

    /// Weight `alpha / beta` (K) of the interface term `eps sdot + s` in the energy.
    ///
    /// With `E = int_0^s (T - T_m) dx + (alpha/beta)(eps sdot + s)`, integrating the
    /// heat equation by parts and using the interface law gives
    /// `dE/dt = -alpha T_x(0, t) = (alpha / k) q_c`.
    pub fn energy_weight(&self) -> T {
        self.alpha / self.beta
    }

    /// Factor `alpha / k` mapping a boundary flux to the rate of change of energy.
    pub fn flux_to_energy_rate(&self) -> T {
        self.alpha / self.conductivity
    }
}

/// `F = (R M + sqrt(R^2 M^2 + 16 alpha R)) / (4 alpha)`.
pub fn series_f<T: Real>(magnitude: T, scale: T, alpha: T) -> T {
    let rm = scale * magnitude;
    (rm + (rm * rm + T::lit(16.0) * alpha * scale).sqrt()) / (T::lit(4.0) * alpha)
}

/// `G = (eps + R) / beta`.
pub fn series_g<T: Real>(scale: T, phys: &PhysicalParams<T>) -> T {
    (phys.epsilon + scale) / phys.beta
}

/// Jet order carried by coefficient `n` of an order-`order` plan.
pub fn jet_order(order: usize, n: usize) -> usize {
    (order - n.min(order)) / 2 + 1
}

/// Produces series plans for one reference trajectory.
#[derive(Debug, Clone)]
pub struct Planner<T> {
    phys: PhysicalParams<T>,
    reference: ReferenceTrajectory<T>,
    order: usize,
    certificate: Option<GevreyCertificate<T>>,
}

impl<T: Real> Planner<T> {
    pub fn new(phys: PhysicalParams<T>, reference: ReferenceTrajectory<T>, order: usize) -> Result<Self> {
        phys.validate()?;
        if order == 0 {
            return Err(StefanError::param(
                "order",
                "series truncation order must be >= 1",
            ));
        }
        Ok(Self {
            phys,
            reference,
            order,
            certificate: None,
        })
    }

    /// Attaches a Gevrey certificate; evaluations are then restricted to the radius `R / F`.
    pub fn with_certificate(mut self, certificate: GevreyCertificate<T>) -> Self {
        self.certificate = Some(certificate);
        self
    }

    pub fn phys(&self) -> &PhysicalParams<T> {
        &self.phys
    }

    pub fn reference(&self) -> &ReferenceTrajectory<T> {
        &self.reference
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn certificate(&self) -> Option<&GevreyCertificate<T>> {
        self.certificate.as_ref()
    }

    /// `F` for the attached certificate.
    pub fn series_f(&self) -> Option<T> {
        self.certificate
            .as_ref()
            .map(|c| series_f(c.magnitude, c.scale, self.phys.alpha))
    }

    pub fn plan_at(&self, t: T) -> Result<SeriesPlan<T>> {
        let n_max = self.order;
        let top = jet_order(n_max, 1);
        let sdot = self.reference.derivative_jet(t, 1, top);
        let sddot = self.reference.derivative_jet(t, 2, top);

        let mut coeffs = Vec::with_capacity(n_max + 1);
        coeffs.push(Jet::zero(jet_order(n_max, 0)));
        let a1 = (&sddot.scale(self.phys.epsilon) + &sdot).scale(-T::one() / self.phys.beta);
        coeffs.push(a1);
        let inv_alpha = T::one() / self.phys.alpha;
        for n in 2..=n_max {
            let want = jet_order(n_max, n);
            let lagged = coeffs[n - 2].derivative()?;
            let next = (&lagged - &(&sdot * &coeffs[n - 1])).scale(inv_alpha);
            if next.order() < want {
                return Err(StefanError::JetExhausted);
            }
            coeffs.push(next.truncate(want));
        }
        if let Some(bad) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(StefanError::NonFinite {
                what: if bad == 0 { "a_0" } else { "series coefficient" },
                t: t.as_f64(),
            });
        }

        let (radius, ratio) = match self.certificate.as_ref() {
            Some(c) => {
                let f = series_f(c.magnitude, c.scale, self.phys.alpha);
                (Some(c.scale / f), Some(f * self.reference.s_bar() / c.scale))
            }
            None => (None, None),
        };

        Ok(SeriesPlan {
            t,
            s_r: self.reference.position(t),
            sdot_r: sdot.value(),
            coeffs,
            phys: self.phys,
            radius,
            ratio,
        })
    }
}

/// A series value together with the magnitude of its last retained term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue<T> {
    pub value: T,
    pub tail: T,
}

/// Truncated series coefficients `a_0..a_N` at one time.
#[derive(Debug, Clone)]
pub struct SeriesPlan<T> {
    t: T,
    s_r: T,
    sdot_r: T,
    coeffs: Vec<Jet<T>>,
    phys: PhysicalParams<T>,
    radius: Option<T>,
    ratio: Option<T>,
}

impl<T: Real> SeriesPlan<T> {
    pub fn time(&self) -> T {
        self.t
    }

    pub fn interface(&self) -> T {
        self.s_r
    }

    pub fn interface_velocity(&self) -> T {
        self.sdot_r
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Jet of `a_n` at the plan time.
    pub fn coefficient(&self, n: usize) -> &Jet<T> {
        &self.coeffs[n]
    }

    pub fn coefficients(&self) -> &[Jet<T>] {
        &self.coeffs
    }

    /// Radius of convergence `R / F` from the attached certificate.
    pub fn radius(&self) -> Option<T> {
        self.radius
    }

    /// `F sup s_r / R`; the plan is certified convergent when this is below one.
    pub fn convergence_ratio(&self) -> Option<T> {
        self.ratio
    }

    pub fn is_certified(&self) -> bool {
        self.ratio.is_some_and(|r| r < T::one())
    }

    fn check_radius(&self, offset: T) -> Result<()> {
        match self.radius {
            Some(r) if !(offset.abs() < r) => Err(StefanError::SeriesDivergence {
                offset: offset.as_f64(),
                radius: r.as_f64(),
            }),
            _ => Ok(()),
        }
    }

    /// Sums `sum_{n=1}^{N} a_n h^(n-shift) / (n-shift)!` for `shift` in `{0, 1}`.
    fn sum_series(&self, shift: usize, h: T) -> Result<SeriesValue<T>> {
        let mut weight = if shift == 0 { h } else { T::one() };
        let mut sum = T::zero();
        let mut scale = T::zero();
        let mut last = T::zero();
        for n in 1..=self.order() {
            if n > 1 {
                weight = weight * h / T::from_usize_lossy(n - shift);
            }
            last = self.coeffs[n].value() * weight;
            sum = sum + last;
            scale = scale + last.abs();
        }
        let tail = last.abs();
        if tail > T::lit(TAIL_TOLERANCE) * scale {
            return Err(StefanError::TruncationTail {
                tail: tail.as_f64(),
                scale: scale.as_f64(),
            });
        }
        if !sum.is_finite() {
            return Err(StefanError::NonFinite {
                what: "series sum",
                t: self.t.as_f64(),
            });
        }
        Ok(SeriesValue { value: sum, tail })
    }

    /// `T_r(x, t)`; exactly `T_m` at `x = s_r(t)`.
    pub fn temperature(&self, x: T) -> Result<SeriesValue<T>> {
        let h = x - self.s_r;
        self.check_radius(h)?;
        let series = self.sum_series(0, h)?;
        Ok(SeriesValue {
            value: self.phys.melting_temperature + series.value,
            tail: series.tail,
        })
    }

    /// `dT_r/dx (x, t)`.
    pub fn gradient(&self, x: T) -> Result<SeriesValue<T>> {
        let h = x - self.s_r;
        self.check_radius(h)?;
        self.sum_series(1, h)
    }

    /// Feedforward heat flux `q_r = -k T_r,x(0, t)` (W/m^2).
    pub fn feedforward_flux(&self) -> Result<T> {
        Ok(-self.phys.conductivity * self.gradient(T::zero())?.value)
    }

    /// `E_r = int_0^{s_r} (T_r - T_m) dx + (alpha/beta)(eps sdot_r + s_r)` in closed form.
    pub fn energy(&self) -> Result<T> {
        let s = self.s_r;
        self.check_radius(s)?;
        // int_0^s (x - s)^n / n! dx = (-1)^n s^(n+1) / (n+1)!
        let mut weight = s;
        let mut sum = T::zero();
        for n in 1..=self.order() {
            weight = -weight * s / T::from_usize_lossy(n + 1);
            sum = sum + self.coeffs[n].value() * weight;
        }
        Ok(sum + self.phys.energy_weight() * (self.phys.epsilon * self.sdot_r + s))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport<T> {
    pub f: T,
    pub scale: T,
    /// `F sup s_r / R`.
    pub ratio: T,
    pub convergent: bool,
    /// `M G R / (F (R - F s_r(t)))` at `x = 0`.
    pub temperature_envelope: T,
    /// `M G R / (R - F s_r(t))^2` at `x = 0`.
    pub gradient_envelope: T,
}

/// Radius-of-convergence condition and the temperature/gradient envelopes at `x = 0`.
pub fn check_convergence<T: Real>(
    plan: &SeriesPlan<T>,
    certificate: &GevreyCertificate<T>,
    reference: &ReferenceTrajectory<T>,
    phys: &PhysicalParams<T>,
) -> ConvergenceReport<T> {
    let (m, r) = (certificate.magnitude, certificate.scale);
    let f = series_f(m, r, phys.alpha);
    let g = series_g(r, phys);
    let ratio = f * reference.s_bar() / r;
    let gap = r - f * plan.interface();
    let (temperature_envelope, gradient_envelope) = if gap > T::zero() {
        (m * g * r / (f * gap), m * g * r / (gap * gap))
    } else {
        (T::infinity(), T::infinity())
    };
    ConvergenceReport {
        f,
        scale: r,
        ratio,
        convergent: ratio < T::one(),
        temperature_envelope,
        gradient_envelope,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundViolation<T> {
    pub n: usize,
    pub m: usize,
    pub t: T,
    pub value: T,
    pub bound: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientBoundReport<T> {
    pub checked: usize,
    pub violations: Vec<BoundViolation<T>>,
    /// Largest `|a_n^(m)| / bound` seen.
    pub worst_ratio: T,
}

impl<T> CoefficientBoundReport<T> {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `ln(M F^(n-1) G H_{n,m})` with `H_{n,m} = ((n+m)!)^d / (R^(n+m) (n!)^(d-1))`.
pub fn ln_coefficient_bound<T: Real>(
    certificate: &GevreyCertificate<T>,
    phys: &PhysicalParams<T>,
    n: usize,
    m: usize,
) -> T {
    let (big_m, r, d) = (certificate.magnitude, certificate.scale, certificate.exponent);
    let f = series_f(big_m, r, phys.alpha);
    let g = series_g(r, phys);
    let nf = T::from_usize_lossy(n);
    big_m.ln() + (nf - T::one()) * f.ln() + g.ln() + d * ln_factorial::<T>(n + m)
        - T::from_usize_lossy(n + m) * r.ln()
        - (d - T::one()) * ln_factorial::<T>(n)
}

/// Compares `|a_n^(m)(t)|` against `M F^(n-1) G H_{n,m}` for `n <= n_max`, `m <= m_max`.
pub fn verify_coefficient_bound<T: Real>(
    planner: &Planner<T>,
    certificate: &GevreyCertificate<T>,
    times: &[T],
    n_max: usize,
    m_max: usize,
) -> Result<CoefficientBoundReport<T>> {
    if n_max > planner.order() || jet_order(planner.order(), n_max) < m_max {
        return Err(StefanError::param(
            "order",
            format!(
                "plan order {} carries too few derivatives for n <= {n_max}, m <= {m_max}",
                planner.order()
            ),
        ));
    }
    let phys = planner.phys();
    let mut report = CoefficientBoundReport {
        checked: 0,
        violations: Vec::new(),
        worst_ratio: T::zero(),
    };
    for &t in times {
        let plan = planner.plan_at(t)?;
        for n in 0..=n_max {
            for m in 0..=m_max {
                report.checked += 1;
                let value = plan.coefficient(n).derivative_value(m).unwrap_or(T::zero()).abs();
                if n == 0 {
                    // a_0 vanishes identically
                    if value != T::zero() {
                        report.violations.push(BoundViolation {
                            n,
                            m,
                            t,
                            value,
                            bound: T::zero(),
                        });
                    }
                    continue;
                }
                let ln_bound = ln_coefficient_bound(certificate, phys, n, m);
                if value > T::zero() {
                    let ratio = (value.ln() - ln_bound).exp();
                    report.worst_ratio = report.worst_ratio.max(ratio);
                    if ratio > T::one() {
                        report.violations.push(BoundViolation {
                            n,
                            m,
                            t,
                            value,
                            bound: ln_bound.exp(),
                        });
                    }
                }
            }
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption5Report<T> {
    /// `min (T_r - T_m)` over the grid.
    pub min_margin: T,
    pub at_x: T,
    pub at_t: T,
    pub passed: bool,
}

/// `T_r(x, t) >= T_m` on `x_points` uniform points of `[0, s_r(t)]` at each of `times`.
pub fn check_assumption5<T: Real>(
    planner: &Planner<T>,
    times: &[T],
    x_points: usize,
) -> Result<Assumption5Report<T>> {
    let x_points = x_points.max(2);
    let tm = planner.phys().melting_temperature;
    let mut report = Assumption5Report {
        min_margin: T::infinity(),
        at_x: T::zero(),
        at_t: T::zero(),
        passed: true,
    };
    for &t in times {
        let plan = planner.plan_at(t)?;
        let s = plan.interface();
        for i in 0..x_points {
            let x = s * T::from_usize_lossy(i) / T::from_usize_lossy(x_points - 1);
            let margin = plan.temperature(x)?.value - tm;
            if margin < report.min_margin {
                report.min_margin = margin;
                report.at_x = x;
                report.at_t = t;
            }
        }
    }
    report.passed = report.min_margin >= -T::lit(TEMPERATURE_TOLERANCE);
    Ok(report)
}
