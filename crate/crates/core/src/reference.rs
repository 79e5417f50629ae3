//! Exp-trig reference trajectories for the interface position.
//!
//! The reference velocity is
//!
//! ```text
//! sdot_r(t) = A (1 + cos(w t)) e^{-d1 t} + v_min e^{-d2 t}
//! ```
//!
//! which is rewritten as `Re sum_j c_j e^{z_j t}` with
//! `z_j in {-d1, -d1 + i w, -d1 - i w, -d2}` so that derivatives of any order
//! are exact: the `m`-th derivative just multiplies each term by `z_j^m`.

use num_complex::Complex;

use crate::error::{Result, StefanError};
use crate::jet::Jet;
use crate::scalar::{ln_factorial, Real};

/// Parameters of the exp-trig family. The amplitude `A` is derived from them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceParams<T> {
    /// Oscillation frequency (rad/s).
    pub omega: T,
    /// Decay rate of the oscillating part (1/s).
    pub delta1: T,
    /// Decay rate of the floor velocity term (1/s).
    pub delta2: T,
    /// Floor velocity (m/s).
    pub v_min: T,
    /// Initial reference position (m).
    pub s_r0: T,
    /// Asymptotic reference position (m).
    pub s_bar: T,
}

impl<T: Real> ReferenceParams<T> {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("omega", self.omega),
            ("delta1", self.delta1),
            ("delta2", self.delta2),
            ("v_min", self.v_min),
        ] {
            if !(v > T::zero() && v.is_finite()) {
                return Err(StefanError::param(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.s_r0 > T::zero()) {
            return Err(StefanError::param(
                "s_r0",
                format!("must be positive, got {}", self.s_r0),
            ));
        }
        if !(self.s_bar > self.s_r0) {
            return Err(StefanError::param(
                "s_bar",
                format!("must exceed s_r0 = {}, got {}", self.s_r0, self.s_bar),
            ));
        }
        Ok(())
    }
}

/// `A = (s_bar - s_r0 - v_min/d2) / (d1/(d1^2 + w^2) + 1/d1)`, rejected unless positive.
pub fn amplitude<T: Real>(p: &ReferenceParams<T>) -> Result<T> {
    p.validate()?;
    let numerator = p.s_bar - p.s_r0 - p.v_min / p.delta2;
    let a = numerator / oscillation_gain(p.omega, p.delta1);
    if a > T::zero() {
        Ok(a)
    } else {
        Err(StefanError::param(
            "s_bar",
            format!(
                "amplitude A = {a:e} must be positive; need s_bar - s_r0 > v_min/delta2 ({:e})",
                p.v_min / p.delta2
            ),
        ))
    }
}

fn oscillation_gain<T: Real>(omega: T, delta1: T) -> T {
    delta1 / (delta1 * delta1 + omega * omega) + T::one() / delta1
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrajectory<T> {
    params: ReferenceParams<T>,
    amplitude: T,
    s_bar: T,
    // (coefficient, rate) of the velocity written as Re sum c e^{z t}
    terms: [(Complex<T>, Complex<T>); 4],
}

impl<T: Real> ReferenceTrajectory<T> {
    /// The family with `A` fixed by the requirement `s_r(t) -> s_bar`.
    pub fn new(params: ReferenceParams<T>) -> Result<Self> {
        let a = amplitude(&params)?;
        Ok(Self::build(params, a, params.s_bar))
    }

    /// Same family with an explicitly chosen amplitude; `s_bar` is recomputed as the limit.
    /// Allows `A = 0` and `v_min = 0`.
    pub fn with_amplitude(params: ReferenceParams<T>, amplitude: T) -> Result<Self> {
        if !(amplitude >= T::zero()) {
            return Err(StefanError::param("amplitude", "must be non-negative"));
        }
        if !(params.v_min >= T::zero()) {
            return Err(StefanError::param("v_min", "must be non-negative"));
        }
        for (name, v) in [
            ("omega", params.omega),
            ("delta1", params.delta1),
            ("delta2", params.delta2),
        ] {
            if !(v > T::zero()) {
                return Err(StefanError::param(name, "must be positive"));
            }
        }
        let s_bar = params.s_r0
            + amplitude * oscillation_gain(params.omega, params.delta1)
            + params.v_min / params.delta2;
        Ok(Self::build(params, amplitude, s_bar))
    }

    /// `s_r(t) = s0` for all t.
    pub fn constant(s0: T) -> Self {
        let one = T::one();
        let params = ReferenceParams {
            omega: one,
            delta1: one,
            delta2: one,
            v_min: T::zero(),
            s_r0: s0,
            s_bar: s0,
        };
        Self::build(params, T::zero(), s0)
    }

    fn build(params: ReferenceParams<T>, amplitude: T, s_bar: T) -> Self {
        let half = T::lit(0.5);
        let c = |re: T| Complex::new(re, T::zero());
        let terms = [
            (c(amplitude), c(-params.delta1)),
            (c(amplitude * half), Complex::new(-params.delta1, params.omega)),
            (c(amplitude * half), Complex::new(-params.delta1, -params.omega)),
            (c(params.v_min), c(-params.delta2)),
        ];
        Self {
            params,
            amplitude,
            s_bar,
            terms,
        }
    }

    pub fn params(&self) -> &ReferenceParams<T> {
        &self.params
    }

    pub fn amplitude(&self) -> T {
        self.amplitude
    }

    /// `lim_{t -> inf} s_r(t)`, which is also `sup_t s_r(t)` since the velocity is non-negative.
    pub fn s_bar(&self) -> T {
        self.s_bar
    }

    pub fn initial_position(&self) -> T {
        self.params.s_r0
    }

    pub fn is_constant(&self) -> bool {
        self.amplitude == T::zero() && self.params.v_min == T::zero()
    }

    pub fn position(&self, t: T) -> T {
        let p = &self.params;
        let (w, d1, d2) = (p.omega, p.delta1, p.delta2);
        let one = T::one();
        let e1 = (-d1 * t).exp();
        let osc = (w * (w * t).sin() * e1 - d1 * ((w * t).cos() * e1 - one)) / (d1 * d1 + w * w);
        self.amplitude * osc
            + self.amplitude / d1 * (one - e1)
            + p.v_min / d2 * (one - (-d2 * t).exp())
            + p.s_r0
    }

    pub fn velocity(&self, t: T) -> T {
        self.derivative(t, 1)
    }

    pub fn acceleration(&self, t: T) -> T {
        self.derivative(t, 2)
    }

    /// `d^m s_r / dt^m` at `t`; `m = 0` is the position.
    pub fn derivative(&self, t: T, m: usize) -> T {
        if m == 0 {
            return self.position(t);
        }
        let k = (m - 1) as i32;
        self.terms
            .iter()
            .map(|&(c, z)| (c * z.powi(k) * (z * t).exp()).re)
            .fold(T::zero(), |a, b| a + b)
    }

    /// Jet of `s_r^(first)` at `t`: coefficient `k` is `s_r^(first + k)(t) / k!`.
    pub fn derivative_jet(&self, t: T, first: usize, order: usize) -> Jet<T> {
        assert!(first >= 1, "position jets are not needed by the planner");
        let mut running: Vec<Complex<T>> = self
            .terms
            .iter()
            .map(|&(c, z)| c * z.powi((first - 1) as i32) * (z * t).exp())
            .collect();
        let mut coeffs = Vec::with_capacity(order + 1);
        for k in 0..=order {
            if k > 0 {
                let kk = T::from_usize_lossy(k);
                for (w, &(_, z)) in running.iter_mut().zip(self.terms.iter()) {
                    *w = *w * z / kk;
                }
            }
            coeffs.push(running.iter().fold(T::zero(), |a, w| a + w.re));
        }
        Jet::from_coeffs(coeffs)
    }

    /// Upper end of the default sampling window, `5 / min(d1, d2)`.
    pub fn settling_horizon(&self) -> T {
        T::lit(5.0) / self.params.delta1.min(self.params.delta2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption4Report<T> {
    pub initial_positive: bool,
    pub velocity_nonnegative: bool,
    pub limit_below_length: bool,
    pub min_velocity: T,
    pub min_velocity_at: T,
}

impl<T> Assumption4Report<T> {
    pub fn passed(&self) -> bool {
        self.initial_positive && self.velocity_nonnegative && self.limit_below_length
    }
}

/// Checks `s_r(0) > 0`, `sdot_r >= 0` on `samples` uniform points of `[0, horizon]`, and `s_bar < L`.
pub fn check_assumption4<T: Real>(
    reference: &ReferenceTrajectory<T>,
    length: T,
    horizon: T,
    samples: usize,
) -> Assumption4Report<T> {
    let samples = samples.max(2);
    let (mut min_v, mut min_at) = (T::infinity(), T::zero());
    for i in 0..samples {
        let t = horizon * T::from_usize_lossy(i) / T::from_usize_lossy(samples - 1);
        let v = reference.velocity(t);
        if v < min_v {
            min_v = v;
            min_at = t;
        }
    }
    Assumption4Report {
        initial_positive: reference.position(T::zero()) > T::zero(),
        velocity_nonnegative: min_v >= T::zero(),
        limit_below_length: reference.s_bar() < length,
        min_velocity: min_v,
        min_velocity_at: min_at,
    }
}

/// Constants `(M, R, d)` with `|s_r^(m+1)(t)| <= M (m!)^d / R^m` on the sampled set.
#[derive(Debug, Clone, PartialEq)]
pub struct GevreyCertificate<T> {
    /// Derivative magnitude constant (m/s).
    pub magnitude: T,
    /// Derivative scale constant (s).
    pub scale: T,
    /// Gevrey exponent, in `[1, 2]`.
    pub exponent: T,
    /// Highest `m` covered.
    pub m_max: usize,
    pub samples: usize,
    pub violations: usize,
    /// All derivatives vanish; any `(M, R)` works and `M` is set to machine epsilon.
    pub degenerate: bool,
    /// `m_max` was lowered because a derivative sup was not finite.
    pub reduced: bool,
}

impl<T: Real> GevreyCertificate<T> {
    /// Hand-specified certificate, e.g. for testing bound checks.
    pub fn new(magnitude: T, scale: T, exponent: T, m_max: usize) -> Self {
        Self {
            magnitude,
            scale,
            exponent,
            m_max,
            samples: 0,
            violations: 0,
            degenerate: false,
            reduced: false,
        }
    }

    /// `ln(M (m!)^d / R^m)`.
    pub fn ln_bound(&self, m: usize) -> T {
        self.magnitude.ln() + self.exponent * ln_factorial::<T>(m) - T::from_usize_lossy(m) * self.scale.ln()
    }

    /// Counts `(t, m)` pairs violating the bound.
    pub fn count_violations(&self, reference: &ReferenceTrajectory<T>, times: &[T]) -> usize {
        let mut bad = 0;
        for &t in times {
            for m in 0..=self.m_max {
                let v = reference.derivative(t, m + 1).abs();
                if v > T::zero() && v.ln() > self.ln_bound(m) {
                    bad += 1;
                }
            }
        }
        bad
    }
}

/// `t = 0` followed by `count - 1` log-spaced points on `[horizon * 1e-4, horizon]`.
pub fn gevrey_sample_times<T: Real>(horizon: T, count: usize) -> Vec<T> {
    let count = count.max(2);
    let lo = (horizon * T::lit(1e-4)).ln();
    let hi = horizon.ln();
    let steps = T::from_usize_lossy(count.saturating_sub(2).max(1));
    std::iter::once(T::zero())
        .chain((0..count - 1).map(|i| (lo + (hi - lo) * T::from_usize_lossy(i) / steps).exp()))
        .collect()
}

/// Two-pass fit of a Gevrey certificate on the default sampling grid.
///
/// `M = sup_t |sdot_r|`, then `R = min_{1<=m<=m_max} (M (m!)^d / sup_t |s_r^(m+1)|)^{1/m}`,
/// computed in log space and shrunk by a relative `1e-10` so the revalidation is not
/// decided by rounding.
pub fn estimate_gevrey<T: Real>(
    reference: &ReferenceTrajectory<T>,
    exponent: T,
    m_max: usize,
    t_samples: usize,
) -> Result<GevreyCertificate<T>> {
    if !(exponent >= T::one() && exponent <= T::lit(2.0)) {
        return Err(StefanError::param(
            "d",
            format!("must lie in [1, 2], got {exponent}"),
        ));
    }
    if m_max < 2 {
        return Err(StefanError::param("m_max", "must be at least 2"));
    }
    let times = gevrey_sample_times(reference.settling_horizon(), t_samples);

    let mut sups = Vec::with_capacity(m_max + 1);
    let mut reduced = false;
    for m in 0..=m_max {
        let sup = times
            .iter()
            .map(|&t| reference.derivative(t, m + 1).abs())
            .fold(T::zero(), |a, b| a.max(b));
        if !sup.is_finite() {
            reduced = true;
            break;
        }
        sups.push(sup);
    }
    let m_max = sups.len().saturating_sub(1);
    if m_max < 1 {
        return Err(StefanError::param(
            "m_max",
            "no finite derivative bound beyond m = 0",
        ));
    }

    if sups.iter().all(|&s| s == T::zero()) {
        let mut cert = GevreyCertificate::new(T::epsilon(), T::one(), exponent, m_max);
        cert.degenerate = true;
        cert.reduced = reduced;
        cert.samples = times.len();
        return Ok(cert);
    }

    let magnitude = sups[0].max(T::epsilon());
    let ln_m = magnitude.ln();
    let ln_scale = (1..=m_max)
        .filter(|&m| sups[m] > T::zero())
        .map(|m| (ln_m + exponent * ln_factorial::<T>(m) - sups[m].ln()) / T::from_usize_lossy(m))
        .fold(T::infinity(), |a, b| a.min(b));
    let scale = if ln_scale.is_finite() {
        ln_scale.exp() * (T::one() - T::lit(1e-10))
    } else {
        T::one()
    };

    let mut cert = GevreyCertificate::new(magnitude, scale, exponent, m_max);
    cert.reduced = reduced;
    cert.samples = times.len();
    cert.violations = cert.count_violations(reference, &times);
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn paper() -> ReferenceParams<f64> {
        ReferenceParams {
            omega: 0.002,
            delta1: 4.0e-4,
            delta2: 4.0e-3,
            v_min: 7.0e-7,
            s_r0: 0.11,
            s_bar: 0.15,
        }
    }

    #[test]
    fn amplitude_of_paper_scenario() {
        let a = amplitude(&paper()).unwrap();
        // (0.15 - 0.11 - 1.75e-4) / (4e-4/(1.6e-7 + 4e-6) + 2500)
        let expect = (0.04 - 7.0e-7 / 4.0e-3) / (4.0e-4 / (1.6e-7 + 4.0e-6) + 2500.0);
        assert_relative_eq!(a, expect, max_relative = 1e-14);
        assert_relative_eq!(a, 1.534e-5, max_relative = 1e-3);
    }

    #[test]
    fn amplitude_integrates_to_asymptote() {
        // midpoint rule on the velocity out to 1e6 s
        let r = ReferenceTrajectory::new(paper()).unwrap();
        let (n, horizon) = (2_000_000, 1.0e6);
        let h = horizon / n as f64;
        let integral: f64 = (0..n).map(|i| r.velocity((i as f64 + 0.5) * h)).sum::<f64>() * h;
        assert!((0.11 + integral - 0.15).abs() < 1e-5);
        assert!((r.position(1.0e6) - 0.15).abs() < 1e-5);
    }

    #[test]
    fn vanishing_amplitude_rejected() {
        let mut p = paper();
        p.s_bar = p.s_r0 + p.v_min / p.delta2;
        let err = amplitude(&p).unwrap_err();
        assert!(err.to_string().contains("amplitude"));
    }

    #[test]
    fn amplitude_linear_in_numerator() {
        let p = paper();
        let a1 = amplitude(&p).unwrap();
        let mut q = p;
        q.s_bar = p.s_r0 + p.v_min / p.delta2 + 2.0 * (p.s_bar - p.s_r0 - p.v_min / p.delta2);
        assert_relative_eq!(amplitude(&q).unwrap(), 2.0 * a1, max_relative = 1e-12);
    }

    #[test]
    fn initial_values() {
        let r = ReferenceTrajectory::new(paper()).unwrap();
        let a = r.amplitude();
        assert_eq!(r.position(0.0), 0.11);
        assert_relative_eq!(r.velocity(0.0), 2.0 * a + 7.0e-7, max_relative = 1e-14);
        assert_relative_eq!(r.velocity(0.0), 3.138e-5, max_relative = 1e-3);
        // forward difference of the position
        let h = 1e-3;
        assert_relative_eq!(
            (r.position(h) - r.position(0.0)) / h,
            r.velocity(0.0),
            max_relative = 1e-5
        );

        let acc = r.acceleration(0.0);
        assert_relative_eq!(acc, -2.0 * a * 4.0e-4 - 7.0e-7 * 4.0e-3, max_relative = 1e-12);
        assert_relative_eq!(acc, -1.507e-8, max_relative = 1e-3);
        let h = 0.1;
        let t = 5.0;
        let fd = (r.position(t + h) - 2.0 * r.position(t) + r.position(t - h)) / (h * h);
        assert_relative_eq!(fd, r.acceleration(t), max_relative = 1e-6);
    }

    #[test]
    fn velocity_matches_central_difference() {
        let r = ReferenceTrajectory::new(paper()).unwrap();
        let h = 1e-2;
        for i in 1..=60 {
            let t = 100.0 * i as f64;
            let fd = (r.position(t + h) - r.position(t - h)) / (2.0 * h);
            assert_relative_eq!(fd, r.velocity(t), max_relative = 1e-5);
        }
    }

    #[test]
    fn jet_matches_pointwise_derivatives() {
        let r = ReferenceTrajectory::new(paper()).unwrap();
        let jet = r.derivative_jet(700.0, 2, 6);
        for m in 0..=6 {
            assert_relative_eq!(
                jet.derivative_value(m).unwrap(),
                r.derivative(700.0, m + 2),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn assumption4_paper_passes() {
        let r = ReferenceTrajectory::new(paper()).unwrap();
        let rep = check_assumption4(&r, 0.2, 1.0e5, 10_000);
        assert!(rep.passed());
        assert!(rep.min_velocity >= 0.0);
    }

    #[test]
    fn assumption4_constant_reference_is_marginal() {
        let r = ReferenceTrajectory::constant(0.11);
        let rep = check_assumption4(&r, 0.2, 1.0e4, 100);
        assert!(rep.passed());
        assert_eq!(rep.min_velocity, 0.0);
    }

    #[test]
    fn assumption4_limit_at_length_fails() {
        let r = ReferenceTrajectory::new(paper()).unwrap();
        let rep = check_assumption4(&r, 0.15, 1.0e4, 100);
        assert!(rep.initial_positive && rep.velocity_nonnegative);
        assert!(!rep.limit_below_length);
    }

    #[test]
    fn gevrey_degenerate_for_constant() {
        let r = ReferenceTrajectory::constant(0.11);
        let cert = estimate_gevrey(&r, 2.0, 10, 100).unwrap();
        assert!(cert.degenerate);
        assert_eq!(cert.magnitude, f64::EPSILON);
    }

    #[test]
    fn gevrey_paper_certificate_revalidates() {
        let r = ReferenceTrajectory::new(paper()).unwrap();
        let cert = estimate_gevrey(&r, 2.0, 10, 1000).unwrap();
        assert_eq!(cert.violations, 0);
        assert_eq!(cert.samples, 1000);
        assert!(!cert.degenerate && !cert.reduced);
        assert_relative_eq!(cert.magnitude, r.velocity(0.0), max_relative = 1e-12);
    }

    #[test]
    fn gevrey_of_decaying_exponential() {
        let delta = 3.0e-3;
        let p = ReferenceParams {
            omega: 1.0,
            delta1: 1.0,
            delta2: delta,
            v_min: 1.0,
            s_r0: 0.1,
            s_bar: 0.0,
        };
        let r = ReferenceTrajectory::with_amplitude(p, 0.0).unwrap();
        let cert = estimate_gevrey(&r, 1.0, 10, 1000).unwrap();
        assert!(cert.scale * delta >= 0.9);
        assert_eq!(cert.violations, 0);
    }

    #[test]
    fn gevrey_rejects_bad_exponent() {
        let r = ReferenceTrajectory::new(paper()).unwrap();
        assert!(estimate_gevrey(&r, 2.5, 10, 100).is_err());
        assert!(estimate_gevrey(&r, 2.0, 1, 100).is_err());
    }

    #[test]
    fn sample_grid_shape() {
        let ts = gevrey_sample_times(12_500.0, 1000);
        assert_eq!(ts.len(), 1000);
        assert_eq!(ts[0], 0.0);
        assert_relative_eq!(ts[1], 1.25, max_relative = 1e-12);
        assert_relative_eq!(*ts.last().unwrap(), 12_500.0, max_relative = 1e-12);
    }
}
