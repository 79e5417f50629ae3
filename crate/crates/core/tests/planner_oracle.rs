//! Series coefficients against an exact exponential-sum representation.
//!
//! With `sdot_r = A (1 + cos wt) e^{-d1 t} + v e^{-d2 t}`, every `a_n` is a finite
//! sum `sum_k c_k e^{z_k t}` whose exponents are sums of the four base rates.
//! Exponents are keyed by their multiplicity vector so equal terms merge exactly.

use std::collections::BTreeMap;

use num_complex::Complex64;
use stefan_core::{PhysicalParams, Planner, ReferenceParams, ReferenceTrajectory};

type ExpSum = BTreeMap<[u8; 4], Complex64>;

struct Basis {
    rates: [Complex64; 4],
}

impl Basis {
    fn rate(&self, key: &[u8; 4]) -> Complex64 {
        key.iter().zip(&self.rates).map(|(&m, z)| z * m as f64).sum()
    }

    fn derivative(&self, f: &ExpSum) -> ExpSum {
        f.iter().map(|(k, c)| (*k, c * self.rate(k))).collect()
    }

    fn eval(&self, f: &ExpSum, t: f64) -> f64 {
        f.iter().map(|(k, c)| (c * (self.rate(k) * t).exp()).re).sum()
    }
}

fn product(a: &ExpSum, b: &ExpSum) -> ExpSum {
    let mut out = ExpSum::new();
    for (ka, ca) in a {
        for (kb, cb) in b {
            let key = [ka[0] + kb[0], ka[1] + kb[1], ka[2] + kb[2], ka[3] + kb[3]];
            *out.entry(key).or_default() += ca * cb;
        }
    }
    out
}

fn combine(a: &ExpSum, wa: f64, b: &ExpSum, wb: f64) -> ExpSum {
    let mut out: ExpSum = a.iter().map(|(k, c)| (*k, c * wa)).collect();
    for (k, c) in b {
        *out.entry(*k).or_default() += c * wb;
    }
    out
}

#[test]
fn coefficients_match_exponential_sums() {
    let p = ReferenceParams {
        omega: 0.002,
        delta1: 4.0e-4,
        delta2: 4.0e-3,
        v_min: 7.0e-7,
        s_r0: 0.11,
        s_bar: 0.15,
    };
    let reference = ReferenceTrajectory::new(p).unwrap();
    let a = reference.amplitude();
    let phys = PhysicalParams::<f64>::zinc();
    let basis = Basis {
        rates: [
            Complex64::new(-p.delta1, 0.0),
            Complex64::new(-p.delta1, p.omega),
            Complex64::new(-p.delta1, -p.omega),
            Complex64::new(-p.delta2, 0.0),
        ],
    };
    let sdot: ExpSum = [
        ([1, 0, 0, 0], Complex64::new(a, 0.0)),
        ([0, 1, 0, 0], Complex64::new(a / 2.0, 0.0)),
        ([0, 0, 1, 0], Complex64::new(a / 2.0, 0.0)),
        ([0, 0, 0, 1], Complex64::new(p.v_min, 0.0)),
    ]
    .into_iter()
    .collect();

    let n_max = 12;
    let mut coeffs = vec![ExpSum::new()];
    let sddot = basis.derivative(&sdot);
    coeffs.push(combine(
        &sddot,
        -phys.epsilon / phys.beta,
        &sdot,
        -1.0 / phys.beta,
    ));
    for n in 2..=n_max {
        let lagged = basis.derivative(&coeffs[n - 2]);
        let prod = product(&sdot, &coeffs[n - 1]);
        coeffs.push(combine(&lagged, 1.0 / phys.alpha, &prod, -1.0 / phys.alpha));
    }

    let planner = Planner::new(phys, reference, 30).unwrap();
    for &t in &[0.0, 137.0, 1360.0, 2900.0, 4500.0] {
        let plan = planner.plan_at(t).unwrap();
        for (n, exact) in coeffs.iter().enumerate().skip(1) {
            let want = basis.eval(exact, t);
            let got = plan.coefficient(n).value();
            assert!(
                (got - want).abs() <= 1e-9 * want.abs(),
                "a_{n}({t}): {got:e} vs {want:e}"
            );
            let want_dot = basis.eval(&basis.derivative(exact), t);
            let got_dot = plan.coefficient(n).derivative_value(1).unwrap();
            assert!(
                (got_dot - want_dot).abs() <= 1e-9 * want_dot.abs(),
                "a_{n}'({t}): {got_dot:e} vs {want_dot:e}"
            );
        }
    }
}
