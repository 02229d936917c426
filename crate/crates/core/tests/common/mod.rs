//! Shared fixtures and independent reference computations for the
//! integration tests. Nothing here calls into the solver or the fitter.

#![allow(dead_code)]

pub mod invariants;

use pulling::dispersion::{CavityGeometry, MediumModel, ResonanceLine, SPEED_OF_LIGHT};
use pulling::fit::{Measurement, MeasurementSeries};
use pulling::solver::{ResonanceEquation, SweepDirection};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub const GAMMA: f64 = 6.0e6;
pub const P_TOT: f64 = 0.80;
pub const P_D: f64 = 0.022;
pub const SIGMA: f64 = 0.2e6;

/// Threshold strength for the reference cavity, evaluated by hand:
/// 8 · 6e6 / (299792458 / 795e-9) · 0.80 / 0.022.
pub const EPSILON_TH_REFERENCE: f64 = 4.628_656_681_004_175e-6;

pub fn f_m() -> f64 {
    SPEED_OF_LIGHT / 795e-9
}

pub fn cavity() -> CavityGeometry {
    CavityGeometry::from_total(P_TOT, P_D, f_m()).unwrap()
}

/// `8γ/f_m · p_tot/p_d`, written out independently of the library.
pub fn eps_th(gamma: f64) -> f64 {
    8.0 * gamma / f_m() * P_TOT / P_D
}

pub fn line(ratio: f64) -> ResonanceLine {
    ResonanceLine::new(ratio * eps_th(GAMMA), GAMMA, f_m()).unwrap()
}

pub fn equation(ratio: f64) -> ResonanceEquation {
    ResonanceEquation::new(cavity(), MediumModel::single(line(ratio))).unwrap()
}

/// Reference single-line model with `f_0 = f_m`.
#[derive(Debug, Clone, Copy)]
pub struct Oracle {
    pub epsilon: f64,
    pub gamma: f64,
    /// `f_0 · p_d / p_tot`.
    pub k: f64,
}

impl Oracle {
    pub fn new(ratio: f64, gamma: f64) -> Self {
        Self {
            epsilon: ratio * eps_th(gamma),
            gamma,
            k: f_m() * P_D / P_TOT,
        }
    }

    pub fn n_minus_1(&self, x: f64) -> f64 {
        self.epsilon * self.gamma * x / (x * x + self.gamma * self.gamma)
    }

    pub fn dn(&self, x: f64) -> f64 {
        let s = x * x + self.gamma * self.gamma;
        self.epsilon * self.gamma * (self.gamma * self.gamma - x * x) / (s * s)
    }

    /// Empty-cavity detuning that produces lasing detuning `x`.
    pub fn g(&self, x: f64) -> f64 {
        x + self.k * self.n_minus_1(x)
    }

    pub fn pf(&self, x: f64) -> f64 {
        1.0 / (1.0 + self.k * self.dn(x))
    }

    /// Every root of `g(x) = e`, by a dense sign scan of `g − e` plus bisection.
    pub fn roots(&self, e: f64, samples: usize) -> Vec<f64> {
        let half = self.k * self.epsilon.abs() / 2.0 + self.gamma;
        let (lo, hi) = (e - half, e + half);
        let f = |x: f64| self.g(x) - e;
        let mut out = Vec::new();
        let mut xa = lo;
        let mut fa = f(lo);
        for i in 1..=samples {
            let xb = lo + (hi - lo) * i as f64 / samples as f64;
            let fb = f(xb);
            if fa == 0.0 {
                out.push(xa);
            } else if fa * fb < 0.0 {
                out.push(bisect(&f, xa, xb));
            }
            xa = xb;
            fa = fb;
        }
        if fa == 0.0 {
            out.push(xa);
        }
        out
    }

    /// Critical points of `g` (where `g' = 0`), from a dense scan of `g'`.
    pub fn critical_points(&self, half_width: f64, samples: usize) -> Vec<f64> {
        let gp = |x: f64| 1.0 + self.k * self.dn(x);
        let mut out = Vec::new();
        let mut xa = -half_width;
        for i in 1..=samples {
            let xb = -half_width + 2.0 * half_width * i as f64 / samples as f64;
            if gp(xa) * gp(xb) < 0.0 {
                out.push(bisect(&gp, xa, xb));
            }
            xa = xb;
        }
        out
    }

    /// Single-valued response (strength below threshold) by bisection on the monotone `g`.
    pub fn monotone_response(&self, e: f64) -> f64 {
        let half = self.k * self.epsilon.abs() / 2.0 + self.gamma;
        bisect(&|x| self.g(x) - e, e - half, e + half)
    }
}

pub fn bisect(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if (f(m) < 0.0) == (fa < 0.0) {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Sub-threshold synthetic data built from the reference model, shifted by
/// `center` and `baseline`, with seeded Gaussian noise.
pub fn synthetic(ratio: f64, points: usize, center: f64, baseline: f64, sigma: f64, seed: u64) -> MeasurementSeries {
    assert!(ratio < 1.0);
    let o = Oracle::new(ratio, GAMMA);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma).unwrap();
    let pts = linspace(-10.0 * GAMMA, 10.0 * GAMMA, points)
        .into_iter()
        .map(|x| {
            let d = o.monotone_response(x) + center + baseline;
            let n = if sigma > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            Measurement::new(x + center, d + n)
        })
        .collect();
    MeasurementSeries::new(pts, format!("synthetic ratio={ratio} seed={seed}"))
        .unwrap()
        .with_sweep(SweepDirection::Up)
}

/// Centered finite-difference slopes of a curve at interior samples.
pub fn centered_slopes(e: &[f64], d: &[f64]) -> Vec<(usize, f64)> {
    (1..e.len() - 1)
        .map(|i| (i, (d[i + 1] - d[i - 1]) / (e[i + 1] - e[i - 1])))
        .collect()
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
