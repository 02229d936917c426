use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{FitModel, FitReport, MeasurementSeries, MIN_POLYNOMIAL_POINTS};
use crate::error::{Error, Result};

const DEGREE: usize = 5;

/// Degree-5 polynomial in `t = (Δf_e − center)/half_span`, `t ∈ [−1, 1]`
/// over the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialFit {
    pub center_hz: f64,
    pub half_span_hz: f64,
    /// Coefficients of `t^k`, Hz.
    pub scaled_coefficients: [f64; DEGREE + 1],
    /// Coefficients of `Δf_e^k`, Hz per Hz^k.
    pub raw_coefficients: [f64; DEGREE + 1],
}

impl PolynomialFit {
    fn t(&self, delta_f_e: f64) -> f64 {
        (delta_f_e - self.center_hz) / self.half_span_hz
    }

    pub fn value(&self, delta_f_e: f64) -> f64 {
        let t = self.t(delta_f_e);
        self.scaled_coefficients.iter().rev().fold(0.0, |acc, c| acc * t + c)
    }

    /// `dΔf_d/dΔf_e`, from the coefficients directly.
    pub fn derivative(&self, delta_f_e: f64) -> f64 {
        let t = self.t(delta_f_e);
        let mut acc = 0.0;
        for k in (1..=DEGREE).rev() {
            acc = acc * t + k as f64 * self.scaled_coefficients[k];
        }
        acc / self.half_span_hz
    }

    /// Points in `[lo, hi]` where the derivative changes sign, ascending.
    pub fn stationary_points(&self, lo: f64, hi: f64) -> Vec<f64> {
        const N: usize = 4096;
        let mut out = Vec::new();
        let at = |i: usize| lo + (hi - lo) * i as f64 / N as f64;
        let mut prev = (lo, self.derivative(lo));
        for i in 1..=N {
            let x = at(i);
            let d = self.derivative(x);
            if (prev.1 < 0.0) != (d < 0.0) {
                let (mut a, mut b, fa) = (prev.0, x, prev.1);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    if m <= a || m >= b {
                        break;
                    }
                    if (self.derivative(m) < 0.0) == (fa < 0.0) {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                out.push(0.5 * (a + b));
            }
            prev = (x, d);
        }
        out
    }
}

/// `C(n, k)` for small arguments.
fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Weighted least-squares quintic via Householder QR on the rescaled Vandermonde matrix.
pub fn fit_polynomial5(data: &MeasurementSeries) -> Result<FitReport> {
    let n = data.len();
    if n < MIN_POLYNOMIAL_POINTS {
        return Err(Error::InsufficientData {
            required: MIN_POLYNOMIAL_POINTS,
            got: n,
        });
    }
    let pts = data.points();
    let mut distinct: Vec<f64> = pts.iter().filter(|p| p.weight > 0.0).map(|p| p.delta_f_e_hz).collect();
    distinct.dedup();
    if distinct.len() <= DEGREE {
        return Err(Error::Conditioning(format!(
            "only {} distinct weighted abscissae for {} coefficients",
            distinct.len(),
            DEGREE + 1
        )));
    }

    let lo = pts[0].delta_f_e_hz;
    let hi = pts[n - 1].delta_f_e_hz;
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);

    let mut a = DMatrix::zeros(n, DEGREE + 1);
    let mut b = DVector::zeros(n);
    for (i, p) in pts.iter().enumerate() {
        let w = p.weight.sqrt();
        let t = (p.delta_f_e_hz - center) / half;
        let mut pow = 1.0;
        for k in 0..=DEGREE {
            a[(i, k)] = w * pow;
            pow *= t;
        }
        b[i] = w * p.delta_f_d_hz;
    }

    let qr = a.qr();
    let r = qr.r();
    let rmax = (0..=DEGREE).map(|k| r[(k, k)].abs()).fold(0.0, f64::max);
    if (0..=DEGREE).any(|k| r[(k, k)].abs() <= 1e-12 * rmax) {
        return Err(Error::Conditioning("rank-deficient design matrix".into()));
    }
    let qtb = qr.q().transpose() * &b;
    let coef = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::Conditioning("singular triangular factor".into()))?;

    let mut scaled = [0.0; DEGREE + 1];
    scaled.copy_from_slice(coef.as_slice());
    // Expand Σ a_k ((x − c)/h)^k into powers of x.
    let mut raw = [0.0; DEGREE + 1];
    for (k, a_k) in scaled.iter().enumerate() {
        let lead = a_k / half.powi(k as i32);
        for (j, slot) in raw.iter_mut().enumerate().take(k + 1) {
            *slot += lead * binomial(k, j) * (-center).powi((k - j) as i32);
        }
    }

    let fit = PolynomialFit {
        center_hz: center,
        half_span_hz: half,
        scaled_coefficients: scaled,
        raw_coefficients: raw,
    };
    let residuals: Vec<f64> = pts.iter().map(|p| p.delta_f_d_hz - fit.value(p.delta_f_e_hz)).collect();
    let rss = pts.iter().zip(&residuals).map(|(p, r)| p.weight * r * r).sum();
    Ok(FitReport {
        model: FitModel::Polynomial5(fit),
        rss,
        residuals,
        iterations: 1,
        converged: true,
        warnings: Vec::new(),
        notes: Vec::new(),
    })
}
