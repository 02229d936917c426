//! Fitting measured lasing-frequency curves.
//!
//! Two models: the single-line dispersive response traced through the
//! resonance condition, and a degree-5 polynomial for curves the
//! single-line model cannot describe (e.g. the U-shaped, near-zero pulling
//! regime).

mod lm;
mod polynomial;

use serde::{Deserialize, Serialize};

pub use lm::{LmOutcome, LmSettings};
pub use polynomial::{fit_polynomial5, PolynomialFit};

use crate::dispersion::{epsilon_threshold, pf_extrema, CavityGeometry, MediumModel, PfMax, ResonanceLine};
use crate::error::{ensure_finite, Error, Result};
use crate::solver::{single_line_extreme_root, ResonanceEquation, SweepDirection};

pub const MIN_LORENTZIAN_POINTS: usize = 8;
pub const MIN_POLYNOMIAL_POINTS: usize = 7;

/// Parameter bounds for the single-line fit.
pub const GAMMA_BOUNDS_HZ: (f64, f64) = (1e3, 1e9);
pub const MAX_STRENGTH_RATIO: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub delta_f_e_hz: f64,
    pub delta_f_d_hz: f64,
    pub weight: f64,
    /// Values of unrecognised input columns, carried through untouched.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extra: Vec<String>,
}

impl Measurement {
    pub fn new(delta_f_e_hz: f64, delta_f_d_hz: f64) -> Self {
        Self {
            delta_f_e_hz,
            delta_f_d_hz,
            weight: 1.0,
            extra: Vec::new(),
        }
    }

    pub fn weighted(delta_f_e_hz: f64, delta_f_d_hz: f64, weight: f64) -> Self {
        Self {
            weight,
            ..Self::new(delta_f_e_hz, delta_f_d_hz)
        }
    }
}

/// Measured `(Δf_e, Δf_d)` points, sorted by `Δf_e`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSeries {
    points: Vec<Measurement>,
    pub metadata: String,
    /// Direction the data were recorded in; pins the branch inside hysteresis gaps.
    pub sweep: SweepDirection,
    /// Names of the extra columns, in the order of `Measurement::extra`.
    pub extra_columns: Vec<String>,
}

impl MeasurementSeries {
    pub fn new(mut points: Vec<Measurement>, metadata: impl Into<String>) -> Result<Self> {
        for (i, p) in points.iter().enumerate() {
            if !(p.delta_f_e_hz.is_finite() && p.delta_f_d_hz.is_finite()) {
                return Err(Error::InvalidArgument(format!("point {i} is not finite")));
            }
            if !(p.weight.is_finite() && p.weight >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "point {i} has invalid weight {}",
                    p.weight
                )));
            }
        }
        points.sort_by(|a, b| a.delta_f_e_hz.total_cmp(&b.delta_f_e_hz));
        Ok(Self {
            points,
            metadata: metadata.into(),
            sweep: SweepDirection::Up,
            extra_columns: Vec::new(),
        })
    }

    pub fn from_pairs(pairs: &[(f64, f64)]) -> Result<Self> {
        Self::new(
            pairs.iter().map(|&(e, d)| Measurement::new(e, d)).collect(),
            "",
        )
    }

    pub fn with_sweep(mut self, sweep: SweepDirection) -> Self {
        self.sweep = sweep;
        self
    }

    pub fn points(&self) -> &[Measurement] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn abscissae(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta_f_e_hz).collect()
    }

    pub fn ordinates(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.delta_f_d_hz).collect()
    }

    /// Same abscissae and weights, new ordinates.
    pub fn with_ordinates(&self, ys: &[f64]) -> Self {
        let mut out = self.clone();
        for (p, y) in out.points.iter_mut().zip(ys) {
            p.delta_f_d_hz = *y;
        }
        out
    }
}

/// Free parameters of the single-line response model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorentzianParams {
    pub epsilon: f64,
    pub gamma_hz: f64,
    /// Position of the medium resonance on the `Δf_e` axis.
    pub center_offset_hz: f64,
    /// Constant offset of the measured `Δf_d` axis.
    pub baseline_offset_hz: f64,
}

impl LorentzianParams {
    pub fn line(&self, cavity: &CavityGeometry) -> Result<ResonanceLine> {
        ResonanceLine::new(self.epsilon, self.gamma_hz, cavity.f0_hz)
    }

    pub fn strength_ratio(&self, cavity: &CavityGeometry) -> Result<f64> {
        let line = self.line(cavity)?;
        Ok(self.epsilon / epsilon_threshold(cavity, &line)?)
    }

    pub fn equation(&self, cavity: &CavityGeometry) -> Result<ResonanceEquation> {
        ResonanceEquation::new(*cavity, MediumModel::single(self.line(cavity)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedPf {
    pub strength_ratio: f64,
    pub epsilon_threshold: f64,
    pub pf_max: PfMax,
    pub pf_min: f64,
}

impl DerivedPf {
    fn from_params(params: &LorentzianParams, cavity: &CavityGeometry) -> Result<Self> {
        let line = params.line(cavity)?;
        let eps_th = epsilon_threshold(cavity, &line)?;
        let ratio = params.epsilon / eps_th;
        match pf_extrema(cavity, &line) {
            Ok(ex) => Ok(Self {
                strength_ratio: ratio,
                epsilon_threshold: eps_th,
                pf_max: ex.pf_max,
                pf_min: ex.pf_min,
            }),
            Err(Error::Threshold) => Ok(Self {
                strength_ratio: ratio,
                epsilon_threshold: eps_th,
                pf_max: PfMax::Bifurcating,
                pf_min: 1.0 / (1.0 + 8.0 * ratio),
            }),
            Err(e) => Err(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorentzianFit {
    pub params: LorentzianParams,
    pub cavity: CavityGeometry,
    pub direction: SweepDirection,
    pub derived: DerivedPf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model_kind", rename_all = "lowercase")]
pub enum FitModel {
    Lorentzian(LorentzianFit),
    Polynomial5(PolynomialFit),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: FitModel,
    /// Weighted residual sum of squares, Hz².
    pub rss: f64,
    /// `data − model` per point, Hz.
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
}

impl FitReport {
    pub fn lorentzian(&self) -> Option<&LorentzianFit> {
        match &self.model {
            FitModel::Lorentzian(l) => Some(l),
            FitModel::Polynomial5(_) => None,
        }
    }

    pub fn polynomial(&self) -> Option<&PolynomialFit> {
        match &self.model {
            FitModel::Polynomial5(p) => Some(p),
            FitModel::Lorentzian(_) => None,
        }
    }

    /// Model value at `Δf_e`.
    pub fn evaluate(&self, delta_f_e: f64) -> Result<f64> {
        match &self.model {
            FitModel::Lorentzian(l) => predict(&l.params, &l.cavity, delta_f_e, l.direction),
            FitModel::Polynomial5(p) => Ok(p.value(delta_f_e)),
        }
    }
}

/// Model `Δf_d` for one empty-cavity detuning, on the branch a monotone
/// sweep in `direction` would occupy.
pub fn predict(
    params: &LorentzianParams,
    cavity: &CavityGeometry,
    delta_f_e: f64,
    direction: SweepDirection,
) -> Result<f64> {
    ensure_finite("delta_f_e", delta_f_e)?;
    let eq = params.equation(cavity)?;
    let x = eq.branch_root(delta_f_e - params.center_offset_hz, direction)?;
    Ok(params.baseline_offset_hz + params.center_offset_hz + x)
}

/// Hot-path model: `ratio` is ε/ε_th, so `K·ε/γ = 8·ratio` when f_0 = f_m.
fn model_value(ratio: f64, gamma: f64, center: f64, baseline: f64, e: f64, dir: SweepDirection) -> f64 {
    let xi = single_line_extreme_root(8.0 * ratio, (e - center) / gamma, dir);
    baseline + center + xi * gamma
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Data-driven starting point. The dispersive deviation `Δf_d − Δf_e − b`
/// is odd about the line centre with extrema `±Kε/2` at `Δf_d = ∓γ`,
/// which sit `2γ + Kε` apart on the `Δf_e` axis.
pub fn initial_guess(data: &MeasurementSeries, cavity: &CavityGeometry) -> Result<LorentzianParams> {
    let pts = data.points();
    if pts.is_empty() {
        return Err(Error::InsufficientData {
            required: MIN_LORENTZIAN_POINTS,
            got: 0,
        });
    }
    let baseline = median(pts.iter().map(|p| p.delta_f_d_hz - p.delta_f_e_hz).collect());
    let dev: Vec<f64> = pts
        .iter()
        .map(|p| p.delta_f_d_hz - p.delta_f_e_hz - baseline)
        .collect();
    let (i_max, _) = dev
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let (i_min, _) = dev
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let span = pts[pts.len() - 1].delta_f_e_hz - pts[0].delta_f_e_hz;
    let amplitude = 0.5 * (dev[i_max] - dev[i_min]);
    let (e_max, e_min) = (pts[i_max].delta_f_e_hz, pts[i_min].delta_f_e_hz);
    let center = 0.5 * (e_max + e_min);
    let distance = (e_min - e_max).abs();

    let gamma = ((distance - 2.0 * amplitude) / 2.0)
        .max(span / 40.0)
        .clamp(GAMMA_BOUNDS_HZ.0, GAMMA_BOUNDS_HZ.1);
    // Gain lines put the positive lobe below the centre.
    let ratio = if e_max < e_min {
        (amplitude / (4.0 * gamma)).clamp(0.0, MAX_STRENGTH_RATIO)
    } else {
        0.01
    };
    let probe = ResonanceLine::new(0.0, gamma, cavity.f0_hz)?;
    Ok(LorentzianParams {
        epsilon: ratio * epsilon_threshold(cavity, &probe)?,
        gamma_hz: gamma,
        center_offset_hz: center,
        baseline_offset_hz: baseline,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct FitOptions {
    pub lm: LmSettings,
}

pub const LORENTZIAN_NOTE: &str =
    "free parameters (epsilon, gamma, center_offset, baseline_offset) and unit weights are a reconstruction";

pub fn fit_lorentzian(
    data: &MeasurementSeries,
    cavity: &CavityGeometry,
    init: Option<LorentzianParams>,
) -> Result<FitReport> {
    fit_lorentzian_with(data, cavity, init, &FitOptions::default())
}

pub fn fit_lorentzian_with(
    data: &MeasurementSeries,
    cavity: &CavityGeometry,
    init: Option<LorentzianParams>,
    options: &FitOptions,
) -> Result<FitReport> {
    if data.len() < MIN_LORENTZIAN_POINTS {
        return Err(Error::InsufficientData {
            required: MIN_LORENTZIAN_POINTS,
            got: data.len(),
        });
    }
    let ys = data.ordinates();
    if ys.iter().all(|y| *y == ys[0]) {
        return Err(Error::FlatData);
    }
    let init = match init {
        Some(p) => p,
        None => initial_guess(data, cavity)?,
    };
    let init_ratio = init.strength_ratio(cavity)?;

    // Internal vector: [ε/ε_th, γ/s, c/s, b/s] with s the initial width.
    let s = init.gamma_hz;
    let x0 = [
        init_ratio,
        init.gamma_hz / s,
        init.center_offset_hz / s,
        init.baseline_offset_hz / s,
    ];
    let span = (data.points()[data.len() - 1].delta_f_e_hz - data.points()[0].delta_f_e_hz).max(s);
    let scale = [1.0, 1.0, span / s, span / s];
    let lower = [0.0, GAMMA_BOUNDS_HZ.0 / s, f64::NEG_INFINITY, f64::NEG_INFINITY];
    let upper = [MAX_STRENGTH_RATIO, GAMMA_BOUNDS_HZ.1 / s, f64::INFINITY, f64::INFINITY];
    let dir = data.sweep;
    let sqrt_w: Vec<f64> = data.points().iter().map(|p| p.weight.sqrt()).collect();

    let residuals = |t: &[f64]| -> Result<Vec<f64>> {
        let (ratio, gamma, center, baseline) = (t[0], t[1] * s, t[2] * s, t[3] * s);
        Ok(data
            .points()
            .iter()
            .zip(&sqrt_w)
            .map(|(p, w)| {
                w * (p.delta_f_d_hz - model_value(ratio, gamma, center, baseline, p.delta_f_e_hz, dir)) / s
            })
            .collect())
    };
    let problem = lm::Problem {
        residuals,
        scale: &scale,
        lower: &lower,
        upper: &upper,
    };
    let out = problem.minimize(&x0, &options.lm)?;

    let gamma = out.params[1] * s;
    let probe = ResonanceLine::new(0.0, gamma, cavity.f0_hz)?;
    let params = LorentzianParams {
        epsilon: out.params[0] * epsilon_threshold(cavity, &probe)?,
        gamma_hz: gamma,
        center_offset_hz: out.params[2] * s,
        baseline_offset_hz: out.params[3] * s,
    };
    let residuals: Vec<f64> = data
        .points()
        .iter()
        .map(|p| {
            p.delta_f_d_hz
                - model_value(
                    out.params[0],
                    gamma,
                    params.center_offset_hz,
                    params.baseline_offset_hz,
                    p.delta_f_e_hz,
                    dir,
                )
        })
        .collect();
    let rss = data
        .points()
        .iter()
        .zip(&residuals)
        .map(|(p, r)| p.weight * r * r)
        .sum();

    let mut warnings = Vec::new();
    let names = ["strength ratio", "gamma"];
    for (i, name) in names.iter().enumerate() {
        if out.at_bound[i] {
            warnings.push(format!("{name} clamped at its bound"));
        }
    }
    let report = FitReport {
        model: FitModel::Lorentzian(LorentzianFit {
            params,
            cavity: *cavity,
            direction: dir,
            derived: DerivedPf::from_params(&params, cavity)?,
        }),
        rss,
        residuals,
        iterations: out.iterations,
        converged: out.converged,
        warnings,
        notes: vec![LORENTZIAN_NOTE.to_string()],
    };
    if !out.converged {
        return Err(Error::NotConverged {
            iterations: out.iterations,
            best: Box::new(report),
        });
    }
    Ok(report)
}

/// `dΔf_d/dΔf_e` of the fitted curve.
pub fn local_pf(report: &FitReport, delta_f_e: f64) -> Result<f64> {
    ensure_finite("delta_f_e", delta_f_e)?;
    match &report.model {
        FitModel::Polynomial5(p) => Ok(p.derivative(delta_f_e)),
        FitModel::Lorentzian(l) => {
            let eq = l.params.equation(&l.cavity)?;
            let e = delta_f_e - l.params.center_offset_hz;
            // The sweep leaves its branch where G peaks (up) or dips (down).
            let tol = 1e-6 * l.params.gamma_hz;
            for fold in eq.fold_points()?.points {
                let ends_branch = match l.direction {
                    SweepDirection::Up => eq.slope(fold.delta_f_d_hz - tol) > 0.0,
                    SweepDirection::Down => eq.slope(fold.delta_f_d_hz + tol) > 0.0,
                };
                if ends_branch && (e - fold.delta_f_e_hz).abs() <= tol {
                    return Err(Error::UndefinedDerivative {
                        delta_f_e_hz: delta_f_e,
                    });
                }
            }
            let x = eq.branch_root(e, l.direction)?;
            let slope = eq.slope(x);
            if slope.abs() < 1e-6 {
                return Err(Error::UndefinedDerivative {
                    delta_f_e_hz: delta_f_e,
                });
            }
            Ok(1.0 / slope)
        }
    }
}
