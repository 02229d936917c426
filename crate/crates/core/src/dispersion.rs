//! Lorentzian dispersion of the intracavity medium and the closed-form
//! cavity response derived from it: group index, pulling factor, the
//! analytic pulling-factor extrema and the bifurcation threshold.
//!
//! All frequencies are detunings (Hz) from a declared reference, which is
//! the line centre `f_m` for a single-line medium. Absolute optical
//! frequencies enter only through `f_0·∂n/∂f` and the threshold formula.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Default floor on `|n_g|` below which the pulling factor is reported as a pole.
pub const DEFAULT_POLE_FLOOR: f64 = 1e-12;

/// Largest tolerated relative error of the geometric `p_tot ≈ p_e + p_d`.
pub const PATH_APPROXIMATION_LIMIT: f64 = 1e-4;

/// One Lorentzian resonance: `n − 1 = ε γ Δ / (Δ² + γ²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonanceLine {
    /// Dimensionless resonance strength. Positive for gain/transmission lines.
    pub epsilon: f64,
    /// Resonance half-width, Hz.
    pub gamma_hz: f64,
    /// Medium resonance frequency, Hz.
    pub f_m_hz: f64,
}

impl ResonanceLine {
    pub fn new(epsilon: f64, gamma_hz: f64, f_m_hz: f64) -> Result<Self> {
        ensure_finite("epsilon", epsilon)?;
        if !(gamma_hz.is_finite() && gamma_hz > 0.0) {
            return Err(Error::InvalidArgument(format!("gamma must be > 0, got {gamma_hz}")));
        }
        if !(f_m_hz.is_finite() && f_m_hz > 0.0) {
            return Err(Error::InvalidArgument(format!("f_m must be > 0, got {f_m_hz}")));
        }
        Ok(Self { epsilon, gamma_hz, f_m_hz })
    }

    /// `n − 1` contributed by this line at `detuning` from its own centre.
    #[inline]
    pub fn index_offset(&self, detuning: f64) -> f64 {
        let g = self.gamma_hz;
        self.epsilon * g * detuning / (detuning * detuning + g * g)
    }

    /// `∂n/∂f` contributed by this line, per Hz.
    #[inline]
    pub fn index_slope(&self, detuning: f64) -> f64 {
        let g = self.gamma_hz;
        let g2 = g * g;
        let d2 = detuning * detuning;
        let den = d2 + g2;
        self.epsilon * g * (g2 - d2) / (den * den)
    }

    /// Same line with a different strength.
    pub fn with_epsilon(&self, epsilon: f64) -> Self {
        Self { epsilon, ..*self }
    }
}

/// Sum of Lorentzian lines. Detunings passed to the evaluation methods are
/// offsets from `reference_hz`; each line sees `detuning − (f_m − reference)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediumModel {
    lines: Vec<ResonanceLine>,
    reference_hz: f64,
}

impl MediumModel {
    pub fn single(line: ResonanceLine) -> Self {
        Self {
            reference_hz: line.f_m_hz,
            lines: vec![line],
        }
    }

    pub fn new(lines: Vec<ResonanceLine>, reference_hz: f64) -> Result<Self> {
        if lines.is_empty() {
            return Err(Error::InvalidArgument("medium needs at least one line".into()));
        }
        if !(reference_hz.is_finite() && reference_hz > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "reference frequency must be > 0, got {reference_hz}"
            )));
        }
        for l in &lines {
            ResonanceLine::new(l.epsilon, l.gamma_hz, l.f_m_hz)?;
        }
        Ok(Self { lines, reference_hz })
    }

    pub fn lines(&self) -> &[ResonanceLine] {
        &self.lines
    }

    pub fn reference_hz(&self) -> f64 {
        self.reference_hz
    }

    pub fn single_line(&self) -> Result<&ResonanceLine> {
        match self.lines.as_slice() {
            [line] => Ok(line),
            other => Err(Error::NotSingleLine(other.len())),
        }
    }

    /// Offset of line `i`'s centre from the reference, Hz.
    pub fn line_center(&self, i: usize) -> f64 {
        self.lines[i].f_m_hz - self.reference_hz
    }

    /// Line with the largest peak index excursion `|ε|/2`.
    pub fn dominant_line(&self) -> (usize, &ResonanceLine) {
        self.lines
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.epsilon.abs().total_cmp(&b.1.epsilon.abs()))
            .expect("medium has at least one line")
    }

    /// Upper bound on `|n − 1|` over all frequencies.
    pub fn max_index_offset(&self) -> f64 {
        self.lines.iter().map(|l| l.epsilon.abs() / 2.0).sum()
    }

    /// `n − 1`, evaluated without forming `n` so no precision is lost.
    #[inline]
    pub fn index_offset(&self, detuning: f64) -> f64 {
        self.lines
            .iter()
            .map(|l| l.index_offset(detuning - (l.f_m_hz - self.reference_hz)))
            .sum()
    }

    #[inline]
    pub fn index_slope(&self, detuning: f64) -> f64 {
        self.lines
            .iter()
            .map(|l| l.index_slope(detuning - (l.f_m_hz - self.reference_hz)))
            .sum()
    }

    pub fn is_empty_medium(&self) -> bool {
        self.lines.iter().all(|l| l.epsilon == 0.0)
    }
}

/// Round-trip geometry of the cavity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CavityGeometry {
    /// Empty (non-dispersive) path, m.
    pub p_e_m: f64,
    /// Dispersive element length, m.
    pub p_d_m: f64,
    /// Reference resonant frequency `f_0`, Hz.
    pub f0_hz: f64,
}

impl CavityGeometry {
    pub fn new(p_e_m: f64, p_d_m: f64, f0_hz: f64) -> Result<Self> {
        if !(p_e_m.is_finite() && p_e_m >= 0.0) {
            return Err(Error::InvalidGeometry(format!("p_e must be >= 0, got {p_e_m}")));
        }
        if !(p_d_m.is_finite() && p_d_m > 0.0) {
            return Err(Error::InvalidGeometry(format!("p_d must be > 0, got {p_d_m}")));
        }
        if !(f0_hz.is_finite() && f0_hz > 0.0) {
            return Err(Error::InvalidGeometry(format!("f_0 must be > 0, got {f0_hz}")));
        }
        Ok(Self { p_e_m, p_d_m, f0_hz })
    }

    /// Geometry from the total round-trip path and the dispersive length.
    pub fn from_total(p_tot_m: f64, p_d_m: f64, f0_hz: f64) -> Result<Self> {
        if !(p_tot_m.is_finite() && p_tot_m >= p_d_m) {
            return Err(Error::InvalidGeometry(format!(
                "p_tot ({p_tot_m}) must be finite and >= p_d ({p_d_m})"
            )));
        }
        Self::new(p_tot_m - p_d_m, p_d_m, f0_hz)
    }

    /// Geometric total path `p_e + p_d`, used in place of `p_e + n·p_d`.
    pub fn p_tot(&self) -> f64 {
        self.p_e_m + self.p_d_m
    }

    /// Optical round-trip path `p_e + n·p_d`.
    pub fn optical_path(&self, n: f64) -> f64 {
        self.p_e_m + self.p_d_m * n
    }

    /// `K = f_0·p_d/p_tot`, Hz. Converts index offsets into frequency shifts.
    pub fn coupling_hz(&self) -> f64 {
        self.f0_hz * self.p_d_m / self.p_tot()
    }

    /// Worst-case relative error of the geometric total path for `medium`.
    pub fn path_approximation_error(&self, medium: &MediumModel) -> f64 {
        self.p_d_m * medium.max_index_offset() / self.p_tot()
    }

    pub fn check_path_approximation(&self, medium: &MediumModel) -> Result<()> {
        let err = self.path_approximation_error(medium);
        if err < PATH_APPROXIMATION_LIMIT {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "medium too strong for the geometric path approximation (relative error {err:e})"
            )))
        }
    }
}

/// Pulling factor together with the quantities it was built from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PullingFigure {
    pub pf: f64,
    pub n: f64,
    pub n_g: f64,
    pub detuning_hz: f64,
}

pub fn index_of_refraction(medium: &MediumModel, detuning: f64) -> Result<f64> {
    ensure_finite("detuning", detuning)?;
    Ok(1.0 + medium.index_offset(detuning))
}

pub fn index_derivative(medium: &MediumModel, detuning: f64) -> Result<f64> {
    ensure_finite("detuning", detuning)?;
    Ok(medium.index_slope(detuning))
}

/// `n_g = n + (n·p_d/p_tot)·f_0·∂n/∂f`. Negative under strong negative dispersion.
pub fn group_index(cavity: &CavityGeometry, medium: &MediumModel, detuning: f64) -> Result<f64> {
    ensure_finite("detuning", detuning)?;
    let p_tot = cavity.p_tot();
    if p_tot <= 0.0 {
        return Err(Error::InvalidGeometry("p_tot must be > 0".into()));
    }
    let n = 1.0 + medium.index_offset(detuning);
    let slope = medium.index_slope(detuning);
    Ok(n + n * cavity.p_d_m / p_tot * cavity.f0_hz * slope)
}

pub fn pulling_factor(
    cavity: &CavityGeometry,
    medium: &MediumModel,
    detuning: f64,
) -> Result<PullingFigure> {
    pulling_factor_with_floor(cavity, medium, detuning, DEFAULT_POLE_FLOOR)
}

pub fn pulling_factor_with_floor(
    cavity: &CavityGeometry,
    medium: &MediumModel,
    detuning: f64,
    floor: f64,
) -> Result<PullingFigure> {
    let n = index_of_refraction(medium, detuning)?;
    let n_g = group_index(cavity, medium, detuning)?;
    if n_g.abs() < floor {
        return Err(Error::Pole {
            detuning_hz: detuning,
            group_index: n_g,
        });
    }
    Ok(PullingFigure {
        pf: n / n_g,
        n,
        n_g,
        detuning_hz: detuning,
    })
}

/// `ε_th = (8γ/f_m)·(p_tot/p_d)`.
pub fn epsilon_threshold(cavity: &CavityGeometry, line: &ResonanceLine) -> Result<f64> {
    if !(cavity.p_d_m > 0.0) || !(line.f_m_hz > 0.0) {
        return Err(Error::InvalidGeometry("p_d and f_m must be > 0".into()));
    }
    Ok(8.0 * line.gamma_hz / line.f_m_hz * (cavity.p_tot() / cavity.p_d_m))
}

/// Maximum pulling factor, or a marker that the response bifurcates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PfMax {
    Finite(f64),
    Bifurcating,
}

impl PfMax {
    pub fn value(&self) -> Option<f64> {
        match *self {
            PfMax::Finite(v) => Some(v),
            PfMax::Bifurcating => None,
        }
    }

    /// Finite value, or `+∞` for a bifurcating response.
    pub fn or_infinity(&self) -> f64 {
        self.value().unwrap_or(f64::INFINITY)
    }

    pub fn is_bifurcating(&self) -> bool {
        matches!(self, PfMax::Bifurcating)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfExtrema {
    pub pf_max: PfMax,
    pub pf_min: f64,
    /// `pf_max` is reached at `±` this detuning.
    pub detuning_at_max_hz: f64,
    pub detuning_at_min_hz: f64,
    pub epsilon_threshold: f64,
    /// `ε/ε_th`.
    pub strength_ratio: f64,
}

/// Analytic extrema of the pulling factor for a single gain line,
/// first order in `n − 1`.
pub fn pf_extrema(cavity: &CavityGeometry, line: &ResonanceLine) -> Result<PfExtrema> {
    if line.epsilon < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "pf extrema need epsilon >= 0, got {}",
            line.epsilon
        )));
    }
    let eps_th = epsilon_threshold(cavity, line)?;
    let ratio = line.epsilon / eps_th;
    if (1.0 - ratio).abs() < 1e-12 {
        return Err(Error::Threshold);
    }
    let pf_max = if ratio > 1.0 {
        PfMax::Bifurcating
    } else {
        PfMax::Finite(1.0 / (1.0 - ratio))
    };
    Ok(PfExtrema {
        pf_max,
        pf_min: 1.0 / (1.0 + 8.0 * ratio),
        detuning_at_max_hz: 3f64.sqrt() * line.gamma_hz,
        detuning_at_min_hz: 0.0,
        epsilon_threshold: eps_th,
        strength_ratio: ratio,
    })
}
