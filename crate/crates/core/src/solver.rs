//! Lasing-resonance condition in detuning coordinates.
//!
//! Differencing the dispersive resonance `f_d·(p_e + n·p_d) = m·c` against
//! the empty one `f_e·(p_e + p_d) = m·c` and linearising in `n − 1` gives
//!
//! ```text
//! G(x) = x + K·(n(x) − 1) = Δf_e,     K = f_0·p_d/p_tot
//! ```
//!
//! where `x = Δf_d`. The mode number drops out. `dΔf_d/dΔf_e = 1/G'(x)` is the
//! local pulling factor; where `G' < 0` the steady state is unphysical and a
//! swept laser jumps between branches instead.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dispersion::{pulling_factor, CavityGeometry, MediumModel, PullingFigure};
use crate::error::{ensure_finite, Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepDirection {
    #[default]
    Up,
    Down,
}

impl fmt::Display for SweepDirection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepDirection::Up => "up",
            SweepDirection::Down => "down",
        })
    }
}

impl FromStr for SweepDirection {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "up" => Ok(SweepDirection::Up),
            "down" => Ok(SweepDirection::Down),
            other => Err(Error::InvalidArgument(format!(
                "sweep direction must be up or down, got {other:?}"
            ))),
        }
    }
}

/// Tunable knobs of the root finder and the branch tracker.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Uniform bracketing grid across the search window.
    pub grid_points: usize,
    /// Root residual bound, in units of the dominant line width.
    pub residual_tolerance_gammas: f64,
    /// A tracked branch is lost if no admissible root lies within this radius.
    pub continuation_radius_gammas: f64,
    /// `|G'|` below this counts as a fold.
    pub fold_tolerance: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            grid_points: 2048,
            residual_tolerance_gammas: 1e-6,
            continuation_radius_gammas: 3.0,
            fold_tolerance: 1e-9,
        }
    }
}

/// Closed search interval on the `Δf_d` axis, Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        ensure_finite("window bound", lo)?;
        ensure_finite("window bound", hi)?;
        if !(hi > lo) {
            return Err(Error::InvalidArgument(format!("empty window [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn centered(center: f64, width: f64) -> Result<Self> {
        Self::new(center - width / 2.0, center + width / 2.0)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResonanceEquation {
    cavity: CavityGeometry,
    medium: MediumModel,
    coupling_hz: f64,
    config: SolverConfig,
}

impl ResonanceEquation {
    pub fn new(cavity: CavityGeometry, medium: MediumModel) -> Result<Self> {
        Self::with_config(cavity, medium, SolverConfig::default())
    }

    pub fn with_config(
        cavity: CavityGeometry,
        medium: MediumModel,
        config: SolverConfig,
    ) -> Result<Self> {
        cavity.check_path_approximation(&medium)?;
        if config.grid_points < 16 {
            return Err(Error::InvalidArgument("grid_points must be >= 16".into()));
        }
        Ok(Self {
            coupling_hz: cavity.coupling_hz(),
            cavity,
            medium,
            config,
        })
    }

    pub fn cavity(&self) -> &CavityGeometry {
        &self.cavity
    }

    pub fn medium(&self) -> &MediumModel {
        &self.medium
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    /// `K = f_0·p_d/p_tot`, Hz.
    pub fn coupling_hz(&self) -> f64 {
        self.coupling_hz
    }

    /// Width of the dominant line, Hz. Sets the solver's length scale.
    pub fn gamma_scale(&self) -> f64 {
        self.medium.dominant_line().1.gamma_hz
    }

    /// `G(x)`: the empty-cavity detuning that sustains lasing at `x`.
    #[inline]
    pub fn empty_detuning(&self, delta_f_d: f64) -> f64 {
        delta_f_d + self.coupling_hz * self.medium.index_offset(delta_f_d)
    }

    /// `G'(x)`, the reciprocal of the local pulling factor.
    #[inline]
    pub fn slope(&self, delta_f_d: f64) -> f64 {
        1.0 + self.coupling_hz * self.medium.index_slope(delta_f_d)
    }

    /// Default search window: 20 widths of the dominant line, centred on it.
    pub fn default_window(&self) -> Window {
        let (i, line) = self.medium.dominant_line();
        let c = self.medium.line_center(i);
        Window {
            lo: c - 10.0 * line.gamma_hz,
            hi: c + 10.0 * line.gamma_hz,
        }
    }

    /// Window guaranteed to contain every root for `delta_f_e`, since
    /// `|x − Δf_e| = K·|n − 1| ≤ K·Σ|ε|/2`.
    pub fn enclosing_window(&self, delta_f_e: f64) -> Window {
        let reach = self.coupling_hz * self.medium.max_index_offset() + self.gamma_scale();
        Window {
            lo: delta_f_e - reach,
            hi: delta_f_e + reach,
        }
    }

    fn residual_tolerance(&self) -> f64 {
        self.config.residual_tolerance_gammas * self.gamma_scale()
    }

    /// Zeros of `G'` inside the window, ascending.
    pub fn critical_points(&self, window: Window) -> Vec<f64> {
        if let Ok(line) = self.medium.single_line() {
            let c = self.medium.line_center(0);
            return single_line_critical_points(self.coupling_hz * line.epsilon / line.gamma_hz)
                .into_iter()
                .map(|xi| c + xi * line.gamma_hz)
                .filter(|x| *x > window.lo && *x < window.hi)
                .collect();
        }

        let grid = self.grid(window);
        let mut out = Vec::new();
        let mut prev = (grid[0], self.slope(grid[0]));
        for &x in &grid[1..] {
            let s = self.slope(x);
            if s == 0.0 {
                out.push(x);
            } else if prev.1 != 0.0 && (prev.1 < 0.0) != (s < 0.0) {
                out.push(bisect(|t| self.slope(t), prev.0, x, prev.1, 0.0));
            }
            prev = (x, s);
        }
        out
    }

    fn grid(&self, window: Window) -> Vec<f64> {
        let n = self.config.grid_points;
        let mut pts: Vec<f64> = (0..n)
            .map(|i| window.lo + window.width() * i as f64 / (n - 1) as f64)
            .collect();
        // Extra resolution around each line centre for wide windows.
        for (i, line) in self.medium.lines().iter().enumerate() {
            let c = self.medium.line_center(i);
            let (a, b) = (c - 20.0 * line.gamma_hz, c + 20.0 * line.gamma_hz);
            if b < window.lo || a > window.hi || window.width() <= 40.0 * line.gamma_hz {
                continue;
            }
            pts.extend((0..=512).map(|k| a + (b - a) * k as f64 / 512.0));
        }
        pts.retain(|x| *x >= window.lo && *x <= window.hi);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        pts
    }

    /// Index of the monotone piece of `G` that contains `x`.
    pub fn branch_id(&self, delta_f_d: f64, critical: &[f64]) -> u32 {
        critical.iter().filter(|c| **c < delta_f_d).count() as u32
    }

    /// Every solution of `G(x) = Δf_e` inside `window`, ascending.
    pub fn solve_all_roots(&self, delta_f_e: f64, window: Window) -> Result<Vec<f64>> {
        ensure_finite("delta_f_e", delta_f_e)?;
        let critical = self.critical_points(window);
        let mut knots = self.grid(window);
        knots.extend(critical.iter().copied());
        knots.sort_by(f64::total_cmp);
        knots.dedup();

        let f = |x: f64| self.empty_detuning(x) - delta_f_e;
        let tol = self.residual_tolerance();
        let mut roots: Vec<f64> = Vec::new();
        let mut prev = (knots[0], f(knots[0]));
        if prev.1 == 0.0 {
            roots.push(prev.0);
        }
        for &x in &knots[1..] {
            let fx = f(x);
            if fx == 0.0 {
                roots.push(x);
            } else if prev.1 != 0.0 && (prev.1 < 0.0) != (fx < 0.0) {
                let r = bisect(f, prev.0, x, prev.1, tol * 1e-3);
                roots.push(self.polish(r, delta_f_e, prev.0, x));
            }
            prev = (x, fx);
        }

        // A tangential root sits on a critical point without a sign change.
        for &c in &critical {
            if f(c).abs() < tol && !roots.iter().any(|r| (r - c).abs() < 1e3 * tol) {
                roots.push(c);
            }
        }

        roots.sort_by(f64::total_cmp);
        roots.dedup_by(|a, b| (*a - *b).abs() < tol * 1e-3);
        if roots.is_empty() {
            return Err(Error::NoSolution {
                delta_f_e_hz: delta_f_e,
                lo_hz: window.lo,
                hi_hz: window.hi,
            });
        }
        debug_assert!(roots.iter().all(|r| f(*r).abs() < tol));
        Ok(roots)
    }

    /// One safeguarded Newton step inside the final bracket.
    fn polish(&self, x: f64, delta_f_e: f64, lo: f64, hi: f64) -> f64 {
        let fx = self.empty_detuning(x) - delta_f_e;
        let d = self.slope(x);
        if d == 0.0 || !d.is_finite() {
            return x;
        }
        let cand = x - fx / d;
        if cand >= lo.min(hi) && cand <= hi.max(lo) {
            let fc = self.empty_detuning(cand) - delta_f_e;
            if fc.abs() < fx.abs() {
                return cand;
            }
        }
        x
    }

    /// Lasing detuning selected by a monotone sweep arriving from far away:
    /// the lowest root for up-sweeps, the highest for down-sweeps.
    pub fn branch_root(&self, delta_f_e: f64, direction: SweepDirection) -> Result<f64> {
        ensure_finite("delta_f_e", delta_f_e)?;
        if let Ok(line) = self.medium.single_line() {
            let c = self.medium.line_center(0);
            let g = line.gamma_hz;
            let kappa = self.coupling_hz * line.epsilon / g;
            let xi = single_line_extreme_root(kappa, (delta_f_e - c) / g, direction);
            return Ok(c + xi * g);
        }
        let roots = self.solve_all_roots(delta_f_e, self.enclosing_window(delta_f_e))?;
        Ok(match direction {
            SweepDirection::Up => roots[0],
            SweepDirection::Down => roots[roots.len() - 1],
        })
    }

    /// Local pulling factor `1/G'` at a lasing detuning.
    pub fn local_pf(&self, delta_f_d: f64) -> f64 {
        1.0 / self.slope(delta_f_d)
    }

    /// Detunings where `G' = 0`, i.e. where branches fold.
    pub fn fold_points(&self) -> Result<FoldStructure> {
        let line = self.medium.single_line()?;
        let g = line.gamma_hz;
        let c = self.medium.line_center(0);
        let kappa = self.coupling_hz * line.epsilon / g;
        let tol = self.config.fold_tolerance;

        let point = |xi: f64| {
            let x = c + xi * g;
            FoldPoint {
                delta_f_d_hz: x,
                delta_f_e_hz: self.empty_detuning(x),
            }
        };

        // Minimum of G' over the line: 1 − κ/8 at ξ² = 3 for κ > 0, 1 + κ at 0 for κ < 0.
        let (min_slope, xi_min) = if kappa >= 0.0 {
            (1.0 - kappa / 8.0, 3f64.sqrt())
        } else {
            (1.0 + kappa, 0.0)
        };
        if min_slope.abs() < tol {
            let mut points = vec![point(-xi_min)];
            if xi_min > 0.0 {
                points.push(point(xi_min));
            }
            return Ok(FoldStructure {
                kind: FoldKind::Degenerate,
                points,
            });
        }
        let points: Vec<FoldPoint> = single_line_critical_points(kappa)
            .into_iter()
            .map(point)
            .collect();
        Ok(FoldStructure {
            kind: if points.is_empty() {
                FoldKind::None
            } else {
                FoldKind::Folds
            },
            points,
        })
    }

    pub fn pf_profile(&self, detunings: &[f64]) -> Result<Vec<PullingFigure>> {
        detunings
            .iter()
            .map(|&x| pulling_factor(&self.cavity, &self.medium, x))
            .collect()
    }

    /// Continuation sweep of `Δf_e` over `[start, stop]` in `direction`.
    pub fn sweep(
        &self,
        start: f64,
        stop: f64,
        n_points: usize,
        direction: SweepDirection,
    ) -> Result<ResponseCurve> {
        ensure_finite("sweep start", start)?;
        ensure_finite("sweep stop", stop)?;
        if n_points < 2 {
            return Err(Error::InvalidArgument("sweep needs at least 2 points".into()));
        }
        if start == stop {
            return Err(Error::InvalidArgument("sweep start equals stop".into()));
        }
        let (lo, hi) = (start.min(stop), start.max(stop));
        let (from, to) = match direction {
            SweepDirection::Up => (lo, hi),
            SweepDirection::Down => (hi, lo),
        };
        let radius = self.config.continuation_radius_gammas * self.gamma_scale();
        let denom = (n_points - 1) as f64;
        // Branch ids count critical points of the whole response, so every
        // sample is labelled against the same set.
        let span = self.span_window(Window {
            lo: self.enclosing_window(lo).lo,
            hi: self.enclosing_window(hi).hi,
        });
        let branch_marks = self.critical_points(span);

        let mut samples: Vec<ResponseSample> = Vec::with_capacity(n_points);
        let mut jumps = Vec::new();
        for i in 0..n_points {
            let e = from + (to - from) * (i as f64 / denom);
            let window = self.enclosing_window(e);
            let roots = self.solve_all_roots(e, window)?;
            let admissible: Vec<f64> = {
                let stable: Vec<f64> = roots.iter().copied().filter(|x| self.slope(*x) > 0.0).collect();
                if stable.is_empty() {
                    roots.clone()
                } else {
                    stable
                }
            };

            let x = match samples.last() {
                None => match direction {
                    SweepDirection::Up => admissible[0],
                    SweepDirection::Down => admissible[admissible.len() - 1],
                },
                Some(prev) => {
                    let closest = nearest(&admissible, prev.delta_f_d_hz);
                    if (closest - prev.delta_f_d_hz).abs() <= radius {
                        closest
                    } else {
                        let ahead: Vec<f64> = admissible
                            .iter()
                            .copied()
                            .filter(|r| match direction {
                                SweepDirection::Up => *r > prev.delta_f_d_hz,
                                SweepDirection::Down => *r < prev.delta_f_d_hz,
                            })
                            .collect();
                        if ahead.is_empty() {
                            closest
                        } else {
                            nearest(&ahead, prev.delta_f_d_hz)
                        }
                    }
                }
            };

            let branch = self.branch_id(x, &branch_marks);
            if let Some(prev) = samples.last() {
                if branch != prev.branch_id
                    || (x - prev.delta_f_d_hz).abs() > radius
                {
                    jumps.push(Jump {
                        delta_f_e_hz: e,
                        from_branch: prev.branch_id,
                        to_branch: branch,
                        from_delta_f_d_hz: prev.delta_f_d_hz,
                        to_delta_f_d_hz: x,
                    });
                }
            }
            samples.push(ResponseSample {
                delta_f_e_hz: e,
                delta_f_d_hz: x,
                pf: self.local_pf(x),
                branch_id: branch,
            });
        }

        Ok(ResponseCurve {
            samples,
            jumps,
            direction,
            branch_policy: BRANCH_POLICY.to_string(),
        })
    }

    /// `window` widened to cover every critical point of every line.
    fn span_window(&self, window: Window) -> Window {
        let mut lo = window.lo;
        let mut hi = window.hi;
        for (i, line) in self.medium.lines().iter().enumerate() {
            let c = self.medium.line_center(i);
            let kappa = (self.coupling_hz * line.epsilon / line.gamma_hz).abs();
            let reach = (kappa.sqrt() + 4.0) * 4.0 * line.gamma_hz;
            lo = lo.min(c - reach);
            hi = hi.max(c + reach);
        }
        Window { lo, hi }
    }
}

pub const BRANCH_POLICY: &str =
    "nearest stable root; on branch loss jump to nearest stable root in sweep direction";

fn nearest(candidates: &[f64], target: f64) -> f64 {
    *candidates
        .iter()
        .min_by(|a, b| (*a - target).abs().total_cmp(&(*b - target).abs()))
        .expect("non-empty candidate list")
}

/// Bisection on a sign-changing bracket until narrower than `xtol`
/// (or floating point resolution).
fn bisect<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, mut fa: f64, xtol: f64) -> f64 {
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a.min(b) || m >= a.max(b) || (b - a).abs() <= xtol {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Critical points of `ξ + κ·ξ/(ξ²+1)`, in units of γ, ascending.
/// `G' = 0` reduces to `u² + (2 − κ)u + 1 + κ = 0` with `u = ξ²`.
fn single_line_critical_points(kappa: f64) -> Vec<f64> {
    let b = 2.0 - kappa;
    let c = 1.0 + kappa;
    let disc = b * b - 4.0 * c;
    if disc < 0.0 {
        return Vec::new();
    }
    let sq = disc.sqrt();
    // Stable quadratic roots.
    let q = -0.5 * (b + b.signum() * sq);
    let mut us = Vec::new();
    if q != 0.0 {
        us.push(q);
        us.push(c / q);
    } else {
        us.push(0.0);
    }
    let mut xs: Vec<f64> = us
        .into_iter()
        .filter(|u| *u > 0.0)
        .flat_map(|u| [-u.sqrt(), u.sqrt()])
        .collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// Extreme real root of `ξ + κξ/(ξ²+1) = η`, i.e. of the cubic
/// `ξ³ − ηξ² + (1+κ)ξ − η = 0`, Newton-polished on the original equation.
pub(crate) fn single_line_extreme_root(kappa: f64, eta: f64, direction: SweepDirection) -> f64 {
    let mut roots = cubic_real_roots(-eta, 1.0 + kappa, -eta);
    let g = |x: f64| x + kappa * x / (x * x + 1.0) - eta;
    let dg = |x: f64| {
        let u = x * x;
        1.0 + kappa * (1.0 - u) / ((1.0 + u) * (1.0 + u))
    };
    for r in roots.iter_mut() {
        for _ in 0..4 {
            let f = g(*r);
            let d = dg(*r);
            if f == 0.0 || d == 0.0 {
                break;
            }
            let cand = *r - f / d;
            if g(cand).abs() < f.abs() {
                *r = cand;
            } else {
                break;
            }
        }
    }
    match direction {
        SweepDirection::Up => roots.iter().copied().fold(f64::INFINITY, f64::min),
        SweepDirection::Down => roots.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    }
}

/// Real roots of the monic cubic `x³ + b x² + c x + d`.
fn cubic_real_roots(b: f64, c: f64, d: f64) -> Vec<f64> {
    let shift = b / 3.0;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if disc > 0.0 {
        let a = -(q.signum()) * (q.abs() / 2.0 + disc.sqrt()).cbrt();
        let t = if a != 0.0 { a - p / (3.0 * a) } else { 0.0 };
        vec![t - shift]
    } else if p == 0.0 {
        vec![-shift]
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - shift)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldKind {
    /// `G' > 0` everywhere: single-valued response.
    None,
    /// `min G' = 0` within tolerance: the threshold case.
    Degenerate,
    Folds,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldPoint {
    pub delta_f_d_hz: f64,
    pub delta_f_e_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldStructure {
    pub kind: FoldKind,
    /// Ascending in `Δf_d`.
    pub points: Vec<FoldPoint>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResponseSample {
    pub delta_f_e_hz: f64,
    pub delta_f_d_hz: f64,
    pub pf: f64,
    pub branch_id: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    /// First sample on the new branch.
    pub delta_f_e_hz: f64,
    pub from_branch: u32,
    pub to_branch: u32,
    pub from_delta_f_d_hz: f64,
    pub to_delta_f_d_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseCurve {
    pub samples: Vec<ResponseSample>,
    pub jumps: Vec<Jump>,
    pub direction: SweepDirection,
    pub branch_policy: String,
}

impl ResponseCurve {
    /// Index pairs `(i, i+1)` that straddle a jump.
    pub fn is_jump_step(&self, i: usize) -> bool {
        let e = self.samples[i + 1].delta_f_e_hz;
        self.jumps.iter().any(|j| j.delta_f_e_hz == e)
    }

    pub fn max_pf(&self) -> f64 {
        self.samples.iter().map(|s| s.pf).fold(f64::NEG_INFINITY, f64::max)
    }
}
