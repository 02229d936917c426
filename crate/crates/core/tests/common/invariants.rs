//! Property checks shared by the `invariants` test file and the acceptance
//! runner. Each check drives a deterministic proptest runner and returns
//! the first counterexample as an error string.

use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};

use pulling::dispersion::{
    group_index, index_derivative, index_of_refraction, pf_extrema, pulling_factor, MediumModel, ResonanceLine,
};
use pulling::fit::{fit_lorentzian, fit_polynomial5, local_pf, LorentzianParams, Measurement, MeasurementSeries};
use pulling::solver::SweepDirection;
use pulling::uncertainty::{silverman_bandwidth, smoothed_bootstrap, BootstrapConfig};

use super::*;

pub type Check = fn(u32) -> Result<(), String>;

/// Every check with a default case count, in a stable order.
pub const ALL: &[(&str, Check, u32)] = &[
    ("odd symmetry", odd_symmetry, 256),
    ("derivative consistency", derivative_consistency, 16),
    ("extrema consistency", extrema_consistency, 64),
    ("asymptotic unity", asymptotic_unity, 64),
    ("empty-cavity identity", empty_cavity_identity, 256),
    ("root validity", root_validity, 64),
    ("root-count law", root_count_law, 24),
    ("sweep derivative agreement", sweep_derivative_agreement, 12),
    ("hysteresis orientation", hysteresis_orientation, 16),
    ("up/down sweep symmetry", sweep_symmetry, 12),
    ("fit optimality", fit_optimality, 8),
    ("weight duplication", weight_duplication, 8),
    ("shift equivariance", shift_equivariance, 8),
    ("polynomial pf", polynomial_pf, 32),
    ("bootstrap determinism", bootstrap_determinism, 3),
    ("monotone confidence and ordering", monotone_confidence, 3),
    ("bandwidth sanity", bandwidth_sanity, 256),
];

fn runner(cases: u32) -> TestRunner {
    TestRunner::new_with_rng(
        Config {
            cases,
            failure_persistence: None,
            ..Config::default()
        },
        TestRng::deterministic_rng(RngAlgorithm::ChaCha),
    )
}

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String> {
    runner(cases).run(&strategy, test).map_err(|e| e.to_string())
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

pub fn odd_symmetry(cases: u32) -> Result<(), String> {
    run(cases, (-1e-4f64..1e-4, 1e4f64..1e9, -100.0f64..100.0), |(eps, gamma, u)| {
        let m = MediumModel::single(ResonanceLine::new(eps, gamma, f_m()).unwrap());
        let x = u * gamma;
        let a = index_of_refraction(&m, x).unwrap() - 1.0;
        let b = index_of_refraction(&m, -x).unwrap() - 1.0;
        prop_assert!((a + b).abs() <= 4.0 * f64::EPSILON, "n(+x)-1 = {a}, n(-x)-1 = {b}");
        Ok(())
    })
}

/// Richardson-extrapolated central difference, step scaled to the line width.
fn fd_derivative(f: impl Fn(f64) -> f64, x: f64, scale: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let h = 0.02 * scale;
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

pub fn derivative_consistency(cases: u32) -> Result<(), String> {
    run(cases, (0.1f64..3.0, 1e6f64..5e7), |(ratio, gamma)| {
        let eps = ratio * eps_th(gamma);
        let m = MediumModel::single(ResonanceLine::new(eps, gamma, f_m()).unwrap());
        let peak = eps / gamma;
        for x in linspace(-10.0 * gamma, 10.0 * gamma, 1000) {
            let a = index_derivative(&m, x).unwrap();
            let fd = fd_derivative(|y| index_of_refraction(&m, y).unwrap(), x, gamma);
            // The derivative passes through zero at ±γ; a floor far below
            // its peak keeps the comparison relative elsewhere.
            let err = (a - fd).abs() / a.abs().max(1e-4 * peak);
            if err > 1e-6 {
                return Err(fail(format!("x = {x}: analytic {a}, fd {fd}, rel {err}")));
            }
        }
        Ok(())
    })
}

pub fn extrema_consistency(cases: u32) -> Result<(), String> {
    run(cases, (prop::sample::select(vec![0.1, 0.5, 0.9]), 1e6f64..5e7), |(ratio, gamma)| {
        let l = ResonanceLine::new(ratio * eps_th(gamma), gamma, f_m()).unwrap();
        let m = MediumModel::single(l);
        let ex = pf_extrema(&cavity(), &l).unwrap();
        let at = |x: f64| pulling_factor(&cavity(), &m, x).unwrap().pf;
        let pf_max = ex.pf_max.value().unwrap();
        for x in [3f64.sqrt() * gamma, -(3f64.sqrt()) * gamma] {
            prop_assert!(rel_err(at(x), pf_max) < 1e-4, "pf({x}) = {} vs {pf_max}", at(x));
        }
        prop_assert!(rel_err(at(0.0), ex.pf_min) < 1e-4, "pf(0) = {} vs {}", at(0.0), ex.pf_min);
        Ok(())
    })
}

pub fn asymptotic_unity(cases: u32) -> Result<(), String> {
    run(cases, (1e5f64..1e8, prop::bool::ANY), |(gamma, neg)| {
        let m = MediumModel::single(ResonanceLine::new(eps_th(gamma), gamma, f_m()).unwrap());
        let x = if neg { -1e3 * gamma } else { 1e3 * gamma };
        let pf = pulling_factor(&cavity(), &m, x).unwrap().pf;
        prop_assert!((pf - 1.0).abs() < 1e-3, "pf at 1e3 gamma = {pf}");
        Ok(())
    })
}

pub fn empty_cavity_identity(cases: u32) -> Result<(), String> {
    run(cases, (1e3f64..1e9, -1e10f64..1e10), |(gamma, x)| {
        let m = MediumModel::single(ResonanceLine::new(0.0, gamma, f_m()).unwrap());
        prop_assert_eq!(index_of_refraction(&m, x).unwrap(), 1.0);
        prop_assert_eq!(group_index(&cavity(), &m, x).unwrap(), 1.0);
        prop_assert_eq!(pulling_factor(&cavity(), &m, x).unwrap().pf, 1.0);
        Ok(())
    })
}

pub fn root_validity(cases: u32) -> Result<(), String> {
    run(cases, (0.1f64..3.0, -15.0f64..15.0), |(ratio, u)| {
        let eq = equation(ratio);
        let o = Oracle::new(ratio, GAMMA);
        let e = u * GAMMA;
        let roots = eq.solve_all_roots(e, eq.enclosing_window(e)).map_err(|e| fail(e.to_string()))?;
        prop_assert!(!roots.is_empty());
        for x in roots {
            let r = (o.g(x) - e).abs();
            prop_assert!(r <= 1e-6 * GAMMA, "residual {r} Hz at root {x}");
        }
        Ok(())
    })
}

/// Fold interval in `Δf_e` (positive side), from the oracle's critical points.
fn oracle_fold_interval(o: &Oracle) -> Option<(f64, f64)> {
    let cp = o.critical_points(12.0 * o.gamma, 200_000);
    let pos: Vec<f64> = cp.into_iter().filter(|x| *x > 0.0).collect();
    match pos.as_slice() {
        [a, b] => {
            let (ga, gb) = (o.g(*a), o.g(*b));
            Some((ga.min(gb), ga.max(gb)))
        }
        _ => None,
    }
}

pub fn root_count_law(cases: u32) -> Result<(), String> {
    let below = run(cases, 0.05f64..0.999, |ratio| {
        let eq = equation(ratio);
        for e in linspace(-15.0 * GAMMA, 15.0 * GAMMA, 100) {
            let n = eq.solve_all_roots(e, eq.enclosing_window(e)).map_err(|e| fail(e.to_string()))?.len();
            prop_assert_eq!(n, 1, "ratio {} at e = {}", ratio, e);
        }
        Ok(())
    });
    below?;
    run(cases, 1.05f64..3.0, |ratio| {
        let eq = equation(ratio);
        let o = Oracle::new(ratio, GAMMA);
        let (lo, hi) = oracle_fold_interval(&o).ok_or_else(|| fail(format!("oracle found no folds at {ratio}")))?;
        // The grid spans the region containing the fold interval.
        let grid = linspace(lo - (hi - lo), hi + (hi - lo), 100);
        let max = grid
            .iter()
            .map(|&e| eq.solve_all_roots(e, eq.enclosing_window(e)).map(|r| r.len()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| fail(e.to_string()))?
            .into_iter()
            .max()
            .unwrap();
        prop_assert_eq!(max, 3, "ratio {}", ratio);
        Ok(())
    })
}

pub fn sweep_derivative_agreement(cases: u32) -> Result<(), String> {
    run(cases, (0.0f64..0.9, prop::bool::ANY), |(ratio, down)| {
        let dir = if down { SweepDirection::Down } else { SweepDirection::Up };
        let curve = equation(ratio)
            .sweep(-10.0 * GAMMA, 10.0 * GAMMA, 10_001, dir)
            .map_err(|e| fail(e.to_string()))?;
        prop_assert!(curve.jumps.is_empty());
        let e: Vec<f64> = curve.samples.iter().map(|s| s.delta_f_e_hz).collect();
        let d: Vec<f64> = curve.samples.iter().map(|s| s.delta_f_d_hz).collect();
        for (i, fd) in centered_slopes(&e, &d) {
            let pf = curve.samples[i].pf;
            prop_assert!(rel_err(fd, pf) < 1e-3, "ratio {} sample {}: fd {} vs pf {}", ratio, i, fd, pf);
        }
        Ok(())
    })
}

pub fn hysteresis_orientation(cases: u32) -> Result<(), String> {
    run(cases, 1.05f64..3.0, |ratio| {
        let eq = equation(ratio);
        let up = eq.sweep(-15.0 * GAMMA, 15.0 * GAMMA, 3001, SweepDirection::Up).map_err(|e| fail(e.to_string()))?;
        let down = eq.sweep(-15.0 * GAMMA, 15.0 * GAMMA, 3001, SweepDirection::Down).map_err(|e| fail(e.to_string()))?;
        prop_assert_eq!(up.jumps.len(), 2, "ratio {}", ratio);
        prop_assert_eq!(down.jumps.len(), 2, "ratio {}", ratio);
        let mut ue: Vec<f64> = up.jumps.iter().map(|j| j.delta_f_e_hz).collect();
        let mut de: Vec<f64> = down.jumps.iter().map(|j| j.delta_f_e_hz).collect();
        ue.sort_by(f64::total_cmp);
        de.sort_by(f64::total_cmp);
        for (u, d) in ue.iter().zip(&de) {
            prop_assert!(u > d, "up jump at {} not above down jump at {}", u, d);
        }
        Ok(())
    })
}

pub fn sweep_symmetry(cases: u32) -> Result<(), String> {
    run(cases, (0.0f64..3.0, 5.0f64..15.0), |(ratio, span)| {
        let eq = equation(ratio);
        let a = span * GAMMA;
        let up = eq.sweep(-a, a, 2001, SweepDirection::Up).map_err(|e| fail(e.to_string()))?;
        let down = eq.sweep(-a, a, 2001, SweepDirection::Down).map_err(|e| fail(e.to_string()))?;
        prop_assert_eq!(up.samples.len(), down.samples.len());
        for (u, d) in up.samples.iter().zip(&down.samples) {
            prop_assert!((u.delta_f_e_hz + d.delta_f_e_hz).abs() <= 1e-6 * GAMMA);
            prop_assert!(
                (u.delta_f_d_hz + d.delta_f_d_hz).abs() <= 1e-6 * GAMMA,
                "ratio {}: up ({}, {}) vs down ({}, {})",
                ratio,
                u.delta_f_e_hz,
                u.delta_f_d_hz,
                d.delta_f_e_hz,
                d.delta_f_d_hz
            );
        }
        Ok(())
    })
}

fn noisy(ratio: f64, seed: u64) -> MeasurementSeries {
    synthetic(ratio, 200, 1.5e6, 0.3e6, SIGMA, seed)
}

fn params_vec(p: &LorentzianParams) -> [f64; 4] {
    [p.epsilon, p.gamma_hz, p.center_offset_hz, p.baseline_offset_hz]
}

fn rss_at(data: &MeasurementSeries, p: &LorentzianParams) -> f64 {
    let eq = p.equation(&cavity()).unwrap();
    data.points()
        .iter()
        .map(|m| {
            let x = eq.branch_root(m.delta_f_e_hz - p.center_offset_hz, data.sweep).unwrap();
            let r = m.delta_f_d_hz - (x + p.center_offset_hz + p.baseline_offset_hz);
            m.weight * r * r
        })
        .sum()
}

pub fn fit_optimality(cases: u32) -> Result<(), String> {
    run(cases, (0.2f64..0.8, any::<u64>()), |(ratio, seed)| {
        let data = noisy(ratio, seed);
        let rep = fit_lorentzian(&data, &cavity(), None).map_err(|e| fail(e.to_string()))?;
        let best = rep.lorentzian().unwrap().params;
        let base = rss_at(&data, &best);
        prop_assert!(rel_err(base, rep.rss) < 1e-9, "reported rss {} vs recomputed {}", rep.rss, base);
        for k in 0..4 {
            for sign in [-1.0, 1.0] {
                let mut v = params_vec(&best);
                v[k] *= 1.0 + sign * 0.01;
                let p = LorentzianParams {
                    epsilon: v[0],
                    gamma_hz: v[1],
                    center_offset_hz: v[2],
                    baseline_offset_hz: v[3],
                };
                let r = rss_at(&data, &p);
                prop_assert!(r >= base * (1.0 - 1e-12), "param {} x{}: rss {} < {}", k, 1.0 + sign * 0.01, r, base);
            }
        }
        Ok(())
    })
}

pub fn weight_duplication(cases: u32) -> Result<(), String> {
    run(cases, (0.2f64..0.8, any::<u64>(), 0usize..200), |(ratio, seed, k)| {
        let data = noisy(ratio, seed);
        let mut dup: Vec<Measurement> = data.points().to_vec();
        dup.push(data.points()[k].clone());
        let mut heavy: Vec<Measurement> = data.points().to_vec();
        heavy[k].weight = 2.0;
        let a = fit_lorentzian(&MeasurementSeries::new(dup, "dup").unwrap(), &cavity(), None)
            .map_err(|e| fail(e.to_string()))?;
        let b = fit_lorentzian(&MeasurementSeries::new(heavy, "heavy").unwrap(), &cavity(), None)
            .map_err(|e| fail(e.to_string()))?;
        let (pa, pb) = (params_vec(&a.lorentzian().unwrap().params), params_vec(&b.lorentzian().unwrap().params));
        for i in 0..4 {
            let scale = if i == 2 || i == 3 { pa[i].abs().max(GAMMA) } else { pa[i].abs() };
            prop_assert!((pa[i] - pb[i]).abs() <= 1e-10 * scale, "param {}: {} vs {}", i, pa[i], pb[i]);
        }
        Ok(())
    })
}

pub fn shift_equivariance(cases: u32) -> Result<(), String> {
    run(cases, (0.2f64..0.8, any::<u64>(), -5e7f64..5e7), |(ratio, seed, shift)| {
        let data = noisy(ratio, seed);
        let moved: Vec<Measurement> = data
            .points()
            .iter()
            .map(|m| Measurement::new(m.delta_f_e_hz + shift, m.delta_f_d_hz))
            .collect();
        let a = fit_lorentzian(&data, &cavity(), None).map_err(|e| fail(e.to_string()))?;
        let b = fit_lorentzian(&MeasurementSeries::new(moved, "moved").unwrap(), &cavity(), None)
            .map_err(|e| fail(e.to_string()))?;
        let (pa, pb) = (a.lorentzian().unwrap().params, b.lorentzian().unwrap().params);
        prop_assert!(rel_err(pb.epsilon, pa.epsilon) < 1e-8, "epsilon {} vs {}", pb.epsilon, pa.epsilon);
        prop_assert!(rel_err(pb.gamma_hz, pa.gamma_hz) < 1e-8, "gamma {} vs {}", pb.gamma_hz, pa.gamma_hz);
        prop_assert!(rel_err(b.rss, a.rss) < 1e-8, "rss {} vs {}", b.rss, a.rss);
        let dc = pb.center_offset_hz - pa.center_offset_hz;
        prop_assert!((dc - shift).abs() <= 1e-8 * GAMMA.max(shift.abs()), "center moved by {} for shift {}", dc, shift);
        // The abscissa shift also moves the baseline by −shift.
        let db = pb.baseline_offset_hz - pa.baseline_offset_hz;
        prop_assert!((db + shift).abs() <= 1e-8 * GAMMA.max(shift.abs()), "baseline moved by {} for shift {}", db, shift);
        Ok(())
    })
}

pub fn polynomial_pf(cases: u32) -> Result<(), String> {
    let coef = prop::array::uniform6(-1.0f64..1.0);
    run(cases, (coef, any::<u64>()), |(c, seed)| {
        let w = 6e7;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, SIGMA).unwrap();
        let pts = linspace(-w, w, 120)
            .into_iter()
            .map(|x| {
                let t = x / w;
                let y = w * c.iter().rev().fold(0.0, |acc, ck| acc * t + ck);
                Measurement::new(x, y + noise.sample(&mut rng))
            })
            .collect();
        let rep = fit_polynomial5(&MeasurementSeries::new(pts, "poly").unwrap()).map_err(|e| fail(e.to_string()))?;
        let p = rep.polynomial().unwrap();
        for x in linspace(-w, w, 37) {
            let t = (x - p.center_hz) / p.half_span_hz;
            let a = &p.scaled_coefficients;
            let by_hand = (a[1] + t * (2.0 * a[2] + t * (3.0 * a[3] + t * (4.0 * a[4] + t * 5.0 * a[5])))) / p.half_span_hz;
            let got = local_pf(&rep, x).map_err(|e| fail(e.to_string()))?;
            prop_assert!((got - by_hand).abs() <= 1e-12 * by_hand.abs().max(1.0), "{} vs {}", got, by_hand);
        }
        Ok(())
    })
}

fn small_bootstrap(seed: u64, data_seed: u64) -> Result<(pulling::uncertainty::BootstrapReport, pulling::uncertainty::BootstrapReport), TestCaseError> {
    let data = noisy(0.5, data_seed);
    let base = fit_lorentzian(&data, &cavity(), None).map_err(|e| fail(e.to_string()))?;
    let cfg = BootstrapConfig {
        replicates: 100,
        confidence: 0.9,
        kernel_bandwidth_hz: None,
        seed,
    };
    let a = smoothed_bootstrap(&data, &cavity(), &base, &cfg).map_err(|e| fail(e.to_string()))?;
    let b = smoothed_bootstrap(&data, &cavity(), &base, &cfg).map_err(|e| fail(e.to_string()))?;
    Ok((a, b))
}

pub fn bootstrap_determinism(cases: u32) -> Result<(), String> {
    run(cases, (any::<u64>(), any::<u64>()), |(seed, data_seed)| {
        let (a, b) = small_bootstrap(seed, data_seed)?;
        let ja = serde_json::to_string(&a).unwrap();
        let jb = serde_json::to_string(&b).unwrap();
        prop_assert!(ja == jb, "reports differ for seed {}", seed);
        for (x, y) in a.samples.pf_max.iter().zip(&b.samples.pf_max) {
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
        Ok(())
    })
}

pub fn monotone_confidence(cases: u32) -> Result<(), String> {
    run(cases, (any::<u64>(), any::<u64>()), |(seed, data_seed)| {
        let (a, _) = small_bootstrap(seed, data_seed)?;
        let i90 = a.intervals_at(0.90).map_err(|e| fail(e.to_string()))?;
        let i95 = a.intervals_at(0.95).map_err(|e| fail(e.to_string()))?;
        for (w, n) in [
            (i95.pf_max, i90.pf_max),
            (i95.pf_min, i90.pf_min),
            (i95.epsilon, i90.epsilon),
            (i95.gamma_hz, i90.gamma_hz),
        ] {
            prop_assert!(w.contains_interval(&n), "{:?} does not contain {:?}", w, n);
            for iv in [w, n] {
                prop_assert!(iv.lower <= iv.point && iv.point <= iv.upper, "unordered {:?}", iv);
            }
        }
        Ok(())
    })
}

pub fn bandwidth_sanity(cases: u32) -> Result<(), String> {
    run(cases, (2usize..100_000, 1e-3f64..1e9), |(n, sd)| {
        let h = silverman_bandwidth(sd, n);
        prop_assert!(h > 0.0 && h <= sd, "n = {}, sd = {}, h = {}", n, sd, h);
        Ok(())
    })
}
