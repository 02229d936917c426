//! Smoothed residual bootstrap for the single-line fit.
//!
//! Each replicate resamples the base-fit residuals with replacement, adds
//! Gaussian kernel noise, rebuilds `Δf_d` on the fitted curve and refits.
//! Intervals are percentiles of the replicate distribution. Replicate `k`
//! draws from stream `k` of a ChaCha generator keyed by the seed, so results
//! do not depend on how replicates are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::CavityGeometry;
use crate::error::{Error, Result};
use crate::fit::{fit_lorentzian, FitReport, LorentzianParams, MeasurementSeries};

pub const METHOD: &str = "residual bootstrap + gaussian kernel (silverman bandwidth), percentile intervals";

/// Largest tolerated share of failed replicate fits.
pub const MAX_FAILURE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub replicates: usize,
    /// Two-sided interval coverage; also the one-sided level of the pf_max bound.
    pub confidence: f64,
    /// Kernel standard deviation, Hz. `None` selects Silverman's rule.
    pub kernel_bandwidth_hz: Option<f64>,
    pub seed: u64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replicates: 1000,
            confidence: 0.90,
            kernel_bandwidth_hz: None,
            seed: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates < 50 {
            return Err(Error::InvalidArgument(format!(
                "need at least 50 replicates, got {}",
                self.replicates
            )));
        }
        check_confidence(self.confidence)?;
        if let Some(h) = self.kernel_bandwidth_hz {
            if !(h.is_finite() && h >= 0.0) {
                return Err(Error::InvalidArgument(format!("bad kernel bandwidth {h}")));
            }
        }
        Ok(())
    }
}

fn check_confidence(c: f64) -> Result<()> {
    if c > 0.5 && c < 0.999 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("confidence must be in (0.5, 0.999), got {c}")))
    }
}

/// Silverman's rule of thumb for a Gaussian kernel.
pub fn silverman_bandwidth(sd: f64, n: usize) -> f64 {
    1.06 * sd * (n as f64).powf(-0.2)
}

fn sample_sd(v: &[f64]) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    (v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Linear-interpolation quantile of sorted data; tolerates `+∞` entries.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    match sorted.len() {
        0 => f64::NAN,
        1 => sorted[0],
        n => {
            let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            let a = sorted[i];
            let b = sorted[(i + 1).min(n - 1)];
            if frac == 0.0 || a == b {
                a
            } else if b.is_infinite() {
                b
            } else {
                a + frac * (b - a)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "ext_float")]
    pub lower: f64,
    #[serde(with = "ext_float")]
    pub point: f64,
    #[serde(with = "ext_float")]
    pub upper: f64,
}

impl Interval {
    fn percentile(values: &[f64], confidence: f64) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let tail = (1.0 - confidence) / 2.0;
        Self {
            lower: quantile(&v, tail),
            point: quantile(&v, 0.5),
            upper: quantile(&v, 1.0 - tail),
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }

    pub fn contains_interval(&self, other: &Interval) -> bool {
        self.lower <= other.lower && other.upper <= self.upper
    }
}

/// Derived quantities of every successful replicate, in replicate order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReplicateSamples {
    pub index: Vec<usize>,
    /// `+∞` for replicates past the bifurcation threshold.
    #[serde(with = "ext_float::vec")]
    pub pf_max: Vec<f64>,
    pub pf_min: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub gamma_hz: Vec<f64>,
    pub strength_ratio: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Intervals {
    pub confidence: f64,
    pub pf_max: Interval,
    pub pf_min: Interval,
    pub epsilon: Interval,
    pub gamma_hz: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub method: String,
    pub config: BootstrapConfig,
    pub base: LorentzianParams,
    pub kernel_bandwidth_hz: f64,
    pub residual_sd_hz: f64,
    pub intervals: Intervals,
    pub replicates: usize,
    pub replicate_success_count: usize,
    /// Share of successful replicates with ε > ε_th.
    pub bifurcation_fraction: f64,
    pub samples: ReplicateSamples,
}

impl BootstrapReport {
    /// Intervals of the same replicate set at another confidence level.
    pub fn intervals_at(&self, confidence: f64) -> Result<Intervals> {
        check_confidence(confidence)?;
        Ok(intervals_from(&self.samples, confidence))
    }
}

fn intervals_from(s: &ReplicateSamples, confidence: f64) -> Intervals {
    Intervals {
        confidence,
        pf_max: Interval::percentile(&s.pf_max, confidence),
        pf_min: Interval::percentile(&s.pf_min, confidence),
        epsilon: Interval::percentile(&s.epsilon, confidence),
        gamma_hz: Interval::percentile(&s.gamma_hz, confidence),
    }
}

struct Replicate {
    pf_max: f64,
    pf_min: f64,
    epsilon: f64,
    gamma_hz: f64,
    strength_ratio: f64,
}

pub fn smoothed_bootstrap(
    data: &MeasurementSeries,
    cavity: &CavityGeometry,
    base: &FitReport,
    cfg: &BootstrapConfig,
) -> Result<BootstrapReport> {
    cfg.validate()?;
    let fit = base
        .lorentzian()
        .ok_or_else(|| Error::InvalidArgument("bootstrap needs a single-line fit report".into()))?;
    if !base.converged {
        return Err(Error::InvalidArgument("base fit did not converge".into()));
    }
    if base.residuals.len() != data.len() {
        return Err(Error::InvalidArgument(
            "base report residuals do not match the data".into(),
        ));
    }

    let n = data.len();
    let residuals = &base.residuals;
    let fitted: Vec<f64> = data
        .points()
        .iter()
        .zip(residuals)
        .map(|(p, r)| p.delta_f_d_hz - r)
        .collect();
    let residual_sd = sample_sd(residuals);
    let bandwidth = cfg
        .kernel_bandwidth_hz
        .unwrap_or_else(|| silverman_bandwidth(residual_sd, n));
    let init = fit.params;

    let outcomes: Vec<Option<Replicate>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(k as u64);
            let ys: Vec<f64> = fitted
                .iter()
                .map(|f| {
                    let r = residuals[rng.random_range(0..n)];
                    let z: f64 = rng.sample(StandardNormal);
                    f + r + bandwidth * z
                })
                .collect();
            let rep = fit_lorentzian(&data.with_ordinates(&ys), cavity, Some(init)).ok()?;
            let l = rep.lorentzian()?;
            Some(Replicate {
                pf_max: l.derived.pf_max.or_infinity(),
                pf_min: l.derived.pf_min,
                epsilon: l.params.epsilon,
                gamma_hz: l.params.gamma_hz,
                strength_ratio: l.derived.strength_ratio,
            })
        })
        .collect();

    let mut samples = ReplicateSamples::default();
    for (k, o) in outcomes.into_iter().enumerate() {
        if let Some(r) = o {
            samples.index.push(k);
            samples.pf_max.push(r.pf_max);
            samples.pf_min.push(r.pf_min);
            samples.epsilon.push(r.epsilon);
            samples.gamma_hz.push(r.gamma_hz);
            samples.strength_ratio.push(r.strength_ratio);
        }
    }
    let successes = samples.index.len();
    let bifurcating = samples.pf_max.iter().filter(|v| v.is_infinite()).count();
    let report = BootstrapReport {
        method: METHOD.to_string(),
        config: *cfg,
        base: init,
        kernel_bandwidth_hz: bandwidth,
        residual_sd_hz: residual_sd,
        intervals: intervals_from(&samples, cfg.confidence),
        replicates: cfg.replicates,
        replicate_success_count: successes,
        bifurcation_fraction: if successes > 0 {
            bifurcating as f64 / successes as f64
        } else {
            0.0
        },
        samples,
    };
    let failed = cfg.replicates - successes;
    if failed as f64 > MAX_FAILURE_FRACTION * cfg.replicates as f64 {
        return Err(Error::UnstableBootstrap {
            failed,
            replicates: cfg.replicates,
            partial: Box::new(report),
        });
    }
    Ok(report)
}

/// One-sided lower confidence bound on pf_max.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PfMaxBound {
    /// `+∞` when every replicate bifurcates.
    #[serde(with = "ext_float")]
    pub lower: f64,
    pub confidence: f64,
    /// More than `1 − confidence` of replicates bifurcate, so no finite upper bound exists.
    pub upper_unbounded: bool,
}

pub fn pf_max_lower_bound(report: &BootstrapReport) -> PfMaxBound {
    let c = report.config.confidence;
    let mut v = report.samples.pf_max.clone();
    v.sort_by(f64::total_cmp);
    let lower = if v.is_empty() {
        f64::INFINITY
    } else {
        quantile(&v, 1.0 - c)
    };
    PfMaxBound {
        lower,
        confidence: c,
        upper_unbounded: report.bifurcation_fraction > 1.0 - c,
    }
}

/// JSON has no infinities; non-finite values travel as strings.
pub mod ext_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else if v.is_nan() {
            s.serialize_str("nan")
        } else if *v > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn decode<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("not a number: {other}"))),
            },
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        decode(Repr::deserialize(d)?)
    }

    pub mod vec {
        use serde::ser::SerializeSeq;
        use serde::{Deserialize, Deserializer, Serializer};

        struct Item(f64);

        impl serde::Serialize for Item {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                super::serialize(&self.0, s)
            }
        }

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let mut seq = s.serialize_seq(Some(v.len()))?;
            for x in v {
                seq.serialize_element(&Item(*x))?;
            }
            seq.end()
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<super::Repr>::deserialize(d)?
                .into_iter()
                .map(super::decode)
                .collect()
        }
    }
}
