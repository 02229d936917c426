//! `pulling` command line.
//!
//! Every subcommand resolves its settings in three layers: built-in
//! defaults, an optional `key = value` config file (`--config`), then
//! flags. The resolved map is written into every output file.
//!
//! Exit codes: 0 success, 2 invalid input or config, 3 no lasing solution,
//! 4 fit did not converge, 5 unstable bootstrap.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::dispersion::{epsilon_threshold, pf_extrema, CavityGeometry, MediumModel, ResonanceLine, SPEED_OF_LIGHT};
use crate::error::{Error, Result};
use crate::fit::{
    fit_lorentzian, fit_polynomial5, local_pf, FitReport, Measurement, MeasurementSeries,
};
use crate::io::{self as wire, Provenance};
use crate::solver::{ResonanceEquation, SweepDirection};
use crate::uncertainty::{ext_float, pf_max_lower_bound, smoothed_bootstrap, BootstrapConfig, BootstrapReport, PfMaxBound};

pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const INVALID: i32 = 2;
    pub const NO_SOLUTION: i32 = 3;
    pub const NOT_CONVERGED: i32 = 4;
    pub const UNSTABLE_BOOTSTRAP: i32 = 5;
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NoSolution { .. } => exit::NO_SOLUTION,
        Error::NotConverged { .. } => exit::NOT_CONVERGED,
        Error::UnstableBootstrap { .. } => exit::UNSTABLE_BOOTSTRAP,
        _ => exit::INVALID,
    }
}

#[derive(Debug, Parser)]
#[command(name = "pulling", version, about = "Laser frequency response of a cavity with a dispersive medium")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sweep the empty-cavity detuning and write the lasing response curve.
    Scan(ScanArgs),
    /// Analytic pulling-factor extrema and bifurcation threshold.
    Extrema(CommonArgs),
    /// Fit a measured curve.
    Fit(FitArgs),
    /// Smoothed bootstrap confidence intervals for a single-line fit.
    Bootstrap(BootstrapArgs),
    /// Generate a synthetic measurement series.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    #[arg(long = "gamma-hz")]
    pub gamma_hz: Option<f64>,
    /// Absolute resonance strength.
    #[arg(long, conflicts_with = "epsilon_rel")]
    pub epsilon: Option<f64>,
    /// Resonance strength in units of the bifurcation threshold.
    #[arg(long = "epsilon-rel")]
    pub epsilon_rel: Option<f64>,
    #[arg(long = "fm-hz")]
    pub fm_hz: Option<f64>,
    #[arg(long = "p-tot-m")]
    pub p_tot_m: Option<f64>,
    #[arg(long = "p-d-m")]
    pub p_d_m: Option<f64>,
    #[arg(long = "from-hz", allow_hyphen_values = true)]
    pub from_hz: Option<f64>,
    #[arg(long = "to-hz", allow_hyphen_values = true)]
    pub to_hz: Option<f64>,
    #[arg(long)]
    pub points: Option<usize>,
    /// up | down
    #[arg(long)]
    pub direction: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// `key = value` file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Measurement CSV: delta_f_e_hz,delta_f_d_hz[,weight]
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// lorentzian | polynomial5
    #[arg(long)]
    pub model: Option<String>,
    /// Also write the fitted curve and its local pf as CSV.
    #[arg(long = "curve-out")]
    pub curve_out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BootstrapArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub replicates: Option<usize>,
    #[arg(long)]
    pub confidence: Option<f64>,
    /// Kernel bandwidth in Hz, or `auto`.
    #[arg(long = "bandwidth-hz")]
    pub bandwidth_hz: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long = "sigma-hz")]
    pub sigma_hz: Option<f64>,
    #[arg(long = "center-hz", allow_hyphen_values = true)]
    pub center_hz: Option<f64>,
    #[arg(long = "baseline-hz", allow_hyphen_values = true)]
    pub baseline_hz: Option<f64>,
}

/// Fully resolved settings; keys are the long flag names.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

impl RunConfig {
    fn resolve(
        defaults: &[(&str, String)],
        file: Option<&Path>,
        flags: Vec<(&'static str, Option<String>)>,
    ) -> Result<Self> {
        let mut values: BTreeMap<String, String> = defaults
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect();
        let known: Vec<&str> = flags.iter().map(|(k, _)| *k).collect();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)?;
            for (k, v) in parse_config_file(&text)? {
                if !known.contains(&k.as_str()) || k == "config" {
                    return Err(Error::InvalidArgument(format!("unknown config key {k:?}")));
                }
                values.insert(k, v);
            }
        }
        // Either strength flag overrides both strength keys from lower layers.
        if flags
            .iter()
            .any(|(k, v)| (*k == "epsilon" || *k == "epsilon-rel") && v.is_some())
        {
            values.remove("epsilon");
            values.remove("epsilon-rel");
        }
        for (k, v) in flags {
            if let Some(v) = v {
                values.insert(k.to_string(), v);
            }
        }
        values.remove("config");
        Ok(Self { values })
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|_| Error::InvalidArgument(format!("--{key}: cannot parse {v:?}")))
            })
            .transpose()
    }

    fn require<T: std::str::FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::InvalidArgument(format!("--{key} is required")))
    }

    fn f64(&self, key: &str) -> Result<f64> {
        let v: f64 = self.require(key)?;
        if !v.is_finite() {
            return Err(Error::InvalidArgument(format!("--{key} must be finite")));
        }
        Ok(v)
    }

    fn direction(&self) -> Result<SweepDirection> {
        self.raw("direction").unwrap_or("up").parse()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(PathBuf::from)
    }

    fn provenance(&self, command: &str) -> Provenance {
        Provenance::new(command, self.values.clone())
    }
}

/// `key = value` lines; blank lines and `#` comments are skipped, and one
/// level of matching quotes around a value is removed. Values are kept as
/// written so they echo back verbatim.
fn parse_config_file(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::InvalidArgument(format!(
                "config line {}: expected `key = value`",
                i + 1
            )));
        };
        let k = k.trim();
        let mut v = v.trim();
        for q in ['"', '\'']
        {
            if v.len() >= 2 && v.starts_with(q) && v.ends_with(q) {
                v = &v[1..v.len() - 1];
                break;
            }
        }
        if k.is_empty() {
            return Err(Error::InvalidArgument(format!("config line {}: empty key", i + 1)));
        }
        out.push((k.to_string(), v.to_string()));
    }
    Ok(out)
}

fn fmt_opt<T: ToString>(v: &Option<T>) -> Option<String> {
    v.as_ref().map(ToString::to_string)
}

impl CommonArgs {
    fn flag_pairs(&self) -> Vec<(&'static str, Option<String>)> {
        vec![
            ("gamma-hz", fmt_opt(&self.gamma_hz)),
            ("epsilon", fmt_opt(&self.epsilon)),
            ("epsilon-rel", fmt_opt(&self.epsilon_rel)),
            ("fm-hz", fmt_opt(&self.fm_hz)),
            ("p-tot-m", fmt_opt(&self.p_tot_m)),
            ("p-d-m", fmt_opt(&self.p_d_m)),
            ("from-hz", fmt_opt(&self.from_hz)),
            ("to-hz", fmt_opt(&self.to_hz)),
            ("points", fmt_opt(&self.points)),
            ("direction", self.direction.clone()),
            ("seed", fmt_opt(&self.seed)),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("config", None),
        ]
    }
}

const DEFAULT_GAMMA_HZ: f64 = 6.0e6;
const DEFAULT_WAVELENGTH_M: f64 = 795e-9;

fn base_defaults(points: usize) -> Vec<(&'static str, String)> {
    vec![
        ("gamma-hz", DEFAULT_GAMMA_HZ.to_string()),
        ("fm-hz", (SPEED_OF_LIGHT / DEFAULT_WAVELENGTH_M).to_string()),
        ("p-tot-m", "0.8".into()),
        ("p-d-m", "0.022".into()),
        ("points", points.to_string()),
        ("direction", "up".into()),
        ("seed", "0".into()),
    ]
}

/// Geometry and line resolved from a config; `f_0` is taken equal to `f_m`.
struct Physics {
    cavity: CavityGeometry,
    line: ResonanceLine,
    epsilon_threshold: f64,
}

impl Physics {
    fn from_config(cfg: &RunConfig) -> Result<Self> {
        let fm = cfg.f64("fm-hz")?;
        let gamma = cfg.f64("gamma-hz")?;
        let cavity = CavityGeometry::from_total(cfg.f64("p-tot-m")?, cfg.f64("p-d-m")?, fm)?;
        let probe = ResonanceLine::new(0.0, gamma, fm)?;
        let th = epsilon_threshold(&cavity, &probe)?;
        let epsilon = match (cfg.get::<f64>("epsilon")?, cfg.get::<f64>("epsilon-rel")?) {
            (Some(_), Some(_)) => {
                return Err(Error::InvalidArgument(
                    "give only one of --epsilon and --epsilon-rel".into(),
                ))
            }
            (Some(e), None) => e,
            (None, Some(r)) => r * th,
            (None, None) => 0.5 * th,
        };
        Ok(Self {
            cavity,
            line: probe.with_epsilon(epsilon),
            epsilon_threshold: th,
        })
    }

    fn equation(&self) -> Result<ResonanceEquation> {
        ResonanceEquation::new(self.cavity, MediumModel::single(self.line))
    }

    fn sweep_range(&self, cfg: &RunConfig) -> Result<(f64, f64)> {
        let g = self.line.gamma_hz;
        let from = cfg.get::<f64>("from-hz")?.unwrap_or(-10.0 * g);
        let to = cfg.get::<f64>("to-hz")?.unwrap_or(10.0 * g);
        Ok((from, to))
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn write_json_out<T: Serialize>(path: Option<&Path>, prov: &Provenance, body: &T) -> Result<()> {
    match path {
        Some(p) => wire::write_json(p, prov, body),
        None => {
            let mut w = io::stdout().lock();
            serde_json::to_writer_pretty(
                &mut w,
                &wire::Document {
                    provenance: prov.clone(),
                    body,
                },
            )?;
            writeln!(w)?;
            Ok(())
        }
    }
}

fn mhz(hz: f64) -> String {
    format!("{:.4} MHz", hz / 1e6)
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { exit::INVALID } else { exit::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => exit::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Scan(a) => cmd_scan(&a),
        Command::Extrema(a) => cmd_extrema(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Bootstrap(a) => cmd_bootstrap(&a),
        Command::Synth(a) => cmd_synth(&a),
    }
}

#[derive(Serialize)]
struct ScanMeta<'a> {
    cavity: &'a CavityGeometry,
    line: &'a ResonanceLine,
    epsilon_threshold: f64,
    strength_ratio: f64,
    direction: SweepDirection,
    branch_policy: &'a str,
    jumps: &'a [crate::solver::Jump],
    folds: Option<crate::solver::FoldStructure>,
}

pub fn cmd_scan(args: &ScanArgs) -> Result<()> {
    let c = &args.common;
    let cfg = RunConfig::resolve(&base_defaults(2001), c.config.as_deref(), c.flag_pairs())?;
    let phys = Physics::from_config(&cfg)?;
    let eq = phys.equation()?;
    let (from, to) = phys.sweep_range(&cfg)?;
    let curve = eq.sweep(from, to, cfg.require("points")?, cfg.direction()?)?;
    let prov = cfg.provenance("scan");
    let out = cfg.path("out");
    wire::write_curve(open_out(out.as_deref())?, &curve, Some(&prov))?;

    let meta = ScanMeta {
        cavity: &phys.cavity,
        line: &phys.line,
        epsilon_threshold: phys.epsilon_threshold,
        strength_ratio: phys.line.epsilon / phys.epsilon_threshold,
        direction: curve.direction,
        branch_policy: &curve.branch_policy,
        jumps: &curve.jumps,
        folds: eq.fold_points().ok(),
    };
    if let Some(p) = &out {
        wire::write_json(sidecar_path(p), &prov, &meta)?;
    }
    eprintln!(
        "scan: {} samples, {} jump(s), max pf {:.6}, eps/eps_th {:.6}",
        curve.samples.len(),
        curve.jumps.len(),
        curve.max_pf(),
        meta.strength_ratio
    );
    Ok(())
}

/// `curve.csv` → `curve.csv.meta.json`.
pub fn sidecar_path(p: &Path) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".meta.json");
    PathBuf::from(s)
}

#[derive(Debug, Serialize)]
struct ExtremaRecord {
    #[serde(with = "ext_float")]
    pf_max: f64,
    bifurcating: bool,
    pf_min: f64,
    detuning_at_max_hz: f64,
    detuning_at_min_hz: f64,
    epsilon: f64,
    epsilon_threshold: f64,
    strength_ratio: f64,
}

pub fn cmd_extrema(c: &CommonArgs) -> Result<()> {
    let cfg = RunConfig::resolve(&base_defaults(2001), c.config.as_deref(), c.flag_pairs())?;
    let phys = Physics::from_config(&cfg)?;
    let ex = pf_extrema(&phys.cavity, &phys.line)?;
    let rec = ExtremaRecord {
        pf_max: ex.pf_max.or_infinity(),
        bifurcating: ex.pf_max.is_bifurcating(),
        pf_min: ex.pf_min,
        detuning_at_max_hz: ex.detuning_at_max_hz,
        detuning_at_min_hz: ex.detuning_at_min_hz,
        epsilon: phys.line.epsilon,
        epsilon_threshold: ex.epsilon_threshold,
        strength_ratio: ex.strength_ratio,
    };
    write_json_out(cfg.path("out").as_deref(), &cfg.provenance("extrema"), &rec)?;
    eprintln!(
        "extrema: pf_max {} at ±{}, pf_min {:.6}, eps/eps_th {:.6}",
        if rec.bifurcating { "bifurcating".to_string() } else { format!("{:.6}", rec.pf_max) },
        mhz(rec.detuning_at_max_hz),
        rec.pf_min,
        rec.strength_ratio
    );
    Ok(())
}

fn load_input(cfg: &RunConfig) -> Result<MeasurementSeries> {
    let path = cfg
        .path("input")
        .ok_or_else(|| Error::InvalidArgument("--input is required".into()))?;
    Ok(wire::read_measurements_path(path)?.with_sweep(cfg.direction()?))
}

#[derive(Serialize)]
struct FitOutput<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    warning: Option<String>,
    fit: &'a FitReport,
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let c = &args.common;
    let mut flags = c.flag_pairs();
    flags.push(("input", args.input.as_ref().map(|p| p.display().to_string())));
    flags.push(("model", args.model.clone()));
    flags.push(("curve-out", args.curve_out.as_ref().map(|p| p.display().to_string())));
    let mut defaults = base_defaults(2001);
    defaults.push(("model", "lorentzian".into()));
    let cfg = RunConfig::resolve(&defaults, c.config.as_deref(), flags)?;
    let data = load_input(&cfg)?;
    let phys = Physics::from_config(&cfg)?;

    let (report, failure) = match cfg.raw("model").unwrap_or("lorentzian") {
        "lorentzian" => match fit_lorentzian(&data, &phys.cavity, None) {
            Ok(r) => (r, None),
            Err(Error::NotConverged { iterations, best }) => {
                let e = Error::NotConverged {
                    iterations,
                    best: best.clone(),
                };
                (*best, Some(e))
            }
            Err(e) => return Err(e),
        },
        "polynomial5" => (fit_polynomial5(&data)?, None),
        other => {
            return Err(Error::InvalidArgument(format!(
                "--model must be lorentzian or polynomial5, got {other:?}"
            )))
        }
    };
    let prov = cfg.provenance("fit");
    let out = FitOutput {
        warning: failure.as_ref().map(|e| e.to_string()),
        fit: &report,
    };
    write_json_out(cfg.path("out").as_deref(), &prov, &out)?;

    if let Some(p) = cfg.path("curve-out") {
        let mut w = BufWriter::new(File::create(p)?);
        writeln!(w, "# {} {} fit", wire::TOOL_NAME, wire::TOOL_VERSION)?;
        writeln!(w, "delta_f_e_hz,fit_delta_f_d_hz,pf")?;
        for pt in data.points() {
            let e = pt.delta_f_e_hz;
            let pf = local_pf(&report, e).map(|v| v.to_string()).unwrap_or_default();
            writeln!(w, "{},{},{}", e, report.evaluate(e)?, pf)?;
        }
    }

    match report.lorentzian() {
        Some(l) => eprintln!(
            "fit: gamma {}, eps/eps_th {:.6}, pf_max {}, pf_min {:.6}, rss {:.6e} Hz^2",
            mhz(l.params.gamma_hz),
            l.derived.strength_ratio,
            l.derived
                .pf_max
                .value()
                .map(|v| format!("{v:.6}"))
                .unwrap_or_else(|| "bifurcating".into()),
            l.derived.pf_min,
            report.rss
        ),
        None => eprintln!("fit: polynomial5, rss {:.6e} Hz^2", report.rss),
    }
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

#[derive(Serialize)]
struct BootstrapOutput<'a> {
    fit: &'a FitReport,
    bootstrap: &'a BootstrapReport,
    pf_max_bound: PfMaxBound,
    #[serde(skip_serializing_if = "Option::is_none")]
    warning: Option<String>,
}

pub fn cmd_bootstrap(args: &BootstrapArgs) -> Result<()> {
    let c = &args.common;
    let mut flags = c.flag_pairs();
    flags.push(("input", args.input.as_ref().map(|p| p.display().to_string())));
    flags.push(("replicates", fmt_opt(&args.replicates)));
    flags.push(("confidence", fmt_opt(&args.confidence)));
    flags.push(("bandwidth-hz", args.bandwidth_hz.clone()));
    let mut defaults = base_defaults(2001);
    defaults.push(("replicates", "1000".into()));
    defaults.push(("confidence", "0.9".into()));
    defaults.push(("bandwidth-hz", "auto".into()));
    let cfg = RunConfig::resolve(&defaults, c.config.as_deref(), flags)?;
    let data = load_input(&cfg)?;
    let phys = Physics::from_config(&cfg)?;

    let bandwidth = match cfg.raw("bandwidth-hz").unwrap_or("auto") {
        "auto" => None,
        _ => Some(cfg.f64("bandwidth-hz")?),
    };
    let bcfg = BootstrapConfig {
        replicates: cfg.require("replicates")?,
        confidence: cfg.f64("confidence")?,
        kernel_bandwidth_hz: bandwidth,
        seed: cfg.require("seed")?,
    };
    bcfg.validate()?;
    let base = fit_lorentzian(&data, &phys.cavity, None)?;
    let (report, failure) = match smoothed_bootstrap(&data, &phys.cavity, &base, &bcfg) {
        Ok(r) => (r, None),
        Err(Error::UnstableBootstrap {
            failed,
            replicates,
            partial,
        }) => {
            let e = Error::UnstableBootstrap {
                failed,
                replicates,
                partial: partial.clone(),
            };
            (*partial, Some(e))
        }
        Err(e) => return Err(e),
    };
    let bound = pf_max_lower_bound(&report);
    let out = BootstrapOutput {
        fit: &base,
        bootstrap: &report,
        pf_max_bound: bound,
        warning: failure.as_ref().map(|e| e.to_string()),
    };
    write_json_out(cfg.path("out").as_deref(), &cfg.provenance("bootstrap"), &out)?;
    let iv = &report.intervals;
    eprintln!(
        "bootstrap: {}/{} replicates ok; {:.0}% pf_max ({}, {}), pf_min ({:.4}, {:.4}); pf_max >= {} one-sided{}",
        report.replicate_success_count,
        report.replicates,
        100.0 * iv.confidence,
        iv.pf_max.lower,
        iv.pf_max.upper,
        iv.pf_min.lower,
        iv.pf_min.upper,
        bound.lower,
        if bound.upper_unbounded { ", upper bound unbounded (bifurcating)" } else { "" }
    );
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

/// Noiseless synthetic series on the sweep branch, plus seeded noise.
#[allow(clippy::too_many_arguments)]
pub fn synthesize(
    eq: &ResonanceEquation,
    from: f64,
    to: f64,
    points: usize,
    direction: SweepDirection,
    center_hz: f64,
    baseline_hz: f64,
    sigma_hz: f64,
    seed: u64,
) -> Result<MeasurementSeries> {
    if !(sigma_hz.is_finite() && sigma_hz >= 0.0) {
        return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma_hz}")));
    }
    let curve = eq.sweep(from - center_hz, to - center_hz, points, direction)?;
    let noise = Normal::new(0.0, sigma_hz).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts = curve
        .samples
        .iter()
        .map(|s| {
            let n = if sigma_hz > 0.0 { noise.sample(&mut rng) } else { 0.0 };
            Measurement::new(
                s.delta_f_e_hz + center_hz,
                s.delta_f_d_hz + center_hz + baseline_hz + n,
            )
        })
        .collect();
    Ok(MeasurementSeries::new(pts, "synthetic")?.with_sweep(direction))
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let c = &args.common;
    let mut flags = c.flag_pairs();
    flags.push(("sigma-hz", fmt_opt(&args.sigma_hz)));
    flags.push(("center-hz", fmt_opt(&args.center_hz)));
    flags.push(("baseline-hz", fmt_opt(&args.baseline_hz)));
    let mut defaults = base_defaults(200);
    defaults.push(("sigma-hz", "0".into()));
    defaults.push(("center-hz", "0".into()));
    defaults.push(("baseline-hz", "0".into()));
    let cfg = RunConfig::resolve(&defaults, c.config.as_deref(), flags)?;
    let phys = Physics::from_config(&cfg)?;
    let (from, to) = phys.sweep_range(&cfg)?;
    let series = synthesize(
        &phys.equation()?,
        from,
        to,
        cfg.require("points")?,
        cfg.direction()?,
        cfg.f64("center-hz")?,
        cfg.f64("baseline-hz")?,
        cfg.f64("sigma-hz")?,
        cfg.require("seed")?,
    )?;
    let prov = cfg.provenance("synth");
    let out = cfg.path("out");
    wire::write_measurements(open_out(out.as_deref())?, &series, Some(&prov), false)?;
    eprintln!(
        "synth: {} points, sigma {}, eps/eps_th {:.6}",
        series.len(),
        mhz(cfg.f64("sigma-hz")?),
        phys.line.epsilon / phys.epsilon_threshold
    );
    Ok(())
}
