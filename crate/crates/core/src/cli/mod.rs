//! Config-driven experiment runner.
//!
//! A run reads one config file (grammar in [`config`]), executes one
//! experiment, writes its CSV (to `[output] csv`, `--csv`, or stdout) and
//! optionally an SVG plot, and prints a one-line summary.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 flagged
//! non-convergence.

pub mod config;
mod identity;

pub use config::{parse, Document, ParseError, Span, Value};
pub use identity::{boole_identity_check, pullback_decay, BooleIdentityReport};

use std::fmt;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::cone_verifier::{boole_hypothesis_report, doubling_surrogate, hypothesis_check, iterated_cone_check, Grid};
use crate::error::LabError;
use crate::maps::Interval;
use crate::mixing_lab::{correlation_series, zero_type_decay, CorrelationOptions, MethodPolicy, EXACT_PREIMAGE_MAX_N};
use crate::observables::{infinite_volume_average, AvEstimate, AvSchedule, GlobalObservable};
use crate::quadrature::TailDecay;
use crate::stochastic::{birkhoff_dist_test, birkhoff_scan, strong_dist_limit_test, DistOptions, SampleLaw};
use crate::svg::{self, SvgOptions};
use crate::table::{float, Csv};
use crate::transfer_operator::LocalObservable;

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_FLAGGED: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Mix,
    ZeroType,
    Av,
    Cone,
    Hypotheses,
    Dist,
    Birkhoff,
    BooleIdentity,
}

impl Subcommand {
    pub const ALL: [Subcommand; 8] = [
        Subcommand::Mix,
        Subcommand::ZeroType,
        Subcommand::Av,
        Subcommand::Cone,
        Subcommand::Hypotheses,
        Subcommand::Dist,
        Subcommand::Birkhoff,
        Subcommand::BooleIdentity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Mix => "mix",
            Subcommand::ZeroType => "zerotype",
            Subcommand::Av => "av",
            Subcommand::Cone => "cone",
            Subcommand::Hypotheses => "hypotheses",
            Subcommand::Dist => "dist",
            Subcommand::Birkhoff => "birkhoff",
            Subcommand::BooleIdentity => "boole-identity",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Subcommands that always draw random samples.
    pub fn is_stochastic(self) -> bool {
        matches!(self, Subcommand::Mix | Subcommand::Dist | Subcommand::Birkhoff)
    }

    /// Fixed keys besides `subcommand`, `seed` and `[output]`.
    fn keys(self) -> &'static [&'static str] {
        match self {
            Subcommand::Mix => &["run.n", "run.method", "run.samples", "run.batches", "run.quad_tol"],
            Subcommand::ZeroType => &["sets.a_lo", "sets.a_hi", "sets.b_lo", "sets.b_hi", "run.n"],
            Subcommand::Av => &["run.tol", "run.compose", "run.a0", "run.max_stages"],
            Subcommand::Cone => &["run.k_max", "run.grid_lo", "run.grid_hi", "run.grid_points"],
            Subcommand::Hypotheses => &["map.name", "run.grid_lo", "run.grid_hi", "run.grid_points", "run.refine_tol"],
            Subcommand::Dist => &["run.n", "run.samples", "run.av_tol", "run.ks_target"],
            Subcommand::Birkhoff => &["run.k", "run.n", "run.samples", "run.av_tol"],
            Subcommand::BooleIdentity => &["run.tol"],
        }
    }

    /// Catalogue sections (`name` plus per-entry parameters).
    fn catalogue_sections(self) -> &'static [Section] {
        match self {
            Subcommand::Mix => &[Section::Observable, Section::Density],
            Subcommand::Av => &[Section::Observable],
            Subcommand::Cone => &[Section::Density],
            Subcommand::Dist | Subcommand::Birkhoff => &[Section::Observable, Section::Law],
            Subcommand::BooleIdentity => &[Section::Function],
            Subcommand::ZeroType | Subcommand::Hypotheses => &[],
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Observable,
    Density,
    Law,
    Function,
}

const GLOBAL_CATALOGUE: &[(&str, &[&str])] = &[
    ("square_wave", &[]),
    ("two_limits", &["l_plus", "l_minus"]),
    ("two_limits_sharp", &["l_plus", "l_minus"]),
    ("exotic", &[]),
    ("sine", &[]),
    ("indicator", &["a", "b"]),
    ("constant", &["value"]),
    ("fractional_part", &[]),
    ("tent_periodized", &[]),
    ("inverse_cdf_periodized", &["mean", "sd", "lo", "hi"]),
];

const LAW_CATALOGUE: &[(&str, &[&str])] = &[
    ("normal", &["mean", "sd"]),
    ("uniform", &["lo", "hi"]),
    ("laplace", &["mean", "scale"]),
];

const LOCAL_CATALOGUE: &[(&str, &[&str])] = &[
    ("normal", &["mean", "sd"]),
    ("uniform", &["lo", "hi"]),
    ("laplace", &["mean", "scale"]),
    ("exp_abs", &["rate"]),
    ("inverse_square", &[]),
    ("gaussian_sign_split", &[]),
    ("indicator", &["lo", "hi"]),
];

/// `boole-identity` also accepts `exp(-x²)` and the zero function.
const FUNCTION_EXTRAS: &[(&str, &[&str])] = &[("gaussian", &[]), ("zero", &[])];

impl Section {
    fn name(self) -> &'static str {
        match self {
            Section::Observable => "observable",
            Section::Density => "density",
            Section::Law => "law",
            Section::Function => "function",
        }
    }

    fn params(self, entry: &str) -> Option<&'static [&'static str]> {
        let find = |table: &[(&str, &'static [&'static str])]| table.iter().find(|(n, _)| *n == entry).map(|e| e.1);
        match self {
            Section::Observable => find(GLOBAL_CATALOGUE),
            Section::Density => find(LOCAL_CATALOGUE),
            Section::Law => find(LAW_CATALOGUE),
            Section::Function => find(LOCAL_CATALOGUE).or_else(|| find(FUNCTION_EXTRAS)),
        }
    }
}

const OUTPUT_KEYS: &[&str] = &["output.csv", "output.svg", "output.title", "output.log_y", "output.abs_y"];

/// A config problem, located when it comes from a specific key.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub span: Option<Span>,
    pub message: String,
}

impl ConfigError {
    fn at(span: Span, message: impl Into<String>) -> Self {
        ConfigError {
            span: Some(span),
            message: message.into(),
        }
    }

    fn bare(message: impl Into<String>) -> Self {
        ConfigError {
            span: None,
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.span {
            Some(s) => write!(f, "line {}, column {}: {}", s.line, s.column, self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl From<ParseError> for ConfigError {
    fn from(e: ParseError) -> Self {
        ConfigError::at(e.span, e.message)
    }
}

type CatalogueEntry<'a> = (String, Vec<(&'a str, f64)>);

/// A validated config.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub subcommand: Subcommand,
    pub seed: Option<u64>,
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    doc: Document,
}

impl ExperimentConfig {
    /// Parses and checks every key against the subcommand's schema.
    pub fn from_source(src: &str) -> Result<Self, ConfigError> {
        let doc = parse(src)?;
        let subcommand = match doc.get("subcommand") {
            None => return Err(ConfigError::bare("missing subcommand")),
            Some((Value::Str(s), span)) => Subcommand::parse(s).ok_or_else(|| {
                let names: Vec<&str> = Subcommand::ALL.iter().map(|c| c.name()).collect();
                ConfigError::at(*span, format!("unknown subcommand `{s}` (expected one of {})", names.join(", ")))
            })?,
            Some((v, span)) => {
                return Err(ConfigError::at(*span, format!("`subcommand` must be a string, got {}", v.type_name())))
            }
        };
        let mut allowed: Vec<String> = ["subcommand", "seed"].iter().map(|s| s.to_string()).collect();
        allowed.extend(OUTPUT_KEYS.iter().map(|s| s.to_string()));
        allowed.extend(subcommand.keys().iter().map(|s| s.to_string()));
        for &section in subcommand.catalogue_sections() {
            let key = format!("{}.name", section.name());
            let (entry, span) = match doc.get(&key) {
                Some((Value::Str(s), span)) => (s.as_str(), *span),
                Some((v, span)) => {
                    return Err(ConfigError::at(*span, format!("`{key}` must be a string, got {}", v.type_name())))
                }
                None => return Err(ConfigError::bare(format!("missing `{key}`"))),
            };
            let params = section
                .params(entry)
                .ok_or_else(|| ConfigError::at(span, format!("unknown {} `{entry}`", section.name())))?;
            allowed.push(key);
            allowed.extend(params.iter().map(|p| format!("{}.{p}", section.name())));
        }
        for (key, span) in doc.keys() {
            if !allowed.iter().any(|a| a == key) {
                return Err(ConfigError::at(span, format!("unknown key `{key}` for subcommand `{subcommand}`")));
            }
        }
        let mut cfg = ExperimentConfig {
            subcommand,
            seed: None,
            csv: None,
            svg: None,
            doc,
        };
        cfg.seed = cfg.opt_integer("seed")?.map(|s| s as u64);
        cfg.csv = cfg.opt_string("output.csv")?.map(PathBuf::from);
        cfg.svg = cfg.opt_string("output.svg")?.map(PathBuf::from);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::bare(format!("cannot read {}: {e}", path.display())))?;
        Self::from_source(&src)
    }

    fn type_error(&self, key: &str, want: &str) -> ConfigError {
        let (v, span) = self.doc.get(key).expect("called on present keys");
        ConfigError::at(*span, format!("`{key}` must be {want}, got {}", v.type_name()))
    }

    fn opt_number(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.doc.get(key) {
            None => Ok(None),
            Some((Value::Num(v), _)) => Ok(Some(*v)),
            Some(_) => Err(self.type_error(key, "a number")),
        }
    }

    fn number(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        Ok(self.opt_number(key)?.unwrap_or(default))
    }

    fn check_integer(&self, key: &str, v: f64) -> Result<usize, ConfigError> {
        if v >= 0.0 && v.fract() == 0.0 && v <= 2f64.powi(53) {
            Ok(v as usize)
        } else {
            let span = self.doc.get(key).expect("present").1;
            Err(ConfigError::at(span, format!("`{key}` must be a non-negative integer, got {v}")))
        }
    }

    fn opt_integer(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.opt_number(key)? {
            None => Ok(None),
            Some(v) => self.check_integer(key, v).map(Some),
        }
    }

    fn integer(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        Ok(self.opt_integer(key)?.unwrap_or(default))
    }

    /// A number or a list of numbers, as non-negative integers.
    fn integer_list(&self, key: &str) -> Result<Vec<usize>, ConfigError> {
        match self.doc.get(key) {
            None => Err(ConfigError::bare(format!("missing `{key}`"))),
            Some((Value::Num(v), _)) => Ok(vec![self.check_integer(key, *v)?]),
            Some((Value::List(vs), span)) => {
                if vs.is_empty() {
                    return Err(ConfigError::at(*span, format!("`{key}` is empty")));
                }
                vs.iter().map(|&v| self.check_integer(key, v)).collect()
            }
            Some(_) => Err(self.type_error(key, "a number or a list")),
        }
    }

    fn opt_string(&self, key: &str) -> Result<Option<String>, ConfigError> {
        match self.doc.get(key) {
            None => Ok(None),
            Some((Value::Str(s), _)) => Ok(Some(s.clone())),
            Some(_) => Err(self.type_error(key, "a string")),
        }
    }

    fn bool(&self, key: &str, default: bool) -> Result<bool, ConfigError> {
        match self.doc.get(key) {
            None => Ok(default),
            Some((Value::Bool(b), _)) => Ok(*b),
            Some(_) => Err(self.type_error(key, "true or false")),
        }
    }

    /// `(name, numeric params)` of a catalogue section.
    fn catalogue_entry(&self, section: &str) -> Result<CatalogueEntry<'_>, ConfigError> {
        let name = self
            .opt_string(&format!("{section}.name"))?
            .ok_or_else(|| ConfigError::bare(format!("missing `{section}.name`")))?;
        let mut params = Vec::new();
        for (k, v, span) in self.doc.section(section) {
            if k == "name" {
                continue;
            }
            match v {
                Value::Num(x) => params.push((k, *x)),
                other => {
                    return Err(ConfigError::at(
                        span,
                        format!("`{section}.{k}` must be a number, got {}", other.type_name()),
                    ))
                }
            }
        }
        Ok((name, params))
    }

    fn svg_options(&self) -> Result<SvgOptions, ConfigError> {
        Ok(SvgOptions {
            title: self.opt_string("output.title")?.unwrap_or_default(),
            log_y: self.bool("output.log_y", false)?,
            abs_y: self.bool("output.abs_y", false)?,
            ..Default::default()
        })
    }
}

/// Command-line overrides on top of the config.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Invocation {
    pub subcommand: String,
    pub config: PathBuf,
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// What an experiment produced, before anything is written.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub csv: String,
    /// Multi-line report printed before the summary.
    pub report: Option<String>,
    pub summary: String,
    pub flagged: bool,
    /// Plot layout; `None` when the CSV has no plottable shape.
    pub plot: Option<SvgOptions>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    Config(ConfigError),
    Lab(LabError),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => e.fmt(f),
            RunError::Lab(e) => e.fmt(f),
        }
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

impl From<LabError> for RunError {
    fn from(e: LabError) -> Self {
        RunError::Lab(e)
    }
}

fn global_observable(cfg: &ExperimentConfig) -> Result<GlobalObservable, RunError> {
    let (name, params) = cfg.catalogue_entry("observable")?;
    Ok(GlobalObservable::catalogue(&name, &params)?)
}

fn local_observable(cfg: &ExperimentConfig, section: &str) -> Result<LocalObservable, RunError> {
    let (name, params) = cfg.catalogue_entry(section)?;
    match name.as_str() {
        "gaussian" => Ok(LocalObservable::from_fn(
            "gaussian",
            |x| (-x * x).exp(),
            1.0,
            TailDecay::Gaussian {
                coefficient: 1.0,
                rate: 1.0,
            },
        )),
        "zero" => Ok(LocalObservable::from_fn(
            "zero",
            |_| 0.0,
            0.0,
            TailDecay::CompactSupport { radius: 1.0 },
        )),
        // the seed only matters when the observable is sampled
        _ => Ok(LocalObservable::catalogue(&name, &params, cfg.seed.unwrap_or(0))?),
    }
}

fn sample_law(cfg: &ExperimentConfig, seed: u64) -> Result<SampleLaw, RunError> {
    let (name, params) = cfg.catalogue_entry("law")?;
    let get = |k: &str, d: Option<f64>| {
        params
            .iter()
            .find(|p| p.0 == k)
            .map(|p| p.1)
            .or(d)
            .ok_or_else(|| ConfigError::bare(format!("law `{name}` needs `law.{k}`")))
    };
    Ok(match name.as_str() {
        "normal" => SampleLaw::normal(get("mean", Some(0.0))?, get("sd", Some(1.0))?, seed)?,
        "uniform" => SampleLaw::uniform(get("lo", None)?, get("hi", None)?, seed)?,
        "laplace" => SampleLaw::laplace(get("mean", Some(0.0))?, get("scale", Some(1.0))?, seed)?,
        other => return Err(ConfigError::bare(format!("unknown law `{other}`")).into()),
    })
}

fn require_seed(cfg: &ExperimentConfig) -> Result<u64, ConfigError> {
    cfg.seed.ok_or_else(|| {
        ConfigError::bare(format!(
            "missing `seed` (required by stochastic subcommand `{}`)",
            cfg.subcommand
        ))
    })
}

fn grid(cfg: &ExperimentConfig) -> Result<Grid, RunError> {
    Ok(Grid::geometric(
        cfg.number("run.grid_lo", 1e-3)?,
        cfg.number("run.grid_hi", 1e3)?,
        cfg.integer("run.grid_points", 10_000)?,
    )?)
}

fn plot(y: &[&str]) -> Option<SvgOptions> {
    Some(SvgOptions {
        y_columns: y.iter().map(|s| s.to_string()).collect(),
        ..Default::default()
    })
}

fn run_mix(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let seed = require_seed(cfg)?;
    let f = global_observable(cfg)?;
    let g = local_observable(cfg, "density")?;
    let ns = cfg.integer_list("run.n")?;
    let policy = MethodPolicy::parse(&cfg.opt_string("run.method")?.unwrap_or_else(|| "both".into()))?;
    let mut opts = CorrelationOptions::new(seed);
    opts.quad_tol = cfg.number("run.quad_tol", opts.quad_tol)?;
    opts.mc.samples = cfg.integer("run.samples", opts.mc.samples)?;
    opts.mc.batches = cfg.integer("run.batches", opts.mc.batches)?;
    let series = correlation_series(&f, &g, &ns, policy, &opts)?;
    let last = series.entries.last().expect("non-empty n list");
    Ok(Outcome {
        csv: series.to_csv(),
        report: None,
        summary: format!(
            "mix: F={} g={} seed={} entries={} target={} C_{}={} ({}) flagged={}",
            series.observable,
            series.density,
            seed,
            series.entries.len(),
            series.target.map(float).unwrap_or_else(|| "none".into()),
            last.n,
            float(last.value),
            last.method,
            series.flagged()
        ),
        flagged: series.flagged(),
        plot: plot(&["value"]),
    })
}

fn run_zerotype(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let a = Interval::new(cfg.number("sets.a_lo", -1.0)?, cfg.number("sets.a_hi", 1.0)?);
    let b = Interval::new(cfg.number("sets.b_lo", -1.0)?, cfg.number("sets.b_hi", 1.0)?);
    let ns = cfg.integer_list("run.n")?;
    let seed = if ns.iter().any(|&n| n > EXACT_PREIMAGE_MAX_N) {
        cfg.seed.ok_or_else(|| {
            ConfigError::bare(format!(
                "missing `seed` (n > {EXACT_PREIMAGE_MAX_N} falls back to Monte Carlo)"
            ))
        })?
    } else {
        cfg.seed.unwrap_or(0)
    };
    let series = zero_type_decay(a, b, &ns, seed)?;
    let first = &series.entries[0];
    let last = series.entries.last().expect("non-empty");
    Ok(Outcome {
        csv: series.to_csv(),
        report: None,
        summary: format!(
            "zerotype: A=[{}, {}] B=[{}, {}] n={}..{} m_first={} m_last={} monte_carlo_fallback={}",
            a.lo,
            a.hi,
            b.lo,
            b.hi,
            first.n,
            last.n,
            float(first.value),
            float(last.value),
            series.flagged()
        ),
        flagged: false,
        plot: plot(&["value"]),
    })
}

fn av_rows(csv: &mut Csv, est: &AvEstimate, label: &str) {
    for (a, v) in &est.window_sequence {
        csv.row(&[float(*a), float(v.re), float(v.im), label.to_string()]);
    }
}

fn run_av(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let f = global_observable(cfg)?;
    let tol = cfg.number("run.tol", 1e-4)?;
    let schedule = AvSchedule {
        a0: cfg.number("run.a0", AvSchedule::default().a0)?,
        max_stages: cfg.integer("run.max_stages", AvSchedule::default().max_stages)?,
        ..AvSchedule::default()
    };
    let est = infinite_volume_average(&f, tol, schedule)?;
    let mut csv = Csv::new(&["a", "re", "im", "observable"]);
    av_rows(&mut csv, &est, &f.name);
    let mut summary = format!(
        "av: F={} Av={} converged={}",
        f.name,
        float(est.value.re),
        est.converged
    );
    let mut flagged = !est.converged;
    if cfg.bool("run.compose", false)? {
        let ft = f.compose_with_boole();
        let est_t = infinite_volume_average(&ft, tol, schedule)?;
        av_rows(&mut csv, &est_t, &ft.name);
        let _ = write!(
            summary,
            " Av(F∘T)={} converged={} |difference|={}",
            float(est_t.value.re),
            est_t.converged,
            float((est_t.value - est.value).norm())
        );
        flagged |= !est_t.converged;
    }
    csv.comment(&format!("summary {summary}"));
    Ok(Outcome {
        csv: csv.finish(),
        report: None,
        summary,
        flagged,
        plot: Some(SvgOptions {
            y_columns: vec!["re".into()],
            group_column: Some("observable".into()),
            ..Default::default()
        }),
    })
}

fn run_cone(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let g = local_observable(cfg, "density")?;
    let grid = grid(cfg)?;
    let report = iterated_cone_check(&g, cfg.integer("run.k_max", 4)?, &grid)?;
    let mut csv = Csv::new(&[
        "k",
        "positive_min",
        "positive_witness",
        "decreasing_min",
        "decreasing_witness",
        "convex_drift_min",
        "convex_drift_witness",
        "pass",
    ]);
    for c in &report.checks {
        csv.row(&[
            c.k.to_string(),
            float(c.positive.min),
            float(c.positive.witness),
            float(c.decreasing.min),
            float(c.decreasing.witness),
            float(c.convex_drift.min),
            float(c.convex_drift.witness),
            c.pass().to_string(),
        ]);
    }
    let passing = report.checks.iter().filter(|c| c.pass()).count();
    Ok(Outcome {
        csv: csv.finish(),
        report: None,
        summary: format!(
            "cone: g={} grid={} input_in_cone={} passing={}/{}",
            g.name,
            grid.description,
            report.input_in_cone,
            passing,
            report.checks.len()
        ),
        flagged: false,
        plot: Some(SvgOptions {
            y_columns: vec!["positive_min".into(), "decreasing_min".into(), "convex_drift_min".into()],
            group_column: Some("pass".into()),
            ..Default::default()
        }),
    })
}

fn run_hypotheses(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let grid = grid(cfg)?;
    let map = cfg.opt_string("map.name")?.unwrap_or_else(|| "folded".into());
    let report = match map.as_str() {
        "folded" | "boole" => {
            let mut r = boole_hypothesis_report(&grid)?;
            let tol = cfg.number("run.refine_tol", 1e-12)?;
            if tol != 1e-12 {
                r.sets = Some(crate::cone_verifier::h4_sets(&crate::maps::PiecewiseMap::folded(), &grid, tol)?);
            }
            r
        }
        "doubling_surrogate" => hypothesis_check(&doubling_surrogate(), &grid, &[])?,
        other => {
            let span = cfg.doc.get("map.name").map(|e| e.1);
            return Err(RunError::Config(ConfigError {
                span,
                message: format!("unknown map `{other}` (expected folded or doubling_surrogate)"),
            }));
        }
    };
    let mut csv = report.to_csv();
    let mut summary = format!("hypotheses: map={} overall={}", report.map, report.overall);
    let mut flagged = false;
    if let Some(sets) = &report.sets {
        let show = |v: Option<f64>| v.map(float).unwrap_or_else(|| "none".into());
        let line = format!("x1={} x2={} x3={}", show(sets.x1()), show(sets.x2()), show(sets.x3()));
        let _ = writeln!(csv, "# {line}");
        let _ = write!(summary, " {line}");
        flagged = sets.flagged();
    }
    Ok(Outcome {
        csv,
        report: Some(report.to_text()),
        summary,
        flagged,
        plot: None,
    })
}

fn dist_options(cfg: &ExperimentConfig) -> Result<DistOptions, RunError> {
    let mut opts = DistOptions {
        av_tol: cfg.number("run.av_tol", 1e-6)?,
        ..Default::default()
    };
    match cfg.opt_string("run.ks_target")?.as_deref() {
        None | Some("none") => {}
        Some("uniform") => opts = opts.with_ks_target(|x: f64| x.clamp(0.0, 1.0)),
        Some(other) => {
            let span = cfg.doc.get("run.ks_target").map(|e| e.1);
            return Err(RunError::Config(ConfigError {
                span,
                message: format!("unknown ks_target `{other}` (expected uniform or none)"),
            }));
        }
    }
    Ok(opts)
}

fn run_dist(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let seed = require_seed(cfg)?;
    let f = global_observable(cfg)?;
    let law = sample_law(cfg, seed)?;
    let n = cfg.opt_integer("run.n")?.ok_or_else(|| ConfigError::bare("missing `run.n`"))?;
    let samples = cfg.integer("run.samples", 1_000_000)?;
    let report = strong_dist_limit_test(&f, &law, n, samples, &dist_options(cfg)?)?;
    Ok(Outcome {
        csv: report.to_csv(),
        report: None,
        summary: format!(
            "dist: F={} law={} seed={} n={} N={} sup_deviation={} ks={} flagged={}",
            report.observable,
            report.law,
            seed,
            n,
            samples,
            float(report.sup_deviation),
            report.ks.map(float).unwrap_or_else(|| "none".into()),
            report.flagged()
        ),
        flagged: report.flagged(),
        plot: plot(&["deviation"]),
    })
}

fn run_birkhoff(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let seed = require_seed(cfg)?;
    let f = global_observable(cfg)?;
    let law = sample_law(cfg, seed)?;
    let ks = cfg.integer_list("run.k")?;
    let ns = cfg.integer_list("run.n")?;
    let samples = cfg.integer("run.samples", 100_000)?;
    let opts = dist_options(cfg)?;
    if ks.contains(&0) {
        return Err(LabError::usage("Birkhoff window k must be at least 1").into());
    }
    if ks.len() == 1 && ns.len() == 1 {
        let report = birkhoff_dist_test(&f, &law, ks[0], ns[0], samples, &opts)?;
        return Ok(Outcome {
            csv: report.to_csv(),
            report: None,
            summary: format!(
                "birkhoff: F={} law={} seed={} k={} n={} N={} sup_deviation={} flagged={}",
                report.observable,
                report.law,
                seed,
                ks[0],
                ns[0],
                samples,
                float(report.sup_deviation),
                report.flagged()
            ),
            flagged: report.flagged(),
            plot: plot(&["deviation"]),
        });
    }
    let scan = birkhoff_scan(&f, &law, &ks, &ns, samples, &opts)?;
    let mut csv = Csv::new(&["n", "k", "sup_deviation"]);
    for &(k, n, d) in &scan {
        csv.row(&[n.to_string(), k.to_string(), float(d)]);
    }
    let worst = scan.iter().map(|e| e.2).fold(0.0, f64::max);
    Ok(Outcome {
        csv: csv.finish(),
        report: None,
        summary: format!(
            "birkhoff: F={} law={} seed={} scan={}x{} N={} max_sup_deviation={}",
            f.name,
            law.name(),
            seed,
            ks.len(),
            ns.len(),
            samples,
            float(worst)
        ),
        flagged: false,
        plot: Some(SvgOptions {
            y_columns: vec!["sup_deviation".into()],
            group_column: Some("k".into()),
            ..Default::default()
        }),
    })
}

fn run_identity(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let f = local_observable(cfg, "function")?;
    let r = boole_identity_check(&f, cfg.number("run.tol", 1e-10)?)?;
    Ok(Outcome {
        csv: r.to_csv(),
        report: None,
        summary: format!(
            "boole-identity: f={} lhs={} rhs={} difference={} converged={}",
            r.function,
            float(r.lhs.value),
            float(r.rhs.value),
            float(r.difference),
            r.converged()
        ),
        flagged: !r.converged(),
        plot: None,
    })
}

/// Runs the experiment without touching the filesystem.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome, RunError> {
    let mut out = match cfg.subcommand {
        Subcommand::Mix => run_mix(cfg),
        Subcommand::ZeroType => run_zerotype(cfg),
        Subcommand::Av => run_av(cfg),
        Subcommand::Cone => run_cone(cfg),
        Subcommand::Hypotheses => run_hypotheses(cfg),
        Subcommand::Dist => run_dist(cfg),
        Subcommand::Birkhoff => run_birkhoff(cfg),
        Subcommand::BooleIdentity => run_identity(cfg),
    }?;
    if let Some(p) = &mut out.plot {
        let user = cfg.svg_options()?;
        p.title = if user.title.is_empty() {
            cfg.subcommand.name().to_string()
        } else {
            user.title
        };
        p.log_y = user.log_y;
        p.abs_y = user.abs_y;
    }
    Ok(out)
}

/// Loads the config, applies overrides, runs, writes artifacts. Returns the
/// exit code.
pub fn run(inv: &Invocation, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match run_inner(inv, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {}: {e}", inv.config.display());
            EXIT_USAGE
        }
    }
}

fn run_inner(inv: &Invocation, stdout: &mut dyn Write) -> Result<i32, RunError> {
    let mut cfg = ExperimentConfig::load(&inv.config)?;
    if cfg.subcommand.name() != inv.subcommand {
        return Err(ConfigError::bare(format!(
            "command line asks for `{}` but the config declares subcommand `{}`",
            inv.subcommand, cfg.subcommand
        ))
        .into());
    }
    if inv.seed.is_some() {
        cfg.seed = inv.seed;
    }
    if inv.csv.is_some() {
        cfg.csv = inv.csv.clone();
    }
    if inv.svg.is_some() {
        cfg.svg = inv.svg.clone();
    }
    let out = execute(&cfg)?;
    let svg_text = match (&cfg.svg, &out.plot) {
        (None, _) => None,
        (Some(_), None) => {
            return Err(ConfigError::bare(format!("subcommand `{}` has no plot", cfg.subcommand)).into())
        }
        (Some(_), Some(opts)) => Some(svg::render(&out.csv, opts)?),
    };
    let write = |path: &Path, text: &str| {
        std::fs::write(path, text).map_err(|e| ConfigError::bare(format!("cannot write {}: {e}", path.display())))
    };
    if let Some(r) = &out.report {
        let _ = stdout.write_all(r.as_bytes());
    }
    match &cfg.csv {
        Some(path) => write(path, &out.csv)?,
        None => {
            let _ = stdout.write_all(out.csv.as_bytes());
        }
    }
    if let (Some(path), Some(text)) = (&cfg.svg, &svg_text) {
        write(path, text)?;
    }
    let _ = writeln!(stdout, "{}", out.summary);
    Ok(if out.flagged { EXIT_FLAGGED } else { EXIT_SUCCESS })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(src: &str) -> Result<ExperimentConfig, ConfigError> {
        ExperimentConfig::from_source(src)
    }

    #[test]
    fn empty_config_is_missing_subcommand() {
        let e = cfg("").unwrap_err();
        assert_eq!(e.message, "missing subcommand");
        assert_eq!(cfg("# only a comment\n").unwrap_err().message, "missing subcommand");
    }

    #[test]
    fn schema_rejects_unknown_keys() {
        let e = cfg("subcommand = \"zerotype\"\n[run]\nn = [1]\nbogus = 2\n").unwrap_err();
        assert_eq!(e.span, Some(Span { line: 4, column: 1 }));
        assert!(e.message.contains("run.bogus"));
        let e = cfg("subcommand = \"av\"\n[observable]\nname = \"sine\"\nl_plus = 1\n").unwrap_err();
        assert!(e.message.contains("observable.l_plus"), "{e}");
        let e = cfg("subcommand = \"av\"\n[observable]\nname = \"cosine\"\n").unwrap_err();
        assert!(e.message.contains("unknown observable"));
        assert!(cfg("subcommand = \"av\"\n").unwrap_err().message.contains("observable.name"));
        assert!(cfg("subcommand = \"nope\"").unwrap_err().message.contains("unknown subcommand"));
        assert!(cfg("subcommand = 3").is_err());
        assert!(cfg("subcommand = \"hypotheses\"\n[output]\ncsv = 4\n").is_err());
    }

    #[test]
    fn seed_is_mandatory_for_stochastic_runs() {
        let c = cfg("subcommand = \"dist\"\n[observable]\nname = \"fractional_part\"\n[law]\nname = \"normal\"\n[run]\nn = 1\nsamples = 100\n").unwrap();
        let e = execute(&c).unwrap_err();
        assert!(e.to_string().contains("missing `seed`"), "{e}");
        let c = cfg("subcommand = \"zerotype\"\n[run]\nn = [1, 25]\n").unwrap();
        assert!(execute(&c).unwrap_err().to_string().contains("seed"));
        let c = cfg("subcommand = \"zerotype\"\n[run]\nn = [1, 2]\n").unwrap();
        assert!(execute(&c).is_ok());
        assert!(cfg("subcommand = \"zerotype\"\nseed = -1\n[run]\nn = 1").is_err());
        assert!(cfg("subcommand = \"zerotype\"\nseed = 1.5\n[run]\nn = 1").is_err());
    }

    #[test]
    fn integer_lists_accept_scalars() {
        let c = cfg("subcommand = \"zerotype\"\n[run]\nn = 3\n").unwrap();
        assert_eq!(c.integer_list("run.n").unwrap(), vec![3]);
        let c = cfg("subcommand = \"zerotype\"\n[run]\nn = []\n").unwrap();
        assert!(c.integer_list("run.n").is_err());
    }

    #[test]
    fn zerotype_outcome() {
        let c = cfg("subcommand = \"zerotype\"\n[run]\nn = [0, 1, 2]\n").unwrap();
        let out = execute(&c).unwrap();
        assert!(out.csv.starts_with("n,value,stderr,method\n0,2.0000000000000000e0,"));
        assert!(out.csv.contains("\n1,7.6393202250021"), "{}", out.csv);
        assert!(!out.flagged);
    }

    #[test]
    fn boole_identity_outcomes() {
        let field = |out: &Outcome, col: usize| -> f64 {
            out.csv.lines().nth(1).unwrap().split(',').nth(col).unwrap().parse().unwrap()
        };
        let c = cfg("subcommand = \"boole-identity\"\n[function]\nname = \"gaussian\"\n").unwrap();
        let out = execute(&c).unwrap();
        assert!((field(&out, 0) - std::f64::consts::PI.sqrt()).abs() < 1e-9, "{}", out.summary);
        assert!(field(&out, 2) < 1e-6 && !out.flagged);
        let c = cfg("subcommand = \"boole-identity\"\n[function]\nname = \"indicator\"\nlo = -1\nhi = 1\n").unwrap();
        assert!((field(&execute(&c).unwrap(), 1) - 2.0).abs() < 1e-9);
        let c = cfg("subcommand = \"boole-identity\"\n[function]\nname = \"zero\"\n").unwrap();
        assert_eq!(field(&execute(&c).unwrap(), 2), 0.0);
    }
}
