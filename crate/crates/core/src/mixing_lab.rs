//! Global-local mixing experiments.
//!
//! `Cₙ(F, g) = m((F∘Tⁿ) g)` is computed either by quadrature (small `n`,
//! where `F∘Tⁿ` has few discontinuities) or by importance sampling from
//! `|g|/‖g‖₁`. Monte Carlo series reuse one sample set across all `n`
//! (common random numbers) and report batch-means standard errors.

use std::fmt;

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::maps::{iterate, Interval, PHI_MINUS, PHI_PLUS};
use crate::observables::{infinite_volume_average, AvSchedule, GlobalObservable};
use crate::quadrature::{integrate_interval, integrate_line, integrate_line_with, QuadOptions, TailDecay};
use crate::stochastic::initial_samples;
use crate::table::{float, opt_float, Csv};
use crate::transfer_operator::{iterate_transfer, LocalObservable, N_MAX};

/// Largest `n` for which quadrature of `F∘Tⁿ · g` is attempted.
pub const QUADRATURE_MAX_N: usize = 10;
/// Largest `n` for exact preimage-interval arithmetic.
pub const EXACT_PREIMAGE_MAX_N: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Quadrature,
    MonteCarlo,
    /// Exact interval arithmetic (zero-type decay only).
    Exact,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Quadrature => "quadrature",
            Method::MonteCarlo => "monte_carlo",
            Method::Exact => "exact",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodPolicy {
    Quadrature,
    MonteCarlo,
    /// Quadrature for `n ≤ 10` and Monte Carlo for every `n`.
    Both,
}

impl MethodPolicy {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "quadrature" => Ok(MethodPolicy::Quadrature),
            "monte_carlo" => Ok(MethodPolicy::MonteCarlo),
            "both" | "auto" => Ok(MethodPolicy::Both),
            other => Err(LabError::usage(format!("unknown method policy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig {
    pub samples: usize,
    pub batches: usize,
    pub seed: u64,
}

impl McConfig {
    pub fn new(seed: u64) -> Self {
        McConfig {
            samples: 1_000_000,
            batches: 100,
            seed,
        }
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationOptions {
    pub quad_tol: f64,
    pub quad_budget: usize,
    pub mc: McConfig,
}

impl CorrelationOptions {
    pub fn new(seed: u64) -> Self {
        CorrelationOptions {
            quad_tol: 1e-8,
            quad_budget: 200_000,
            mc: McConfig::new(seed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationValue {
    pub n: usize,
    pub value: f64,
    /// Standard error (Monte Carlo) or quadrature error estimate.
    pub stderr: f64,
    pub method: Method,
    pub dropped: usize,
    pub converged: bool,
}

fn scale_decay(d: TailDecay, c: f64) -> TailDecay {
    match d {
        TailDecay::CompactSupport { .. } => d,
        TailDecay::Exponential { coefficient, rate } => TailDecay::Exponential {
            coefficient: coefficient * c,
            rate,
        },
        TailDecay::Gaussian { coefficient, rate } => TailDecay::Gaussian {
            coefficient: coefficient * c,
            rate,
        },
        TailDecay::PowerLaw { coefficient, exponent } => TailDecay::PowerLaw {
            coefficient: coefficient * c,
            exponent,
        },
    }
}

fn preimages(points: &[f64], n: usize) -> Vec<f64> {
    let mut level = points.to_vec();
    for _ in 0..n {
        level = level
            .iter()
            .flat_map(|&z| [(PHI_PLUS.eval)(z), (PHI_MINUS.eval)(z)])
            .collect();
    }
    level
}

/// Jumps of `F∘Tⁿ`: points with `Tʲx = 0` for some `j < n`, plus the
/// `n`-th preimages of the jumps of `F`.
fn composed_jumps(f: &GlobalObservable, n: usize) -> Vec<f64> {
    let mut all = preimages(&f.jumps, n);
    for j in 0..n {
        all.extend(preimages(&[0.0], j));
    }
    all
}

fn correlation_quadrature(f: &GlobalObservable, g: &LocalObservable, n: usize, opts: &CorrelationOptions) -> Result<CorrelationValue> {
    if n > QUADRATURE_MAX_N {
        return Err(LabError::usage(format!(
            "quadrature refused for n = {n} > {QUADRATURE_MAX_N} (F∘Tⁿ oscillates too often); use monte_carlo"
        )));
    }
    let rf = f.real_fn()?;
    let mut breaks = g.breakpoints.clone();
    breaks.extend(composed_jumps(f, n));
    let qopts = QuadOptions::new(opts.quad_tol)
        .with_budget(opts.quad_budget)
        .with_breakpoints(breaks);
    let r = integrate_line_with(
        |x| match iterate(x, n) {
            Some(y) => rf(y) * g.eval(x),
            None => 0.0,
        },
        scale_decay(g.decay, f.sup_norm_bound),
        &qopts,
    )?;
    Ok(CorrelationValue {
        n,
        value: r.value,
        stderr: r.abs_error_estimate,
        method: Method::Quadrature,
        dropped: 0,
        converged: r.converged,
    })
}

/// Importance-sampled `m((F∘Tⁿ)g)` for every `n` in `ns`, sharing one sample set.
fn correlation_mc(f: &GlobalObservable, g: &LocalObservable, ns: &[usize], mc: McConfig) -> Result<Vec<CorrelationValue>> {
    let rf = f.real_fn()?;
    let Some(law) = &g.law else {
        return Err(LabError::usage(format!(
            "`{}` has no sampleable law for importance sampling",
            g.name
        )));
    };
    let Some(norm) = g.l1_norm_hint else {
        return Err(LabError::usage(format!("`{}` has no known L¹ norm", g.name)));
    };
    if mc.batches < 2 || mc.samples < mc.batches {
        return Err(LabError::usage(format!(
            "need at least 2 batches and one sample per batch, got N = {}, batches = {}",
            mc.samples, mc.batches
        )));
    }
    let law = law.clone().with_seed(mc.seed);
    let xs = initial_samples(&law, mc.samples);
    let weights: Vec<f64> = xs
        .par_iter()
        .map(|&x| {
            let gx = g.eval(x);
            if gx == 0.0 {
                0.0
            } else {
                gx.signum() * norm
            }
        })
        .collect();
    let mut order: Vec<usize> = (0..ns.len()).collect();
    order.sort_by_key(|&i| ns[i]);

    let bounds: Vec<(usize, usize)> = (0..mc.batches)
        .map(|b| (b * mc.samples / mc.batches, (b + 1) * mc.samples / mc.batches))
        .collect();
    let mut state = xs;
    let mut at = 0usize;
    let mut out = vec![None; ns.len()];
    for i in order {
        let n = ns[i];
        let steps = n - at;
        if steps > 0 {
            state.par_iter_mut().for_each(|x| {
                for _ in 0..steps {
                    if x.is_nan() {
                        return;
                    }
                    *x = if *x == 0.0 { f64::NAN } else { *x - 1.0 / *x };
                    if *x == 0.0 {
                        *x = f64::NAN;
                    }
                }
            });
            at = n;
        }
        let sums: Vec<(f64, usize)> = bounds
            .par_iter()
            .map(|&(lo, hi)| {
                let mut s = 0.0;
                let mut c = 0usize;
                for j in lo..hi {
                    let x = state[j];
                    if !x.is_nan() {
                        s += weights[j] * rf(x);
                        c += 1;
                    }
                }
                (s, c)
            })
            .collect();
        let kept: usize = sums.iter().map(|s| s.1).sum();
        if kept == 0 {
            return Err(LabError::domain("every orbit hit the branch cut"));
        }
        let value = sums.iter().map(|s| s.0).sum::<f64>() / kept as f64;
        let means: Vec<f64> = sums.iter().filter(|s| s.1 > 0).map(|s| s.0 / s.1 as f64).collect();
        let b = means.len() as f64;
        let mbar = means.iter().sum::<f64>() / b;
        let var = means.iter().map(|m| (m - mbar).powi(2)).sum::<f64>() / (b - 1.0);
        out[i] = Some(CorrelationValue {
            n,
            value,
            stderr: (var / b).sqrt(),
            method: Method::MonteCarlo,
            dropped: mc.samples - kept,
            converged: true,
        });
    }
    Ok(out.into_iter().map(|v| v.expect("every n visited")).collect())
}

/// `m((F∘Tⁿ) g)`.
pub fn correlation(
    f: &GlobalObservable,
    g: &LocalObservable,
    n: usize,
    method: Method,
    opts: &CorrelationOptions,
) -> Result<CorrelationValue> {
    match method {
        Method::Quadrature => correlation_quadrature(f, g, n, opts),
        Method::MonteCarlo => Ok(correlation_mc(f, g, &[n], opts.mc)?[0]),
        Method::Exact => Err(LabError::usage("exact method applies to zero-type decay only")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationSeries {
    pub entries: Vec<CorrelationValue>,
    /// `Av(F) · m(g)`, when `Av(F)` converged.
    pub target: Option<f64>,
    pub observable: String,
    pub density: String,
    pub seed: u64,
}

impl CorrelationSeries {
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["n", "value", "stderr", "method", "target"]);
        for e in &self.entries {
            csv.row(&[
                e.n.to_string(),
                float(e.value),
                float(e.stderr),
                e.method.to_string(),
                opt_float(self.target),
            ]);
        }
        csv.finish()
    }

    pub fn flagged(&self) -> bool {
        self.target.is_none() || self.entries.iter().any(|e| !e.converged)
    }

    pub fn get(&self, n: usize, method: Method) -> Option<&CorrelationValue> {
        self.entries.iter().find(|e| e.n == n && e.method == method)
    }
}

/// `Av(F) · m(g)`, `None` if the average does not converge.
pub fn correlation_target(f: &GlobalObservable, g: &LocalObservable) -> Result<Option<f64>> {
    let av = infinite_volume_average(f, 1e-4, AvSchedule::default())?;
    if !av.converged {
        return Ok(None);
    }
    let opts = QuadOptions::new(1e-10).with_breakpoints(g.breakpoints.iter().copied());
    let mass = integrate_line_with(|x| g.eval(x), g.decay, &opts)?;
    Ok(Some(av.value.re * mass.value))
}

/// `Cₙ` over `n_list`, Monte Carlo entries with common random numbers.
pub fn correlation_series(
    f: &GlobalObservable,
    g: &LocalObservable,
    n_list: &[usize],
    policy: MethodPolicy,
    opts: &CorrelationOptions,
) -> Result<CorrelationSeries> {
    let mut ns = n_list.to_vec();
    ns.sort_unstable();
    ns.dedup();
    if ns.is_empty() {
        return Err(LabError::usage("empty n list"));
    }
    let mut entries = Vec::new();
    if policy != MethodPolicy::MonteCarlo {
        let quad_ns: Vec<usize> = if policy == MethodPolicy::Quadrature {
            ns.clone()
        } else {
            ns.iter().copied().filter(|&n| n <= QUADRATURE_MAX_N).collect()
        };
        let quad: Vec<Result<CorrelationValue>> = quad_ns
            .par_iter()
            .map(|&n| correlation_quadrature(f, g, n, opts))
            .collect();
        for q in quad {
            entries.push(q?);
        }
    }
    if policy != MethodPolicy::Quadrature {
        entries.extend(correlation_mc(f, g, &ns, opts.mc)?);
    }
    entries.sort_by_key(|e| (e.n, e.method != Method::Quadrature));
    Ok(CorrelationSeries {
        entries,
        target: correlation_target(f, g)?,
        observable: f.name.clone(),
        density: g.name.clone(),
        seed: opts.mc.seed,
    })
}

/// `∫ F d(ν∘T⁻ⁿ)` for a probability density `g`.
pub fn measure_evolution(
    g: &LocalObservable,
    f: &GlobalObservable,
    n: usize,
    method: Method,
    opts: &CorrelationOptions,
) -> Result<CorrelationValue> {
    let probe = (0..=4000).map(|i| -100.0 + 0.05 * i as f64 + 1e-3);
    if probe.clone().any(|x| g.eval(x) < 0.0) {
        return Err(LabError::usage(format!("`{}` is not a density: negative values", g.name)));
    }
    let qopts = QuadOptions::new(1e-10).with_breakpoints(g.breakpoints.iter().copied());
    let mass = integrate_line_with(|x| g.eval(x), g.decay, &qopts)?;
    if (mass.value - 1.0).abs() > 1e-6 {
        return Err(LabError::usage(format!(
            "`{}` is not a probability density: mass {}",
            g.name, mass.value
        )));
    }
    correlation(f, g, n, method, opts)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroTypeSeries {
    pub a: Interval,
    pub b: Interval,
    pub entries: Vec<CorrelationValue>,
}

impl ZeroTypeSeries {
    /// Monte Carlo fallback was used for some `n`.
    pub fn flagged(&self) -> bool {
        self.entries.iter().any(|e| e.method == Method::MonteCarlo)
    }

    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["n", "value", "stderr", "method"]);
        for e in &self.entries {
            csv.row(&[e.n.to_string(), float(e.value), float(e.stderr), e.method.to_string()]);
        }
        csv.finish()
    }
}

fn preimage_overlap(lo: f64, hi: f64, depth: usize, b: &Interval) -> f64 {
    if depth == 0 {
        return (hi.min(b.hi) - lo.max(b.lo)).max(0.0);
    }
    // φ± are increasing, so each preimage of an interval is an interval
    preimage_overlap((PHI_PLUS.eval)(lo), (PHI_PLUS.eval)(hi), depth - 1, b)
        + preimage_overlap((PHI_MINUS.eval)(lo), (PHI_MINUS.eval)(hi), depth - 1, b)
}

/// `m(T⁻ⁿA ∩ B)` by exact preimage intervals.
pub fn preimage_measure(a: &Interval, b: &Interval, n: usize) -> Result<f64> {
    if n > EXACT_PREIMAGE_MAX_N {
        return Err(LabError::Budget {
            what: "preimage depth",
            requested: n,
            limit: EXACT_PREIMAGE_MAX_N,
        });
    }
    Ok(preimage_overlap(a.lo, a.hi, n, b))
}

/// `m(T⁻ⁿA ∩ B)` for each `n`; Monte Carlo beyond the exact depth.
pub fn zero_type_decay(a: Interval, b: Interval, n_list: &[usize], seed: u64) -> Result<ZeroTypeSeries> {
    let finite = |i: &Interval| i.lo.is_finite() && i.hi.is_finite() && i.lo < i.hi;
    if !finite(&a) || !finite(&b) {
        return Err(LabError::usage("zero-type decay needs finite intervals A and B"));
    }
    let mut entries = Vec::with_capacity(n_list.len());
    let deep: Vec<usize> = n_list.iter().copied().filter(|&n| n > EXACT_PREIMAGE_MAX_N).collect();
    let mc = if deep.is_empty() {
        Vec::new()
    } else {
        let f = GlobalObservable::indicator(a.lo, a.hi)?;
        let g = LocalObservable::indicator(b.lo, b.hi)?;
        correlation_mc(&f, &g, &deep, McConfig::new(seed))?
    };
    let mut mc_iter = mc.into_iter();
    for &n in n_list {
        if n <= EXACT_PREIMAGE_MAX_N {
            entries.push(CorrelationValue {
                n,
                value: preimage_measure(&a, &b, n)?,
                stderr: 0.0,
                method: Method::Exact,
                dropped: 0,
                converged: true,
            });
        } else {
            entries.push(mc_iter.next().expect("one MC entry per deep n"));
        }
    }
    Ok(ZeroTypeSeries { a, b, entries })
}

#[derive(Debug, Clone)]
pub struct GammaTruncation {
    /// `γₙ = min{Pⁿg(ā), Pⁿg}`.
    pub gamma: LocalObservable,
    pub cap: f64,
    /// `∫_{-ā}^{ā} (Pⁿg - γₙ) dm`.
    pub mass_outside: f64,
    pub gamma_l1: f64,
}

/// Flat truncation of `Pⁿg` at level `Pⁿg(ā)`.
pub fn gamma_truncation(g: &LocalObservable, n: usize, a_bar: f64) -> Result<GammaTruncation> {
    if n > N_MAX {
        return Err(LabError::Budget {
            what: "transfer depth",
            requested: n,
            limit: N_MAX,
        });
    }
    if !(a_bar > 0.0 && a_bar.is_finite()) {
        return Err(LabError::usage(format!("ā must be positive, got {a_bar}")));
    }
    let probe: Vec<f64> = (0..=1000).map(|i| 0.05 * i as f64).collect();
    let even = g.is_even() && probe.iter().all(|&x| g.eval(x) == g.eval(-x));
    let decreasing = probe.windows(2).all(|w| g.eval(w[1]) <= g.eval(w[0]));
    if !(even && decreasing) {
        return Err(LabError::usage(format!(
            "`{}` must be even and decreasing on ℝ⁺",
            g.name
        )));
    }
    let cap = iterate_transfer(g, n, a_bar)?;
    let inner = g.clone();
    let mut gamma = LocalObservable::from_fn(
        format!("gamma_{n}[{}]", g.name),
        move |x| cap.min(iterate_transfer(&inner, n, x).expect("depth checked")),
        cap,
        g.transfer_tail(n),
    );
    gamma.parity = g.parity;
    let pn = |x: f64| iterate_transfer(g, n, x).expect("depth checked");
    let excess = integrate_interval(|x| (pn(x) - cap).max(0.0), -a_bar, a_bar, 1e-9)?;
    let l1 = integrate_line(|x| gamma.eval(x), 1e-7, gamma.decay)?;
    Ok(GammaTruncation {
        gamma,
        cap,
        mass_outside: excess.value,
        gamma_l1: l1.value,
    })
}
