//! Global observables and the infinite-volume average
//!
//! ```text
//! Av(F) = lim_{a→∞} (1/2a) ∫_{-a}^{a} F dm
//! ```
//!
//! The limit is estimated on a geometric schedule of windows. Periodic
//! observables with a declared period are averaged exactly over one period
//! and the windowed estimate is kept as a cross-check.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{LabError, Result};
use crate::quadrature::{integrate_interval_with, integrate_window_with, IntegralResult, QuadOptions};

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type ComplexFn = Arc<dyn Fn(f64) -> Complex64 + Send + Sync>;

#[derive(Clone)]
pub enum ObservableFn {
    Real(RealFn),
    Complex(ComplexFn),
}

/// A bounded function on `ℝ` whose infinite-volume average is expected to
/// exist.
#[derive(Clone)]
pub struct GlobalObservable {
    pub name: String,
    pub func: ObservableFn,
    pub sup_norm_bound: f64,
    /// `Av(F)` when known in closed form.
    pub exact_av: Option<Complex64>,
    /// `θ ↦ Av(e^{iθF})` when known in closed form.
    pub exact_cf: Option<ComplexFn>,
    pub period: Option<f64>,
    pub uniform_cont_at_infinity: bool,
    /// Oscillates without limit near 0 (e.g. `F ∘ T`). Window integrals then
    /// skip `(-1/a₀, 1/a₀)` and book `sup|F| · 2/a₀` as error instead.
    pub singular_at_origin: bool,
    /// Isolated jump points, used as quadrature breakpoints.
    pub jumps: Vec<f64>,
}

impl fmt::Debug for GlobalObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GlobalObservable")
            .field("name", &self.name)
            .field("sup_norm_bound", &self.sup_norm_bound)
            .field("exact_av", &self.exact_av)
            .field("period", &self.period)
            .finish()
    }
}

fn complex(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

/// `∫₀¹ e^{iθx} dx`.
pub fn uniform_cf(theta: f64) -> Complex64 {
    if theta.abs() < 1e-8 {
        // 1 + iθ/2 - θ²/6
        return Complex64::new(1.0 - theta * theta / 6.0, 0.5 * theta);
    }
    (Complex64::new(0.0, theta).exp() - 1.0) / Complex64::new(0.0, theta)
}

impl GlobalObservable {
    fn real(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static, sup: f64) -> Self {
        GlobalObservable {
            name: name.into(),
            func: ObservableFn::Real(Arc::new(f)),
            sup_norm_bound: sup,
            exact_av: None,
            exact_cf: None,
            period: None,
            uniform_cont_at_infinity: false,
            singular_at_origin: false,
            jumps: Vec::new(),
        }
    }

    pub fn from_fn(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static, sup: f64) -> Self {
        Self::real(name, f, sup)
    }

    pub fn from_complex_fn(
        name: impl Into<String>,
        f: impl Fn(f64) -> Complex64 + Send + Sync + 'static,
        sup: f64,
    ) -> Self {
        GlobalObservable {
            func: ObservableFn::Complex(Arc::new(f)),
            ..Self::real(name, |_| 0.0, sup)
        }
    }

    #[inline]
    pub fn eval(&self, x: f64) -> Complex64 {
        match &self.func {
            ObservableFn::Real(f) => complex(f(x)),
            ObservableFn::Complex(f) => f(x),
        }
    }

    pub fn is_real(&self) -> bool {
        matches!(self.func, ObservableFn::Real(_))
    }

    /// The real-valued function, or a usage error for complex observables.
    pub fn real_fn(&self) -> Result<&RealFn> {
        match &self.func {
            ObservableFn::Real(f) => Ok(f),
            ObservableFn::Complex(_) => Err(LabError::usage(format!(
                "`{}` is complex-valued; a real observable is required",
                self.name
            ))),
        }
    }

    pub fn with_exact_av(mut self, av: Complex64) -> Self {
        self.exact_av = Some(av);
        self
    }

    pub fn with_period(mut self, p: f64) -> Self {
        self.period = Some(p);
        self
    }

    /// Square wave: `1` on `[2n, 2n+1)`, `-1` on `[2n+1, 2n+2)`.
    pub fn square_wave() -> Self {
        let mut f = Self::real(
            "square_wave",
            |x| if x.floor().rem_euclid(2.0) == 0.0 { 1.0 } else { -1.0 },
            1.0,
        );
        f.exact_av = Some(complex(0.0));
        f.exact_cf = Some(Arc::new(|t: f64| complex(t.cos())));
        f.period = Some(2.0);
        f
    }

    /// Smooth representative with limits `ℓ±` at `±∞`:
    /// `ℓ₋ + (ℓ₊ - ℓ₋)(1 + tanh x)/2`.
    pub fn two_limits(l_plus: f64, l_minus: f64) -> Self {
        let mut f = Self::real(
            format!("two_limits({l_plus},{l_minus})"),
            move |x| l_minus + (l_plus - l_minus) * 0.5 * (1.0 + x.tanh()),
            l_plus.abs().max(l_minus.abs()),
        );
        f.exact_av = Some(complex(0.5 * (l_plus + l_minus)));
        f.exact_cf = Some(Arc::new(move |t: f64| {
            0.5 * (Complex64::new(0.0, t * l_plus).exp() + Complex64::new(0.0, t * l_minus).exp())
        }));
        f.uniform_cont_at_infinity = true;
        f
    }

    /// Sharp version: `ℓ₊` for `x > 0`, `ℓ₋` otherwise.
    pub fn two_limits_sharp(l_plus: f64, l_minus: f64) -> Self {
        let mut f = Self::two_limits(l_plus, l_minus);
        f.name = format!("two_limits_sharp({l_plus},{l_minus})");
        f.func = ObservableFn::Real(Arc::new(move |x| if x > 0.0 { l_plus } else { l_minus }));
        f.uniform_cont_at_infinity = false;
        f.jumps = vec![0.0];
        f
    }

    /// `eˣ/(eˣ+1) + cos(((eˣ+1)/(eˣ+2)) x)`: no limit at either end, but
    /// distinguishes them.
    pub fn exotic() -> Self {
        let mut f = Self::real(
            "exotic",
            |x| {
                let (logistic, ratio) = if x > 0.0 {
                    let e = (-x).exp();
                    (1.0 / (1.0 + e), (1.0 + e) / (1.0 + 2.0 * e))
                } else {
                    let e = x.exp();
                    (e / (e + 1.0), (e + 1.0) / (e + 2.0))
                };
                logistic + (ratio * x).cos()
            },
            2.0,
        );
        f.exact_av = Some(complex(0.5));
        f
    }

    pub fn sine() -> Self {
        let mut f = Self::real("sine", f64::sin, 1.0);
        f.exact_av = Some(complex(0.0));
        f.period = Some(2.0 * PI);
        f.uniform_cont_at_infinity = true;
        f
    }

    /// Indicator of `[a, b]`; `Av = 0`.
    pub fn indicator(a: f64, b: f64) -> Result<Self> {
        if !(a < b && a.is_finite() && b.is_finite()) {
            return Err(LabError::usage(format!("indicator needs a < b, got [{a}, {b}]")));
        }
        let mut f = Self::real(
            format!("indicator[{a},{b}]"),
            move |x| if x >= a && x <= b { 1.0 } else { 0.0 },
            1.0,
        );
        f.exact_av = Some(complex(0.0));
        f.exact_cf = Some(Arc::new(|_| complex(1.0)));
        f.jumps = vec![a, b];
        Ok(f)
    }

    pub fn constant(c: f64) -> Self {
        let mut f = Self::real(format!("constant({c})"), move |_| c, c.abs());
        f.exact_av = Some(complex(c));
        f.exact_cf = Some(Arc::new(move |t: f64| Complex64::new(0.0, t * c).exp()));
        f.period = Some(1.0);
        f.uniform_cont_at_infinity = true;
        f
    }

    /// `{x} = x - ⌊x⌋`.
    pub fn fractional_part() -> Self {
        let mut f = Self::real("fractional_part", |x| x - x.floor(), 1.0);
        f.exact_av = Some(complex(0.5));
        f.exact_cf = Some(Arc::new(uniform_cf));
        f.period = Some(1.0);
        f
    }

    /// Continuous 2-periodic tent: `x - ⌊x⌋` if `⌊x⌋` is even,
    /// `1 - x + ⌊x⌋` if odd.
    pub fn tent_periodized() -> Self {
        let mut f = Self::real("tent_periodized", tent, 1.0);
        f.exact_av = Some(complex(0.5));
        f.exact_cf = Some(Arc::new(uniform_cf));
        f.period = Some(2.0);
        f.uniform_cont_at_infinity = true;
        f
    }

    /// `Φ⁻¹ ∘ tent`: bounded, continuous and 2-periodic when `Φ⁻¹` is
    /// continuous; `Av(e^{iθF}) = ∫₀¹ e^{iθΦ⁻¹(x)} dx`.
    pub fn inverse_cdf_periodized(cdf: Cdf) -> Self {
        let sup = match &cdf {
            Cdf::Table(t) => t.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            Cdf::Callable(_) => {
                let lo = generalized_inverse(&cdf, 0.0).unwrap_or(f64::NEG_INFINITY);
                let hi = generalized_inverse(&cdf, 1.0 - f64::EPSILON).unwrap_or(f64::INFINITY);
                lo.abs().max(hi.abs())
            }
        };
        let c = cdf.clone();
        let mut f = Self::real(
            "inverse_cdf_periodized",
            move |x| {
                let u = tent(x).min(1.0 - f64::EPSILON / 2.0);
                generalized_inverse(&c, u).expect("u in [0,1)")
            },
            sup,
        );
        f.period = Some(2.0);
        f.uniform_cont_at_infinity = true;
        f
    }

    /// Catalogue lookup by name.
    pub fn catalogue(name: &str, params: &[(&str, f64)]) -> Result<Self> {
        let get = |key: &str, default: Option<f64>| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .or(default)
                .ok_or_else(|| LabError::usage(format!("observable `{name}` needs `{key}`")))
        };
        match name {
            "square_wave" => Ok(Self::square_wave()),
            "two_limits" => Ok(Self::two_limits(get("l_plus", Some(1.0))?, get("l_minus", Some(0.0))?)),
            "two_limits_sharp" => Ok(Self::two_limits_sharp(
                get("l_plus", Some(1.0))?,
                get("l_minus", Some(0.0))?,
            )),
            "exotic" => Ok(Self::exotic()),
            "sine" => Ok(Self::sine()),
            "indicator" => Self::indicator(get("a", None)?, get("b", None)?),
            "constant" => Ok(Self::constant(get("value", Some(1.0))?)),
            "fractional_part" => Ok(Self::fractional_part()),
            "tent_periodized" => Ok(Self::tent_periodized()),
            "inverse_cdf_periodized" => {
                // uniform(lo, hi) quantiles by default; `sd` selects a normal
                if let Ok(sd) = get("sd", None) {
                    let mean = get("mean", Some(0.0))?;
                    let law = crate::stochastic::SampleLaw::normal(mean, sd, 0)?;
                    Ok(Self::inverse_cdf_periodized(Cdf::Callable(Arc::new(move |y| {
                        law.cdf(y).expect("normal has a cdf")
                    }))))
                } else {
                    let lo = get("lo", Some(0.0))?;
                    let hi = get("hi", Some(1.0))?;
                    if !(lo < hi) {
                        return Err(LabError::usage("inverse_cdf_periodized needs lo < hi"));
                    }
                    Ok(Self::inverse_cdf_periodized(Cdf::Callable(Arc::new(move |y| {
                        ((y - lo) / (hi - lo)).clamp(0.0, 1.0)
                    }))))
                }
            }
            other => Err(LabError::usage(format!("unknown observable `{other}`"))),
        }
    }

    /// `F ∘ T`. No closed-form data is carried over.
    pub fn compose_with_boole(&self) -> Self {
        let inner = self.clone();
        let name = format!("{}∘T", self.name);
        let func = match &self.func {
            ObservableFn::Real(f) => {
                let f = f.clone();
                ObservableFn::Real(Arc::new(move |x| if x == 0.0 { 0.0 } else { f(x - 1.0 / x) }))
            }
            ObservableFn::Complex(_) => ObservableFn::Complex(Arc::new(move |x| {
                if x == 0.0 {
                    complex(0.0)
                } else {
                    inner.eval(x - 1.0 / x)
                }
            })),
        };
        GlobalObservable {
            name,
            func,
            sup_norm_bound: self.sup_norm_bound,
            exact_av: None,
            exact_cf: None,
            period: None,
            uniform_cont_at_infinity: false,
            singular_at_origin: true,
            jumps: Vec::new(),
        }
    }

    /// `αF + βG`.
    pub fn combine(alpha: f64, f: &GlobalObservable, beta: f64, g: &GlobalObservable) -> Self {
        let (f2, g2) = (f.clone(), g.clone());
        let func = if f.is_real() && g.is_real() {
            let (rf, rg) = (f.real_fn().unwrap().clone(), g.real_fn().unwrap().clone());
            ObservableFn::Real(Arc::new(move |x| alpha * rf(x) + beta * rg(x)))
        } else {
            ObservableFn::Complex(Arc::new(move |x| alpha * f2.eval(x) + beta * g2.eval(x)))
        };
        let period = match (f.period, g.period) {
            (Some(p), Some(q)) if p == q => Some(p),
            _ => None,
        };
        GlobalObservable {
            name: format!("{alpha}·{} + {beta}·{}", f.name, g.name),
            func,
            sup_norm_bound: alpha.abs() * f.sup_norm_bound + beta.abs() * g.sup_norm_bound,
            exact_av: None,
            exact_cf: None,
            period,
            uniform_cont_at_infinity: f.uniform_cont_at_infinity && g.uniform_cont_at_infinity,
            singular_at_origin: f.singular_at_origin || g.singular_at_origin,
            jumps: f.jumps.iter().chain(&g.jumps).copied().collect(),
        }
    }

    /// `x ↦ e^{iθF(x)}`.
    pub fn exp_i_theta(&self, theta: f64) -> Result<Self> {
        let f = self.real_fn()?.clone();
        let mut g = GlobalObservable::from_complex_fn(
            format!("exp(i{theta}·{})", self.name),
            move |x| Complex64::new(0.0, theta * f(x)).exp(),
            1.0,
        );
        g.period = self.period;
        g.singular_at_origin = self.singular_at_origin;
        g.uniform_cont_at_infinity = self.uniform_cont_at_infinity;
        g.jumps = self.jumps.clone();
        g.exact_av = self.exact_cf.as_ref().map(|cf| cf(theta));
        Ok(g)
    }
}

fn tent(x: f64) -> f64 {
    let fl = x.floor();
    if fl.rem_euclid(2.0) == 0.0 {
        x - fl
    } else {
        1.0 - x + fl
    }
}

/// Geometric window schedule for the Av estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AvSchedule {
    pub a0: f64,
    pub max_stages: usize,
    /// Number of successive stages that must agree within the tolerance.
    pub agree: usize,
}

impl Default for AvSchedule {
    fn default() -> Self {
        AvSchedule {
            a0: 64.0,
            max_stages: 20,
            agree: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvEstimate {
    /// Period mean when a period is declared, otherwise the last window average.
    pub value: Complex64,
    /// `(a, (1/2a)∫_{-a}^{a} F)` per stage.
    pub window_sequence: Vec<(f64, Complex64)>,
    pub converged: bool,
    pub tolerance: f64,
    /// One-period mean for periodic observables.
    pub period_mean: Option<Complex64>,
    /// `|value - exact_av|` when the observable carries an exact value.
    pub exact_deviation: Option<f64>,
}

impl AvEstimate {
    pub fn last_window_average(&self) -> Option<Complex64> {
        self.window_sequence.last().map(|w| w.1)
    }
}

fn window_piece(f: &GlobalObservable, lo: f64, hi: f64, tol: f64) -> Result<IntegralResult<Complex64>> {
    let opts = QuadOptions::new(tol).with_budget(1_000_000);
    integrate_interval_with(|x| f.eval(x), lo, hi, &opts)
}

/// Estimate `Av(F)`.
pub fn infinite_volume_average(f: &GlobalObservable, tol: f64, schedule: AvSchedule) -> Result<AvEstimate> {
    if !(tol > 0.0) {
        return Err(LabError::usage(format!("tolerance must be positive, got {tol}")));
    }
    if !f.sup_norm_bound.is_finite() {
        return Err(LabError::usage(format!("`{}` is not bounded", f.name)));
    }
    if schedule.agree < 2 || schedule.max_stages < schedule.agree || !(schedule.a0 > 0.0) {
        return Err(LabError::usage("invalid Av schedule"));
    }

    let period_mean = match f.period {
        Some(p) => {
            let r = window_piece(f, 0.0, p, 1e-12 * p.max(1.0))?;
            Some(r.value / p)
        }
        None => None,
    };

    // ∫ over [-a, a] accumulated incrementally; the core (-ε, ε) is skipped
    // for observables that oscillate without limit at 0.
    let core = if f.singular_at_origin { 1.0 / schedule.a0 } else { 0.0 };
    let mut windows = Vec::with_capacity(schedule.max_stages);
    let mut total = Complex64::new(0.0, 0.0);
    let mut inner = core;
    let mut a = schedule.a0;
    let mut converged = false;
    for _ in 0..schedule.max_stages {
        let piece_tol = 0.05 * a * tol;
        let (right, left) = if inner == 0.0 && !f.singular_at_origin {
            let r = integrate_window_with(|x| f.eval(x), a, &QuadOptions::new(2.0 * piece_tol).with_budget(1_000_000))?;
            (r.value, Complex64::new(0.0, 0.0))
        } else {
            let r = window_piece(f, inner, a, piece_tol)?;
            let l = window_piece(f, -a, -inner, piece_tol)?;
            (r.value, l.value)
        };
        total += right + left;
        windows.push((a, total / (2.0 * a)));
        inner = a;
        a *= 2.0;
        let n = windows.len();
        // the period mean is the answer; windows are only diagnostics
        if period_mean.is_some() && n >= schedule.agree {
            break;
        }
        if n >= schedule.agree {
            let tail = &windows[n - schedule.agree..];
            let agree = tail
                .iter()
                .all(|u| tail.iter().all(|v| (u.1 - v.1).norm() < tol));
            if agree {
                converged = true;
                break;
            }
        }
    }
    let value = period_mean.unwrap_or_else(|| windows.last().expect("at least one stage").1);
    let exact_deviation = f.exact_av.map(|e| (e - value).norm());
    Ok(AvEstimate {
        value,
        window_sequence: windows,
        converged: converged || period_mean.is_some(),
        tolerance: tol,
        period_mean,
        exact_deviation,
    })
}

/// `φ_X(θ) = Av(e^{iθF})` for a real observable.
pub fn characteristic_average(f: &GlobalObservable, theta: f64, tol: f64) -> Result<AvEstimate> {
    let g = f.exp_i_theta(theta)?;
    infinite_volume_average(&g, tol, AvSchedule::default())
}

/// A distribution function, either as a callable or as the empirical CDF
/// of a sample table.
#[derive(Clone)]
pub enum Cdf {
    Callable(RealFn),
    /// Sorted samples.
    Table(Vec<f64>),
}

impl fmt::Debug for Cdf {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cdf::Callable(_) => f.write_str("Cdf::Callable"),
            Cdf::Table(t) => write!(f, "Cdf::Table({} samples)", t.len()),
        }
    }
}

impl Cdf {
    pub fn from_samples(mut samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() || samples.iter().any(|v| v.is_nan()) {
            return Err(LabError::usage("sample table must be nonempty and NaN-free"));
        }
        samples.sort_by(f64::total_cmp);
        Ok(Cdf::Table(samples))
    }
}

/// Right-continuous generalized inverse `Φ⁻¹(x) = inf{y : Φ(y) > x}`,
/// `x ∈ [0, 1)`.
pub fn generalized_inverse(cdf: &Cdf, x: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&x) {
        return Err(LabError::domain(format!("generalized inverse needs x in [0,1), got {x}")));
    }
    match cdf {
        Cdf::Table(t) => {
            // #{s ≤ y}/N > x first holds at the ⌊xN⌋-th order statistic
            let k = ((x * t.len() as f64).floor() as usize).min(t.len() - 1);
            Ok(t[k])
        }
        Cdf::Callable(phi) => {
            let mut hi = 1.0f64;
            let mut guard = 0;
            while phi(hi) <= x {
                hi *= 2.0;
                guard += 1;
                if guard > 1100 {
                    return Ok(f64::INFINITY);
                }
            }
            let mut lo = -1.0f64;
            guard = 0;
            while phi(lo) > x {
                lo *= 2.0;
                guard += 1;
                if guard > 1100 {
                    return Ok(f64::NEG_INFINITY);
                }
            }
            for _ in 0..2000 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if phi(mid) > x {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Ok(hi)
        }
    }
}
