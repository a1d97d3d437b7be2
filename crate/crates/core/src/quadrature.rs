//! Globally adaptive Gauss-Kronrod (7/15) quadrature with explicit tail
//! truncation.
//!
//! Integrals over the whole line are truncated to `[-R, R]`, where `R` is
//! derived from a caller-supplied [`TailDecay`] so that the discarded tails
//! contribute less than half the requested tolerance. The remaining half is
//! the budget of the adaptive bisection.
//!
//! Panels are always summed left to right after refinement stops, so the
//! returned value does not depend on the order in which panels were split.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{LabError, Result};

/// Values a quadrature rule can accumulate.
pub trait QuadValue:
    Copy + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn magnitude(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn magnitude(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn magnitude(self) -> f64 {
        self.norm()
    }
}

/// Declared decay of `|f|` away from the origin, used to pick the truncation
/// radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailDecay {
    /// `f = 0` outside `[-radius, radius]`.
    CompactSupport { radius: f64 },
    /// `|f(x)| ≤ coefficient · exp(-rate |x|)`.
    Exponential { coefficient: f64, rate: f64 },
    /// `|f(x)| ≤ coefficient · exp(-rate x²)`.
    Gaussian { coefficient: f64, rate: f64 },
    /// `|f(x)| ≤ coefficient · |x|^(-exponent)` for `|x| ≥ 1`, `exponent > 1`.
    PowerLaw { coefficient: f64, exponent: f64 },
}

impl TailDecay {
    /// Smallest radius `R` for which one tail `∫_R^∞ |f|` is at most `budget`.
    pub fn truncation_radius(&self, budget: f64) -> f64 {
        match *self {
            TailDecay::CompactSupport { radius } => radius,
            TailDecay::Exponential { coefficient, rate } => {
                ((coefficient / (rate * budget)).ln() / rate).max(1.0)
            }
            TailDecay::Gaussian { coefficient, rate } => {
                // C e^{-αR²}/(2αR) is decreasing in R
                let tail = |r: f64| coefficient * (-rate * r * r).exp() / (2.0 * rate * r);
                let (mut lo, mut hi) = (1e-3, 1.0);
                while tail(hi) > budget {
                    lo = hi;
                    hi *= 2.0;
                }
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if tail(mid) > budget {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                hi.max(1.0)
            }
            TailDecay::PowerLaw {
                coefficient,
                exponent,
            } => {
                let p1 = exponent - 1.0;
                (coefficient / (p1 * budget)).powf(1.0 / p1).max(1.0)
            }
        }
    }

    /// Upper bound on `∫_R^∞ |f|`.
    pub fn tail_bound(&self, r: f64) -> f64 {
        match *self {
            TailDecay::CompactSupport { radius } => {
                if r >= radius {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            TailDecay::Exponential { coefficient, rate } => coefficient * (-rate * r).exp() / rate,
            TailDecay::Gaussian { coefficient, rate } => {
                coefficient * (-rate * r * r).exp() / (2.0 * rate * r)
            }
            TailDecay::PowerLaw {
                coefficient,
                exponent,
            } => coefficient * r.powf(1.0 - exponent) / (exponent - 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralResult<V> {
    pub value: V,
    pub abs_error_estimate: f64,
    /// Truncation radius `R` (the half-width for windows, `b - a` scale for
    /// plain intervals).
    pub truncation_radius: f64,
    pub subdivisions: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct QuadOptions {
    pub tol: f64,
    pub max_subdivisions: usize,
    /// Extra points that must be panel boundaries (known discontinuities).
    pub breakpoints: Vec<f64>,
}

impl QuadOptions {
    pub fn new(tol: f64) -> Self {
        QuadOptions {
            tol,
            max_subdivisions: DEFAULT_MAX_SUBDIVISIONS,
            breakpoints: Vec::new(),
        }
    }

    pub fn with_budget(mut self, max_subdivisions: usize) -> Self {
        self.max_subdivisions = max_subdivisions;
        self
    }

    pub fn with_breakpoints(mut self, points: impl IntoIterator<Item = f64>) -> Self {
        self.breakpoints.extend(points);
        self
    }
}

pub const DEFAULT_MAX_SUBDIVISIONS: usize = 200_000;

// Unit-width panels near the origin, geometric beyond.
const UNIT_PANEL_EXTENT: f64 = 64.0;
const MAX_INITIAL_PANELS: usize = 1 << 17;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod<V: QuadValue, F: Fn(f64) -> V>(f: &F, a: f64, b: f64) -> (V, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod = kronrod + pair * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).magnitude();
    (value, err)
}

#[derive(Clone, Copy)]
struct Panel<V> {
    a: f64,
    b: f64,
    value: V,
    err: f64,
}

// Heap key: largest error first, leftmost panel on ties.
struct Key {
    err: f64,
    a: f64,
    idx: usize,
}

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err
            .total_cmp(&other.err)
            .then_with(|| other.a.total_cmp(&self.a))
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

fn adaptive<V: QuadValue, F: Fn(f64) -> V>(f: &F, edges: &[f64], opts: &QuadOptions) -> (V, f64, usize, bool) {
    let mut panels: Vec<Panel<V>> = Vec::with_capacity(edges.len() * 2);
    let mut heap = BinaryHeap::new();
    let mut total_err = 0.0;
    for w in edges.windows(2) {
        let (value, err) = gauss_kronrod(f, w[0], w[1]);
        total_err += err;
        heap.push(Key {
            err,
            a: w[0],
            idx: panels.len(),
        });
        panels.push(Panel {
            a: w[0],
            b: w[1],
            value,
            err,
        });
    }
    let mut converged = total_err <= opts.tol;
    let mut splits = 0usize;
    while !converged {
        if panels.len() >= opts.max_subdivisions {
            break;
        }
        let Some(top) = heap.pop() else { break };
        let p = panels[top.idx];
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) || (p.b - p.a) <= 4.0 * f64::EPSILON * p.a.abs().max(p.b.abs()) {
            // Cannot be resolved further; keep its error in the total.
            if heap.is_empty() {
                break;
            }
            continue;
        }
        let (lv, le) = gauss_kronrod(f, p.a, mid);
        let (rv, re) = gauss_kronrod(f, mid, p.b);
        total_err += le + re - p.err;
        panels[top.idx] = Panel {
            a: p.a,
            b: mid,
            value: lv,
            err: le,
        };
        heap.push(Key {
            err: le,
            a: p.a,
            idx: top.idx,
        });
        heap.push(Key {
            err: re,
            a: mid,
            idx: panels.len(),
        });
        panels.push(Panel {
            a: mid,
            b: p.b,
            value: rv,
            err: re,
        });
        splits += 1;
        if splits.is_multiple_of(512) {
            total_err = panels.iter().map(|p| p.err).sum();
        }
        converged = total_err <= opts.tol;
    }
    panels.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut value = V::zero();
    let mut err = 0.0;
    for p in &panels {
        value = value + p.value;
        err += p.err;
    }
    (value, err, panels.len(), err <= opts.tol)
}

fn check_tol(tol: f64) -> Result<()> {
    if tol > 0.0 && tol.is_finite() {
        Ok(())
    } else {
        Err(LabError::usage(format!("tolerance must be positive, got {tol}")))
    }
}

fn merge_breakpoints(mut edges: Vec<f64>, extra: &[f64]) -> Vec<f64> {
    let (lo, hi) = (edges[0], edges[edges.len() - 1]);
    edges.extend(extra.iter().copied().filter(|&p| p > lo && p < hi));
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    edges
}

/// Panel edges for `[lo, hi]`: unit-spaced on integers for `|x| ≤ 64`,
/// geometrically spaced further out.
fn initial_edges(lo: f64, hi: f64) -> Vec<f64> {
    let width = hi - lo;
    if width <= 0.0 {
        return vec![lo, hi];
    }
    let mut edges = vec![lo, hi];
    let inner_lo = lo.max(-UNIT_PANEL_EXTENT);
    let inner_hi = hi.min(UNIT_PANEL_EXTENT);
    if inner_lo < inner_hi {
        let mut k = inner_lo.ceil();
        while k <= inner_hi {
            edges.push(k);
            k += 1.0;
        }
    }
    let mut r = UNIT_PANEL_EXTENT * 2.0;
    while r < hi || -r > lo {
        edges.push(r);
        edges.push(-r);
        r *= 2.0;
    }
    edges.retain(|&e| e >= lo && e <= hi);
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    edges
}

/// `∫_a^b f` with absolute tolerance `opts.tol`.
pub fn integrate_interval_with<V, F>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<IntegralResult<V>>
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    check_tol(opts.tol)?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(LabError::domain(format!("finite limits required, got [{a}, {b}]")));
    }
    if a == b {
        return Ok(IntegralResult {
            value: V::zero(),
            abs_error_estimate: 0.0,
            truncation_radius: 0.0,
            subdivisions: 1,
            converged: true,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let edges = merge_breakpoints(initial_edges(lo, hi), &opts.breakpoints);
    let (value, err, subdivisions, converged) = adaptive(&f, &edges, opts);
    Ok(IntegralResult {
        value: value * sign,
        abs_error_estimate: err,
        truncation_radius: lo.abs().max(hi.abs()),
        subdivisions,
        converged,
    })
}

pub fn integrate_interval<V, F>(f: F, a: f64, b: f64, tol: f64) -> Result<IntegralResult<V>>
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    integrate_interval_with(f, a, b, &QuadOptions::new(tol))
}

/// `∫_ℝ f`, truncated to `[-R, R]` according to `tail`.
pub fn integrate_line<V, F>(f: F, tol: f64, tail: TailDecay) -> Result<IntegralResult<V>>
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    integrate_line_with(f, tail, &QuadOptions::new(tol))
}

pub fn integrate_line_with<V, F>(f: F, tail: TailDecay, opts: &QuadOptions) -> Result<IntegralResult<V>>
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    check_tol(opts.tol)?;
    let r = tail.truncation_radius(opts.tol / 4.0);
    let tail_err = 2.0 * tail.tail_bound(r);
    let inner = QuadOptions {
        tol: opts.tol / 2.0,
        ..opts.clone()
    };
    let mut res = integrate_interval_with(f, -r, r, &inner)?;
    res.abs_error_estimate += tail_err;
    res.truncation_radius = r;
    Ok(res)
}

/// `∫_0^∞ f`, truncated to `[0, R]` according to `tail`.
pub fn integrate_half_line<V, F>(f: F, tol: f64, tail: TailDecay) -> Result<IntegralResult<V>>
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    check_tol(tol)?;
    let r = tail.truncation_radius(tol / 2.0);
    let tail_err = tail.tail_bound(r);
    let mut res = integrate_interval_with(f, 0.0, r, &QuadOptions::new(tol / 2.0))?;
    res.abs_error_estimate += tail_err;
    res.truncation_radius = r;
    Ok(res)
}

/// `∫_{-a}^{a} f`.
pub fn integrate_window<V, F>(f: F, a: f64, tol: f64) -> Result<IntegralResult<V>>
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    integrate_window_with(f, a, &QuadOptions::new(tol))
}

pub fn integrate_window_with<V, F>(f: F, a: f64, opts: &QuadOptions) -> Result<IntegralResult<V>>
where
    V: QuadValue,
    F: Fn(f64) -> V,
{
    if !(a > 0.0 && a.is_finite()) {
        return Err(LabError::domain(format!("window half-width must be positive, got {a}")));
    }
    check_tol(opts.tol)?;
    let mut edges = if 2.0 * a <= MAX_INITIAL_PANELS as f64 {
        // integer-aligned unit panels over the whole window
        let mut e: Vec<f64> = vec![-a, a];
        let mut k = (-a).ceil();
        while k <= a {
            e.push(k);
            k += 1.0;
        }
        e
    } else {
        let n = MAX_INITIAL_PANELS;
        (0..=n).map(|i| -a + 2.0 * a * i as f64 / n as f64).collect()
    };
    edges.sort_by(f64::total_cmp);
    edges.dedup();
    let edges = merge_breakpoints(edges, &opts.breakpoints);
    let (value, err, subdivisions, converged) = adaptive(&f, &edges, opts);
    Ok(IntegralResult {
        value,
        abs_error_estimate: err,
        truncation_radius: a,
        subdivisions,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gaussian_integral() {
        let r: IntegralResult<f64> = integrate_line(
            |x: f64| (-x * x).exp(),
            1e-8,
            TailDecay::Gaussian {
                coefficient: 1.0,
                rate: 1.0,
            },
        )
        .unwrap();
        assert!(r.converged);
        assert!((r.value - PI.sqrt()).abs() < 1e-8);
        assert!(r.abs_error_estimate <= 1e-8);
        assert!(r.subdivisions >= 1);
    }

    #[test]
    fn indicator_integral() {
        let r: IntegralResult<f64> = integrate_line(
            |x: f64| if x.abs() <= 1.0 { 1.0 } else { 0.0 },
            1e-8,
            TailDecay::CompactSupport { radius: 1.0 },
        )
        .unwrap();
        assert!((r.value - 2.0).abs() < 1e-8);
    }

    #[test]
    fn odd_integrand_vanishes() {
        let r: IntegralResult<f64> = integrate_line(
            |x: f64| x * (-x * x).exp(),
            1e-8,
            TailDecay::Gaussian {
                coefficient: 1.0,
                rate: 0.5,
            },
        )
        .unwrap();
        assert!(r.value.abs() < 1e-8);
    }

    #[test]
    fn window_examples() {
        let square = |x: f64| if x.floor().rem_euclid(2.0) == 0.0 { 1.0 } else { -1.0 };
        let r: IntegralResult<f64> = integrate_window(square, 17.0, 1e-10).unwrap();
        assert_eq!(r.value, 0.0);
        let r: IntegralResult<f64> = integrate_window(|_| 1.0, 5.0, 1e-10).unwrap();
        assert!((r.value - 10.0).abs() < 1e-12);
        let r: IntegralResult<f64> = integrate_window(f64::sin, PI, 1e-10).unwrap();
        assert!(r.value.abs() < 1e-10);
        assert!(integrate_window(|_| 1.0, 0.0, 1e-8).map(|r: IntegralResult<f64>| r.value).is_err());
    }

    #[test]
    fn complex_integrand() {
        // ∫_0^1 e^{iθx} dx = (e^{iθ} - 1)/(iθ)
        let theta = 3.7;
        let r: IntegralResult<Complex64> =
            integrate_interval(|x: f64| Complex64::new(0.0, theta * x).exp(), 0.0, 1.0, 1e-12).unwrap();
        let exact = (Complex64::new(0.0, theta).exp() - 1.0) / Complex64::new(0.0, theta);
        assert!((r.value - exact).norm() < 1e-12);
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let r: IntegralResult<f64> = integrate_interval_with(
            |x: f64| (1.0 / x).sin(),
            1e-9,
            1.0,
            &QuadOptions::new(1e-14).with_budget(50),
        )
        .unwrap();
        assert!(!r.converged);
        assert!(r.value.is_finite());
    }

    #[test]
    fn reversed_limits_flip_sign() {
        let a: IntegralResult<f64> = integrate_interval(|x: f64| x * x, 0.0, 2.0, 1e-12).unwrap();
        let b: IntegralResult<f64> = integrate_interval(|x: f64| x * x, 2.0, 0.0, 1e-12).unwrap();
        assert!((a.value - 8.0 / 3.0).abs() < 1e-12);
        assert_eq!(a.value, -b.value);
    }

    #[test]
    fn power_law_tail_radius() {
        let t = TailDecay::PowerLaw {
            coefficient: 1.0,
            exponent: 2.0,
        };
        let r = t.truncation_radius(1e-4);
        assert!((r - 1e4).abs() < 1e-6);
        assert!(t.tail_bound(r) <= 1e-4 * (1.0 + 1e-12));
        let r: IntegralResult<f64> =
            integrate_line(|x: f64| 1.0 / (1.0 + x * x), 1e-6, t).unwrap();
        assert!((r.value - PI).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(integrate_interval(|x: f64| x, 0.0, 1.0, 0.0).map(|r: IntegralResult<f64>| r.value).is_err());
        assert!(integrate_interval(|x: f64| x, 0.0, 1.0, f64::NAN).map(|r: IntegralResult<f64>| r.value).is_err());
    }

    #[test]
    fn summation_is_reproducible() {
        let f = |x: f64| (3.0 * x).cos() * (-x.abs()).exp();
        let tail = TailDecay::Exponential {
            coefficient: 1.0,
            rate: 1.0,
        };
        let a: IntegralResult<f64> = integrate_line(f, 1e-10, tail).unwrap();
        let b: IntegralResult<f64> = integrate_line(f, 1e-10, tail).unwrap();
        assert_eq!(a.value.to_bits(), b.value.to_bits());
        assert!((a.value - 0.2).abs() < 1e-9);
    }
}
