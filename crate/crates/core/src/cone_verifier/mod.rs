//! Grid verification of the cone `ℱ = {g > 0, g' < 0, g'' + g' < 0}` and of
//! the hypotheses (H1)-(H4) on the inverse branches `φ₀`, `φ₁` of a map of
//! `ℝ⁺`.
//!
//! Grid scans only see finitely many points. Verdicts say so: a hypothesis
//! passes outright only when a tail certificate covers the rest of `ℝ⁺`,
//! and is reported as grid-only otherwise.

mod polynomial;

pub use polynomial::{synthetic_substitution, IntPolynomial, SyntheticDivision};

use std::fmt;
use std::fmt::Write as _;

use num_bigint::BigInt;
use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::maps::{BranchInverse, BranchLabel, Interval, MapDomain, PiecewiseMap};
use crate::quadrature::integrate_interval;
use crate::table::{float, Csv};
use crate::transfer_operator::{iterate_transfer_folded_jet, LocalObservable};

/// Evaluation grid on `ℝ⁺`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub points: Vec<f64>,
    pub description: String,
}

impl Grid {
    /// `count` points `lo·rⁱ`, `i = 1..=count`, ending at `hi`.
    pub fn geometric(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo > 0.0 && hi > lo && count > 0) {
            return Err(LabError::usage(format!("bad geometric grid ({lo}, {hi}] x {count}")));
        }
        let r = (hi / lo).ln() / count as f64;
        let mut points: Vec<f64> = (1..=count).map(|i| lo * (r * i as f64).exp()).collect();
        *points.last_mut().expect("count > 0") = hi;
        Ok(Grid {
            points,
            description: format!("geometric ({lo}, {hi}] x {count}"),
        })
    }

    /// The default verification grid: 10⁴ geometric points on `(1e-3, 1e3]`.
    pub fn standard() -> Self {
        Self::geometric(1e-3, 1e3, 10_000).expect("valid constants")
    }

    pub fn uniform(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(hi > lo && count >= 2) {
            return Err(LabError::usage(format!("bad uniform grid [{lo}, {hi}] x {count}")));
        }
        let h = (hi - lo) / (count - 1) as f64;
        Ok(Grid {
            points: (0..count).map(|i| lo + h * i as f64).collect(),
            description: format!("uniform [{lo}, {hi}] x {count}"),
        })
    }

    /// Adds `count` uniform points on `[x - w, x + w] ∩ (0, ∞)`.
    pub fn refined_near(mut self, x: f64, w: f64, count: usize) -> Self {
        let lo = (x - w).max(f64::MIN_POSITIVE);
        let h = (x + w - lo) / count.max(1) as f64;
        self.points.extend((0..=count).map(|i| lo + h * i as f64));
        self.points.sort_by(f64::total_cmp);
        self.points.dedup();
        self.description = format!("{} + {count} near {x}", self.description);
        self
    }
}

/// Smallest slack of a strict inequality over a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margin {
    pub min: f64,
    /// Lowest grid point attaining `min`.
    pub witness: f64,
}

impl Margin {
    pub fn holds(&self) -> bool {
        self.min > 0.0
    }
}

/// Minimum of `f` over `points`, evaluated in parallel; ties go to the
/// earliest point.
fn min_margin(points: &[f64], f: impl Fn(f64) -> f64 + Sync) -> Margin {
    let vals: Vec<f64> = points.par_iter().map(|&x| f(x)).collect();
    let mut best = Margin {
        min: f64::INFINITY,
        witness: f64::NAN,
    };
    for (&x, &v) in points.iter().zip(&vals) {
        // NaN slack counts as a violation
        let v = if v.is_nan() { f64::NEG_INFINITY } else { v };
        if v < best.min {
            best = Margin { min: v, witness: x };
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeCheck {
    pub observable: String,
    pub grid: String,
    /// `k` in `P̃ᵏg` (0 for the input itself).
    pub k: usize,
    pub positive: Margin,
    pub decreasing: Margin,
    /// Slack of `g'' + g' < 0`.
    pub convex_drift: Margin,
}

impl ConeCheck {
    pub fn pass(&self) -> bool {
        self.positive.holds() && self.decreasing.holds() && self.convex_drift.holds()
    }
}

fn cone_check_from(name: &str, grid: &Grid, k: usize, jet: impl Fn(f64) -> [f64; 3] + Sync) -> ConeCheck {
    let jets: Vec<[f64; 3]> = grid.points.par_iter().map(|&x| jet(x)).collect();
    let pick = |sel: &dyn Fn(&[f64; 3]) -> f64| {
        let mut m = Margin {
            min: f64::INFINITY,
            witness: f64::NAN,
        };
        for (&x, j) in grid.points.iter().zip(&jets) {
            let v = sel(j);
            let v = if v.is_nan() { f64::NEG_INFINITY } else { v };
            if v < m.min {
                m = Margin { min: v, witness: x };
            }
        }
        m
    };
    ConeCheck {
        observable: name.to_string(),
        grid: grid.description.clone(),
        k,
        positive: pick(&|j| j[0]),
        decreasing: pick(&|j| -j[1]),
        convex_drift: pick(&|j| -(j[2] + j[1])),
    }
}

/// Checks `g > 0`, `g' < 0`, `g'' + g' < 0` on the grid.
pub fn cone_membership(g: &LocalObservable, grid: &Grid) -> Result<ConeCheck> {
    let (Some(d1), Some(d2)) = (&g.d1, &g.d2) else {
        return Err(LabError::usage(format!("`{}` has no analytic derivatives", g.name)));
    };
    Ok(cone_check_from(&g.name, grid, 0, |x| [g.eval(x), d1(x), d2(x)]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct IteratedConeReport {
    pub checks: Vec<ConeCheck>,
    /// Whether the input itself passed; later verdicts carry no claim otherwise.
    pub input_in_cone: bool,
}

/// `P̃ᵏg` for `k = 0..=k_max` through the forward-mode recursion.
pub fn iterated_cone_check(g: &LocalObservable, k_max: usize, grid: &Grid) -> Result<IteratedConeReport> {
    if k_max > 6 {
        return Err(LabError::Budget {
            what: "cone iteration depth",
            requested: k_max,
            limit: 6,
        });
    }
    let first = cone_membership(g, grid)?;
    let input_in_cone = first.pass();
    let mut checks = vec![first];
    for k in 1..=k_max {
        let check = cone_check_from(&g.name, grid, k, |x| {
            let j = iterate_transfer_folded_jet(g, k, x).expect("grid on ℝ⁺ and depth ≤ 6");
            [j.value, j.d1, j.d2]
        });
        checks.push(check);
    }
    Ok(IteratedConeReport { checks, input_in_cone })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferDerivatives {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    /// Both integral terms met their tolerance.
    pub converged: bool,
}

/// `(Lg)(x)`, `(Lg)'(x)`, `(Lg)''(x)` for the folded operator from the
/// integral representations, with `∫_{φ₁}^{φ₀} g'` and `∫_{φ₁}^{φ₀} g''` by
/// quadrature.
pub fn transfer_derivatives(g: &LocalObservable, x: f64) -> Result<TransferDerivatives> {
    let (Some(d1), Some(d2)) = (&g.d1, &g.d2) else {
        return Err(LabError::usage(format!("`{}` has no analytic derivatives", g.name)));
    };
    if !(x >= 0.0) {
        return Err(LabError::domain(format!("folded operator defined on x ≥ 0, got {x}")));
    }
    let map = PiecewiseMap::folded();
    let [p0, p0d1, _, _] = map.branch(BranchLabel::Zero)?.jet(x);
    let [p1, p1d1, p1d2, p1d3] = map.branch(BranchLabel::One)?.jet(x);
    let i1 = integrate_interval(|t| d1(t), p1, p0, 1e-13)?;
    let i2 = integrate_interval(|t| d2(t), p1, p0, 1e-13)?;
    let (g0, g1) = (g.eval(p0), g.eval(p1));
    let (dg0, dg1) = (d1(p0), d1(p1));
    let (ddg0, ddg1) = (d2(p0), d2(p1));
    let value = p0d1 * g0 - p1d1 * g1;
    let first = p1d2 * i1.value + p1d1 * p1d1 * i2.value + dg0 * (1.0 + 2.0 * p1d1);
    let second = p1d3 * i1.value + 3.0 * p1d2 * p0d1 * dg0 - 3.0 * p1d2 * p1d1 * dg1 + p0d1.powi(3) * ddg0
        - p1d1.powi(3) * ddg1;
    Ok(TransferDerivatives {
        value,
        d1: first,
        d2: second,
        converged: i1.converged && i2.converged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hypothesis {
    H1,
    H2i,
    H2ii,
    H3,
    H4i,
    H4ii,
    H4iii,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 7] = [
        Hypothesis::H1,
        Hypothesis::H2i,
        Hypothesis::H2ii,
        Hypothesis::H3,
        Hypothesis::H4i,
        Hypothesis::H4ii,
        Hypothesis::H4iii,
    ];

    pub fn statement(self) -> &'static str {
        match self {
            Hypothesis::H1 => "φ₀(0) = φ₁(0), φ₀ increasing, φ₁ decreasing",
            Hypothesis::H2i => "0 < φ₀' < 1",
            Hypothesis::H2ii => "-1 < φ₁' < 0",
            Hypothesis::H3 => "φ₀' - φ₁' = 1",
            Hypothesis::H4i => "1 + 2φ₁' > 0",
            Hypothesis::H4ii => "φ₁'' - φ₁'² > 0",
            Hypothesis::H4iii => "(φ₁''' + φ₁'' > 0 and 3φ₁'' - φ₁'² + φ₁' > 0) or φ₁''' + φ₁'' - φ₁'² > 0",
        }
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::H1 => "H1",
            Hypothesis::H2i => "H2i",
            Hypothesis::H2ii => "H2ii",
            Hypothesis::H3 => "H3",
            Hypothesis::H4i => "H4i",
            Hypothesis::H4ii => "H4ii",
            Hypothesis::H4iii => "H4iii",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Pass,
    /// Holds on the grid; nothing covers the rest of `ℝ⁺`.
    GridOnly,
    Fail,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::GridOnly => "grid-only",
            Verdict::Fail => "fail",
        })
    }
}

/// Analytic argument for the part of `ℝ⁺` the grid does not reach. The
/// description is data; `holds` records whatever could be checked of it.
#[derive(Debug, Clone, PartialEq)]
pub struct TailCertificate {
    pub hypothesis: Hypothesis,
    pub description: String,
    pub holds: bool,
}

/// Identity tolerance for (H3).
pub const H3_TOLERANCE: f64 = 1e-12;

/// Certificates for the folded Boole map.
pub fn boole_tail_certificates() -> Result<Vec<TailCertificate>> {
    let map = PiecewiseMap::folded();
    let p0 = map.branch(BranchLabel::Zero)?;
    let p1 = map.branch(BranchLabel::One)?;
    let far = 1e8;
    let division = synthetic_substitution(&IntPolynomial::boole_b(), &BigInt::from(4))?;
    let cert = |h, d: &str, holds| TailCertificate {
        hypothesis: h,
        description: d.to_string(),
        holds,
    };
    Ok(vec![
        cert(
            Hypothesis::H1,
            "φ₀(0) = φ₁(0) = 1; φ₀(x) = (x + √(x²+4))/2 → ∞ and φ₁(x) = 2/(x + √(x²+4)) → 0⁺",
            (p0.eval)(0.0) == 1.0 && (p1.eval)(0.0) == 1.0 && (p1.eval)(far) > 0.0,
        ),
        cert(
            Hypothesis::H2i,
            "φ₀' = 1/2 + x/(2√(x²+4)) increases from 1/2 to 1",
            ((p0.d1)(0.0) - 0.5).abs() < 1e-15 && (p0.d1)(far) < 1.0,
        ),
        cert(
            Hypothesis::H2ii,
            "φ₁' = φ₀' - 1 increases from -1/2 to 0⁻",
            ((p1.d1)(0.0) + 0.5).abs() < 1e-15 && (p1.d1)(far) < 0.0,
        ),
        cert(
            Hypothesis::H3,
            "φ₀' - φ₁' = 1 identically (closed forms)",
            ((p0.d1)(far) - (p1.d1)(far) - 1.0).abs() < H3_TOLERANCE,
        ),
        cert(Hypothesis::H4i, "1 + 2φ₁' = x/√(x²+4) > 0 for x > 0", true),
        cert(
            Hypothesis::H4ii,
            "φ₁'' - φ₁'² = -[√(x²+4)(√(x²+4) - x)² - 8]/(4(x²+4)^{3/2}); the bracket vanishes at 0 and has derivative (3x√(x²+4) - 3x² - 8)(√(x²+4) - x)/√(x²+4) < 0",
            true,
        ),
        cert(
            Hypothesis::H4iii,
            &format!(
                "(4, ∞) ⊂ B: p(x) = (x - 4){} + {} with positive quotient and remainder; (0, 5) ⊂ A₁ ∩ A₂ on the grid",
                division.quotient, division.remainder
            ),
            division.root_bound_certificate(),
        ),
    ])
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisResult {
    pub hypothesis: Hypothesis,
    pub grid: String,
    pub margin: Margin,
    pub tail: Option<TailCertificate>,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub map: String,
    pub results: Vec<HypothesisResult>,
    pub overall: Verdict,
    pub sets: Option<H4Sets>,
}

impl HypothesisReport {
    pub fn get(&self, h: Hypothesis) -> &HypothesisResult {
        self.results
            .iter()
            .find(|r| r.hypothesis == h)
            .expect("every hypothesis is checked")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "map: {}", self.map);
        for r in &self.results {
            let _ = writeln!(
                s,
                "{:<6} {:<9} min_margin={} witness={}  [{}]",
                r.hypothesis.to_string(),
                r.verdict.to_string(),
                float(r.margin.min),
                float(r.margin.witness),
                r.hypothesis.statement()
            );
            if let Some(t) = &r.tail {
                let _ = writeln!(s, "       tail ({}): {}", if t.holds { "holds" } else { "does not hold" }, t.description);
            }
        }
        if let Some(sets) = &self.sets {
            s.push_str(&sets.to_text());
        }
        let _ = writeln!(s, "overall: {}", self.overall);
        s
    }

    /// One row per hypothesis.
    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["hypothesis", "verdict", "min_margin", "witness", "tail_certificate"]);
        for r in &self.results {
            csv.row(&[
                r.hypothesis.to_string(),
                r.verdict.to_string(),
                float(r.margin.min),
                float(r.margin.witness),
                match &r.tail {
                    Some(t) if t.holds => "holds".to_string(),
                    Some(_) => "fails".to_string(),
                    None => "none".to_string(),
                },
            ]);
        }
        csv.finish()
    }
}

fn branch_pair(map: &PiecewiseMap) -> Result<(BranchInverse, BranchInverse)> {
    if map.domain != MapDomain::HalfLine {
        return Err(LabError::usage(format!(
            "hypotheses (H1)-(H4) concern maps of ℝ⁺; `{}` is not one",
            map.name
        )));
    }
    Ok((*map.branch(BranchLabel::Zero)?, *map.branch(BranchLabel::One)?))
}

/// Per-point slack of each hypothesis.
fn slack(h: Hypothesis, p0: &BranchInverse, p1: &BranchInverse, x: f64) -> f64 {
    let [_, a1, _, _] = p0.jet(x);
    let [_, b1, b2, b3] = p1.jet(x);
    match h {
        Hypothesis::H1 => {
            let anchor = (p0.eval)(0.0) - (p1.eval)(0.0);
            if anchor != 0.0 {
                -anchor.abs()
            } else {
                a1.min(-b1)
            }
        }
        Hypothesis::H2i => a1.min(1.0 - a1),
        Hypothesis::H2ii => (b1 + 1.0).min(-b1),
        Hypothesis::H3 => H3_TOLERANCE - (a1 - b1 - 1.0).abs(),
        Hypothesis::H4i => 1.0 + 2.0 * b1,
        Hypothesis::H4ii => b2 - b1 * b1,
        Hypothesis::H4iii => {
            let (a_1, a_2, b) = h4_expressions(b1, b2, b3);
            a_1.min(a_2).max(b)
        }
    }
}

/// `(φ₁''' + φ₁'', 3φ₁'' - φ₁'² + φ₁', φ₁''' + φ₁'' - φ₁'²)`.
fn h4_expressions(d1: f64, d2: f64, d3: f64) -> (f64, f64, f64) {
    (d3 + d2, 3.0 * d2 - d1 * d1 + d1, d3 + d2 - d1 * d1)
}

/// Scans (H1)-(H4) on `grid`; `certificates` cover the rest of `ℝ⁺`.
pub fn hypothesis_check(map: &PiecewiseMap, grid: &Grid, certificates: &[TailCertificate]) -> Result<HypothesisReport> {
    let (p0, p1) = branch_pair(map)?;
    let mut results = Vec::with_capacity(7);
    for h in Hypothesis::ALL {
        let margin = min_margin(&grid.points, |x| slack(h, &p0, &p1, x));
        let tail = certificates.iter().find(|c| c.hypothesis == h).cloned();
        let verdict = if !margin.holds() {
            Verdict::Fail
        } else if tail.as_ref().is_some_and(|t| t.holds) {
            Verdict::Pass
        } else {
            Verdict::GridOnly
        };
        results.push(HypothesisResult {
            hypothesis: h,
            grid: grid.description.clone(),
            margin,
            tail,
            verdict,
        });
    }
    let overall = if results.iter().any(|r| r.verdict == Verdict::Fail) {
        Verdict::Fail
    } else if results.iter().all(|r| r.verdict == Verdict::Pass) {
        Verdict::Pass
    } else {
        Verdict::GridOnly
    };
    Ok(HypothesisReport {
        map: map.name.to_string(),
        results,
        overall,
        sets: None,
    })
}

/// (H1)-(H4) for the folded Boole map with its certificates and the sets
/// `A₁`, `A₂`, `B`.
pub fn boole_hypothesis_report(grid: &Grid) -> Result<HypothesisReport> {
    let map = PiecewiseMap::folded();
    let mut report = hypothesis_check(&map, grid, &boole_tail_certificates()?)?;
    let sets = h4_sets(&map, grid, 1e-12)?;
    // the (H4)(iii) certificate leans on (0, 5) ⊂ A₁ ∩ A₂ from the scan
    if !sets.inclusion_a {
        let r = report
            .results
            .iter_mut()
            .find(|r| r.hypothesis == Hypothesis::H4iii)
            .expect("checked");
        if r.verdict == Verdict::Pass {
            r.verdict = Verdict::GridOnly;
            report.overall = Verdict::GridOnly;
        }
    }
    report.sets = Some(sets);
    Ok(report)
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

fn bisect(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let s_lo = sign(f(lo));
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let s = sign(f(mid));
        if s == 0 {
            return mid;
        }
        if s == s_lo {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignScan {
    /// Refined zeros, ascending.
    pub roots: Vec<f64>,
    /// Sign at the first grid point.
    pub initial_sign: i8,
    /// A near-zero local minimum without sign change survived refinement.
    pub flagged: bool,
}

impl SignScan {
    /// Whether the expression is positive at `x` according to the scan.
    pub fn positive_at(&self, x: f64) -> bool {
        let crossings = self.roots.iter().filter(|&&r| r < x).count();
        (self.initial_sign > 0) == (crossings % 2 == 0)
    }
}

/// Sign changes of `f` on `points`, bisected to `tol`. Cells holding a local
/// minimum of `|f|` are rescanned at 100x resolution to catch pairs of
/// roots within one cell.
pub fn sign_scan(f: &(dyn Fn(f64) -> f64 + Sync), points: &[f64], tol: f64) -> SignScan {
    let vals: Vec<f64> = points.par_iter().map(|&x| f(x)).collect();
    let mut roots = Vec::new();
    let mut flagged = false;
    for i in 0..points.len().saturating_sub(1) {
        let (a, b) = (points[i], points[i + 1]);
        let (fa, fb) = (vals[i], vals[i + 1]);
        if sign(fa) != sign(fb) {
            if fa == 0.0 {
                roots.push(a);
            } else {
                roots.push(bisect(f, a, b, tol));
            }
            continue;
        }
        let is_local_min = i > 0 && fa.abs() <= vals[i - 1].abs() && fa.abs() <= fb.abs();
        if is_local_min {
            let lo = points[i - 1];
            let sub: Vec<f64> = (0..=256).map(|j| lo + (b - lo) * j as f64 / 256.0).collect();
            let sv: Vec<f64> = sub.iter().map(|&x| f(x)).collect();
            let mut found = false;
            for j in 0..sub.len() - 1 {
                if sv[j] == 0.0 && j > 0 {
                    roots.push(sub[j]);
                    found = true;
                } else if sv[j] != 0.0 && sv[j + 1] != 0.0 && sign(sv[j]) != sign(sv[j + 1]) {
                    roots.push(bisect(f, sub[j], sub[j + 1], tol));
                    found = true;
                }
            }
            if !found && sv.iter().any(|v| v.abs() < 1e-14) {
                flagged = true;
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= tol);
    SignScan {
        roots,
        initial_sign: sign(vals[0]),
        flagged,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct H4Sets {
    pub a1: SignScan,
    pub a2: SignScan,
    pub b: SignScan,
    /// `(0, 5) ⊂ A₁ ∩ A₂` at every grid point below 5.
    pub inclusion_a: bool,
    /// `(4, ∞) ⊂ B`: grid points above 4 plus the root-bound certificate.
    pub inclusion_b: bool,
    /// `(A₁ ∩ A₂) ∪ B` contains every grid point.
    pub covers_grid: bool,
}

impl H4Sets {
    pub fn x1(&self) -> Option<f64> {
        self.a2.roots.last().copied()
    }

    pub fn x2(&self) -> Option<f64> {
        self.b.roots.first().copied()
    }

    pub fn x3(&self) -> Option<f64> {
        self.b.roots.get(1).copied()
    }

    pub fn flagged(&self) -> bool {
        self.a1.flagged || self.a2.flagged || self.b.flagged
    }

    pub fn to_text(&self) -> String {
        let fmt = |v: Option<f64>| v.map(float).unwrap_or_else(|| "none".to_string());
        let mut s = String::new();
        let _ = writeln!(s, "A1 sign changes: {}", self.a1.roots.len());
        let _ = writeln!(s, "A2 = (0, x1), x1 = {}", fmt(self.x1()));
        let _ = writeln!(s, "B = (0, x2) u (x3, inf), x2 = {}, x3 = {}", fmt(self.x2()), fmt(self.x3()));
        let _ = writeln!(s, "(0,5) in A1 n A2: {}", self.inclusion_a);
        let _ = writeln!(s, "(4,inf) in B: {}", self.inclusion_b);
        let _ = writeln!(s, "(A1 n A2) u B covers grid: {}", self.covers_grid);
        s
    }
}

/// Locates the boundaries of `A₁`, `A₂`, `B` by sign scans and checks the
/// inclusions used for (H4)(iii).
pub fn h4_sets(map: &PiecewiseMap, grid: &Grid, refine_tol: f64) -> Result<H4Sets> {
    let (_, p1) = branch_pair(map)?;
    let expr = |x: f64| {
        let [_, d1, d2, d3] = p1.jet(x);
        h4_expressions(d1, d2, d3)
    };
    let a1 = sign_scan(&|x| expr(x).0, &grid.points, refine_tol);
    let a2 = sign_scan(&|x| expr(x).1, &grid.points, refine_tol);
    let b = sign_scan(&|x| expr(x).2, &grid.points, refine_tol);
    let mut inclusion_a = true;
    let mut inclusion_b_grid = true;
    let mut covers = true;
    for &x in &grid.points {
        let (e1, e2, e3) = expr(x);
        if x < 5.0 && !(e1 > 0.0 && e2 > 0.0) {
            inclusion_a = false;
        }
        if x > 4.0 && e3 <= 0.0 {
            inclusion_b_grid = false;
        }
        if !((e1 > 0.0 && e2 > 0.0) || e3 > 0.0) {
            covers = false;
        }
    }
    let certificate = synthetic_substitution(&IntPolynomial::boole_b(), &BigInt::from(4))?.root_bound_certificate();
    let inclusion_b = inclusion_b_grid && (map.name != "folded" || certificate);
    Ok(H4Sets {
        a1,
        a2,
        b,
        inclusion_a,
        inclusion_b,
        covers_grid: covers,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialConsistency {
    pub checked: usize,
    /// Points skipped because `|expression| ≤ 1e-12`.
    pub skipped: usize,
    /// First grid point where the signs disagree.
    pub mismatch: Option<f64>,
}

impl PolynomialConsistency {
    pub fn pass(&self) -> bool {
        self.mismatch.is_none() && self.checked > 0
    }
}

/// `φ₁''' + φ₁'' - φ₁'²` for the folded Boole map.
pub fn boole_b_expression(x: f64) -> f64 {
    let [_, d1, d2, d3] = crate::maps::PHI_ONE.jet(x);
    h4_expressions(d1, d2, d3).2
}

/// Sign of the `B` expression against the sign of `p` on the grid.
pub fn boole_b_polynomial_consistency(grid: &Grid) -> PolynomialConsistency {
    let p = IntPolynomial::boole_b();
    let mut checked = 0;
    let mut skipped = 0;
    let mut mismatch = None;
    for &x in &grid.points {
        let e = boole_b_expression(x);
        if e.abs() <= 1e-12 {
            skipped += 1;
            continue;
        }
        checked += 1;
        if sign(e) != sign(p.eval_f64(x)) && mismatch.is_none() {
            mismatch = Some(x);
        }
    }
    PolynomialConsistency {
        checked,
        skipped,
        mismatch,
    }
}

fn doubling_phi0(x: f64) -> f64 {
    1.0 + 0.5 * x
}
fn doubling_phi0_d1(_: f64) -> f64 {
    0.5
}
fn zero(_: f64) -> f64 {
    0.0
}
fn doubling_phi1(x: f64) -> f64 {
    x / (1.0 + x)
}
fn doubling_phi1_d1(x: f64) -> f64 {
    (1.0 + x).powi(-2)
}
fn doubling_phi1_d2(x: f64) -> f64 {
    -2.0 * (1.0 + x).powi(-3)
}
fn doubling_phi1_d3(x: f64) -> f64 {
    6.0 * (1.0 + x).powi(-4)
}

/// A map of `ℝ⁺` with two increasing branches, `x ↦ 2(x - 1)` on `[1, ∞)`
/// and `x ↦ x/(1 - x)` on `[0, 1)`: a negative control for (H2)(ii).
pub fn doubling_surrogate() -> PiecewiseMap {
    PiecewiseMap {
        name: "doubling_surrogate",
        forward: |x| {
            if x < 0.0 {
                None
            } else if x >= 1.0 {
                Some(2.0 * (x - 1.0))
            } else {
                Some(x / (1.0 - x))
            }
        },
        branches: vec![
            BranchInverse {
                label: BranchLabel::Zero,
                eval: doubling_phi0,
                d1: doubling_phi0_d1,
                d2: zero,
                d3: zero,
                domain: Interval::new(0.0, f64::INFINITY),
                range: Interval::new(1.0, f64::INFINITY),
            },
            BranchInverse {
                label: BranchLabel::One,
                eval: doubling_phi1,
                d1: doubling_phi1_d1,
                d2: doubling_phi1_d2,
                d3: doubling_phi1_d3,
                domain: Interval::new(0.0, f64::INFINITY),
                range: Interval::new(0.0, 1.0),
            },
        ],
        partition: vec![1.0],
        domain: MapDomain::HalfLine,
    }
}
