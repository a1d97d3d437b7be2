//! Exact evaluation of the Perron-Frobenius operator of the Boole map.
//!
//! `(Pg)(x) = |φ₊'(x)| g(φ₊(x)) + |φ₋'(x)| g(φ₋(x))`, and `Pⁿg(x)` is the sum
//! over all `2ⁿ` branch words `w = (b₁ … bₙ)` of
//! `|(φ_w)'(x)| g(φ_w(x))`, `φ_w = φ_{bₙ} ∘ … ∘ φ_{b₁}`. The sum is computed
//! by depth-first recursion in lexicographic word order, carrying the
//! composed branch and its derivatives forward (chain rule / Faà di Bruno up
//! to order three), so `Pⁿg`, `(Pⁿg)'` and `(Pⁿg)''` are all exact up to
//! rounding. No grid or matrix discretization is involved.
//!
//! For even `g` the folded operator `P̃` on `ℝ⁺` gives the same values with
//! the branches `φ₀`, `φ₁`.

mod local;

pub use local::{LocalObservable, Parity, RealFn};

use rayon::prelude::*;

use crate::error::{LabError, Result};
use crate::maps::{BranchInverse, PHI_MINUS, PHI_ONE, PHI_PLUS, PHI_ZERO};
use crate::quadrature::{integrate_line_with, QuadOptions};

/// Default cap on the number of transfer-operator applications.
pub const N_MAX: usize = 22;

pub const BOOLE_BRANCHES: [BranchInverse; 2] = [PHI_PLUS, PHI_MINUS];
pub const FOLDED_BRANCHES: [BranchInverse; 2] = [PHI_ZERO, PHI_ONE];

/// Value and first two derivatives of a function at a point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// `(Pg)(x)` with the two Boole branches.
pub fn apply_transfer(g: &LocalObservable, x: f64) -> f64 {
    let mut acc = 0.0;
    for b in &BOOLE_BRANCHES {
        acc += (b.d1)(x).abs() * g.eval((b.eval)(x));
    }
    acc
}

/// `(P̃g)(x) = φ₀'(x) g(φ₀(x)) - φ₁'(x) g(φ₁(x))` for `x ≥ 0`.
pub fn apply_transfer_folded(g: &LocalObservable, x: f64) -> Result<f64> {
    if x < 0.0 || x.is_nan() {
        return Err(LabError::domain(format!("folded operator defined on x ≥ 0, got {x}")));
    }
    let mut acc = 0.0;
    for b in &FOLDED_BRANCHES {
        acc += (b.d1)(x).abs() * g.eval((b.eval)(x));
    }
    Ok(acc)
}

fn check_depth(n: usize) -> Result<()> {
    if n > N_MAX {
        return Err(LabError::Budget {
            what: "transfer iterations",
            requested: n,
            limit: N_MAX,
        });
    }
    Ok(())
}

fn sum_words(branches: &[BranchInverse], g: &dyn Fn(f64) -> f64, depth: usize, y: f64, w: f64, acc: &mut f64) {
    if depth == 0 {
        *acc += w * g(y);
        return;
    }
    for b in branches {
        let slope = (b.d1)(y).abs();
        sum_words(branches, g, depth - 1, (b.eval)(y), w * slope, acc);
    }
}

/// `Lⁿg(x)` for the transfer operator `L` built from `branches`.
pub fn transfer_power(branches: &[BranchInverse], g: &dyn Fn(f64) -> f64, n: usize, x: f64) -> f64 {
    let mut acc = 0.0;
    sum_words(branches, g, n, x, 1.0, &mut acc);
    acc
}

// (y, y', y'', y''') of the composed inverse branch as functions of x.
type Jet3 = [f64; 4];

fn jet_words(
    branches: &[BranchInverse],
    g: &LocalObservable,
    g1: &RealFn,
    g2: &RealFn,
    depth: usize,
    y: Jet3,
    acc: &mut Jet,
) {
    if depth == 0 {
        let [v, y1, y2, y3] = y;
        let s = y1.signum();
        let (gv, gd1, gd2) = (g.eval(v), g1(v), g2(v));
        acc.value += s * y1 * gv;
        acc.d1 += s * (y2 * gv + y1 * y1 * gd1);
        acc.d2 += s * (y3 * gv + 3.0 * y1 * y2 * gd1 + y1 * y1 * y1 * gd2);
        return;
    }
    for b in branches {
        let [p0, p1, p2, p3] = b.jet(y[0]);
        let [_, y1, y2, y3] = y;
        let z = [
            p0,
            p1 * y1,
            p2 * y1 * y1 + p1 * y2,
            p3 * y1 * y1 * y1 + 3.0 * p2 * y1 * y2 + p1 * y3,
        ];
        jet_words(branches, g, g1, g2, depth - 1, z, acc);
    }
}

/// `(Lⁿg, (Lⁿg)', (Lⁿg)'')(x)` by forward-mode recursion over `branches`.
pub fn transfer_power_jet(branches: &[BranchInverse], g: &LocalObservable, n: usize, x: f64) -> Result<Jet> {
    check_depth(n)?;
    let (Some(g1), Some(g2)) = (&g.d1, &g.d2) else {
        return Err(LabError::usage(format!(
            "`{}` has no analytic derivatives",
            g.name
        )));
    };
    let mut acc = Jet::default();
    jet_words(branches, g, g1, g2, n, [x, 1.0, 0.0, 0.0], &mut acc);
    Ok(acc)
}

/// `Pⁿg(x)`. Even `g` is routed through the folded operator at `|x|`.
pub fn iterate_transfer(g: &LocalObservable, n: usize, x: f64) -> Result<f64> {
    check_depth(n)?;
    let f = |y: f64| g.eval(y);
    Ok(if g.is_even() {
        transfer_power(&FOLDED_BRANCHES, &f, n, x.abs())
    } else {
        transfer_power(&BOOLE_BRANCHES, &f, n, x)
    })
}

/// `P̃ⁿg(x)` and its first two derivatives, `x ≥ 0`.
pub fn iterate_transfer_folded_jet(g: &LocalObservable, n: usize, x: f64) -> Result<Jet> {
    if x < 0.0 || x.is_nan() {
        return Err(LabError::domain(format!("folded operator defined on x ≥ 0, got {x}")));
    }
    transfer_power_jet(&FOLDED_BRANCHES, g, n, x)
}

/// `Pⁿg` at many points, in parallel; output order matches `xs`.
pub fn iterate_transfer_many(g: &LocalObservable, n: usize, xs: &[f64]) -> Result<Vec<f64>> {
    check_depth(n)?;
    xs.par_iter().map(|&x| iterate_transfer(g, n, x)).collect()
}

/// `Pⁿg` as a new local observable (value only).
pub fn transferred(g: &LocalObservable, n: usize) -> Result<LocalObservable> {
    check_depth(n)?;
    let inner = g.clone();
    let mut out = LocalObservable::from_fn(
        format!("P^{n} {}", g.name),
        move |x| iterate_transfer(&inner, n, x).expect("depth checked"),
        g.sup_norm,
        g.transfer_tail(n),
    );
    out.parity = g.parity;
    out.l1_norm_hint = if g.law.is_some() || n == 0 { g.l1_norm_hint } else { None };
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinDiagnostic {
    pub n: usize,
    pub l1_norm: f64,
    pub abs_error_estimate: f64,
    pub converged: bool,
}

/// `‖Pⁿg‖₁` for a zero-mean `g`. Exactness of `T` means this tends to 0.
pub fn lin_diagnostic(g: &LocalObservable, n: usize, tol: f64) -> Result<LinDiagnostic> {
    check_depth(n)?;
    let opts = QuadOptions::new(1e-10).with_breakpoints(g.breakpoints.iter().copied());
    let mean = integrate_line_with(|x| g.eval(x), g.decay, &opts)?;
    if mean.value.abs() > 1e-8 {
        return Err(LabError::usage(format!(
            "Lin diagnostic needs m(g) = 0, got {}",
            mean.value
        )));
    }
    let opts = QuadOptions::new(tol).with_breakpoints(if n == 0 { g.breakpoints.clone() } else { Vec::new() });
    let norm = integrate_line_with(
        |x| iterate_transfer(g, n, x).expect("depth checked").abs(),
        g.transfer_tail(n),
        &opts,
    )?;
    Ok(LinDiagnostic {
        n,
        l1_norm: norm.value,
        abs_error_estimate: norm.abs_error_estimate,
        converged: norm.converged,
    })
}
