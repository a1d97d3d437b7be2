use crate::error::Result;
use crate::maps::{PHI_MINUS, PHI_PLUS};
use crate::quadrature::{integrate_line_with, IntegralResult, QuadOptions, TailDecay};
use crate::table::{float, Csv};
use crate::transfer_operator::LocalObservable;

/// Both sides of `∫ f dm = ∫ f∘T dm`.
#[derive(Debug, Clone, PartialEq)]
pub struct BooleIdentityReport {
    pub function: String,
    pub lhs: IntegralResult<f64>,
    pub rhs: IntegralResult<f64>,
    pub difference: f64,
}

impl BooleIdentityReport {
    pub fn converged(&self) -> bool {
        self.lhs.converged && self.rhs.converged
    }

    pub fn to_csv(&self) -> String {
        let mut csv = Csv::new(&["lhs", "rhs", "difference", "lhs_error", "rhs_error", "converged"]);
        csv.row(&[
            float(self.lhs.value),
            float(self.rhs.value),
            float(self.difference),
            float(self.lhs.abs_error_estimate),
            float(self.rhs.abs_error_estimate),
            self.converged().to_string(),
        ]);
        csv.finish()
    }
}

/// Decay of `f∘T` given the decay of `f`. For `|x| ≥ 2`,
/// `|T(x)| ≥ |x| - 1 ≥ |x|/2`.
pub fn pullback_decay(tail: TailDecay) -> TailDecay {
    match tail {
        TailDecay::CompactSupport { radius } => TailDecay::CompactSupport {
            radius: (PHI_PLUS.eval)(radius),
        },
        TailDecay::Exponential { coefficient, rate } => TailDecay::Exponential {
            coefficient: coefficient * rate.exp(),
            rate,
        },
        TailDecay::Gaussian { coefficient, rate } => TailDecay::Gaussian {
            coefficient,
            rate: rate / 4.0,
        },
        TailDecay::PowerLaw {
            coefficient,
            exponent,
        } => TailDecay::PowerLaw {
            coefficient: coefficient * 2f64.powf(exponent),
            exponent,
        },
    }
}

/// Integrates `f` and `f∘T` over `ℝ`. The right side is split at the branch
/// cut and at the preimages of the discontinuities of `f`.
pub fn boole_identity_check(f: &LocalObservable, tol: f64) -> Result<BooleIdentityReport> {
    let opts = QuadOptions::new(tol).with_breakpoints(f.breakpoints.iter().copied());
    let lhs = integrate_line_with(|x| f.eval(x), f.decay, &opts)?;
    let mut cuts = vec![0.0];
    for &b in &f.breakpoints {
        cuts.push((PHI_PLUS.eval)(b));
        cuts.push((PHI_MINUS.eval)(b));
    }
    let opts = QuadOptions::new(tol).with_breakpoints(cuts);
    let rhs = integrate_line_with(
        |x| if x == 0.0 { 0.0 } else { f.eval(x - 1.0 / x) },
        pullback_decay(f.decay),
        &opts,
    )?;
    Ok(BooleIdentityReport {
        function: f.name.clone(),
        difference: (lhs.value - rhs.value).abs(),
        lhs,
        rhs,
    })
}
