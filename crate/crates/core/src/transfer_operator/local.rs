use std::fmt;
use std::sync::Arc;

use crate::error::{LabError, Result};
use crate::quadrature::TailDecay;
use crate::stochastic::SampleLaw;

pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    None,
}

/// An integrable function `g ∈ L¹(m)`, optionally with analytic first and
/// second derivatives.
#[derive(Clone)]
pub struct LocalObservable {
    pub name: String,
    pub value: RealFn,
    pub d1: Option<RealFn>,
    pub d2: Option<RealFn>,
    pub parity: Parity,
    /// `‖g‖₁` when known in closed form.
    pub l1_norm_hint: Option<f64>,
    /// `sup |g|`.
    pub sup_norm: f64,
    pub decay: TailDecay,
    /// Law of `|g| / ‖g‖₁`, when it can be sampled (importance sampling).
    pub law: Option<SampleLaw>,
    /// Points where `g` is discontinuous.
    pub breakpoints: Vec<f64>,
}

impl fmt::Debug for LocalObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LocalObservable")
            .field("name", &self.name)
            .field("parity", &self.parity)
            .field("l1_norm_hint", &self.l1_norm_hint)
            .field("decay", &self.decay)
            .finish()
    }
}

impl LocalObservable {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.value)(x)
    }

    pub fn has_derivatives(&self) -> bool {
        self.d1.is_some() && self.d2.is_some()
    }

    pub fn is_even(&self) -> bool {
        self.parity == Parity::Even
    }

    /// `e^{-rate |x|}`; in the cone on `ℝ⁺` iff `rate < 1`.
    pub fn exp_abs(rate: f64) -> Result<Self> {
        if !(rate > 0.0 && rate.is_finite()) {
            return Err(LabError::usage(format!("exp_abs needs rate > 0, got {rate}")));
        }
        Ok(LocalObservable {
            name: format!("exp_abs({rate})"),
            value: Arc::new(move |x: f64| (-rate * x.abs()).exp()),
            d1: Some(Arc::new(move |x: f64| -rate * x.signum() * (-rate * x.abs()).exp())),
            d2: Some(Arc::new(move |x: f64| rate * rate * (-rate * x.abs()).exp())),
            parity: Parity::Even,
            l1_norm_hint: Some(2.0 / rate),
            sup_norm: 1.0,
            decay: TailDecay::Exponential {
                coefficient: 1.0,
                rate,
            },
            law: Some(SampleLaw::laplace(0.0, 1.0 / rate, 0)?),
            breakpoints: vec![0.0],
        })
    }

    /// `1/(1+|x|)²`.
    pub fn inverse_square() -> Self {
        LocalObservable {
            name: "inverse_square".into(),
            value: Arc::new(|x: f64| (1.0 + x.abs()).powi(-2)),
            d1: Some(Arc::new(|x: f64| -2.0 * x.signum() * (1.0 + x.abs()).powi(-3))),
            d2: Some(Arc::new(|x: f64| 6.0 * (1.0 + x.abs()).powi(-4))),
            parity: Parity::Even,
            l1_norm_hint: Some(2.0),
            sup_norm: 1.0,
            decay: TailDecay::PowerLaw {
                coefficient: 1.0,
                exponent: 2.0,
            },
            law: None,
            breakpoints: vec![0.0],
        }
    }

    /// `sign(x) e^{-x²}`: zero mean, `‖g‖₁ = √π`.
    pub fn gaussian_sign_split() -> Self {
        LocalObservable {
            name: "gaussian_sign_split".into(),
            value: Arc::new(|x: f64| {
                if x == 0.0 {
                    0.0
                } else {
                    x.signum() * (-x * x).exp()
                }
            }),
            d1: None,
            d2: None,
            parity: Parity::None,
            l1_norm_hint: Some(std::f64::consts::PI.sqrt()),
            sup_norm: 1.0,
            decay: TailDecay::Gaussian {
                coefficient: 1.0,
                rate: 1.0,
            },
            law: None,
            breakpoints: vec![0.0],
        }
    }

    /// Indicator of `[lo, hi]`.
    pub fn indicator(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(LabError::usage(format!("indicator needs lo < hi, got [{lo}, {hi}]")));
        }
        Ok(LocalObservable {
            name: format!("indicator[{lo},{hi}]"),
            value: Arc::new(move |x: f64| if x >= lo && x <= hi { 1.0 } else { 0.0 }),
            d1: None,
            d2: None,
            parity: if lo == -hi { Parity::Even } else { Parity::None },
            l1_norm_hint: Some(hi - lo),
            sup_norm: 1.0,
            decay: TailDecay::CompactSupport {
                radius: lo.abs().max(hi.abs()),
            },
            law: Some(SampleLaw::uniform(lo, hi, 0)?),
            breakpoints: vec![lo, hi],
        })
    }

    /// The density of a sampleable law; derivatives are attached for the
    /// normal family.
    pub fn from_law(law: &SampleLaw) -> Self {
        use crate::stochastic::LawKind;
        let l = law.clone();
        let (d1, d2): (Option<RealFn>, Option<RealFn>) = match law.kind {
            LawKind::Normal { mean, sd } => {
                let l1 = law.clone();
                let l2 = law.clone();
                (
                    Some(Arc::new(move |x: f64| -(x - mean) / (sd * sd) * l1.density(x))),
                    Some(Arc::new(move |x: f64| {
                        let z = (x - mean) / sd;
                        (z * z - 1.0) / (sd * sd) * l2.density(x)
                    })),
                )
            }
            _ => (None, None),
        };
        let sup_norm = match law.kind {
            LawKind::Normal { sd, .. } => 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt()),
            LawKind::Uniform { lo, hi } => 1.0 / (hi - lo),
            LawKind::Laplace { scale, .. } => 0.5 / scale,
            LawKind::Custom { .. } => f64::INFINITY,
        };
        LocalObservable {
            name: law.name(),
            value: Arc::new(move |x: f64| l.density(x)),
            d1,
            d2,
            parity: if law.is_symmetric() {
                Parity::Even
            } else {
                Parity::None
            },
            l1_norm_hint: Some(1.0),
            sup_norm,
            decay: law.decay(),
            law: Some(law.clone()),
            breakpoints: law.breakpoints(),
        }
    }

    /// An arbitrary function with no derivative data.
    pub fn from_fn(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        sup_norm: f64,
        decay: TailDecay,
    ) -> Self {
        LocalObservable {
            name: name.into(),
            value: Arc::new(f),
            d1: None,
            d2: None,
            parity: Parity::None,
            l1_norm_hint: None,
            sup_norm,
            decay,
            law: None,
            breakpoints: Vec::new(),
        }
    }

    pub fn with_parity(mut self, parity: Parity) -> Self {
        self.parity = parity;
        self
    }

    pub fn with_derivatives(
        mut self,
        d1: impl Fn(f64) -> f64 + Send + Sync + 'static,
        d2: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.d1 = Some(Arc::new(d1));
        self.d2 = Some(Arc::new(d2));
        self
    }

    /// Catalogue lookup for config files.
    pub fn catalogue(name: &str, params: &[(&str, f64)], seed: u64) -> Result<Self> {
        let get = |key: &str, default: Option<f64>| -> Result<f64> {
            params
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, v)| *v)
                .or(default)
                .ok_or_else(|| LabError::usage(format!("local observable `{name}` needs `{key}`")))
        };
        match name {
            "normal" => Ok(Self::from_law(&SampleLaw::normal(
                get("mean", Some(0.0))?,
                get("sd", Some(1.0))?,
                seed,
            )?)),
            "uniform" => Ok(Self::from_law(&SampleLaw::uniform(
                get("lo", None)?,
                get("hi", None)?,
                seed,
            )?)),
            "laplace" => Ok(Self::from_law(&SampleLaw::laplace(
                get("mean", Some(0.0))?,
                get("scale", Some(1.0))?,
                seed,
            )?)),
            "exp_abs" => Self::exp_abs(get("rate", Some(0.5))?),
            "inverse_square" => Ok(Self::inverse_square()),
            "gaussian_sign_split" => Ok(Self::gaussian_sign_split()),
            "indicator" => Self::indicator(get("lo", None)?, get("hi", None)?),
            other => Err(LabError::usage(format!("unknown local observable `{other}`"))),
        }
    }

    /// Tail bound for `Pⁿg`: the branch `φ₋` (or `φ₁`) feeds `sup|g|/x²` into
    /// the tail at each application, and `P` does not increase `sup|g|`, so
    /// `|Pⁿg(x)| ≤ (n·sup|g| + c)/x²` for `|x| ≥ 1` with `c` bounding `x²|g|`.
    pub fn transfer_tail(&self, n: usize) -> TailDecay {
        if n == 0 {
            return self.decay;
        }
        let c = match self.decay {
            TailDecay::CompactSupport { radius } => self.sup_norm * radius.max(1.0).powi(2),
            TailDecay::Exponential { coefficient, rate } => {
                let peak = 2.0 / rate;
                if peak >= 1.0 {
                    coefficient * peak * peak * (-2.0f64).exp()
                } else {
                    coefficient * (-rate).exp()
                }
            }
            TailDecay::Gaussian { coefficient, rate } => {
                if rate <= 1.0 {
                    coefficient / (rate * std::f64::consts::E)
                } else {
                    coefficient * (-rate).exp()
                }
            }
            TailDecay::PowerLaw {
                coefficient,
                exponent,
            } => {
                if exponent >= 2.0 {
                    coefficient
                } else {
                    // slower than 1/x²: keep the original rate
                    return TailDecay::PowerLaw {
                        coefficient: coefficient + n as f64 * self.sup_norm,
                        exponent,
                    };
                }
            }
        };
        TailDecay::PowerLaw {
            coefficient: n as f64 * self.sup_norm + c.max(self.sup_norm),
            exponent: 2.0,
        }
    }
}
