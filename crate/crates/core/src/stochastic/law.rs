use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{LabError, Result};
use crate::quadrature::TailDecay;

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type SamplerFn = Arc<dyn Fn(&mut ChaCha8Rng) -> f64 + Send + Sync>;

/// Parametric family of an initial law `ν ≪ m`.
#[derive(Clone)]
pub enum LawKind {
    Normal { mean: f64, sd: f64 },
    Uniform { lo: f64, hi: f64 },
    Laplace { mean: f64, scale: f64 },
    /// Any density with a matching sampler.
    Custom {
        name: String,
        density: DensityFn,
        sampler: SamplerFn,
        cdf: Option<DensityFn>,
        decay: TailDecay,
        symmetric: bool,
    },
}

impl fmt::Debug for LawKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LawKind::Normal { mean, sd } => write!(f, "normal({mean}, {sd})"),
            LawKind::Uniform { lo, hi } => write!(f, "uniform({lo}, {hi})"),
            LawKind::Laplace { mean, scale } => write!(f, "laplace({mean}, {scale})"),
            LawKind::Custom { name, .. } => write!(f, "custom({name})"),
        }
    }
}

/// An absolutely continuous probability law together with the master seed
/// used to sample it.
#[derive(Clone, Debug)]
pub struct SampleLaw {
    pub kind: LawKind,
    pub seed: u64,
}

impl SampleLaw {
    pub fn normal(mean: f64, sd: f64, seed: u64) -> Result<Self> {
        if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
            return Err(LabError::usage(format!("normal law needs sd > 0, got {sd}")));
        }
        Ok(SampleLaw {
            kind: LawKind::Normal { mean, sd },
            seed,
        })
    }

    pub fn uniform(lo: f64, hi: f64, seed: u64) -> Result<Self> {
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(LabError::usage(format!("uniform law needs lo < hi, got [{lo}, {hi}]")));
        }
        Ok(SampleLaw {
            kind: LawKind::Uniform { lo, hi },
            seed,
        })
    }

    pub fn laplace(mean: f64, scale: f64, seed: u64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite() && mean.is_finite()) {
            return Err(LabError::usage(format!("laplace law needs scale > 0, got {scale}")));
        }
        Ok(SampleLaw {
            kind: LawKind::Laplace { mean, scale },
            seed,
        })
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn name(&self) -> String {
        format!("{:?}", self.kind)
    }

    pub fn density(&self, x: f64) -> f64 {
        match &self.kind {
            LawKind::Normal { mean, sd } => {
                let z = (x - mean) / sd;
                (-0.5 * z * z).exp() / (sd * (2.0 * PI).sqrt())
            }
            LawKind::Uniform { lo, hi } => {
                if x >= *lo && x <= *hi {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            LawKind::Laplace { mean, scale } => (-(x - mean).abs() / scale).exp() / (2.0 * scale),
            LawKind::Custom { density, .. } => density(x),
        }
    }

    pub fn cdf(&self, x: f64) -> Option<f64> {
        match &self.kind {
            LawKind::Normal { mean, sd } => Some(0.5 * statrs::function::erf::erfc(-(x - mean) / (sd * SQRT_2))),
            LawKind::Uniform { lo, hi } => Some(((x - lo) / (hi - lo)).clamp(0.0, 1.0)),
            LawKind::Laplace { mean, scale } => {
                let z = (x - mean) / scale;
                Some(if z < 0.0 {
                    0.5 * z.exp()
                } else {
                    1.0 - 0.5 * (-z).exp()
                })
            }
            LawKind::Custom { cdf, .. } => cdf.as_ref().map(|c| c(x)),
        }
    }

    pub fn mean(&self) -> Option<f64> {
        match &self.kind {
            LawKind::Normal { mean, .. } | LawKind::Laplace { mean, .. } => Some(*mean),
            LawKind::Uniform { lo, hi } => Some(0.5 * (lo + hi)),
            LawKind::Custom { .. } => None,
        }
    }

    pub fn sd(&self) -> Option<f64> {
        match &self.kind {
            LawKind::Normal { sd, .. } => Some(*sd),
            LawKind::Uniform { lo, hi } => Some((hi - lo) / 12f64.sqrt()),
            LawKind::Laplace { scale, .. } => Some(scale * SQRT_2),
            LawKind::Custom { .. } => None,
        }
    }

    /// Density symmetric under `x ↦ -x`.
    pub fn is_symmetric(&self) -> bool {
        match &self.kind {
            LawKind::Normal { mean, .. } | LawKind::Laplace { mean, .. } => *mean == 0.0,
            LawKind::Uniform { lo, hi } => *lo == -*hi,
            LawKind::Custom { symmetric, .. } => *symmetric,
        }
    }

    /// Decay descriptor of the density for quadrature.
    pub fn decay(&self) -> TailDecay {
        match &self.kind {
            LawKind::Normal { mean, sd } => {
                // (x-μ)² ≥ x²/2 - μ²
                let c = (0.5 * (mean / sd).powi(2)).exp() / (sd * (2.0 * PI).sqrt());
                TailDecay::Gaussian {
                    coefficient: c,
                    rate: 0.25 / (sd * sd),
                }
            }
            LawKind::Uniform { lo, hi } => TailDecay::CompactSupport {
                radius: lo.abs().max(hi.abs()),
            },
            LawKind::Laplace { mean, scale } => TailDecay::Exponential {
                coefficient: (mean.abs() / scale).exp() / (2.0 * scale),
                rate: 1.0 / scale,
            },
            LawKind::Custom { decay, .. } => *decay,
        }
    }

    /// Discontinuities of the density.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            LawKind::Uniform { lo, hi } => vec![*lo, *hi],
            LawKind::Laplace { mean, .. } => vec![*mean],
            _ => Vec::new(),
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match &self.kind {
            LawKind::Normal { mean, sd } => Normal::new(*mean, *sd)
                .expect("validated parameters")
                .sample(rng),
            LawKind::Uniform { lo, hi } => rng.random_range(*lo..*hi),
            LawKind::Laplace { mean, scale } => {
                let u: f64 = rng.random::<f64>() - 0.5;
                mean - scale * u.signum() * (1.0 - 2.0 * u.abs()).max(f64::MIN_POSITIVE).ln()
            }
            LawKind::Custom { sampler, .. } => sampler(rng),
        }
    }
}
