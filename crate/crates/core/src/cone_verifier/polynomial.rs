use std::fmt;

use num_bigint::BigInt;

use crate::error::{LabError, Result};

/// Integer polynomial, coefficients in descending powers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntPolynomial {
    coeffs: Vec<BigInt>,
}

impl IntPolynomial {
    pub fn new(coeffs: Vec<BigInt>) -> Result<Self> {
        match coeffs.first() {
            None => Err(LabError::usage("polynomial needs at least one coefficient")),
            Some(c) if *c == BigInt::from(0) && coeffs.len() > 1 => {
                Err(LabError::usage("leading coefficient must be nonzero"))
            }
            _ => Ok(IntPolynomial { coeffs }),
        }
    }

    pub fn from_i64(coeffs: &[i64]) -> Result<Self> {
        Self::new(coeffs.iter().map(|&c| BigInt::from(c)).collect())
    }

    /// `p(x) = 2x⁶ - 7x⁵ + 24x⁴ - 56x³ + 72x² - 76x + 32`, whose positive
    /// roots are the boundary points of `B` for the folded Boole map.
    pub fn boole_b() -> Self {
        Self::from_i64(&[2, -7, 24, -56, 72, -76, 32]).expect("nonzero leading coefficient")
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    pub fn eval(&self, x: &BigInt) -> BigInt {
        self.coeffs.iter().fold(BigInt::from(0), |acc, c| acc * x + c)
    }

    pub fn eval_f64(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .fold(0.0, |acc, c| acc * x + bigint_to_f64(c))
    }

    /// `(x - c) q(x) + r`, expanded.
    pub fn expand_linear(c: &BigInt, q: &IntPolynomial, r: &BigInt) -> Result<Self> {
        let mut out = Vec::with_capacity(q.coeffs.len() + 1);
        out.push(q.coeffs[0].clone());
        for i in 1..q.coeffs.len() {
            out.push(&q.coeffs[i] - c * &q.coeffs[i - 1]);
        }
        out.push(r - c * q.coeffs.last().expect("nonempty"));
        Self::new(out)
    }
}

fn bigint_to_f64(c: &BigInt) -> f64 {
    c.to_string().parse().expect("decimal digits parse as f64")
}

impl fmt::Display for IntPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coeffs.iter().map(|c| c.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntheticDivision {
    pub c: BigInt,
    pub quotient: IntPolynomial,
    pub remainder: BigInt,
}

impl SyntheticDivision {
    /// All quotient coefficients and the remainder are positive and `c ≥ 0`,
    /// so `p(x) ≥ r > 0` for every `x ≥ c`: `p` has no real root in `[c, ∞)`.
    pub fn root_bound_certificate(&self) -> bool {
        let zero = BigInt::from(0);
        self.c >= zero && self.remainder > zero && self.quotient.coeffs.iter().all(|q| *q > zero)
    }
}

/// Horner division `p(x) = (x - c) q(x) + r` in exact integers.
pub fn synthetic_substitution(p: &IntPolynomial, c: &BigInt) -> Result<SyntheticDivision> {
    if p.degree() == 0 {
        return Err(LabError::usage("synthetic substitution needs degree ≥ 1"));
    }
    let mut acc = BigInt::from(0);
    let mut q = Vec::with_capacity(p.degree());
    for (i, a) in p.coeffs.iter().enumerate() {
        acc = acc * c + a;
        if i < p.degree() {
            q.push(acc.clone());
        }
    }
    Ok(SyntheticDivision {
        c: c.clone(),
        quotient: IntPolynomial::new(q)?,
        remainder: acc,
    })
}
