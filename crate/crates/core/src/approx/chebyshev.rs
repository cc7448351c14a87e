//! Chebyshev interpolation of smooth activations.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::he::{eval_poly_ct, plain_poly, poly_depth};
use super::interval::affine;
use crate::engine::{CryptoContext, SlotVector};
use crate::error::{Error, Result};

pub const MAX_FIT_DEGREE: usize = 15;
pub const ERROR_GRID: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothTarget {
    Sigmoid,
    SigmoidDerivative,
    Softplus,
}

impl SmoothTarget {
    pub fn eval(self, x: f64) -> f64 {
        let sig = |x: f64| 1.0 / (1.0 + (-x).exp());
        match self {
            SmoothTarget::Sigmoid => sig(x),
            SmoothTarget::SigmoidDerivative => sig(x) * (1.0 - sig(x)),
            SmoothTarget::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
        }
    }
}

impl fmt::Display for SmoothTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SmoothTarget::Sigmoid => "sigmoid",
            SmoothTarget::SigmoidDerivative => "sigmoid_derivative",
            SmoothTarget::Softplus => "softplus",
        })
    }
}

impl FromStr for SmoothTarget {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sigmoid" => Ok(SmoothTarget::Sigmoid),
            "sigmoid_derivative" => Ok(SmoothTarget::SigmoidDerivative),
            "softplus" => Ok(SmoothTarget::Softplus),
            other => Err(Error::InvalidParams(format!(
                "unsupported smooth target {other:?}"
            ))),
        }
    }
}

/// Interpolant on [lo, hi], stored both as Chebyshev coefficients and as
/// monomials in the normalized variable `u = x * scale + shift` in [-1, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothFit {
    pub target: SmoothTarget,
    pub degree: usize,
    pub lo: f64,
    pub hi: f64,
    pub chebyshev: Vec<f64>,
    pub coeffs: Vec<f64>,
    /// Max |fit - target| over a uniform 10^4-point grid.
    pub max_error: f64,
}

pub fn smooth_fit(target: SmoothTarget, degree: usize, lo: f64, hi: f64) -> Result<SmoothFit> {
    if degree == 0 || degree > MAX_FIT_DEGREE {
        return Err(Error::InvalidParams(format!(
            "fit degree must be in 1..={MAX_FIT_DEGREE}, got {degree}"
        )));
    }
    if !(hi > lo) {
        return Err(Error::InvalidParams(format!(
            "degenerate interval [{lo}, {hi}]"
        )));
    }
    let n = degree + 1;
    let nodes: Vec<f64> = (0..n)
        .map(|k| (PI * (k as f64 + 0.5) / n as f64).cos())
        .collect();
    let mid = 0.5 * (hi + lo);
    let half = 0.5 * (hi - lo);
    let fx: Vec<f64> = nodes.iter().map(|&u| target.eval(mid + half * u)).collect();
    let mut cheb: Vec<f64> = (0..n)
        .map(|j| {
            let s: f64 = (0..n)
                .map(|k| fx[k] * (PI * j as f64 * (k as f64 + 0.5) / n as f64).cos())
                .sum();
            2.0 * s / n as f64
        })
        .collect();
    cheb[0] *= 0.5;

    let coeffs = chebyshev_to_monomial(&cheb);
    let mut fit = SmoothFit {
        target,
        degree,
        lo,
        hi,
        chebyshev: cheb,
        coeffs,
        max_error: 0.0,
    };
    fit.max_error = (0..ERROR_GRID)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (ERROR_GRID - 1) as f64;
            (fit.eval(x) - target.eval(x)).abs()
        })
        .fold(0.0, f64::max);
    Ok(fit)
}

/// Expand sum_j c_j T_j(u) into monomials of u.
pub fn chebyshev_to_monomial(cheb: &[f64]) -> Vec<f64> {
    let n = cheb.len();
    let mut out = vec![0.0; n];
    let mut prev = vec![0.0; n];
    let mut cur = vec![0.0; n];
    prev[0] = 1.0;
    if n > 1 {
        cur[1] = 1.0;
    }
    for (j, &c) in cheb.iter().enumerate() {
        let t = match j {
            0 => &prev,
            _ => &cur,
        };
        for (o, &x) in out.iter_mut().zip(t) {
            *o += c * x;
        }
        if j >= 1 && j + 1 < n {
            let mut next = vec![0.0; n];
            for i in 0..n - 1 {
                next[i + 1] += 2.0 * cur[i];
            }
            for i in 0..n {
                next[i] -= prev[i];
            }
            prev = std::mem::replace(&mut cur, next);
        }
    }
    out
}

impl SmoothFit {
    /// (scale, shift) of the map onto [-1, 1].
    pub fn unit_map(&self) -> (f64, f64) {
        let scale = 2.0 / (self.hi - self.lo);
        (scale, -(self.hi + self.lo) / (self.hi - self.lo))
    }

    /// Monomial evaluation in the same order as [`SmoothFit::eval_ct`].
    pub fn eval(&self, x: f64) -> f64 {
        let (a, b) = self.unit_map();
        plain_poly(x * a + b, &self.coeffs)
    }

    /// Clenshaw evaluation of the Chebyshev form.
    pub fn eval_chebyshev(&self, x: f64) -> f64 {
        let (a, b) = self.unit_map();
        let u = x * a + b;
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.chebyshev.iter().skip(1).rev() {
            let t = 2.0 * u * b1 - b2 + c;
            b2 = b1;
            b1 = t;
        }
        u * b1 - b2 + self.chebyshev[0]
    }

    pub fn depth(&self) -> u32 {
        1 + poly_depth(self.degree)
    }

    pub fn eval_ct(&self, ctx: &CryptoContext, x: &SlotVector) -> Result<SlotVector> {
        let (a, b) = self.unit_map();
        let u = affine(ctx, x, a, b)?;
        eval_poly_ct(ctx, &u, &self.coeffs)
    }
}
