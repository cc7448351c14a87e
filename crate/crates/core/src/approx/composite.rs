//! k-fold compositions of g_d as (sigma, delta)-close sign approximations.

use serde::{Deserialize, Serialize};

use super::gd::{gd_coefficients, pd_constant};
use crate::error::{Error, Result};

/// Slack added to the closed-form depth bound.
pub const DEPTH_SLACK: u32 = 2;
/// Points of the closeness grid in the geometric part [delta, 2 delta].
pub const GRID_GEOMETRIC: usize = 20_000;
/// Points of the closeness grid in the uniform part [2 delta, 1].
pub const GRID_UNIFORM: usize = 80_000;

const MAX_K: u32 = 256;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompositePolySpec {
    pub d: u32,
    pub k: u32,
    pub sigma: u32,
    pub delta: f64,
    /// Coefficients of m, m^3, ..., m^(2d+1).
    pub coeffs: Vec<f64>,
    pub p_d: f64,
}

pub(crate) fn ceil_log2(x: u32) -> u32 {
    if x <= 1 {
        0
    } else {
        32 - (x - 1).leading_zeros()
    }
}

impl CompositePolySpec {
    pub fn new(d: u32, k: u32, sigma: u32, delta: f64) -> Result<Self> {
        if k < 1 {
            return Err(Error::InvalidParams(
                "composition depth k must be >= 1".into(),
            ));
        }
        check_target(sigma, delta)?;
        Ok(CompositePolySpec {
            d,
            k,
            sigma,
            delta,
            coeffs: gd_coefficients(d)?,
            p_d: pd_constant(d),
        })
    }

    /// Spec with the smallest k meeting the (sigma, delta) target.
    pub fn for_target(d: u32, sigma: u32, delta: f64) -> Result<Self> {
        let k = min_depth(d, sigma, delta)?;
        CompositePolySpec::new(d, k, sigma, delta)
    }

    /// Levels consumed by one g_d application under encryption:
    /// one for m^2, ceil(log2 d) for the power tree, one for the coefficient.
    pub fn stage_depth(&self) -> u32 {
        2 + ceil_log2(self.d)
    }

    pub fn total_depth(&self) -> u32 {
        self.k * self.stage_depth()
    }
}

fn check_target(sigma: u32, delta: f64) -> Result<()> {
    if sigma < 1 {
        return Err(Error::InvalidParams("sigma must be >= 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParams(format!(
            "delta must be in (0, 1), got {delta}"
        )));
    }
    Ok(())
}

/// g_d(m) via Horner in m^2: m * P(m^2). Exactly odd.
pub fn eval_g(m: f64, coeffs: &[f64]) -> f64 {
    let x = m * m;
    let p = coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c);
    m * p
}

/// Split used by the power tree: x^i = x^p * x^(i-p).
pub(crate) fn power_split(i: usize) -> usize {
    if i.is_power_of_two() {
        i / 2
    } else {
        1 << (usize::BITS - 1 - i.leading_zeros())
    }
}

/// g_d(m) in the exact operation order of the encrypted evaluator:
/// x = m^2, powers of x by a balanced tree, terms (c_i m) x^i summed in order.
pub fn eval_g_power(m: f64, coeffs: &[f64]) -> f64 {
    let x = m * m;
    let mut pow = vec![0.0; coeffs.len()];
    if coeffs.len() > 1 {
        pow[1] = x;
    }
    for i in 2..coeffs.len() {
        let p = power_split(i);
        pow[i] = pow[p] * pow[i - p];
    }
    let mut acc = m * coeffs[0];
    for i in 1..coeffs.len() {
        acc = acc + (m * coeffs[i]) * pow[i];
    }
    acc
}

/// g_d^(k)(m) for m in [-1, 1].
pub fn eval_composite(m: f64, spec: &CompositePolySpec) -> Result<f64> {
    if !(m.abs() <= 1.0) {
        return Err(Error::Domain(format!("|m| must be <= 1, got {m}")));
    }
    Ok(eval_composite_unchecked(m, spec))
}

pub(crate) fn eval_composite_unchecked(m: f64, spec: &CompositePolySpec) -> f64 {
    (0..spec.k).fold(m, |v, _| eval_g(v, &spec.coeffs))
}

/// Composite in the encrypted evaluator's operation order.
pub fn eval_composite_power(m: f64, spec: &CompositePolySpec) -> f64 {
    (0..spec.k).fold(m, |v, _| eval_g_power(v, &spec.coeffs))
}

/// Geometric points in [delta, 2 delta] followed by uniform points in [2 delta, 1].
pub fn closeness_grid(delta: f64, geometric: usize, uniform: usize) -> Vec<f64> {
    let mut g = Vec::with_capacity(geometric + uniform);
    let ratio = 2f64.powf(1.0 / geometric as f64);
    let mut m = delta;
    for _ in 0..geometric {
        g.push(m);
        m *= ratio;
    }
    let lo = 2.0 * delta;
    for i in 0..uniform {
        g.push(lo + (1.0 - lo) * i as f64 / (uniform - 1) as f64);
    }
    g
}

pub fn default_grid(delta: f64) -> Vec<f64> {
    closeness_grid(delta, GRID_GEOMETRIC, GRID_UNIFORM)
}

/// Largest |g^(k)(m) - 1| over the grid and where it occurs. Odd symmetry
/// makes the negative half identical.
pub fn max_sign_error(spec: &CompositePolySpec, grid: &[f64]) -> (f64, f64) {
    grid.iter()
        .map(|&m| ((eval_composite_unchecked(m, spec) - 1.0).abs(), m))
        .fold(
            (0.0, f64::NAN),
            |best, cur| if cur.0 > best.0 { cur } else { best },
        )
}

/// Smallest k whose composite is within 2^-sigma of sgn on the grid.
pub fn min_depth(d: u32, sigma: u32, delta: f64) -> Result<u32> {
    check_target(sigma, delta)?;
    let coeffs = gd_coefficients(d)?;
    let target = 2f64.powi(-(sigma as i32));
    let mut vals = default_grid(delta);
    for k in 1..=MAX_K {
        let mut worst = 0.0f64;
        for v in vals.iter_mut() {
            *v = eval_g(*v, &coeffs);
            worst = worst.max((*v - 1.0).abs());
        }
        if worst <= target {
            return Ok(k);
        }
    }
    Err(Error::InvalidParams(format!(
        "no depth <= {MAX_K} reaches 2^-{sigma} at delta = {delta}"
    )))
}

/// ceil(log(1/delta)/log p_d) + ceil(log(sigma - 1)/log(d + 1)) + slack.
pub fn theorem_bound(d: u32, sigma: u32, delta: f64, slack: u32) -> u32 {
    let first = ((1.0 / delta).ln() / pd_constant(d).ln()).ceil().max(0.0) as u32;
    let second = if sigma > 2 {
        (((sigma - 1) as f64).ln() / ((d + 1) as f64).ln()).ceil() as u32
    } else {
        0
    };
    first + second + slack
}
