//! The odd contraction polynomials g_d(m) = sum_{i<=d} 4^-i C(2i,i) m (1-m^2)^i.

use crate::error::{Error, Result};

pub const MAX_D: u32 = 8;

fn binom(n: u32, k: u32) -> i128 {
    (0..k).fold(1i128, |acc, i| acc * (n - i) as i128 / (i + 1) as i128)
}

/// Exact numerators over 4^d: entry l is the coefficient of m^(2l+1) times 4^d.
pub fn gd_numerators(d: u32) -> Result<Vec<i128>> {
    if !(1..=MAX_D).contains(&d) {
        return Err(Error::InvalidParams(format!(
            "d must be in 1..={MAX_D}, got {d}"
        )));
    }
    Ok((0..=d)
        .map(|l| {
            let sign = if l % 2 == 0 { 1 } else { -1 };
            (l..=d)
                .map(|i| binom(2 * i, i) * binom(i, l) * 4i128.pow(d - i))
                .sum::<i128>()
                * sign
        })
        .collect())
}

/// Odd-power monomial coefficients `[c_1, c_3, ..., c_{2d+1}]` of g_d.
pub fn gd_coefficients(d: u32) -> Result<Vec<f64>> {
    let den = 4f64.powi(d as i32);
    Ok(gd_numerators(d)?
        .into_iter()
        .map(|n| n as f64 / den)
        .collect())
}

/// Linear coefficient p_d = (2d+1) C(2d,d) / 4^d.
pub fn pd_constant(d: u32) -> f64 {
    (2 * d + 1) as f64 * binom(2 * d, d) as f64 / 4f64.powi(d as i32)
}
