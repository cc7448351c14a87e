use serde::{Deserialize, Serialize};

use crate::engine::{CryptoContext, SlotVector};
use crate::error::{Error, Result};

/// Affine map of [lo, hi] onto [0, 1].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntervalMap {
    pub lo: f64,
    pub hi: f64,
}

impl IntervalMap {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidParams(format!(
                "degenerate interval [{lo}, {hi}]"
            )));
        }
        Ok(IntervalMap { lo, hi })
    }

    fn forward(&self) -> (f64, f64) {
        let scale = 1.0 / (self.hi - self.lo);
        (scale, -self.lo * scale)
    }

    pub fn normalize(&self, x: f64) -> f64 {
        let (a, b) = self.forward();
        x * a + b
    }

    pub fn denormalize(&self, y: f64) -> f64 {
        y * (self.hi - self.lo) + self.lo
    }
}

/// One mul_pt, one add, then a rescale.
pub fn interval_normalize(
    ctx: &CryptoContext,
    ct: &SlotVector,
    map: &IntervalMap,
) -> Result<SlotVector> {
    let (a, b) = map.forward();
    affine(ctx, ct, a, b)
}

pub fn interval_denormalize(
    ctx: &CryptoContext,
    ct: &SlotVector,
    map: &IntervalMap,
) -> Result<SlotVector> {
    affine(ctx, ct, map.hi - map.lo, map.lo)
}

/// `x * a + b` slot-wise.
pub(crate) fn affine(ctx: &CryptoContext, ct: &SlotVector, a: f64, b: f64) -> Result<SlotVector> {
    let y = ctx.mul_pt(ct, &ctx.constant(a))?;
    let y = ctx.add_pt(&y, &ctx.constant(b))?;
    ctx.rescale(&y)
}
