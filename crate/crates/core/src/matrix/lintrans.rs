//! Homomorphic linear transforms: `sum_k u_k (.) R(ct, k)` over packed matrices.

use std::collections::BTreeMap;

use super::packed::stride;
use super::perm::{PermKind, PermutationSpec};
use crate::engine::{CryptoContext, SlotVector};
use crate::error::{Error, Result};

/// Spread an h^2 mask over the full slot vector: lifted[s*t + lane] = mask[t].
pub(crate) fn lift(mask: &[f64], s: usize) -> Vec<f64> {
    let mut out = vec![0.0; mask.len() * s];
    for (t, &m) in mask.iter().enumerate() {
        if m != 0.0 {
            out[s * t..s * (t + 1)].fill(m);
        }
    }
    out
}

/// Plain cyclic rotation in matrix-index space.
pub(crate) fn rotate(v: &[f64], k: i64) -> Vec<f64> {
    let n = v.len();
    let k = k.rem_euclid(n as i64) as usize;
    let mut out = Vec::with_capacity(n);
    out.extend_from_slice(&v[k..]);
    out.extend_from_slice(&v[..k]);
    out
}

pub fn ceil_sqrt(h: usize) -> usize {
    let mut g = (h as f64).sqrt() as usize;
    while g * g < h {
        g += 1;
    }
    while g > 1 && (g - 1) * (g - 1) >= h {
        g -= 1;
    }
    g.max(1)
}

fn accumulate(
    ctx: &CryptoContext,
    acc: Option<SlotVector>,
    term: SlotVector,
) -> Result<SlotVector> {
    match acc {
        None => Ok(term),
        Some(a) => ctx.add(&a, &term),
    }
}

fn check_dim(ctx: &CryptoContext, spec: &PermutationSpec) -> Result<usize> {
    stride(ctx.slot_count(), spec.dim_h)
}

/// One rotation per nonzero diagonal, none for diagonal 0. Not rescaled.
pub fn he_lin_trans(
    ctx: &CryptoContext,
    ct: &SlotVector,
    spec: &PermutationSpec,
) -> Result<SlotVector> {
    let s = check_dim(ctx, spec)? as i64;
    let mut acc = None;
    for (&k, mask) in &spec.diagonals {
        if mask.iter().all(|&m| m == 0.0) {
            continue;
        }
        let r = if k == 0 {
            ct.clone()
        } else {
            ctx.rot(ct, s * k)?
        };
        let pt = ctx.encode(&lift(mask, s as usize))?;
        acc = Some(accumulate(ctx, acc, ctx.mul_pt(&r, &pt)?)?);
    }
    acc.ok_or_else(|| Error::InvalidParams("permutation has no nonzero diagonal".into()))
}

/// Step unit of each kind's diagonal offsets.
fn bsgs_unit(kind: PermKind, h: usize) -> Option<i64> {
    match kind {
        PermKind::SigmaMu => Some(1),
        PermKind::TauZeta => Some(h as i64),
        PermKind::Transpose => Some(h as i64 - 1),
        _ => None,
    }
}

/// Baby-step/giant-step evaluation. Offsets are written as `u*(g*i + j)`,
/// baby rotations `R(ct, u*j)` are shared and each giant group costs one
/// rotation. Falls back to [`he_lin_trans`] for kinds without a unit.
pub fn he_lin_trans_bsgs(
    ctx: &CryptoContext,
    ct: &SlotVector,
    spec: &PermutationSpec,
) -> Result<SlotVector> {
    let h = spec.dim_h;
    let Some(u) = bsgs_unit(spec.kind, h) else {
        return he_lin_trans(ctx, ct, spec);
    };
    let s = check_dim(ctx, spec)? as i64;
    let g = ceil_sqrt(h) as i64;

    let mut groups: BTreeMap<i64, Vec<(i64, &Vec<f64>)>> = BTreeMap::new();
    for (&k, mask) in &spec.diagonals {
        if mask.iter().all(|&m| m == 0.0) {
            continue;
        }
        debug_assert_eq!(k % u, 0);
        let idx = k / u;
        groups
            .entry(idx.div_euclid(g))
            .or_default()
            .push((idx.rem_euclid(g), mask));
    }

    let mut baby: BTreeMap<i64, SlotVector> = BTreeMap::new();
    for terms in groups.values() {
        for &(j, _) in terms {
            if !baby.contains_key(&j) {
                let r = if j == 0 {
                    ct.clone()
                } else {
                    ctx.rot(ct, s * u * j)?
                };
                baby.insert(j, r);
            }
        }
    }

    let mut acc = None;
    for (&i, terms) in &groups {
        let giant = u * g * i;
        let mut inner = None;
        for &(j, mask) in terms {
            let pt = ctx.encode(&lift(&rotate(mask, -giant), s as usize))?;
            inner = Some(accumulate(ctx, inner, ctx.mul_pt(&baby[&j], &pt)?)?);
        }
        let inner = inner.expect("groups are nonempty");
        let term = if giant == 0 {
            inner
        } else {
            ctx.rot(&inner, s * giant)?
        };
        acc = Some(accumulate(ctx, acc, term)?);
    }
    acc.ok_or_else(|| Error::InvalidParams("permutation has no nonzero diagonal".into()))
}
