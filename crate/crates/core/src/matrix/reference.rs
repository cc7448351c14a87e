//! Baseline products used for rotation-count comparisons.

use super::lintrans::lift;
use super::packed::{stride, PackedMatrix};
use super::perm::{index_map, PermKind, PermutationSpec};
use super::plain::Matrix;
use crate::engine::{CryptoContext, PartyId, SlotVector};
use crate::error::{Error, Result};

/// Linear transform that walks every one of the h^2 diagonals, zero or not.
fn dense_lin_trans(
    ctx: &CryptoContext,
    ct: &SlotVector,
    spec: &PermutationSpec,
) -> Result<SlotVector> {
    let h = spec.dim_h;
    let s = stride(ctx.slot_count(), h)?;
    let zero = vec![0.0; h * h];
    let mut acc: Option<SlotVector> = None;
    for k in 0..(h * h) as i64 {
        let mask = spec.mask(k).unwrap_or(&zero);
        let r = if k == 0 {
            ct.clone()
        } else {
            ctx.rot(ct, s as i64 * k)?
        };
        let term = ctx.mul_pt(&r, &ctx.encode(&lift(mask, s))?)?;
        acc = Some(match acc {
            None => term,
            Some(a) => ctx.add(&a, &term)?,
        });
    }
    Ok(acc.expect("h >= 2"))
}

fn composed(h: usize, outer: PermKind, inner: PermKind) -> PermutationSpec {
    let f = index_map(outer, h).expect("named kind");
    let g = index_map(inner, h).expect("named kind");
    PermutationSpec::from_index_map(h, move |t| g(f(t)))
}

/// Unoptimized product: each of the 2h composite permutations phi^k.mu and
/// pi^k.zeta is applied as a dense linear transform, 2h(h^2 - 1) rotations.
pub fn naive_mat_mult(
    ctx: &CryptoContext,
    a: &PackedMatrix,
    b: &PackedMatrix,
) -> Result<PackedMatrix> {
    let h = a.dim_h;
    if b.dim_h != h {
        return Err(Error::DimensionMismatch("operands differ in h".into()));
    }
    let mut acc: Option<SlotVector> = None;
    for k in 0..h {
        let (fa, fb) = if k == 0 {
            (
                composed(h, PermKind::Identity, PermKind::SigmaMu),
                composed(h, PermKind::Identity, PermKind::TauZeta),
            )
        } else {
            (
                composed(h, PermKind::ColShift(k), PermKind::SigmaMu),
                composed(h, PermKind::RowShift(k), PermKind::TauZeta),
            )
        };
        let ak = ctx.rescale(&dense_lin_trans(ctx, &a.ct, &fa)?)?;
        let bk = ctx.rescale(&dense_lin_trans(ctx, &b.ct, &fb)?)?;
        let term = ctx.mul_ct(&ak, &bk)?;
        acc = Some(match acc {
            None => term,
            Some(x) => ctx.add(&x, &term)?,
        });
    }
    let ct = ctx.rescale(&acc.expect("h >= 2"))?;
    Ok(a.with_ct(ct))
}

/// Matrix-vector style product in the diagonal encoding: A is held as h
/// generalized diagonals `d_k[i] = A[i][(i+k) mod h]`, B as h column
/// ciphertexts, every vector replicated with period h across the slots.
/// Column j of C is `sum_k d_k (.) R(b_j, k)`: h(h-1) rotations in total.
pub fn diagonal_mat_mult(
    ctx: &CryptoContext,
    a: &Matrix,
    b: &Matrix,
    roster: &[PartyId],
) -> Result<Matrix> {
    let h = a.rows();
    if !a.is_square() || b.rows() != h || b.cols() != h {
        return Err(Error::DimensionMismatch(
            "diagonal product needs two h x h matrices".into(),
        ));
    }
    let n = ctx.slot_count();
    if n % h != 0 {
        return Err(Error::Capacity { len: h, slots: n });
    }
    let periodic = |v: Vec<f64>| -> Vec<f64> { (0..n).map(|t| v[t % h]).collect() };
    let diags = (0..h)
        .map(|k| ctx.encrypt_values(&periodic((0..h).map(|i| a.get(i, (i + k) % h)).collect())))
        .collect::<Result<Vec<_>>>()?;
    let mut c = Matrix::zeros(h, h);
    for j in 0..h {
        let col = ctx.encrypt_values(&periodic((0..h).map(|i| b.get(i, j)).collect()))?;
        let mut acc = ctx.mul_ct(&diags[0], &col)?;
        for (k, d) in diags.iter().enumerate().skip(1) {
            let r = ctx.rot(&col, k as i64)?;
            acc = ctx.add(&acc, &ctx.mul_ct(d, &r)?)?;
        }
        let acc = ctx.rescale(&acc)?;
        let out = ctx.ddec(&acc, roster)?;
        for i in 0..h {
            c.set(i, j, out.values()[i]);
        }
    }
    Ok(c)
}

/// Analytic rotation count of the alternating-packing baseline,
/// `max_i w_i * log2(h * w_i)` over layer widths `w_i`. Never executed.
pub fn poseidon_ap_rotations(h: usize, widths: &[usize]) -> f64 {
    widths
        .iter()
        .map(|&w| w as f64 * ((h * w) as f64).log2())
        .fold(0.0, f64::max)
}

/// Per-call ceilings for the O(h) product: (adds, mul_pt, rotations, mul_ct).
pub fn table_ceilings(h: usize) -> (f64, f64, f64, f64) {
    let hf = h as f64;
    (6.0 * hf, 4.0 * hf, 3.0 * hf + 5.0 * hf.sqrt(), hf)
}

pub fn naive_rotations(h: usize) -> u64 {
    let h = h as u64;
    2 * h * (h * h - 1)
}

pub fn diagonal_rotations(h: usize) -> u64 {
    let h = h as u64;
    h * (h - 1)
}
