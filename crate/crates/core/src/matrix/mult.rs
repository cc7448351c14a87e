//! O(h)-rotation matrix products and transpose over packed ciphertexts.

use super::lintrans::{he_lin_trans_bsgs, lift, rotate};
use super::packed::{stride, PackedMatrix};
use super::perm::{cached, PermKind};
use crate::engine::{CryptoContext, SlotVector};
use crate::error::{Error, Result};

/// Multiplicative levels consumed on the left operand of a product.
pub const MATMUL_DEPTH_A: u32 = 3;
/// Multiplicative levels consumed on the right operand of a product.
pub const MATMUL_DEPTH_B: u32 = 2;

fn check_pair(a: &PackedMatrix, b: &PackedMatrix) -> Result<()> {
    if a.dim_h != b.dim_h {
        return Err(Error::DimensionMismatch(format!(
            "h = {} vs {}",
            a.dim_h, b.dim_h
        )));
    }
    if a.batch_beta != b.batch_beta {
        return Err(Error::DimensionMismatch(format!(
            "batch {} vs {}",
            a.batch_beta, b.batch_beta
        )));
    }
    if a.ct.context_id() != b.ct.context_id() {
        return Err(Error::ContextMismatch {
            left: a.ct.context_id(),
            right: b.ct.context_id(),
        });
    }
    if b.rows_t != b.dim_h {
        return Err(Error::DimensionMismatch(
            "right operand must be square".into(),
        ));
    }
    if a.level() < MATMUL_DEPTH_A {
        return Err(Error::LevelExhausted {
            op: "he_mat_mult (left operand needs 3 levels)",
            level: a.level(),
        });
    }
    if b.level() < MATMUL_DEPTH_B {
        return Err(Error::LevelExhausted {
            op: "he_mat_mult (right operand needs 2 levels)",
            level: b.level(),
        });
    }
    Ok(())
}

/// Sum of the first `t` terms of `sum_k phi^k(mu(A)) (.) pi^k(zeta(B))`.
///
/// Column shifts use the two-input multiplexer: with X = A0 (.) R(v_k, -k),
/// `phi^k(A0) = R(X, k) + R(A0 - X, k - h)`, one plaintext product per k.
fn product_core(
    ctx: &CryptoContext,
    a: &SlotVector,
    b: &SlotVector,
    h: usize,
    t: usize,
) -> Result<SlotVector> {
    let s = stride(ctx.slot_count(), h)? as i64;
    let hi = h as i64;
    let mu = cached(PermKind::SigmaMu, h)?;
    let zeta = cached(PermKind::TauZeta, h)?;

    let a0 = ctx.rescale(&he_lin_trans_bsgs(ctx, a, &mu)?)?;
    let b0 = ctx.rescale(&he_lin_trans_bsgs(ctx, b, &zeta)?)?;

    let mut acc = ctx.mul_ct(&a0, &b0)?;
    for k in 1..t {
        let shift = cached(PermKind::ColShift(k), h)?;
        let vk = shift.mask(k as i64).expect("column shift has diagonal k");
        let sel = ctx.encode(&lift(&rotate(vk, -(k as i64)), s as usize))?;
        let x = ctx.rescale(&ctx.mul_pt(&a0, &sel)?)?;
        let rest = ctx.sub(&a0, &x)?;
        let ak = ctx.add(
            &ctx.rot(&x, s * k as i64)?,
            &ctx.rot(&rest, s * (k as i64 - hi))?,
        )?;
        let bk = ctx.rot(&b0, s * hi * k as i64)?;
        acc = ctx.add(&acc, &ctx.mul_ct(&ak, &bk)?)?;
    }
    ctx.rescale(&acc)
}

/// C = A * B for square packed matrices (every lane of a batch at once).
pub fn he_mat_mult(
    ctx: &CryptoContext,
    a: &PackedMatrix,
    b: &PackedMatrix,
) -> Result<PackedMatrix> {
    check_pair(a, b)?;
    if a.rows_t != a.dim_h {
        return Err(Error::DimensionMismatch(
            "left operand is rectangular; use he_rect_mat_mult".into(),
        ));
    }
    let ct = product_core(ctx, &a.ct, &b.ct, a.dim_h, a.dim_h)?;
    Ok(a.with_ct(ct))
}

/// Batched product of beta interleaved pairs; identical code path and op
/// tallies as a single product.
pub fn he_mat_mult_batched(
    ctx: &CryptoContext,
    a: &PackedMatrix,
    b: &PackedMatrix,
) -> Result<PackedMatrix> {
    let s = stride(ctx.slot_count(), a.dim_h)?;
    if a.batch_beta > s {
        return Err(Error::Capacity {
            len: a.batch_beta * a.dim_h * a.dim_h,
            slots: ctx.slot_count(),
        });
    }
    he_mat_mult(ctx, a, b)
}

/// (t x h) * (h x h) with the left operand held as h/t vertical copies.
/// The output keeps the same replicated format.
pub fn he_rect_mat_mult(
    ctx: &CryptoContext,
    a_repl: &PackedMatrix,
    b: &PackedMatrix,
) -> Result<PackedMatrix> {
    check_pair(a_repl, b)?;
    let (h, t) = (a_repl.dim_h, a_repl.rows_t);
    if t == 0 || h % t != 0 || !(h / t).is_power_of_two() {
        return Err(Error::DimensionMismatch(format!(
            "row count {t} must divide h = {h} (power-of-two ratio)"
        )));
    }
    let s = stride(ctx.slot_count(), h)? as i64;
    let mut acc = product_core(ctx, &a_repl.ct, &b.ct, h, t)?;
    let mut span = (t * h) as i64;
    while span < (h * h) as i64 {
        acc = ctx.add(&acc, &ctx.rot(&acc, s * span)?)?;
        span *= 2;
    }
    Ok(a_repl.with_ct(acc))
}

/// A^T via the (2h-1)-diagonal transpose map, baby-step/giant-step.
pub fn he_transpose(ctx: &CryptoContext, a: &PackedMatrix) -> Result<PackedMatrix> {
    if a.rows_t != a.dim_h {
        return Err(Error::DimensionMismatch(
            "transpose needs the square form".into(),
        ));
    }
    let spec = cached(PermKind::Transpose, a.dim_h)?;
    let ct = ctx.rescale(&he_lin_trans_bsgs(ctx, &a.ct, &spec)?)?;
    Ok(a.with_ct(ct))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ContextParams;
    use crate::matrix::packed::{
        decode_batch, decode_matrix, decode_rect, encode_batch, encode_matrix, encode_replicated,
    };
    use crate::matrix::plain::Matrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ctx_for(h: usize) -> CryptoContext {
        CryptoContext::new(ContextParams::new(2 * h * h, 6, 1)).unwrap()
    }

    #[test]
    fn small_product() {
        let ctx = ctx_for(2);
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[[5.0, 6.0], [7.0, 8.0]]).unwrap();
        let c = he_mat_mult(
            &ctx,
            &encode_matrix(&ctx, &a).unwrap(),
            &encode_matrix(&ctx, &b).unwrap(),
        )
        .unwrap();
        assert_eq!(
            decode_matrix(&ctx, &c, &[0]).unwrap().as_slice(),
            &[19.0, 22.0, 43.0, 50.0]
        );
        assert_eq!(c.level(), 3);
    }

    #[test]
    fn identity_left() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for h in [2, 4, 8] {
            let ctx = ctx_for(h);
            let b = Matrix::random(h, h, 1.0, &mut rng);
            let c = he_mat_mult(
                &ctx,
                &encode_matrix(&ctx, &Matrix::identity(h)).unwrap(),
                &encode_matrix(&ctx, &b).unwrap(),
            )
            .unwrap();
            assert!(decode_matrix(&ctx, &c, &[0]).unwrap().max_abs_diff(&b) < 1e-12);
        }
    }

    #[test]
    fn tallies_follow_closed_forms() {
        for h in [4usize, 8, 16] {
            let ctx = ctx_for(h);
            let a = encode_matrix(&ctx, &Matrix::identity(h)).unwrap();
            let (_, m) = ctx.measure(|| he_mat_mult(&ctx, &a, &a).unwrap());
            let g = super::super::lintrans::ceil_sqrt(h) as u64;
            let h = h as u64;
            assert_eq!(m.adds + m.subs, 6 * h - 6);
            assert_eq!(m.mul_pt, 4 * h - 2);
            assert_eq!(m.mul_ct, h);
            assert_eq!(m.rotations, 3 * h + 5 * g - 7);
        }
    }

    #[test]
    fn level_requirement() {
        let ctx = CryptoContext::new(ContextParams::new(32, 2, 1)).unwrap();
        let a = encode_matrix(&ctx, &Matrix::identity(4)).unwrap();
        assert!(matches!(
            he_mat_mult(&ctx, &a, &a),
            Err(Error::LevelExhausted { .. })
        ));
    }

    #[test]
    fn rect_row_vector() {
        let ctx = ctx_for(2);
        let a = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        let b = Matrix::from_rows(&[[5.0, 6.0], [7.0, 8.0]]).unwrap();
        let r = he_rect_mat_mult(
            &ctx,
            &encode_replicated(&ctx, &a, 2).unwrap(),
            &encode_matrix(&ctx, &b).unwrap(),
        )
        .unwrap();
        let full = decode_matrix(&ctx, &r, &[0]).unwrap();
        assert_eq!(full.as_slice(), &[19.0, 22.0, 19.0, 22.0]);
        assert_eq!(
            decode_rect(&ctx, &r, &[0]).unwrap().as_slice(),
            &[19.0, 22.0]
        );
    }

    #[test]
    fn rect_full_height_equals_square() {
        let ctx = ctx_for(8);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = encode_matrix(&ctx, &Matrix::random(8, 8, 1.0, &mut rng)).unwrap();
        let b = encode_matrix(&ctx, &Matrix::random(8, 8, 1.0, &mut rng)).unwrap();
        let sq = he_mat_mult(&ctx, &a, &b).unwrap();
        let re = he_rect_mat_mult(&ctx, &a, &b).unwrap();
        assert_eq!(sq.ct.raw_slots(), re.ct.raw_slots());
    }

    #[test]
    fn batch_of_two() {
        let ctx = CryptoContext::new(ContextParams::new(16, 6, 1)).unwrap();
        let a = [
            Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap(),
            Matrix::identity(2),
        ];
        let b = [
            Matrix::from_rows(&[[5.0, 6.0], [7.0, 8.0]]).unwrap(),
            Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap(),
        ];
        let c = he_mat_mult_batched(
            &ctx,
            &encode_batch(&ctx, &a).unwrap(),
            &encode_batch(&ctx, &b).unwrap(),
        )
        .unwrap();
        let out = decode_batch(&ctx, &c, &[0]).unwrap();
        for k in 0..2 {
            assert_eq!(out[k], a[k].matmul(&b[k]).unwrap());
        }
    }

    #[test]
    fn transpose_random() {
        let ctx = ctx_for(8);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = Matrix::random(8, 8, 1.0, &mut rng);
        let (t, m) = ctx.measure(|| he_transpose(&ctx, &encode_matrix(&ctx, &a).unwrap()).unwrap());
        assert_eq!(decode_matrix(&ctx, &t, &[0]).unwrap(), a.transpose());
        assert!(m.rotations <= 3 * 3);
    }
}
