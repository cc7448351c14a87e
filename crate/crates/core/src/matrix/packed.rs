use super::plain::Matrix;
use crate::engine::{CryptoContext, PartyId, SlotVector};
use crate::error::{Error, Result};

/// Slot distance between consecutive matrix entries. The whole slot vector
/// is one cyclic h^2 image: entry (i, j) of lane k sits at `s*(h*i + j) + k`,
/// so a matrix-wise rotation by r is a slot rotation by `s*r`.
pub fn stride(slot_count: usize, h: usize) -> Result<usize> {
    let n = h * h;
    if h < 2 || n > slot_count || slot_count % n != 0 {
        return Err(Error::Capacity {
            len: n,
            slots: slot_count,
        });
    }
    Ok(slot_count / n)
}

/// Packed ciphertext holding one or more h x h matrices.
#[derive(Clone, Debug)]
pub struct PackedMatrix {
    pub ct: SlotVector,
    pub dim_h: usize,
    /// Logical row count; `< dim_h` for replicated rectangular forms.
    pub rows_t: usize,
    pub batch_beta: usize,
}

impl PackedMatrix {
    pub fn level(&self) -> u32 {
        self.ct.level()
    }

    /// Same shape metadata around another ciphertext.
    pub fn with_ct(&self, ct: SlotVector) -> PackedMatrix {
        PackedMatrix { ct, ..self.clone() }
    }
}

/// Slot image of `lanes` (each h x h), lanes beyond `lanes.len()` zero.
pub fn slot_image(slot_count: usize, h: usize, lanes: &[Matrix]) -> Result<Vec<f64>> {
    let s = stride(slot_count, h)?;
    if lanes.len() > s {
        return Err(Error::Capacity {
            len: lanes.len() * h * h,
            slots: slot_count,
        });
    }
    let mut v = vec![0.0; slot_count];
    for (k, m) in lanes.iter().enumerate() {
        if m.rows() != h || m.cols() != h {
            return Err(Error::DimensionMismatch(format!(
                "lane {k} is {}x{}, expected {h}x{h}",
                m.rows(),
                m.cols()
            )));
        }
        for (t, &x) in m.as_slice().iter().enumerate() {
            v[s * t + k] = x;
        }
    }
    Ok(v)
}

/// Inverse of [`slot_image`] for one lane.
pub fn lane_of(slots: &[f64], h: usize, lane: usize) -> Result<Matrix> {
    let s = stride(slots.len(), h)?;
    Matrix::from_vec(h, h, (0..h * h).map(|t| slots[s * t + lane]).collect())
}

/// Zero-pad to the next power-of-two square side.
pub fn pad_pow2(m: &Matrix) -> Matrix {
    let h = m.rows().max(m.cols()).max(2).next_power_of_two();
    m.resized(h, h)
}

fn encrypt_lanes(
    ctx: &CryptoContext,
    h: usize,
    lanes: &[Matrix],
    rows_t: usize,
) -> Result<PackedMatrix> {
    let v = slot_image(ctx.slot_count(), h, lanes)?;
    Ok(PackedMatrix {
        ct: ctx.encrypt_values(&v)?,
        dim_h: h,
        rows_t,
        batch_beta: lanes.len(),
    })
}

/// Encode and encrypt one square matrix under the collective key.
pub fn encode_matrix(ctx: &CryptoContext, a: &Matrix) -> Result<PackedMatrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!(
            "square form needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    encrypt_lanes(ctx, a.rows(), std::slice::from_ref(a), a.rows())
}

/// beta matrices interleaved at lane positions 0..beta.
pub fn encode_batch(ctx: &CryptoContext, ms: &[Matrix]) -> Result<PackedMatrix> {
    let Some(first) = ms.first() else {
        return Err(Error::InvalidParams("empty batch".into()));
    };
    encrypt_lanes(ctx, first.rows(), ms, first.rows())
}

/// A t x h matrix stored as h/t vertical copies filling an h x h image.
pub fn encode_replicated(ctx: &CryptoContext, a: &Matrix, h: usize) -> Result<PackedMatrix> {
    let t = a.rows();
    if a.cols() != h || t == 0 || h % t != 0 {
        return Err(Error::DimensionMismatch(format!(
            "replicated form needs t x {h} with t | {h}, got {t}x{}",
            a.cols()
        )));
    }
    encrypt_lanes(ctx, h, &[a.stacked(h / t)], t)
}

/// Full h x h image of lane 0 after collective decryption.
pub fn decode_matrix(ctx: &CryptoContext, pm: &PackedMatrix, roster: &[PartyId]) -> Result<Matrix> {
    let pt = ctx.ddec(&pm.ct, roster)?;
    lane_of(pt.values(), pm.dim_h, 0)
}

pub fn decode_batch(
    ctx: &CryptoContext,
    pm: &PackedMatrix,
    roster: &[PartyId],
) -> Result<Vec<Matrix>> {
    let pt = ctx.ddec(&pm.ct, roster)?;
    (0..pm.batch_beta)
        .map(|k| lane_of(pt.values(), pm.dim_h, k))
        .collect()
}

/// Top `rows_t` rows of lane 0.
pub fn decode_rect(ctx: &CryptoContext, pm: &PackedMatrix, roster: &[PartyId]) -> Result<Matrix> {
    let full = decode_matrix(ctx, pm, roster)?;
    Ok(full.resized(pm.rows_t, pm.dim_h))
}
