//! Packed-matrix algebra over slot ciphertexts.

mod lintrans;
mod mult;
mod packed;
mod perm;
mod plain;
pub mod reference;

pub use lintrans::{he_lin_trans, he_lin_trans_bsgs};
pub use mult::{
    he_mat_mult, he_mat_mult_batched, he_rect_mat_mult, he_transpose, MATMUL_DEPTH_A,
    MATMUL_DEPTH_B,
};
pub use packed::{
    decode_batch, decode_matrix, decode_rect, encode_batch, encode_matrix, encode_replicated,
    lane_of, pad_pow2, slot_image, stride, PackedMatrix,
};
pub use perm::{build_permutation, cached, index_map, PermKind, PermutationSpec};
pub use plain::{hadamard, mu, phi, pi, zeta, Matrix};

pub use lintrans::ceil_sqrt;
