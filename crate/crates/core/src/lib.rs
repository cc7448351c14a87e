//! Packed-slot homomorphic matrix algebra, composite polynomial sign
//! approximation and N-party encrypted federated training, all running on a
//! metered slot simulator.

pub mod approx;
pub mod bench;
pub mod engine;
pub mod error;
pub mod fl;
pub mod matrix;

pub use engine::{
    new_context, Bootstrapper, ContextParams, CryptoContext, DirectCollective, KeyShareSet, KeyTag,
    NoiseMode, OpCounter, PartyId, Plaintext, SlotVector,
};
pub use error::{Error, Result};
