use std::sync::Arc;

use super::KeyTag;

/// Encoded, unencrypted slot vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Plaintext {
    pub(crate) values: Arc<[f64]>,
    pub(crate) scale: f64,
}

impl Plaintext {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// A packed ciphertext. Immutable; every engine op returns a fresh vector.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotVector {
    pub(crate) slots: Arc<[f64]>,
    pub(crate) level: u32,
    pub(crate) scale: f64,
    pub(crate) context_id: u64,
    pub(crate) key_tag: KeyTag,
}

impl SlotVector {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn context_id(&self) -> u64 {
        self.context_id
    }

    pub fn key_tag(&self) -> KeyTag {
        self.key_tag
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    /// Raw slot access for serialization. Reading values this way is the
    /// simulator's equivalent of holding ciphertext bytes; use `ddec` for
    /// semantic decryption.
    pub fn raw_slots(&self) -> &[f64] {
        &self.slots
    }
}
