//! Simulated multiparty CKKS slot engine.
//!
//! Slots are plain `f64`s; levels, scales and key tags are bookkeeping that
//! the engine enforces exactly like a real scheme would reject misuse.

mod keys;
mod meter;
mod vector;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use keys::{KeyShareSet, KeyTag, PartyId};
pub use meter::OpCounter;
pub use vector::{Plaintext, SlotVector};

use crate::error::{Error, Result};
use meter::{Op, OpMeter};

/// Largest usable party id; 0xFFFF is reserved for the server on the wire.
pub const MAX_PARTIES: u16 = 0xFFFE;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum NoiseMode {
    #[default]
    Exact,
    Gaussian {
        sigma: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ContextParams {
    pub ring_dim: usize,
    pub initial_level: u32,
    pub initial_scale: f64,
    pub party_count: u16,
    #[serde(default)]
    pub noise_mode: NoiseMode,
    #[serde(default)]
    pub seed: u64,
}

impl ContextParams {
    pub fn new(ring_dim: usize, initial_level: u32, party_count: u16) -> Self {
        ContextParams {
            ring_dim,
            initial_level,
            initial_scale: 2f64.powi(40),
            party_count,
            noise_mode: NoiseMode::Exact,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise(mut self, noise_mode: NoiseMode) -> Self {
        self.noise_mode = noise_mode;
        self
    }

    pub fn with_scale(mut self, initial_scale: f64) -> Self {
        self.initial_scale = initial_scale;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.ring_dim < 8 || !self.ring_dim.is_power_of_two() {
            return Err(Error::InvalidParams(format!(
                "ring_dim must be a power of two >= 8, got {}",
                self.ring_dim
            )));
        }
        if self.initial_level < 1 {
            return Err(Error::InvalidParams("initial_level must be >= 1".into()));
        }
        if !(self.initial_scale > 1.0) || !self.initial_scale.is_finite() {
            return Err(Error::InvalidParams(format!(
                "initial_scale must be > 1, got {}",
                self.initial_scale
            )));
        }
        if self.party_count == 0 {
            return Err(Error::InvalidParams("party_count must be >= 1".into()));
        }
        if self.party_count > MAX_PARTIES {
            return Err(Error::InvalidParams(format!(
                "party_count must be <= {MAX_PARTIES}"
            )));
        }
        if let NoiseMode::Gaussian { sigma } = self.noise_mode {
            if !(sigma >= 0.0) || !sigma.is_finite() {
                return Err(Error::InvalidParams(format!("bad noise sigma {sigma}")));
            }
        }
        Ok(())
    }
}

static NEXT_CONTEXT_ID: AtomicU64 = AtomicU64::new(1);

/// Parameters, key registry, noise source and op meter.
///
/// All operations take `&self`; a context can be shared across threads
/// behind an `Arc`. Use [`CryptoContext::fork`] to give a thread its own
/// metering scope and [`CryptoContext::absorb`] to merge it back.
#[derive(Debug)]
pub struct CryptoContext {
    id: u64,
    params: ContextParams,
    slot_count: usize,
    keys: KeyShareSet,
    meter: OpMeter,
    noise_rng: Mutex<ChaCha8Rng>,
}

pub fn new_context(
    ring_dim: usize,
    initial_level: u32,
    initial_scale: f64,
    party_count: u16,
    noise_mode: NoiseMode,
) -> Result<CryptoContext> {
    CryptoContext::new(ContextParams {
        ring_dim,
        initial_level,
        initial_scale,
        party_count,
        noise_mode,
        seed: 0,
    })
}

impl CryptoContext {
    pub fn new(params: ContextParams) -> Result<Self> {
        params.validate()?;
        let keys = KeyShareSet::generate(params.party_count, params.seed);
        Ok(CryptoContext {
            id: NEXT_CONTEXT_ID.fetch_add(1, Ordering::Relaxed),
            slot_count: params.ring_dim / 2,
            noise_rng: Mutex::new(ChaCha8Rng::seed_from_u64(params.seed ^ 0x6e6f_6973_65)),
            keys,
            params,
            meter: OpMeter::default(),
        })
    }

    /// Same identity, parameters and keys; fresh meter and an independent
    /// noise stream derived from this one.
    pub fn fork(&self) -> CryptoContext {
        let seed = self.noise_rng.lock().expect("noise rng poisoned").random();
        CryptoContext {
            id: self.id,
            params: self.params.clone(),
            slot_count: self.slot_count,
            keys: self.keys.clone(),
            meter: OpMeter::default(),
            noise_rng: Mutex::new(ChaCha8Rng::seed_from_u64(seed)),
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn params(&self) -> &ContextParams {
        &self.params
    }

    pub fn slot_count(&self) -> usize {
        self.slot_count
    }

    pub fn ring_dim(&self) -> usize {
        self.params.ring_dim
    }

    pub fn initial_level(&self) -> u32 {
        self.params.initial_level
    }

    pub fn initial_scale(&self) -> f64 {
        self.params.initial_scale
    }

    pub fn party_count(&self) -> u16 {
        self.params.party_count
    }

    pub fn keys(&self) -> &KeyShareSet {
        &self.keys
    }

    pub fn collective_key(&self) -> KeyTag {
        self.keys.collective_key_tag
    }

    pub fn server_key(&self) -> KeyTag {
        self.keys.server_key_tag
    }

    /// Every party id; the roster that satisfies N-of-N checks.
    pub fn full_roster(&self) -> Vec<PartyId> {
        self.keys.party_ids.clone()
    }

    pub fn meter(&self) -> OpCounter {
        self.meter.snapshot()
    }

    pub fn reset_meter(&self) {
        self.meter.reset();
    }

    /// Merge a closed scope's tallies into this meter.
    pub fn absorb(&self, counter: &OpCounter) {
        self.meter.absorb(counter);
    }

    /// Run `f` and return its result with the meter delta it caused.
    pub fn measure<T>(&self, f: impl FnOnce() -> T) -> (T, OpCounter) {
        let before = self.meter.snapshot();
        let out = f();
        (out, self.meter.snapshot() - before)
    }

    // ---- encoding ----

    pub fn encode(&self, values: &[f64]) -> Result<Plaintext> {
        if values.len() > self.slot_count {
            return Err(Error::Capacity {
                len: values.len(),
                slots: self.slot_count,
            });
        }
        let mut v = values.to_vec();
        v.resize(self.slot_count, 0.0);
        Ok(Plaintext {
            values: v.into(),
            scale: self.params.initial_scale,
        })
    }

    /// Plaintext with every slot equal to `c`.
    pub fn constant(&self, c: f64) -> Plaintext {
        Plaintext {
            values: vec![c; self.slot_count].into(),
            scale: self.params.initial_scale,
        }
    }

    pub fn decode(&self, pt: &Plaintext) -> Vec<f64> {
        pt.values.to_vec()
    }

    // ---- keys / decryption ----

    pub fn encrypt(&self, pt: &Plaintext, key: KeyTag) -> Result<SlotVector> {
        if !self.keys.is_registered(key) {
            return Err(Error::UnknownKey(key));
        }
        self.check_len(pt.values.len())?;
        let slots = self.noisy(&pt.values);
        Ok(SlotVector {
            slots,
            level: self.params.initial_level,
            scale: self.params.initial_scale,
            context_id: self.id,
            key_tag: key,
        })
    }

    /// Encode and encrypt under the collective key.
    pub fn encrypt_values(&self, values: &[f64]) -> Result<SlotVector> {
        let pt = self.encode(values)?;
        self.encrypt(&pt, self.collective_key())
    }

    /// Collective decryption; needs every party.
    pub fn ddec(&self, ct: &SlotVector, roster: &[PartyId]) -> Result<Plaintext> {
        self.check_ctx(ct)?;
        self.check_key(ct, self.collective_key())?;
        self.keys.check_roster(roster)?;
        Ok(Plaintext {
            values: ct.slots.clone(),
            scale: ct.scale,
        })
    }

    /// Decryption with the server's own key; only valid after a key switch.
    pub fn server_decrypt(&self, ct: &SlotVector) -> Result<Plaintext> {
        self.check_ctx(ct)?;
        self.check_key(ct, self.server_key())?;
        Ok(Plaintext {
            values: ct.slots.clone(),
            scale: ct.scale,
        })
    }

    /// Rebuild a ciphertext from serialized parts (wire decoding).
    pub fn import(
        &self,
        slots: Vec<f64>,
        level: u32,
        scale: f64,
        key_tag: KeyTag,
    ) -> Result<SlotVector> {
        self.check_len(slots.len())?;
        if level > self.params.initial_level {
            return Err(Error::InvalidParams(format!(
                "level {level} above initial level {}",
                self.params.initial_level
            )));
        }
        if !(scale > 0.0) {
            return Err(Error::InvalidParams(format!(
                "scale must be > 0, got {scale}"
            )));
        }
        if !self.keys.is_registered(key_tag) {
            return Err(Error::UnknownKey(key_tag));
        }
        Ok(SlotVector {
            slots: slots.into(),
            level,
            scale,
            context_id: self.id,
            key_tag,
        })
    }

    // ---- arithmetic ----

    pub fn add(&self, a: &SlotVector, b: &SlotVector) -> Result<SlotVector> {
        self.check_pair(a, b)?;
        self.meter.bump(Op::Add);
        Ok(self.zip(
            a,
            b,
            |x, y| x + y,
            a.level.min(b.level),
            a.scale.max(b.scale),
        ))
    }

    pub fn sub(&self, a: &SlotVector, b: &SlotVector) -> Result<SlotVector> {
        self.check_pair(a, b)?;
        self.meter.bump(Op::Sub);
        Ok(self.zip(
            a,
            b,
            |x, y| x - y,
            a.level.min(b.level),
            a.scale.max(b.scale),
        ))
    }

    /// Ciphertext-plaintext addition; metered as an add.
    pub fn add_pt(&self, a: &SlotVector, pt: &Plaintext) -> Result<SlotVector> {
        self.check_ctx(a)?;
        self.check_len(pt.values.len())?;
        self.meter.bump(Op::Add);
        let slots: Arc<[f64]> = a
            .slots
            .iter()
            .zip(pt.values.iter())
            .map(|(x, y)| x + y)
            .collect();
        Ok(SlotVector {
            slots,
            scale: a.scale.max(pt.scale),
            ..a.clone()
        })
    }

    pub fn mul_pt(&self, a: &SlotVector, pt: &Plaintext) -> Result<SlotVector> {
        self.check_ctx(a)?;
        self.check_len(pt.values.len())?;
        if a.level < 1 {
            return Err(Error::LevelExhausted {
                op: "mul_pt",
                level: a.level,
            });
        }
        self.meter.bump(Op::MulPt);
        let slots: Arc<[f64]> = a
            .slots
            .iter()
            .zip(pt.values.iter())
            .map(|(x, y)| x * y)
            .collect();
        Ok(SlotVector {
            slots,
            scale: a.scale * pt.scale,
            ..a.clone()
        })
    }

    pub fn mul_ct(&self, a: &SlotVector, b: &SlotVector) -> Result<SlotVector> {
        self.check_pair(a, b)?;
        let low = a.level.min(b.level);
        if low < 1 {
            return Err(Error::LevelExhausted {
                op: "mul_ct",
                level: low,
            });
        }
        self.meter.bump(Op::MulCt);
        let out = self.zip(a, b, |x, y| x * y, low, a.scale * b.scale);
        Ok(SlotVector {
            slots: self.noisy(&out.slots),
            ..out
        })
    }

    /// Left rotation: result slot i holds input slot (i + k) mod n.
    pub fn rot(&self, a: &SlotVector, k: i64) -> Result<SlotVector> {
        self.check_ctx(a)?;
        self.meter.bump(Op::Rot);
        let n = a.slots.len();
        let k = k.rem_euclid(n as i64) as usize;
        let mut v = Vec::with_capacity(n);
        v.extend_from_slice(&a.slots[k..]);
        v.extend_from_slice(&a.slots[..k]);
        Ok(SlotVector {
            slots: v.into(),
            ..a.clone()
        })
    }

    pub fn rescale(&self, a: &SlotVector) -> Result<SlotVector> {
        self.check_ctx(a)?;
        if a.level < 1 {
            return Err(Error::LevelExhausted {
                op: "rescale",
                level: a.level,
            });
        }
        self.meter.bump(Op::Rescale);
        Ok(SlotVector {
            level: a.level - 1,
            scale: a.scale / self.params.initial_scale,
            ..a.clone()
        })
    }

    // ---- collective protocols ----

    pub fn dbootstrap(&self, a: &SlotVector, roster: &[PartyId]) -> Result<SlotVector> {
        self.check_ctx(a)?;
        self.keys.check_roster(roster)?;
        self.meter.bump(Op::Bootstrap);
        Ok(SlotVector {
            level: self.params.initial_level,
            scale: self.params.initial_scale,
            ..a.clone()
        })
    }

    pub fn dkey_switch(
        &self,
        a: &SlotVector,
        target: KeyTag,
        roster: &[PartyId],
    ) -> Result<SlotVector> {
        self.check_ctx(a)?;
        if !self.keys.is_registered(target) {
            return Err(Error::UnknownKey(target));
        }
        self.keys.check_roster(roster)?;
        self.meter.bump(Op::KeySwitch);
        Ok(SlotVector {
            key_tag: target,
            ..a.clone()
        })
    }

    // ---- helpers ----

    fn zip(
        &self,
        a: &SlotVector,
        b: &SlotVector,
        f: impl Fn(f64, f64) -> f64,
        level: u32,
        scale: f64,
    ) -> SlotVector {
        let slots: Arc<[f64]> = a
            .slots
            .iter()
            .zip(b.slots.iter())
            .map(|(&x, &y)| f(x, y))
            .collect();
        SlotVector {
            slots,
            level,
            scale,
            context_id: self.id,
            key_tag: a.key_tag,
        }
    }

    fn noisy(&self, values: &[f64]) -> Arc<[f64]> {
        match self.params.noise_mode {
            NoiseMode::Exact => values.into(),
            NoiseMode::Gaussian { sigma } => {
                let normal = Normal::new(0.0, sigma).expect("validated sigma");
                let mut rng = self.noise_rng.lock().expect("noise rng poisoned");
                values
                    .iter()
                    .map(|v| v + normal.sample(&mut *rng))
                    .collect()
            }
        }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len == self.slot_count {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "vector has {len} slots, context has {}",
                self.slot_count
            )))
        }
    }

    fn check_ctx(&self, a: &SlotVector) -> Result<()> {
        if a.context_id != self.id {
            return Err(Error::ContextMismatch {
                left: self.id,
                right: a.context_id,
            });
        }
        self.check_len(a.slots.len())
    }

    fn check_key(&self, a: &SlotVector, expected: KeyTag) -> Result<()> {
        if a.key_tag != expected {
            return Err(Error::KeyMismatch {
                expected,
                found: a.key_tag,
            });
        }
        Ok(())
    }

    fn check_pair(&self, a: &SlotVector, b: &SlotVector) -> Result<()> {
        self.check_ctx(a)?;
        self.check_ctx(b)?;
        if a.context_id != b.context_id {
            return Err(Error::ContextMismatch {
                left: a.context_id,
                right: b.context_id,
            });
        }
        self.check_key(b, a.key_tag)
    }
}

/// Level refresh used by deep evaluations (polynomial stages, training).
pub trait Bootstrapper {
    fn bootstrap(&self, ctx: &CryptoContext, ct: &SlotVector) -> Result<SlotVector>;
}

/// Calls `dbootstrap` directly with a fixed roster.
#[derive(Clone, Debug)]
pub struct DirectCollective {
    pub roster: Vec<PartyId>,
}

impl DirectCollective {
    pub fn full(ctx: &CryptoContext) -> Self {
        DirectCollective {
            roster: ctx.full_roster(),
        }
    }
}

impl Bootstrapper for DirectCollective {
    fn bootstrap(&self, ctx: &CryptoContext, ct: &SlotVector) -> Result<SlotVector> {
        ctx.dbootstrap(ct, &self.roster)
    }
}
