use std::ops::{Add, AddAssign, Sub};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

/// Snapshot of per-operation tallies.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct OpCounter {
    pub adds: u64,
    pub subs: u64,
    pub mul_pt: u64,
    pub mul_ct: u64,
    pub rotations: u64,
    pub rescales: u64,
    pub bootstraps: u64,
    pub keyswitches: u64,
}

impl OpCounter {
    pub fn total(&self) -> u64 {
        self.adds
            + self.subs
            + self.mul_pt
            + self.mul_ct
            + self.rotations
            + self.rescales
            + self.bootstraps
            + self.keyswitches
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("counter serializes")
    }
}

impl Add for OpCounter {
    type Output = OpCounter;
    fn add(mut self, rhs: OpCounter) -> OpCounter {
        self += rhs;
        self
    }
}

impl AddAssign for OpCounter {
    fn add_assign(&mut self, rhs: OpCounter) {
        self.adds += rhs.adds;
        self.subs += rhs.subs;
        self.mul_pt += rhs.mul_pt;
        self.mul_ct += rhs.mul_ct;
        self.rotations += rhs.rotations;
        self.rescales += rhs.rescales;
        self.bootstraps += rhs.bootstraps;
        self.keyswitches += rhs.keyswitches;
    }
}

/// Saturating difference, used for "meter delta across a call".
impl Sub for OpCounter {
    type Output = OpCounter;
    fn sub(self, rhs: OpCounter) -> OpCounter {
        OpCounter {
            adds: self.adds.saturating_sub(rhs.adds),
            subs: self.subs.saturating_sub(rhs.subs),
            mul_pt: self.mul_pt.saturating_sub(rhs.mul_pt),
            mul_ct: self.mul_ct.saturating_sub(rhs.mul_ct),
            rotations: self.rotations.saturating_sub(rhs.rotations),
            rescales: self.rescales.saturating_sub(rhs.rescales),
            bootstraps: self.bootstraps.saturating_sub(rhs.bootstraps),
            keyswitches: self.keyswitches.saturating_sub(rhs.keyswitches),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Op {
    Add,
    Sub,
    MulPt,
    MulCt,
    Rot,
    Rescale,
    Bootstrap,
    KeySwitch,
}

/// Live meter owned by one context scope. Shared `&` access is fine across threads.
#[derive(Debug, Default)]
pub(crate) struct OpMeter {
    tallies: [AtomicU64; 8],
}

impl OpMeter {
    pub(crate) fn bump(&self, op: Op) {
        self.tallies[op as usize].fetch_add(1, Ordering::Relaxed);
    }

    pub(crate) fn snapshot(&self) -> OpCounter {
        let t = |op: Op| self.tallies[op as usize].load(Ordering::Relaxed);
        OpCounter {
            adds: t(Op::Add),
            subs: t(Op::Sub),
            mul_pt: t(Op::MulPt),
            mul_ct: t(Op::MulCt),
            rotations: t(Op::Rot),
            rescales: t(Op::Rescale),
            bootstraps: t(Op::Bootstrap),
            keyswitches: t(Op::KeySwitch),
        }
    }

    pub(crate) fn reset(&self) {
        for t in &self.tallies {
            t.store(0, Ordering::Relaxed);
        }
    }

    pub(crate) fn absorb(&self, other: &OpCounter) {
        let pairs = [
            (Op::Add, other.adds),
            (Op::Sub, other.subs),
            (Op::MulPt, other.mul_pt),
            (Op::MulCt, other.mul_ct),
            (Op::Rot, other.rotations),
            (Op::Rescale, other.rescales),
            (Op::Bootstrap, other.bootstraps),
            (Op::KeySwitch, other.keyswitches),
        ];
        for (op, n) in pairs {
            self.tallies[op as usize].fetch_add(n, Ordering::Relaxed);
        }
    }
}
