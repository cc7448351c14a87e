use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub type PartyId = u16;

/// Symbolic key identifier. Carries no key material.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct KeyTag(pub [u8; 16]);

impl KeyTag {
    pub fn as_bytes(&self) -> &[u8; 16] {
        &self.0
    }
}

impl fmt::Display for KeyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0[..6] {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

impl fmt::Debug for KeyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "KeyTag({self})")
    }
}

/// Result of the simulated key ceremony: one secret-share marker per party,
/// the collective key everyone encrypts under, and the server's own key.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KeyShareSet {
    pub party_ids: Vec<PartyId>,
    pub share_tags: Vec<KeyTag>,
    pub collective_key_tag: KeyTag,
    pub server_key_tag: KeyTag,
}

impl KeyShareSet {
    pub(crate) fn generate(party_count: u16, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x6b65_7973);
        let mut tag = || {
            let mut b = [0u8; 16];
            rng.fill_bytes(&mut b);
            KeyTag(b)
        };
        let party_ids: Vec<PartyId> = (0..party_count).collect();
        let share_tags = party_ids.iter().map(|_| tag()).collect();
        let collective_key_tag = tag();
        let server_key_tag = tag();
        KeyShareSet {
            party_ids,
            share_tags,
            collective_key_tag,
            server_key_tag,
        }
    }

    pub fn is_registered(&self, tag: KeyTag) -> bool {
        tag == self.collective_key_tag || tag == self.server_key_tag
    }

    /// N-of-N check. Duplicates are tolerated, strangers and gaps are not.
    pub fn check_roster(&self, roster: &[PartyId]) -> Result<()> {
        if let Some(&p) = roster.iter().find(|p| !self.party_ids.contains(p)) {
            return Err(Error::UnknownParty(p));
        }
        let missing: Vec<PartyId> = self
            .party_ids
            .iter()
            .copied()
            .filter(|p| !roster.contains(p))
            .collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(Error::MissingParties(missing))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tags_are_distinct_and_seeded() {
        let a = KeyShareSet::generate(4, 7);
        let b = KeyShareSet::generate(4, 7);
        assert_eq!(a, b);
        assert_ne!(a.collective_key_tag, a.server_key_tag);
        assert_ne!(KeyShareSet::generate(4, 8), a);
    }

    #[test]
    fn roster_rules() {
        let k = KeyShareSet::generate(3, 1);
        assert!(k.check_roster(&[2, 0, 1]).is_ok());
        match k.check_roster(&[0, 2]) {
            Err(Error::MissingParties(m)) => assert_eq!(m, vec![1]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            k.check_roster(&[0, 1, 2, 9]),
            Err(Error::UnknownParty(9))
        ));
    }
}
