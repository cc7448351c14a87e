//! Server side: holds the encrypted model, coordinates collective
//! refreshes, aggregates gradients and runs the final key switch.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::time::Duration;

use super::algebra::CipherAlgebra;
use super::model::{apply_gradients, Plan};
use super::transport::ServerLink;
use super::wire::{MsgType, WireMessage, SERVER_ID};
use crate::engine::{Bootstrapper, CryptoContext, PartyId, SlotVector};
use crate::error::{Error, Result};
use crate::matrix::{decode_matrix, encode_matrix, lane_of, Matrix, PackedMatrix};

/// The server never refreshes on its own; its update fits the level budget.
struct NoBootstrap;

impl Bootstrapper for NoBootstrap {
    fn bootstrap(&self, _: &CryptoContext, ct: &SlotVector) -> Result<SlotVector> {
        Err(Error::LevelExhausted {
            op: "server update (no collective available)",
            level: ct.level(),
        })
    }
}

pub struct Server<'a> {
    pub ctx: &'a CryptoContext,
    pub plan: &'a Plan,
    pub total_rounds: u32,
    pub timeout: Duration,
    weights: Vec<PackedMatrix>,
    round: u32,
}

struct PendingBoot {
    requester: PartyId,
    ct: SlotVector,
    shares: BTreeSet<PartyId>,
}

impl<'a> Server<'a> {
    /// Encrypt the seeded initial model under the collective key.
    pub fn new(
        ctx: &'a CryptoContext,
        plan: &'a Plan,
        total_rounds: u32,
        timeout: Duration,
        seed: u64,
    ) -> Result<Self> {
        let weights = plan
            .layout
            .init_weights(seed)
            .iter()
            .map(|w| encode_matrix(ctx, w))
            .collect::<Result<Vec<_>>>()?;
        Ok(Server {
            ctx,
            plan,
            total_rounds,
            timeout,
            weights,
            round: 0,
        })
    }

    pub fn round(&self) -> u32 {
        self.round
    }

    pub fn weights(&self) -> &[PackedMatrix] {
        &self.weights
    }

    fn parties(&self) -> u16 {
        self.ctx.party_count()
    }

    /// Apply one round of gradients. Every party must be present.
    pub fn aggregate(&mut self, grads: &BTreeMap<PartyId, Vec<PackedMatrix>>) -> Result<()> {
        if self.round >= self.total_rounds {
            return Err(Error::Protocol(format!(
                "all {} rounds already aggregated",
                self.total_rounds
            )));
        }
        let layers = self.weights.len();
        let missing: Vec<PartyId> = (0..self.parties())
            .filter(|p| grads.get(p).is_none_or(|g| g.len() != layers))
            .collect();
        if !missing.is_empty() {
            return Err(Error::MissingParties(missing));
        }
        if let Some(&extra) = grads.keys().find(|&&p| p >= self.parties()) {
            return Err(Error::UnknownParty(extra));
        }
        let ordered: Vec<Vec<PackedMatrix>> = grads.values().cloned().collect();
        let alg = CipherAlgebra {
            ctx: self.ctx,
            boot: &NoBootstrap,
        };
        self.weights = apply_gradients(&alg, &self.weights, &ordered, self.plan.step_factor)?;
        self.round += 1;
        Ok(())
    }

    fn missing(&self, grads: &BTreeMap<PartyId, Vec<PackedMatrix>>) -> Vec<PartyId> {
        let layers = self.weights.len();
        (0..self.parties())
            .filter(|p| grads.get(p).is_none_or(|g| g.len() < layers))
            .collect()
    }

    fn recv(
        &self,
        link: &dyn ServerLink,
        waiting_on: impl FnOnce() -> Vec<PartyId>,
    ) -> Result<WireMessage> {
        match link.recv(self.timeout)? {
            Some(m) => Ok(m),
            None => Err(Error::RoundTimeout {
                round: self.round,
                missing: waiting_on(),
            }),
        }
    }

    fn check_round(&self, msg: &WireMessage) -> Result<()> {
        if msg.round != self.round {
            return Err(Error::Protocol(format!(
                "{:?} from party {} is for round {}, server is in round {}",
                msg.msg_type, msg.party, msg.round, self.round
            )));
        }
        Ok(())
    }

    /// Broadcast the model, serve bootstrap requests in arrival order and
    /// aggregate once every party has sent all of its gradients.
    pub fn run_round(&mut self, link: &dyn ServerLink) -> Result<()> {
        let n = self.parties();
        let layers = self.weights.len();
        for p in 0..n {
            for w in &self.weights {
                link.send(
                    p,
                    &WireMessage::new(MsgType::ModelBcast, self.round, SERVER_ID).with_ct(&w.ct),
                )?;
            }
        }
        let h = self.plan.layout.h;
        let mut grads: BTreeMap<PartyId, Vec<PackedMatrix>> = BTreeMap::new();
        let mut queue: VecDeque<(PartyId, SlotVector)> = VecDeque::new();
        let mut active: Option<PendingBoot> = None;
        loop {
            // start or finish collective refreshes
            loop {
                if active.is_none() {
                    let Some((requester, ct)) = queue.pop_front() else {
                        break;
                    };
                    for p in (0..n).filter(|&p| p != requester) {
                        link.send(
                            p,
                            &WireMessage::new(MsgType::BootstrapReq, self.round, requester)
                                .with_ct(&ct),
                        )?;
                    }
                    active = Some(PendingBoot {
                        requester,
                        ct,
                        shares: BTreeSet::new(),
                    });
                }
                let pending = active.as_ref().expect("set above");
                if pending.shares.len() + 1 < usize::from(n) {
                    break;
                }
                let mut roster: Vec<PartyId> = pending.shares.iter().copied().collect();
                roster.push(pending.requester);
                let fresh = self.ctx.dbootstrap(&pending.ct, &roster)?;
                link.send(
                    pending.requester,
                    &WireMessage::new(MsgType::BootstrapShare, self.round, SERVER_ID)
                        .with_ct(&fresh),
                )?;
                active = None;
            }
            let done = grads.len() == usize::from(n)
                && grads.values().all(|g| g.len() == layers)
                && active.is_none()
                && queue.is_empty();
            if done {
                break;
            }
            let msg = self.recv(link, || self.missing(&grads))?;
            self.check_round(&msg)?;
            match msg.msg_type {
                MsgType::Gradient => {
                    let ct = msg.ct(self.ctx)?;
                    if ct.key_tag() != self.ctx.collective_key() {
                        return Err(Error::KeyMismatch {
                            expected: self.ctx.collective_key(),
                            found: ct.key_tag(),
                        });
                    }
                    let entry = grads.entry(msg.party).or_default();
                    if entry.len() == layers {
                        return Err(Error::Protocol(format!(
                            "party {} sent more than {layers} gradients",
                            msg.party
                        )));
                    }
                    entry.push(PackedMatrix {
                        ct,
                        dim_h: h,
                        rows_t: h,
                        batch_beta: 1,
                    });
                }
                MsgType::BootstrapReq => queue.push_back((msg.party, msg.ct(self.ctx)?)),
                MsgType::BootstrapShare => match active.as_mut() {
                    Some(p) if p.requester != msg.party => {
                        if !p.shares.insert(msg.party) {
                            return Err(Error::Protocol(format!(
                                "duplicate bootstrap share from party {}",
                                msg.party
                            )));
                        }
                    }
                    _ => {
                        return Err(Error::Protocol(format!(
                            "unsolicited bootstrap share from party {}",
                            msg.party
                        )))
                    }
                },
                other => {
                    return Err(Error::Protocol(format!(
                        "server got unexpected {other:?} from party {}",
                        msg.party
                    )))
                }
            }
        }
        self.aggregate(&grads)
    }

    /// Decrypt the current model with the full roster. Simulation
    /// affordance used for per-round metrics only.
    pub fn monitor_weights(&self) -> Result<Vec<Matrix>> {
        let roster = self.ctx.full_roster();
        self.weights
            .iter()
            .map(|w| decode_matrix(self.ctx, w, &roster))
            .collect()
    }

    fn check_finished(&self) -> Result<()> {
        if self.round != self.total_rounds {
            return Err(Error::Protocol(format!(
                "finalize requested after {} of {} rounds",
                self.round, self.total_rounds
            )));
        }
        Ok(())
    }

    fn open(&self, switched: &SlotVector) -> Result<Matrix> {
        let pt = self.ctx.server_decrypt(switched)?;
        lane_of(pt.values(), self.plan.layout.h, 0)
    }

    /// Collective key switch to the server key over the wire, then DONE.
    pub fn finalize(&mut self, link: &dyn ServerLink) -> Result<Vec<Matrix>> {
        self.check_finished()?;
        let n = self.parties();
        let mut out = Vec::with_capacity(self.weights.len());
        for w in &self.weights {
            for p in 0..n {
                link.send(
                    p,
                    &WireMessage::new(MsgType::KeyswitchReq, self.round, SERVER_ID).with_ct(&w.ct),
                )?;
            }
            let mut shares: BTreeSet<PartyId> = BTreeSet::new();
            while shares.len() < usize::from(n) {
                let msg = self.recv(link, || (0..n).filter(|p| !shares.contains(p)).collect())?;
                if msg.msg_type != MsgType::KeyswitchShare {
                    return Err(Error::Protocol(format!(
                        "expected a key-switch share, got {:?} from party {}",
                        msg.msg_type, msg.party
                    )));
                }
                shares.insert(msg.party);
            }
            let roster: Vec<PartyId> = shares.into_iter().collect();
            let switched = self
                .ctx
                .dkey_switch(&w.ct, self.ctx.server_key(), &roster)?;
            out.push(self.open(&switched)?);
        }
        for p in 0..n {
            link.send(p, &WireMessage::new(MsgType::Done, self.round, SERVER_ID))?;
        }
        Ok(out)
    }

    /// Key switch with a directly supplied roster (no transport).
    pub fn finalize_direct(&self, roster: &[PartyId]) -> Result<Vec<Matrix>> {
        self.check_finished()?;
        self.weights
            .iter()
            .map(|w| {
                let switched = self.ctx.dkey_switch(&w.ct, self.ctx.server_key(), roster)?;
                self.open(&switched)
            })
            .collect()
    }
}
