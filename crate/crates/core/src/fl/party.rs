//! Party side of the protocol: answer collective requests, run the local
//! step on each model broadcast, send gradients back.

use super::algebra::CipherAlgebra;
use super::data::Dataset;
use super::model::{backward, forward, Plan};
use super::transport::PartyLink;
use super::wire::{MsgType, WireMessage, SERVER_ID};
use crate::engine::{Bootstrapper, CryptoContext, PartyId, SlotVector};
use crate::error::{Error, Result};
use crate::matrix::{encode_matrix, PackedMatrix};

pub struct Party<'a> {
    pub id: PartyId,
    pub ctx: &'a CryptoContext,
    pub plan: &'a Plan,
    pub shard: &'a Dataset,
}

/// Collective bootstrap over the wire. While waiting for its own refresh
/// the party keeps answering requests forwarded on behalf of others.
pub struct WireCollective<'a> {
    pub id: PartyId,
    pub round: u32,
    pub link: &'a dyn PartyLink,
}

impl WireCollective<'_> {
    fn share(&self) -> Result<()> {
        self.link.send(&WireMessage::new(
            MsgType::BootstrapShare,
            self.round,
            self.id,
        ))
    }
}

fn check_hygiene(ctx: &CryptoContext, ct: &SlotVector) -> Result<()> {
    if ct.key_tag() == ctx.server_key() {
        return Err(Error::Protocol(
            "party received a ciphertext under the server key".into(),
        ));
    }
    Ok(())
}

impl Bootstrapper for WireCollective<'_> {
    fn bootstrap(&self, ctx: &CryptoContext, ct: &SlotVector) -> Result<SlotVector> {
        self.link
            .send(&WireMessage::new(MsgType::BootstrapReq, self.round, self.id).with_ct(ct))?;
        loop {
            let msg = self.link.recv()?;
            match msg.msg_type {
                MsgType::BootstrapReq => self.share()?,
                MsgType::BootstrapShare if msg.party == SERVER_ID => {
                    let fresh = msg.ct(ctx)?;
                    check_hygiene(ctx, &fresh)?;
                    return Ok(fresh);
                }
                other => {
                    return Err(Error::Protocol(format!(
                        "party {} waiting for a bootstrap got {other:?}",
                        self.id
                    )))
                }
            }
        }
    }
}

impl Party<'_> {
    /// Local step on the round's batch; gradients come back refreshed.
    pub fn local_gradients(
        &self,
        weights: &[PackedMatrix],
        round: u32,
        boot: &dyn Bootstrapper,
    ) -> Result<Vec<PackedMatrix>> {
        let (x, y) = self.plan.layout.batch_images(self.shard, round)?;
        let alg = CipherAlgebra {
            ctx: self.ctx,
            boot,
        };
        let x = encode_matrix(self.ctx, &x)?;
        let y = encode_matrix(self.ctx, &y)?;
        let fwd = forward(&alg, self.plan, weights, &x)?;
        backward(&alg, self.plan, weights, &fwd, &y)
    }

    /// Serve until the server says DONE.
    pub fn run(&self, link: &dyn PartyLink) -> Result<()> {
        let layers = self.plan.layout.layers();
        let h = self.plan.layout.h;
        let mut weights: Vec<PackedMatrix> = Vec::with_capacity(layers);
        let mut round = 0;
        loop {
            let msg = link.recv()?;
            match msg.msg_type {
                MsgType::ModelBcast => {
                    if !weights.is_empty() && msg.round != round {
                        return Err(Error::Protocol(format!(
                            "model broadcast mixes rounds {round} and {}",
                            msg.round
                        )));
                    }
                    round = msg.round;
                    let ct = msg.ct(self.ctx)?;
                    check_hygiene(self.ctx, &ct)?;
                    weights.push(PackedMatrix {
                        ct,
                        dim_h: h,
                        rows_t: h,
                        batch_beta: 1,
                    });
                    if weights.len() == layers {
                        let boot = WireCollective {
                            id: self.id,
                            round,
                            link,
                        };
                        let grads = self.local_gradients(&weights, round, &boot)?;
                        for g in &grads {
                            link.send(
                                &WireMessage::new(MsgType::Gradient, round, self.id).with_ct(&g.ct),
                            )?;
                        }
                        weights.clear();
                    }
                }
                MsgType::BootstrapReq => link.send(&WireMessage::new(
                    MsgType::BootstrapShare,
                    msg.round,
                    self.id,
                ))?,
                MsgType::KeyswitchReq => {
                    let ct = msg.ct(self.ctx)?;
                    check_hygiene(self.ctx, &ct)?;
                    link.send(&WireMessage::new(
                        MsgType::KeyswitchShare,
                        msg.round,
                        self.id,
                    ))?
                }
                MsgType::Done => return Ok(()),
                other => {
                    return Err(Error::Protocol(format!(
                        "party {} got unexpected {other:?}",
                        self.id
                    )))
                }
            }
        }
    }
}
