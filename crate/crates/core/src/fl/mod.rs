//! N-party encrypted training of a fully connected network: one server
//! thread and one thread per party, talking only through framed messages.

mod algebra;
mod config;
mod data;
mod mirror;
mod model;
mod party;
mod server;
mod transport;
pub mod wire;

use std::thread;

use serde::{Deserialize, Serialize};

pub use algebra::{Algebra, CipherAlgebra, PlainAlgebra};
pub use config::{ActKind, Activation, TrainingConfig};
pub use data::{
    party_file, separable_2d, synthetic_bcw, synthetic_federated, Dataset, FederatedData,
};
pub use mirror::{max_relative_deviation, train_plain, trajectories_match, PlainRun};
pub use model::{
    accuracy, activate, apply_gradients, backward, forward, predict, ForwardPass, Layout, Plan,
};
pub use party::{Party, WireCollective};
pub use server::Server;
pub use transport::{
    in_process, ChannelParty, Hub, PartyLink, ServerLink, TcpAcceptor, TcpParty, TransportKind,
};

use crate::engine::{ContextParams, CryptoContext, OpCounter};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundMetrics {
    pub round: u32,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
    /// Operations by the server and all parties during this round.
    pub ops: OpCounter,
    pub bytes_tx: u64,
    pub bytes_rx: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingMetrics {
    pub transport: TransportKind,
    pub parties: u16,
    pub padded_h: usize,
    pub ring_dim: usize,
    pub rounds: Vec<RoundMetrics>,
    pub final_train_acc: f64,
    pub final_test_acc: Option<f64>,
    /// Includes the final key switch.
    pub ops_total: OpCounter,
    pub bytes_tx_total: u64,
    pub bytes_rx_total: u64,
}

#[derive(Clone, Debug)]
pub struct TrainingOutcome {
    pub plan: Plan,
    /// Logical weights recovered by the server after the key switch.
    pub weights: Vec<Matrix>,
    /// Padded weights after every round, as seen by the monitor.
    pub trajectory: Vec<Vec<Matrix>>,
    pub metrics: TrainingMetrics,
}

fn check_shards(cfg: &TrainingConfig, data: &FederatedData) -> Result<usize> {
    if data.parties.len() != usize::from(cfg.party_count) {
        return Err(Error::Config(format!(
            "{} party shards for party_count {}",
            data.parties.len(),
            cfg.party_count
        )));
    }
    let f = data.parties[0].feature_count();
    if data.parties.iter().any(|d| d.feature_count() != f) {
        return Err(Error::Config("party shards differ in feature count".into()));
    }
    Ok(f)
}

struct Drive {
    weights: Vec<Matrix>,
    trajectory: Vec<Vec<Matrix>>,
    rounds: Vec<RoundMetrics>,
    ops_total: OpCounter,
    bytes: (u64, u64),
}

fn drive(
    server: &mut Server<'_>,
    link: &dyn ServerLink,
    party_ctxs: &[CryptoContext],
    data: &FederatedData,
) -> Result<Drive> {
    let plan = server.plan;
    let union = data.train_union()?;
    let meter = || {
        party_ctxs
            .iter()
            .fold(server.ctx.meter(), |acc, c| acc + c.meter())
    };
    let mut prev_ops = meter();
    let mut prev_bytes = link.bytes();
    let mut rounds = Vec::new();
    let mut trajectory = Vec::new();
    for _ in 0..server.total_rounds {
        server.run_round(link)?;
        let ops = meter();
        let bytes = link.bytes();
        let w = server.monitor_weights()?;
        rounds.push(RoundMetrics {
            round: server.round(),
            train_acc: accuracy(plan, &w, false, &union)?,
            test_acc: match &data.test {
                Some(t) => Some(accuracy(plan, &w, false, t)?),
                None => None,
            },
            ops: ops - prev_ops,
            bytes_tx: bytes.0 - prev_bytes.0,
            bytes_rx: bytes.1 - prev_bytes.1,
        });
        trajectory.push(w);
        prev_ops = ops;
        prev_bytes = bytes;
    }
    let finals = server.finalize(link)?;
    Ok(Drive {
        weights: plan.layout.unpad(&finals),
        trajectory,
        rounds,
        ops_total: meter(),
        bytes: link.bytes(),
    })
}

fn join_parties(handles: Vec<thread::ScopedJoinHandle<'_, Result<()>>>) -> Result<()> {
    let mut first = Ok(());
    for h in handles {
        let r = h
            .join()
            .unwrap_or_else(|_| Err(Error::Protocol("party thread panicked".into())));
        if first.is_ok() {
            first = r;
        }
    }
    first
}

/// Run the full protocol: key setup, `global_iters` rounds, key switch.
pub fn run_training(
    cfg: &TrainingConfig,
    data: &FederatedData,
    transport: TransportKind,
) -> Result<TrainingOutcome> {
    cfg.validate()?;
    let features = check_shards(cfg, data)?;
    let plan = Plan::new(cfg, features)?;
    let ring = plan.layout.ring_dim(cfg)?;
    let ctx = CryptoContext::new(
        ContextParams::new(ring, cfg.initial_level, cfg.party_count)
            .with_seed(cfg.seed)
            .with_noise(cfg.noise),
    )?;
    let party_ctxs: Vec<CryptoContext> = (0..cfg.party_count).map(|_| ctx.fork()).collect();
    let mut server = Server::new(&ctx, &plan, cfg.global_iters, cfg.round_timeout(), cfg.seed)?;
    let party = |id: u16| Party {
        id,
        ctx: &party_ctxs[usize::from(id)],
        plan: &plan,
        shard: &data.parties[usize::from(id)],
    };

    let (driven, parties) = thread::scope(|s| -> Result<(Result<Drive>, Result<()>)> {
        let mut handles = Vec::new();
        let driven = match transport {
            TransportKind::InProcess => {
                let (hub, ends) = in_process(cfg.party_count);
                for (id, end) in (0..cfg.party_count).zip(ends) {
                    let p = party(id);
                    handles.push(s.spawn(move || p.run(&end)));
                }
                let r = drive(&mut server, &hub, &party_ctxs, data);
                drop(hub);
                r
            }
            TransportKind::Tcp => {
                let mut acceptor = TcpAcceptor::bind()?;
                let addr = acceptor.addr()?;
                for id in 0..cfg.party_count {
                    let p = party(id);
                    handles.push(s.spawn(move || p.run(&TcpParty::connect(addr)?)));
                    let got = acceptor.accept()?;
                    debug_assert_eq!(got, id);
                }
                let hub = acceptor.into_hub();
                let r = drive(&mut server, &hub, &party_ctxs, data);
                drop(hub);
                r
            }
        };
        Ok((driven, join_parties(handles)))
    })?;
    let d = match (driven, parties) {
        (Ok(d), Ok(())) => d,
        (Ok(_), Err(e)) => return Err(e),
        (Err(e), _) => return Err(e),
    };
    let last = d.rounds.last().expect("global_iters >= 1");
    let metrics = TrainingMetrics {
        transport,
        parties: cfg.party_count,
        padded_h: plan.layout.h,
        ring_dim: ring,
        final_train_acc: last.train_acc,
        final_test_acc: last.test_acc,
        rounds: d.rounds,
        ops_total: d.ops_total,
        bytes_tx_total: d.bytes.0,
        bytes_rx_total: d.bytes.1,
    };
    Ok(TrainingOutcome {
        plan,
        weights: d.weights,
        trajectory: d.trajectory,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(parties: u16, iters: u32) -> TrainingConfig {
        TrainingConfig::from_json(&format!(
            r#"{{"layers": 2, "neurons": [4, 2], "learning_rate": 0.5, "global_iters": {iters},
                "batch_size": 4, "party_count": {parties}, "seed": 11,
                "activation": {{"kind": "approx_relu", "d": 3, "sigma": 6, "delta": 0.02}}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn encrypted_run_equals_mirror() {
        let c = cfg(3, 3);
        let data = synthetic_federated(3, 1);
        let data = FederatedData {
            parties: data
                .parties
                .iter()
                .map(|d| d.select(&(0..20).collect::<Vec<_>>()))
                .collect(),
            test: data.test,
        };
        let enc = run_training(&c, &data, TransportKind::InProcess).unwrap();
        let plain = train_plain(&c, &data, false).unwrap();
        assert_eq!(enc.trajectory, plain.trajectory);
        assert_eq!(enc.weights, plain.final_weights());
        assert_eq!(enc.metrics.rounds.len(), 3);
        let m = &enc.metrics;
        assert!(m
            .rounds
            .iter()
            .all(|r| r.ops.bootstraps > 0 && r.bytes_rx > 0));
        assert_eq!(m.ops_total.keyswitches, 2);
    }

    #[test]
    fn tcp_matches_in_process() {
        let c = cfg(2, 2);
        let data = synthetic_federated(2, 3);
        let a = run_training(&c, &data, TransportKind::InProcess).unwrap();
        let b = run_training(&c, &data, TransportKind::Tcp).unwrap();
        assert_eq!(a.trajectory, b.trajectory);
        assert_eq!(a.metrics.rounds, b.metrics.rounds);
        assert_eq!(a.metrics.bytes_tx_total, b.metrics.bytes_tx_total);
    }

    #[test]
    fn shard_count_checked() {
        let data = synthetic_federated(2, 3);
        assert!(matches!(
            run_training(&cfg(3, 1), &data, TransportKind::InProcess),
            Err(Error::Config(_))
        ));
    }
}
