//! Plaintext reference trainer: the same rounds, batches, padding and
//! step order as the encrypted run, on plain images.

use super::algebra::PlainAlgebra;
use super::config::TrainingConfig;
use super::data::FederatedData;
use super::model::{accuracy, apply_gradients, backward, forward, Plan};
use crate::error::{Error, Result};
use crate::matrix::Matrix;

#[derive(Clone, Debug)]
pub struct PlainRun {
    pub plan: Plan,
    /// Padded weights after every round.
    pub trajectory: Vec<Vec<Matrix>>,
    pub train_acc: Vec<f64>,
    pub test_acc: Vec<Option<f64>>,
}

impl PlainRun {
    pub fn final_weights(&self) -> Vec<Matrix> {
        self.plan
            .layout
            .unpad(self.trajectory.last().expect("at least one round"))
    }

    pub fn final_train_acc(&self) -> f64 {
        *self.train_acc.last().expect("at least one round")
    }

    pub fn final_test_acc(&self) -> Option<f64> {
        *self.test_acc.last().expect("at least one round")
    }
}

/// With `exact`, activations are the true ReLU / sigmoid; otherwise the
/// same polynomials the encrypted run evaluates.
pub fn train_plain(cfg: &TrainingConfig, data: &FederatedData, exact: bool) -> Result<PlainRun> {
    cfg.validate()?;
    if data.parties.len() != usize::from(cfg.party_count) {
        return Err(Error::Config(format!(
            "{} party shards for party_count {}",
            data.parties.len(),
            cfg.party_count
        )));
    }
    let features = data.parties[0].feature_count();
    let plan = Plan::new(cfg, features)?;
    let union = data.train_union()?;
    let alg = PlainAlgebra { exact };
    let mut weights = plan.layout.init_weights(cfg.seed);
    let mut run = PlainRun {
        plan: plan.clone(),
        trajectory: Vec::new(),
        train_acc: Vec::new(),
        test_acc: Vec::new(),
    };
    for round in 0..cfg.global_iters {
        let mut grads = Vec::with_capacity(data.parties.len());
        for shard in &data.parties {
            let (x, y) = plan.layout.batch_images(shard, round)?;
            let fwd = forward(&alg, &plan, &weights, &x)?;
            grads.push(backward(&alg, &plan, &weights, &fwd, &y)?);
        }
        weights = apply_gradients(&alg, &weights, &grads, plan.step_factor)?;
        run.train_acc
            .push(accuracy(&plan, &weights, exact, &union)?);
        run.test_acc.push(match &data.test {
            Some(t) => Some(accuracy(&plan, &weights, exact, t)?),
            None => None,
        });
        run.trajectory.push(weights.clone());
    }
    Ok(run)
}

/// Largest `|a - b| / max(|a|, |b|, floor)` over two weight trajectories.
pub fn max_relative_deviation(a: &[Vec<Matrix>], b: &[Vec<Matrix>]) -> f64 {
    assert_eq!(a.len(), b.len(), "trajectory lengths differ");
    let mut worst: f64 = 0.0;
    for (ra, rb) in a.iter().zip(b) {
        for (ma, mb) in ra.iter().zip(rb) {
            for (&x, &y) in ma.as_slice().iter().zip(mb.as_slice()) {
                let scale = x.abs().max(y.abs()).max(1e-6);
                worst = worst.max((x - y).abs() / scale);
            }
        }
    }
    worst
}

/// `|a - b| <= rel * max(|a|, |b|) + abs` for every weight of every round.
pub fn trajectories_match(a: &[Vec<Matrix>], b: &[Vec<Matrix>], rel: f64, abs: f64) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(ra, rb)| {
            ra.iter().zip(rb).all(|(ma, mb)| {
                ma.as_slice()
                    .iter()
                    .zip(mb.as_slice())
                    .all(|(&x, &y)| (x - y).abs() <= rel * x.abs().max(y.abs()) + abs)
            })
        })
}
