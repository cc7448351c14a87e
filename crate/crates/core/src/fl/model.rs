//! Padded network layout and the generic local step:
//! forward pass, loss gradient, backward pass and server update.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::algebra::Algebra;
use super::config::{ActKind, TrainingConfig};
use super::data::Dataset;
use crate::approx::eval_composite_power;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Shapes after padding. Every weight is stored as an h x h image with the
/// logical `in x out` block in its top-left corner; mini-batches are
/// `t = next_pow2(batch)` rows replicated h/t times. Inputs carry one
/// extra constant 1.0 column, which acts as the first layer's bias.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub h: usize,
    pub t: usize,
    pub batch: usize,
    pub features: usize,
    pub classes: usize,
    /// Logical (in, out) of each layer.
    pub dims: Vec<(usize, usize)>,
}

impl Layout {
    pub fn new(cfg: &TrainingConfig, features: usize) -> Result<Self> {
        if features == 0 {
            return Err(Error::Config("dataset has no feature columns".into()));
        }
        let mut dims = Vec::with_capacity(cfg.layers);
        let mut fan_in = features + 1;
        for &w in &cfg.neurons {
            dims.push((fan_in, w));
            fan_in = w;
        }
        let t = cfg.batch_size.next_power_of_two();
        let widest = cfg.neurons.iter().copied().max().unwrap_or(1);
        let h = (features + 1).max(widest).max(t).max(2).next_power_of_two();
        Ok(Layout {
            h,
            t,
            batch: cfg.batch_size,
            features,
            classes: *cfg.neurons.last().expect("validated"),
            dims,
        })
    }

    pub fn layers(&self) -> usize {
        self.dims.len()
    }

    /// `cfg.ring_dim` if set, else the smallest ring holding one h x h image.
    pub fn ring_dim(&self, cfg: &TrainingConfig) -> Result<usize> {
        let ring = cfg.ring_dim.unwrap_or(2 * self.h * self.h);
        let slots = ring / 2;
        if slots < self.h * self.h || slots % (self.h * self.h) != 0 {
            return Err(Error::Config(format!(
                "ring_dim {ring} cannot hold a padded {h}x{h} matrix",
                h = self.h
            )));
        }
        Ok(ring)
    }

    /// Replicated input and one-hot target images for one party's batch in
    /// `round`: rows `(round * batch + r) mod n` for r < batch.
    pub fn batch_images(&self, data: &Dataset, round: u32) -> Result<(Matrix, Matrix)> {
        let n = data.len();
        if n == 0 {
            return Err(Error::Config("party shard is empty".into()));
        }
        if data.feature_count() != self.features {
            return Err(Error::DimensionMismatch(format!(
                "shard has {} features, model expects {}",
                data.feature_count(),
                self.features
            )));
        }
        let mut x = Matrix::zeros(self.t, self.h);
        let mut y = Matrix::zeros(self.t, self.h);
        for r in 0..self.batch {
            let i = ((round as u64 * self.batch as u64 + r as u64) % n as u64) as usize;
            for j in 0..self.features {
                x.set(r, j, data.features.get(i, j));
            }
            x.set(r, self.features, 1.0);
            let label = data.labels[i];
            if label >= self.classes {
                return Err(Error::Config(format!(
                    "label {label} out of range for {} output neurons",
                    self.classes
                )));
            }
            y.set(r, label, 1.0);
        }
        let copies = self.h / self.t;
        Ok((x.stacked(copies), y.stacked(copies)))
    }

    /// Seeded initial weights, uniform in +-1/sqrt(fan_in), zero padding.
    pub fn init_weights(&self, seed: u64) -> Vec<Matrix> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.dims
            .iter()
            .map(|&(i, o)| {
                Matrix::random(i, o, 1.0 / (i as f64).sqrt(), &mut rng).resized(self.h, self.h)
            })
            .collect()
    }

    /// Unpad weight images back to their logical shapes.
    pub fn unpad(&self, weights: &[Matrix]) -> Vec<Matrix> {
        weights
            .iter()
            .zip(&self.dims)
            .map(|(w, &(i, o))| w.resized(i, o))
            .collect()
    }
}

/// Everything a party or the mirror needs to run the local step.
#[derive(Clone, Debug)]
pub struct Plan {
    pub layout: Layout,
    pub acts: Vec<ActKind>,
    pub loss_compat: bool,
    /// Valid (row, class) entries times the squared-loss factor 2 and the
    /// replication correction t/h.
    pub loss_mask: Matrix,
    pub weight_masks: Vec<Matrix>,
    /// eta / (batch * parties)
    pub step_factor: f64,
}

impl Plan {
    pub fn new(cfg: &TrainingConfig, features: usize) -> Result<Self> {
        let layout = Layout::new(cfg, features)?;
        let (h, t) = (layout.h, layout.t);
        let mut acts = vec![cfg.hidden_act()?; layout.layers() - 1];
        acts.push(cfg.output_act()?);
        let factor = if cfg.squared_residual_loss { 1.0 } else { 2.0 } * t as f64 / h as f64;
        let loss_mask = Matrix::from_fn(h, h, |i, j| {
            if i % t < layout.batch && j < layout.classes {
                factor
            } else {
                0.0
            }
        });
        let weight_masks = layout
            .dims
            .iter()
            .map(|&(fi, fo)| Matrix::from_fn(h, h, |i, j| f64::from(u8::from(i < fi && j < fo))))
            .collect();
        Ok(Plan {
            step_factor: cfg.learning_rate / (cfg.batch_size as f64 * f64::from(cfg.party_count)),
            layout,
            acts,
            loss_compat: cfg.squared_residual_loss,
            loss_mask,
            weight_masks,
        })
    }
}

/// Layer outputs M_0..M_L and activation derivatives of layers 1..L.
#[derive(Clone, Debug)]
pub struct ForwardPass<V> {
    pub outputs: Vec<V>,
    pub derivs: Vec<Option<V>>,
}

/// phi(E) and phi'(E). ReLU uses the gate (g(E/R) + 1)/2 for both.
pub fn activate<A: Algebra>(alg: &A, act: &ActKind, e: &A::V) -> Result<(A::V, Option<A::V>)> {
    match act {
        ActKind::Identity => Ok((e.clone(), None)),
        ActKind::Relu { spec, inv_range } => {
            let u = alg.scale(e, *inv_range)?;
            let sg = alg.sign(&u, spec)?;
            let gate = alg.scale(&alg.add_const(&sg, 1.0)?, 0.5)?;
            let m = alg.mul(e, &gate)?;
            Ok((m, Some(gate)))
        }
        ActKind::Sigmoid { fit } => {
            let m = alg.poly(e, fit)?;
            let sq = alg.mul(&m, &m)?;
            let d = alg.sub(&m, &sq)?;
            Ok((m, Some(d)))
        }
    }
}

pub fn forward<A: Algebra>(
    alg: &A,
    plan: &Plan,
    weights: &[A::V],
    x: &A::V,
) -> Result<ForwardPass<A::V>> {
    let mut outputs = vec![x.clone()];
    let mut derivs = Vec::with_capacity(weights.len());
    for (w, act) in weights.iter().zip(&plan.acts) {
        let e = alg.rect(outputs.last().expect("input present"), w, plan.layout.t)?;
        let (m, d) = activate(alg, act, &e)?;
        outputs.push(m);
        derivs.push(d);
    }
    Ok(ForwardPass { outputs, derivs })
}

/// Masked weight gradients, refreshed before they leave the party.
pub fn backward<A: Algebra>(
    alg: &A,
    plan: &Plan,
    weights: &[A::V],
    fwd: &ForwardPass<A::V>,
    y: &A::V,
) -> Result<Vec<A::V>> {
    let layers = weights.len();
    let out = &fwd.outputs[layers];
    let diff = if plan.loss_compat {
        let d = alg.sub(y, out)?;
        alg.mul(&d, &d)?
    } else {
        alg.sub(out, y)?
    };
    let mut l = alg.mul_plain(&diff, &plan.loss_mask)?;
    if let Some(d) = &fwd.derivs[layers - 1] {
        l = alg.mul(&l, d)?;
    }
    let mut grads: Vec<Option<A::V>> = vec![None; layers];
    for j in (0..layers).rev() {
        let mt = alg.transpose(&fwd.outputs[j])?;
        let g = alg.rect(&mt, &l, plan.layout.h)?;
        if j > 0 {
            let wt = alg.transpose(&weights[j])?;
            let lp = alg.rect(&l, &wt, plan.layout.t)?;
            l = match &fwd.derivs[j - 1] {
                Some(d) => alg.mul(&lp, d)?,
                None => lp,
            };
        }
        let g = alg.mul_plain(&g, &plan.weight_masks[j])?;
        grads[j] = Some(alg.refresh(&g)?);
    }
    Ok(grads
        .into_iter()
        .map(|g| g.expect("every layer filled"))
        .collect())
}

/// `w_j - factor * sum_p grads[p][j]`, summing parties in the given order.
pub fn apply_gradients<A: Algebra>(
    alg: &A,
    weights: &[A::V],
    grads: &[Vec<A::V>],
    factor: f64,
) -> Result<Vec<A::V>> {
    if grads.is_empty() {
        return Err(Error::Protocol("no gradients to aggregate".into()));
    }
    weights
        .iter()
        .enumerate()
        .map(|(j, w)| {
            let mut acc = grads[0][j].clone();
            for g in &grads[1..] {
                acc = alg.add(&acc, &g[j])?;
            }
            alg.sub(w, &alg.scale(&acc, factor)?)
        })
        .collect()
}

fn act_scalar(act: &ActKind, exact: bool, x: f64) -> f64 {
    match act {
        ActKind::Identity => x,
        ActKind::Relu { spec, inv_range } => {
            let u = x * inv_range;
            let sg = if exact {
                if u > 0.0 {
                    1.0
                } else if u < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            } else {
                eval_composite_power(u, spec)
            };
            x * ((sg + 1.0) * 0.5)
        }
        ActKind::Sigmoid { fit } => {
            if exact {
                fit.target.eval(x)
            } else {
                fit.eval(x)
            }
        }
    }
}

/// Class predictions of padded weights on every row of `data`.
pub fn predict(
    plan: &Plan,
    weights: &[Matrix],
    exact: bool,
    features: &Matrix,
) -> Result<Vec<usize>> {
    let h = plan.layout.h;
    let f = plan.layout.features;
    let mut m = Matrix::from_fn(features.rows(), h, |i, j| match j.cmp(&f) {
        std::cmp::Ordering::Less => features.get(i, j),
        std::cmp::Ordering::Equal => 1.0,
        std::cmp::Ordering::Greater => 0.0,
    });
    for (w, act) in weights.iter().zip(&plan.acts) {
        m = m.matmul(w)?.map(|x| act_scalar(act, exact, x));
    }
    Ok((0..m.rows())
        .map(|i| {
            let row = &m.row(i)[..plan.layout.classes];
            let mut best = 0;
            for (c, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = c;
                }
            }
            best
        })
        .collect())
}

pub fn accuracy(plan: &Plan, weights: &[Matrix], exact: bool, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let pred = predict(plan, weights, exact, &data.features)?;
    let hits = pred
        .iter()
        .zip(&data.labels)
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::super::algebra::{CipherAlgebra, PlainAlgebra};
    use super::*;
    use crate::engine::{ContextParams, CryptoContext, DirectCollective};
    use crate::matrix::{decode_matrix, encode_matrix};

    fn cfg(act: &str) -> TrainingConfig {
        TrainingConfig::from_json(&format!(
            r#"{{"layers": 2, "neurons": [4, 2], "learning_rate": 0.1, "global_iters": 1,
                "batch_size": 3, "party_count": 2, "seed": 1, "activation": {act}}}"#
        ))
        .unwrap()
    }

    #[test]
    fn layout_padding() {
        let l = Layout::new(&cfg(r#"{"kind": "identity"}"#), 3).unwrap();
        assert_eq!((l.h, l.t, l.classes), (4, 4, 2));
        assert_eq!(l.dims, [(4, 4), (4, 2)]);
        let w = l.init_weights(5);
        assert_eq!(w[1].get(3, 2), 0.0);
        assert!(w[0].get(3, 3).abs() <= 0.5);
        assert_eq!(w, l.init_weights(5));
    }

    #[test]
    fn batch_rows_wrap() {
        let l = Layout::new(&cfg(r#"{"kind": "identity"}"#), 2).unwrap();
        assert_eq!(l.h, 4);
        let d = Dataset::new(
            Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap(),
            vec![0, 1],
        )
        .unwrap();
        let (x, y) = l.batch_images(&d, 1).unwrap();
        // round 1 takes rows 3, 4, 5 mod 2 = 1, 0, 1
        assert_eq!(x.row(0), &[3.0, 4.0, 1.0, 0.0]);
        assert_eq!(x.row(1), &[1.0, 2.0, 1.0, 0.0]);
        assert_eq!(x.row(3), &[0.0; 4]);
        assert_eq!(y.row(0), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn gradient_matches_closed_form() {
        // identity network: grad = 2 X^T (X W - Y) over the batch, X with a ones column
        let c = TrainingConfig {
            layers: 1,
            neurons: vec![2],
            ..cfg(r#"{"kind": "identity"}"#)
        };
        let plan = Plan::new(&c, 2).unwrap();
        let d = Dataset::new(
            Matrix::from_rows(&[[0.5, -1.0], [0.25, 2.0], [1.0, 0.0]]).unwrap(),
            vec![1, 0, 1],
        )
        .unwrap();
        let w = plan.layout.init_weights(3);
        let (x, y) = plan.layout.batch_images(&d, 0).unwrap();
        let alg = PlainAlgebra::default();
        let fwd = forward(&alg, &plan, &w, &x).unwrap();
        let g = backward(&alg, &plan, &w, &fwd, &y).unwrap();
        let xs = Matrix::from_fn(3, 3, |i, j| if j < 2 { d.features.get(i, j) } else { 1.0 });
        let ys = Matrix::from_fn(3, 2, |i, j| f64::from(u8::from(d.labels[i] == j)));
        let wl = w[0].resized(3, 2);
        let r = Matrix::from_fn(3, 2, |i, j| {
            xs.matmul(&wl).unwrap().get(i, j) - ys.get(i, j)
        });
        let want = xs.transpose().matmul(&r).unwrap().map(|v| 2.0 * v);
        assert!(g[0].resized(3, 2).max_abs_diff(&want) < 1e-12);
        assert_eq!(g[0].get(3, 3), 0.0);
        assert_eq!(g[0].get(0, 2), 0.0);
    }

    #[test]
    fn cipher_step_equals_plain_step() {
        for act in [
            r#"{"kind": "approx_relu", "d": 3, "sigma": 6, "delta": 0.02}"#,
            r#"{"kind": "approx_sigmoid", "degree": 5, "interval": [-6, 6]}"#,
        ] {
            let c = cfg(act);
            let plan = Plan::new(&c, 3).unwrap();
            let ctx = CryptoContext::new(ContextParams::new(2 * 16, 6, 2)).unwrap();
            let boot = DirectCollective::full(&ctx);
            let ca = CipherAlgebra {
                ctx: &ctx,
                boot: &boot,
            };
            let d = crate::fl::data::synthetic_bcw(1).select(&[0, 1, 2, 3, 4]);
            let d = Dataset::new(d.features.resized(5, 3), d.labels).unwrap();
            let w = plan.layout.init_weights(9);
            let (x, y) = plan.layout.batch_images(&d, 0).unwrap();
            let pa = PlainAlgebra::default();
            let pf = forward(&pa, &plan, &w, &x).unwrap();
            let pg = backward(&pa, &plan, &w, &pf, &y).unwrap();

            let enc = |m: &Matrix| encode_matrix(&ctx, m).unwrap();
            let cw: Vec<_> = w.iter().map(enc).collect();
            let cf = forward(&ca, &plan, &cw, &enc(&x)).unwrap();
            let cg = backward(&ca, &plan, &cw, &cf, &enc(&y)).unwrap();
            for (a, b) in pg.iter().zip(&cg) {
                assert_eq!(&decode_matrix(&ctx, b, &[0, 1]).unwrap(), a, "{act}");
                assert_eq!(b.level(), 6);
            }
            let upd_p = apply_gradients(&pa, &w, &[pg.clone(), pg], 0.1).unwrap();
            let upd_c = apply_gradients(&ca, &cw, &[cg.clone(), cg], 0.1).unwrap();
            assert_eq!(decode_matrix(&ctx, &upd_c[1], &[0, 1]).unwrap(), upd_p[1]);
        }
    }

    #[test]
    fn forward_level_drop() {
        let c = cfg(r#"{"kind": "identity"}"#);
        let plan = Plan::new(&c, 3).unwrap();
        let ctx = CryptoContext::new(ContextParams::new(32, 6, 2)).unwrap();
        let boot = DirectCollective::full(&ctx);
        let ca = CipherAlgebra {
            ctx: &ctx,
            boot: &boot,
        };
        let w = encode_matrix(&ctx, &plan.layout.init_weights(1)[0]).unwrap();
        let x = encode_matrix(&ctx, &Matrix::identity(4)).unwrap();
        let e = ca.rect(&x, &w, plan.layout.t).unwrap();
        assert_eq!(e.level(), 6 - crate::matrix::MATMUL_DEPTH_A);
    }
}
