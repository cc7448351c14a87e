//! Encrypted evaluation of g_d compositions and the derived max/abs/ReLU,
//! plus scalar mirrors that repeat the exact same floating-point steps.

use super::composite::{power_split, CompositePolySpec};
use crate::engine::{Bootstrapper, CryptoContext, SlotVector};
use crate::error::{Error, Result};

/// Bootstrap `ct` if it has fewer than `need` levels left.
pub fn ensure_level(
    ctx: &CryptoContext,
    ct: &SlotVector,
    need: u32,
    boot: Option<&dyn Bootstrapper>,
    op: &'static str,
) -> Result<SlotVector> {
    if ct.level() >= need {
        return Ok(ct.clone());
    }
    let Some(b) = boot else {
        return Err(Error::LevelExhausted {
            op,
            level: ct.level(),
        });
    };
    let fresh = b.bootstrap(ctx, ct)?;
    if fresh.level() < need {
        return Err(Error::InvalidParams(format!(
            "{op} needs {need} levels per stage but the context starts at {}",
            fresh.level()
        )));
    }
    Ok(fresh)
}

fn scaled(ctx: &CryptoContext, ct: &SlotVector, c: f64) -> Result<SlotVector> {
    ctx.rescale(&ctx.mul_pt(ct, &ctx.constant(c))?)
}

fn product(ctx: &CryptoContext, a: &SlotVector, b: &SlotVector) -> Result<SlotVector> {
    ctx.rescale(&ctx.mul_ct(a, b)?)
}

/// Powers x^1..x^(len-1) by the balanced split tree; index 0 unused.
fn power_tree(ctx: &CryptoContext, x: &SlotVector, len: usize) -> Result<Vec<SlotVector>> {
    let mut pow: Vec<SlotVector> = Vec::with_capacity(len);
    pow.push(x.clone());
    if len > 1 {
        pow.push(x.clone());
    }
    for i in 2..len {
        let p = power_split(i);
        let next = product(ctx, &pow[p], &pow[i - p])?;
        pow.push(next);
    }
    Ok(pow)
}

/// One application of g_d: sum_i (c_i m) * (m^2)^i.
pub fn eval_g_ct(ctx: &CryptoContext, m: &SlotVector, coeffs: &[f64]) -> Result<SlotVector> {
    let x = product(ctx, m, m)?;
    let pow = power_tree(ctx, &x, coeffs.len())?;
    let mut acc = scaled(ctx, m, coeffs[0])?;
    for i in 1..coeffs.len() {
        let cm = scaled(ctx, m, coeffs[i])?;
        acc = ctx.add(&acc, &product(ctx, &cm, &pow[i])?)?;
    }
    Ok(acc)
}

/// Slot-wise g_d^(k); bootstraps between stages when a stage would not fit.
pub fn app_sign(
    ctx: &CryptoContext,
    ct: &SlotVector,
    spec: &CompositePolySpec,
    boot: Option<&dyn Bootstrapper>,
) -> Result<SlotVector> {
    let mut cur = ct.clone();
    for _ in 0..spec.k {
        cur = ensure_level(ctx, &cur, spec.stage_depth(), boot, "app_sign")?;
        cur = eval_g_ct(ctx, &cur, &spec.coeffs)?;
    }
    Ok(cur)
}

/// `m * g^(k)(m)`, approximating |m|.
pub fn app_abs(
    ctx: &CryptoContext,
    ct: &SlotVector,
    spec: &CompositePolySpec,
    boot: Option<&dyn Bootstrapper>,
) -> Result<SlotVector> {
    let sg = app_sign(ctx, ct, spec, boot)?;
    let sg = ensure_level(ctx, &sg, 1, boot, "app_abs")?;
    let m = ensure_level(ctx, ct, 1, boot, "app_abs")?;
    product(ctx, &m, &sg)
}

/// `(a+b)/2 + ((a-b)/2) * g^(k)(a-b)`. Equal inputs give `a` exactly.
pub fn app_max(
    ctx: &CryptoContext,
    a: &SlotVector,
    b: &SlotVector,
    spec: &CompositePolySpec,
    boot: Option<&dyn Bootstrapper>,
) -> Result<SlotVector> {
    let diff = ctx.sub(a, b)?;
    let sg = app_sign(ctx, &diff, spec, boot)?;
    let sg = ensure_level(ctx, &sg, 1, boot, "app_max")?;
    let diff = ensure_level(ctx, &diff, 2, boot, "app_max")?;
    let half_diff = scaled(ctx, &diff, 0.5)?;
    let sum = ensure_level(ctx, &ctx.add(a, b)?, 1, boot, "app_max")?;
    let half_sum = scaled(ctx, &sum, 0.5)?;
    ctx.add(&half_sum, &product(ctx, &half_diff, &sg)?)
}

/// `m/2 + (m/2) * g^(k)(m)`: the max formula against zero.
pub fn app_relu(
    ctx: &CryptoContext,
    ct: &SlotVector,
    spec: &CompositePolySpec,
    boot: Option<&dyn Bootstrapper>,
) -> Result<SlotVector> {
    let sg = app_sign(ctx, ct, spec, boot)?;
    let sg = ensure_level(ctx, &sg, 1, boot, "app_relu")?;
    let m = ensure_level(ctx, ct, 2, boot, "app_relu")?;
    let half = scaled(ctx, &m, 0.5)?;
    ctx.add(&half, &product(ctx, &half, &sg)?)
}

/// Monomial polynomial `sum_i c_i u^i` with a power tree on u.
/// Depth: ceil(log2 deg) + 1.
pub fn eval_poly_ct(ctx: &CryptoContext, u: &SlotVector, coeffs: &[f64]) -> Result<SlotVector> {
    if coeffs.len() < 2 {
        return Err(Error::InvalidParams(
            "polynomial degree must be >= 1".into(),
        ));
    }
    let pow = power_tree(ctx, u, coeffs.len())?;
    let mut acc = scaled(ctx, &pow[1], coeffs[1])?;
    for i in 2..coeffs.len() {
        acc = ctx.add(&acc, &scaled(ctx, &pow[i], coeffs[i])?)?;
    }
    ctx.add_pt(&acc, &ctx.constant(coeffs[0]))
}

// ---- scalar mirrors ----

pub fn plain_app_sign(m: f64, spec: &CompositePolySpec) -> f64 {
    super::composite::eval_composite_power(m, spec)
}

pub fn plain_app_abs(m: f64, spec: &CompositePolySpec) -> f64 {
    m * plain_app_sign(m, spec)
}

pub fn plain_app_max(a: f64, b: f64, spec: &CompositePolySpec) -> f64 {
    let diff = a - b;
    let sg = plain_app_sign(diff, spec);
    let half_diff = diff * 0.5;
    let half_sum = (a + b) * 0.5;
    half_sum + half_diff * sg
}

pub fn plain_app_relu(m: f64, spec: &CompositePolySpec) -> f64 {
    let sg = plain_app_sign(m, spec);
    let half = m * 0.5;
    half + half * sg
}

pub fn plain_poly(u: f64, coeffs: &[f64]) -> f64 {
    let mut pow = vec![u; coeffs.len()];
    for i in 2..coeffs.len() {
        let p = power_split(i);
        pow[i] = pow[p] * pow[i - p];
    }
    let mut acc = pow[1] * coeffs[1];
    for i in 2..coeffs.len() {
        acc = acc + pow[i] * coeffs[i];
    }
    acc + coeffs[0]
}

/// Levels consumed by [`eval_poly_ct`] for a degree-`deg` polynomial.
pub fn poly_depth(deg: usize) -> u32 {
    super::composite::ceil_log2(deg as u32) + 1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{ContextParams, DirectCollective};

    fn ctx(levels: u32) -> CryptoContext {
        CryptoContext::new(ContextParams::new(64, levels, 3)).unwrap()
    }

    fn dec(ctx: &CryptoContext, ct: &SlotVector) -> Vec<f64> {
        ctx.decode(&ctx.ddec(ct, &ctx.full_roster()).unwrap())
    }

    #[test]
    fn sign_matches_mirror_bitwise() {
        let c = ctx(6);
        let spec = CompositePolySpec::new(4, 17, 20, 2f64.powi(-20)).unwrap();
        let vals: Vec<f64> = (0..32).map(|i| -1.0 + i as f64 / 15.5).collect();
        let boot = DirectCollective::full(&c);
        let (out, m) = c.measure(|| {
            app_sign(&c, &c.encrypt_values(&vals).unwrap(), &spec, Some(&boot)).unwrap()
        });
        let got = dec(&c, &out);
        for (v, g) in vals.iter().zip(&got) {
            assert_eq!(*g, plain_app_sign(*v, &spec));
            assert!((g - super::super::composite::eval_composite(*v, &spec).unwrap()).abs() < 1e-9);
        }
        // 6 levels, 4 per stage: one bootstrap before every stage but the first
        assert_eq!(m.bootstraps, 16);
    }

    #[test]
    fn needs_bootstrapper_when_deep() {
        let c = ctx(6);
        let spec = CompositePolySpec::new(4, 2, 20, 0.01).unwrap();
        let ct = c.encrypt_values(&[0.5]).unwrap();
        assert!(matches!(
            app_sign(&c, &ct, &spec, None),
            Err(Error::LevelExhausted { .. })
        ));
        let shallow = CompositePolySpec::new(1, 1, 1, 0.5).unwrap();
        assert!(app_sign(&c, &ct, &shallow, None).is_ok());
    }

    #[test]
    fn max_ties_and_relu() {
        let c = ctx(8);
        let boot = DirectCollective::full(&c);
        let spec = CompositePolySpec::new(4, 17, 20, 2f64.powi(-20)).unwrap();
        let a = c.encrypt_values(&[0.8, 0.3, 0.2, -0.4]).unwrap();
        let b = c.encrypt_values(&[0.3, 0.3, 0.7, -0.4]).unwrap();
        let out = dec(&c, &app_max(&c, &a, &b, &spec, Some(&boot)).unwrap());
        assert!((out[0] - 0.8).abs() <= 2f64.powi(-20));
        assert_eq!(out[1], 0.3);
        assert!((out[2] - 0.7).abs() <= 2f64.powi(-20));
        assert_eq!(out[3], -0.4);
        let r = dec(&c, &app_relu(&c, &a, &spec, Some(&boot)).unwrap());
        assert!((r[0] - 0.8).abs() <= 2f64.powi(-20));
        assert!(r[3].abs() <= 2f64.powi(-20));
        assert_eq!(r[0], plain_app_relu(0.8, &spec));
        let ab = dec(
            &c,
            &app_abs(&c, &c.encrypt_values(&[-0.6]).unwrap(), &spec, Some(&boot)).unwrap(),
        );
        assert!((ab[0] - 0.6).abs() <= 2f64.powi(-20));
    }

    #[test]
    fn poly_eval_matches_plain() {
        let c = ctx(6);
        let coeffs = [0.5, 0.25, -0.1, 0.03, 0.001, -0.002];
        let vals: Vec<f64> = (0..32).map(|i| -1.0 + i as f64 / 16.0).collect();
        let ct = c.encrypt_values(&vals).unwrap();
        let out = eval_poly_ct(&c, &ct, &coeffs).unwrap();
        assert_eq!(out.level(), 6 - poly_depth(5));
        for (v, g) in vals.iter().zip(dec(&c, &out)) {
            assert_eq!(g, plain_poly(*v, &coeffs));
        }
    }
}
