use pmhe::engine::{ContextParams, CryptoContext, NoiseMode, OpCounter};
use pmhe::{new_context, Error};

fn ctx(ring: usize, parties: u16) -> CryptoContext {
    new_context(ring, 6, 2f64.powi(40), parties, NoiseMode::Exact).unwrap()
}

fn dec(c: &CryptoContext, ct: &pmhe::SlotVector) -> Vec<f64> {
    c.decode(&c.ddec(ct, &c.full_roster()).unwrap())
}

#[test]
fn context_examples() {
    assert_eq!(ctx(1 << 13, 10).slot_count(), 4096);
    assert_eq!(
        new_context(8, 1, 2.0, 1, NoiseMode::Exact)
            .unwrap()
            .slot_count(),
        4
    );
    assert_eq!(ctx(1 << 14, 50).slot_count(), 8192);
    assert!(matches!(
        new_context(12, 6, 2.0, 1, NoiseMode::Exact),
        Err(Error::InvalidParams(_))
    ));
    assert!(matches!(
        new_context(8, 6, 2.0, 0, NoiseMode::Exact),
        Err(Error::InvalidParams(_))
    ));
    assert!(new_context(8, 0, 2.0, 1, NoiseMode::Exact).is_err());
    assert_eq!(ctx(8, 1).meter(), OpCounter::default());
}

#[test]
fn encode_examples() {
    let c = ctx(8, 1);
    assert_eq!(
        c.encode(&[1.0, 2.0, 3.0]).unwrap().values(),
        &[1.0, 2.0, 3.0, 0.0]
    );
    assert_eq!(
        c.decode(&c.encode(&[0.5, -0.25]).unwrap()),
        vec![0.5, -0.25, 0.0, 0.0]
    );
    let big = ctx(1 << 13, 1);
    assert!(matches!(
        big.encode(&vec![1.0; 4097]),
        Err(Error::Capacity {
            len: 4097,
            slots: 4096
        })
    ));
}

#[test]
fn encrypt_decrypt_examples() {
    let c = ctx(8, 3);
    let ct = c.encrypt_values(&[1.0, 2.0, 3.0]).unwrap();
    assert_eq!(ct.level(), 6);
    assert_eq!(dec(&c, &ct), vec![1.0, 2.0, 3.0, 0.0]);
    assert!(matches!(c.ddec(&ct, &[0, 1]), Err(Error::MissingParties(ref m)) if m == &[2]));
}

#[test]
fn arithmetic_examples() {
    let c = ctx(8, 1);
    let a = c.encrypt_values(&[1.0, 2.0]).unwrap();
    let b = c.encrypt_values(&[3.0, 4.0]).unwrap();
    assert_eq!(&dec(&c, &c.add(&a, &b).unwrap())[..2], &[4.0, 6.0]);
    assert!(dec(&c, &c.sub(&a, &a).unwrap()).iter().all(|&x| x == 0.0));

    let low = c
        .rescale(&c.rescale(&c.rescale(&b).unwrap()).unwrap())
        .unwrap();
    assert_eq!(c.add(&a, &low).unwrap().level(), 3);
    assert_eq!(c.sub(&a, &low).unwrap().level(), 3);

    let v = c.encrypt_values(&[2.0, 3.0]).unwrap();
    let p = c.mul_pt(&v, &c.encode(&[5.0, 5.0]).unwrap()).unwrap();
    assert_eq!(&dec(&c, &p)[..2], &[10.0, 15.0]);
    let sq = c.mul_ct(&a, &b).unwrap();
    assert_eq!(sq.scale(), 2f64.powi(80));
    let r = c.rescale(&sq).unwrap();
    assert_eq!((r.level(), r.scale()), (5, 2f64.powi(40)));
    assert_eq!(dec(&c, &r), dec(&c, &sq));
}

#[test]
fn level_exhaustion() {
    let c = new_context(8, 1, 2f64.powi(40), 1, NoiseMode::Exact).unwrap();
    let a = c.encrypt_values(&[1.0]).unwrap();
    let z = c.rescale(&a).unwrap();
    assert_eq!(z.level(), 0);
    assert!(matches!(
        c.mul_ct(&z, &a),
        Err(Error::LevelExhausted { .. })
    ));
    assert!(matches!(c.rescale(&z), Err(Error::LevelExhausted { .. })));
}

#[test]
fn rotation_examples() {
    let c = ctx(8, 1);
    let v = c.encrypt_values(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(dec(&c, &c.rot(&v, 1).unwrap()), vec![2.0, 3.0, 4.0, 1.0]);
    assert_eq!(dec(&c, &c.rot(&v, 0).unwrap()), dec(&c, &v));
    assert_eq!(
        dec(&c, &c.rot(&c.rot(&v, 1).unwrap(), 3).unwrap()),
        dec(&c, &v)
    );
    assert_eq!(
        dec(&c, &c.rot(&v, -1).unwrap()),
        dec(&c, &c.rot(&v, 3).unwrap())
    );
}

#[test]
fn collective_examples() {
    let c = ctx(1 << 13, 10);
    let a = c.encrypt_values(&[0.25, -1.5]).unwrap();
    let mut low = a.clone();
    for _ in 0..5 {
        low = c.rescale(&low).unwrap();
    }
    assert_eq!(low.level(), 1);
    let b = c.dbootstrap(&low, &c.full_roster()).unwrap();
    assert_eq!((b.level(), b.scale()), (6, 2f64.powi(40)));
    assert_eq!(dec(&c, &b), dec(&c, &a));
    assert!(c.dbootstrap(&low, &c.full_roster()[1..]).is_err());

    assert!(matches!(
        c.server_decrypt(&a),
        Err(Error::KeyMismatch { .. })
    ));
    let s = c.dkey_switch(&a, c.server_key(), &c.full_roster()).unwrap();
    assert_eq!(c.decode(&c.server_decrypt(&s).unwrap()), dec(&c, &a));
    assert!(matches!(
        c.dkey_switch(&a, c.server_key(), &c.full_roster()[..9]),
        Err(Error::MissingParties(_))
    ));
}

#[test]
fn meter_counts_one_per_call() {
    let c = ctx(16, 2);
    let a = c.encrypt_values(&[1.0, 2.0]).unwrap();
    let pt = c.constant(2.0);
    let roster = c.full_roster();
    let steps: Vec<(
        Box<dyn Fn() -> pmhe::Result<pmhe::SlotVector>>,
        fn(&OpCounter) -> u64,
    )> = vec![
        (Box::new(|| c.add(&a, &a)), |m| m.adds),
        (Box::new(|| c.sub(&a, &a)), |m| m.subs),
        (Box::new(|| c.mul_pt(&a, &pt)), |m| m.mul_pt),
        (Box::new(|| c.mul_ct(&a, &a)), |m| m.mul_ct),
        (Box::new(|| c.rot(&a, 3)), |m| m.rotations),
        (Box::new(|| c.rescale(&a)), |m| m.rescales),
        (Box::new(|| c.dbootstrap(&a, &roster)), |m| m.bootstraps),
        (
            Box::new(|| c.dkey_switch(&a, c.server_key(), &roster)),
            |m| m.keyswitches,
        ),
    ];
    for (f, field) in &steps {
        let (r, m) = c.measure(f);
        r.unwrap();
        assert_eq!(m.total(), 1);
        assert_eq!(field(&m), 1);
    }
}

#[test]
fn gaussian_noise_stays_within_six_sigma() {
    let sigma = 1e-6;
    let c = CryptoContext::new(
        ContextParams::new(256, 6, 1)
            .with_noise(NoiseMode::Gaussian { sigma })
            .with_seed(9),
    )
    .unwrap();
    let v: Vec<f64> = (0..128).map(|i| i as f64 / 7.0).collect();
    let got = dec(&c, &c.encrypt_values(&v).unwrap());
    assert!(got
        .iter()
        .zip(&v)
        .all(|(a, b)| (a - b).abs() <= 6.0 * sigma));
    assert!(got.iter().zip(&v).any(|(a, b)| a != b));
}

#[test]
fn meter_serializes_with_stable_keys() {
    let v = serde_json::to_value(OpCounter::default()).unwrap();
    for k in [
        "adds",
        "mul_pt",
        "mul_ct",
        "rotations",
        "rescales",
        "bootstraps",
        "keyswitches",
    ] {
        assert!(v.get(k).is_some(), "{k}");
    }
}
