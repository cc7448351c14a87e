use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pmhe::approx::{
    app_abs, app_max, app_relu, app_sign, default_grid, eval_composite, eval_g, gd_coefficients,
    gd_numerators, interval_denormalize, interval_normalize, max_sign_error, min_depth,
    pd_constant, plain_app_max, smooth_fit, theorem_bound, CompositePolySpec, IntervalMap,
    SmoothTarget, DEPTH_SLACK,
};
use pmhe::{ContextParams, CryptoContext, DirectCollective, Error};

fn ctx(slots: usize) -> CryptoContext {
    CryptoContext::new(ContextParams::new(2 * slots, 6, 2)).unwrap()
}

fn dec(c: &CryptoContext, ct: &pmhe::SlotVector) -> Vec<f64> {
    c.decode(&c.ddec(ct, &c.full_roster()).unwrap())
}

#[test]
fn coefficient_examples() {
    assert_eq!(gd_coefficients(1).unwrap(), vec![1.5, -0.5]);
    let g4 = gd_coefficients(4).unwrap();
    assert_eq!(g4[0], 315.0 / 128.0);
    assert_eq!(g4[4], 35.0 / 128.0);
    for d in 1..=8 {
        let c = gd_coefficients(d).unwrap();
        assert_eq!(c.len(), d as usize + 1);
        assert!((c.iter().sum::<f64>() - 1.0).abs() < 1e-12, "d={d}");
        let denom = 2f64.powi(2 * d as i32 - 1);
        for (x, n) in c.iter().zip(gd_numerators(d).unwrap()) {
            assert_eq!(*x * 4f64.powi(d as i32), n as f64);
            assert_eq!((*x * denom).fract(), 0.0, "d={d}");
        }
    }
    assert!(gd_coefficients(0).is_err());
    assert!(gd_coefficients(9).is_err());
}

#[test]
fn pd_examples() {
    assert_eq!(pd_constant(1), 1.5);
    assert_eq!(pd_constant(2), 1.875);
    assert_eq!(pd_constant(4), 2.4609375);
    for d in 1..=8 {
        assert_eq!(pd_constant(d), gd_coefficients(d).unwrap()[0]);
    }
}

#[test]
fn composite_examples() {
    let s = CompositePolySpec::new(2, 1, 8, 0.1).unwrap();
    assert_eq!(eval_composite(0.0, &s).unwrap(), 0.0);
    assert_eq!(eval_composite(1.0, &s).unwrap(), 1.0);
    assert!((eval_composite(0.5, &s).unwrap() - 0.79296875).abs() < 1e-15);
    assert!(matches!(eval_composite(1.5, &s), Err(Error::Domain(_))));
    let deep = CompositePolySpec::new(3, 6, 8, 0.1).unwrap();
    for i in 0..=100 {
        let m = i as f64 / 100.0;
        let (p, n) = (
            eval_composite(m, &deep).unwrap(),
            eval_composite(-m, &deep).unwrap(),
        );
        assert!((p + n).abs() <= 1e-12);
        assert!(p.abs() <= 1.0 + 1e-12);
    }
}

#[test]
fn depth_examples() {
    let d20 = 2f64.powi(-20);
    let k = min_depth(4, 20, d20).unwrap();
    assert_eq!(theorem_bound(4, 20, d20, DEPTH_SLACK), 20);
    assert!(k <= 20, "k={k}");
    let spec = CompositePolySpec::new(4, k, 20, d20).unwrap();
    assert!(max_sign_error(&spec, &default_grid(d20)).0 <= d20);
    let below = CompositePolySpec::new(4, k - 1, 20, d20).unwrap();
    assert!(max_sign_error(&below, &default_grid(d20)).0 > d20);

    assert!(min_depth(1, 1, 0.5).unwrap() <= 4);
    assert!(min_depth(4, 8, 0.01).unwrap() <= min_depth(4, 20, 0.01).unwrap());
    for sigma in 1..12 {
        assert!(min_depth(2, sigma + 1, 0.05).unwrap() >= min_depth(2, sigma, 0.05).unwrap());
    }
    let (d10, spec) = (
        2f64.powi(-10),
        CompositePolySpec::for_target(2, 10, 2f64.powi(-10)).unwrap(),
    );
    assert!(max_sign_error(&spec, &default_grid(d10)).0 <= d10);
}

#[test]
fn gap_inequalities() {
    for d in 1..=4 {
        let c = gd_coefficients(d).unwrap();
        let p = pd_constant(d);
        for i in 0..=10_000 {
            let m = i as f64 / 10_000.0;
            let gap = 1.0 - eval_g(m, &c);
            assert!(
                gap >= -1e-15 && gap <= (1.0 - m).powf(p) + 1e-15,
                "power gap bound d={d} m={m}"
            );
            if m >= 0.5 {
                assert!(
                    gap <= 2f64.powi(d as i32) * (1.0 - m).powi(d as i32 + 1) + 1e-15,
                    "tail gap bound d={d} m={m}"
                );
            }
        }
        let h = 1e-6;
        for i in 0..2000 {
            let m = -1.0 + i as f64 / 1000.0;
            assert!(
                eval_g(m + h, &c) >= eval_g(m, &c) - 1e-15,
                "monotone d={d} m={m}"
            );
        }
        let m = 1.0 - 1e-4;
        let slope = (eval_g(m + 1e-7, &c) - eval_g(m - 1e-7, &c)) / 2e-7;
        assert!(
            slope <= p * (2e-4f64).powi(d as i32) * 1.1 + 1e-7,
            "flatness d={d}: {slope}"
        );
    }
}

#[test]
fn encrypted_sign_examples() {
    let c = ctx(8);
    let boot = DirectCollective::full(&c);
    let spec = CompositePolySpec::for_target(4, 20, 2f64.powi(-20)).unwrap();
    let ct = c.encrypt_values(&[0.3, -0.7, 0.0, 1.0]).unwrap();
    let got = dec(&c, &app_sign(&c, &ct, &spec, Some(&boot)).unwrap());
    let eps = 2f64.powi(-20);
    assert!((got[0] - 1.0).abs() <= eps && (got[1] + 1.0).abs() <= eps);
    assert_eq!(got[2], 0.0);
    assert!((got[3] - 1.0).abs() < 1e-12);
    for (i, &m) in [0.3, -0.7, 0.0, 1.0].iter().enumerate() {
        assert!((got[i] - eval_composite(m, &spec).unwrap()).abs() <= 1e-9);
    }
    assert!(matches!(
        app_sign(&c, &ct, &spec, None),
        Err(Error::LevelExhausted { .. })
    ));
}

#[test]
fn max_abs_relu_examples() {
    let c = ctx(8);
    let boot = DirectCollective::full(&c);
    let spec = CompositePolySpec::for_target(4, 20, 2f64.powi(-20)).unwrap();
    let eps = 2f64.powi(-20);
    let a = c.encrypt_values(&[0.8, 0.25, -0.6, 0.4]).unwrap();
    let b = c.encrypt_values(&[0.3, 0.25, 0.1, -0.4]).unwrap();
    let mx = dec(&c, &app_max(&c, &a, &b, &spec, Some(&boot)).unwrap());
    assert!((mx[0] - 0.8).abs() <= eps);
    assert_eq!(mx[1], 0.25);
    assert!((mx[2] - 0.1).abs() <= eps);
    let ab = dec(&c, &app_abs(&c, &a, &spec, Some(&boot)).unwrap());
    assert!((ab[2] - 0.6).abs() <= eps);
    let r = dec(&c, &app_relu(&c, &a, &spec, Some(&boot)).unwrap());
    assert!((r[0] - 0.8).abs() <= eps && r[2].abs() <= eps);
    let zero = c.encrypt_values(&[0.0; 4]).unwrap();
    let via_max = dec(&c, &app_max(&c, &a, &zero, &spec, Some(&boot)).unwrap());
    for i in 0..4 {
        assert!((via_max[i] - r[i]).abs() <= 1e-12);
    }
    assert!((plain_app_max(0.8, 0.3, &spec) - 0.8).abs() <= eps);
}

#[test]
fn interval_examples() {
    let m = IntervalMap::new(-4.0, 4.0).unwrap();
    assert_eq!(m.normalize(2.0), 0.75);
    assert!(IntervalMap::new(1.0, 1.0).is_err());
    let c = ctx(4);
    let ct = c.encrypt_values(&[2.0, -3.5, 0.0, 4.0]).unwrap();
    let (n, meter) = c.measure(|| interval_normalize(&c, &ct, &m).unwrap());
    assert_eq!((meter.mul_pt, meter.adds), (1, 1));
    assert_eq!(dec(&c, &n)[0], 0.75);
    let back = dec(&c, &interval_denormalize(&c, &n, &m).unwrap());
    for (x, y) in back.iter().zip([2.0, -3.5, 0.0, 4.0]) {
        assert!((x - y).abs() < 1e-12);
    }
    let unit = IntervalMap::new(0.0, 1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..100 {
        let x: f64 = rng.random();
        assert_eq!(unit.normalize(x), x);
    }
}

#[test]
fn smooth_fit_examples() {
    let f = smooth_fit(SmoothTarget::Sigmoid, 7, -8.0, 8.0).unwrap();
    assert!((f.eval(0.0) - 0.5).abs() <= 1e-3);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..1000 {
        let x = rng.random_range(-8.0..8.0);
        assert!((f.eval(x) - SmoothTarget::Sigmoid.eval(x)).abs() <= f.max_error * 1.05 + 1e-12);
    }
    let lin = smooth_fit(SmoothTarget::Sigmoid, 1, -1.0, 1.0).unwrap();
    for i in 0..=20 {
        let x = -1.0 + i as f64 / 10.0;
        assert!((lin.eval(x) - (0.5 + 0.25 * x)).abs() <= 0.05);
    }
    assert!("tanh".parse::<SmoothTarget>().is_err());
    assert!(smooth_fit(SmoothTarget::Softplus, 16, -1.0, 1.0).is_err());
}

#[test]
fn sigmoid_degree7_error_exceeds_one_percent() {
    // Degree 7 on [-8, 8] cannot reach 1e-2 with Chebyshev interpolation;
    // the measured error and the smallest sufficient degree are reported.
    let f = smooth_fit(SmoothTarget::Sigmoid, 7, -8.0, 8.0).unwrap();
    println!("degree-7 sigmoid max error on [-8, 8]: {:.4e}", f.max_error);
    assert!(f.max_error < 0.05);
    let first = (7..=15)
        .find(|&deg| {
            smooth_fit(SmoothTarget::Sigmoid, deg, -8.0, 8.0)
                .unwrap()
                .max_error
                <= 1e-2
        })
        .expect("some degree up to 15 reaches 1e-2");
    println!("smallest degree reaching 1e-2: {first}");
    assert!(first > 7);
}
