//! Benchmark scenarios behind the CLI. Assertions bind to op counts and
//! errors only; wall-clock figures are reported, never checked.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::approx::{
    app_relu, app_sign, closeness_grid, eval_composite, max_sign_error, min_depth, theorem_bound,
    CompositePolySpec, DEPTH_SLACK,
};
use crate::engine::{ContextParams, CryptoContext, DirectCollective, OpCounter};
use crate::error::{Error, Result};
use crate::fl::{
    max_relative_deviation, run_training, train_plain, trajectories_match, FederatedData,
    TrainingConfig, TrainingOutcome, TransportKind,
};
use crate::matrix::reference::{
    diagonal_mat_mult, diagonal_rotations, naive_mat_mult, naive_rotations, poseidon_ap_rotations,
    table_ceilings,
};
use crate::matrix::{
    build_permutation, ceil_sqrt, decode_batch, decode_matrix, encode_batch, encode_matrix,
    encode_replicated, he_mat_mult, he_mat_mult_batched, he_rect_mat_mult, he_transpose, Matrix,
    PermKind,
};

/// One asserted property with its formula and the values it compared.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub assertion: String,
    pub formula: String,
    pub expected: f64,
    pub measured: f64,
    pub pass: bool,
}

impl Verdict {
    pub fn at_most(
        assertion: impl Into<String>,
        formula: impl Into<String>,
        bound: f64,
        measured: f64,
    ) -> Self {
        Verdict {
            assertion: assertion.into(),
            formula: formula.into(),
            expected: bound,
            measured,
            pass: measured <= bound,
        }
    }

    pub fn equal(
        assertion: impl Into<String>,
        formula: impl Into<String>,
        expected: f64,
        measured: f64,
    ) -> Self {
        Verdict {
            assertion: assertion.into(),
            formula: formula.into(),
            expected,
            measured,
            pass: measured == expected,
        }
    }

    pub fn greater(
        assertion: impl Into<String>,
        formula: impl Into<String>,
        floor: f64,
        measured: f64,
    ) -> Self {
        Verdict {
            assertion: assertion.into(),
            formula: formula.into(),
            expected: floor,
            measured,
            pass: measured > floor,
        }
    }
}

/// One method in a comparison table. Analytic rows are never executed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub method: String,
    pub h: usize,
    pub analytic: bool,
    pub rotations: f64,
    pub ops: Option<OpCounter>,
    pub wall_time_ms: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub scenario: String,
    pub parameters: serde_json::Value,
    pub meter: OpCounter,
    pub wall_time_ms: f64,
    pub rows: Vec<ComparisonRow>,
    pub verdicts: Vec<Verdict>,
}

impl BenchReport {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One line per verdict.
    pub fn summary(&self) -> String {
        let mut s = format!("{} ({:.1} ms)\n", self.scenario, self.wall_time_ms);
        for r in &self.rows {
            s += &format!(
                "  {:<14} h={:<3} rotations={}{}\n",
                r.method,
                r.h,
                r.rotations,
                if r.analytic { " (analytic)" } else { "" }
            );
        }
        for v in &self.verdicts {
            s += &format!(
                "  [{}] {}: {} (expected {}, measured {})\n",
                if v.pass { "PASS" } else { "FAIL" },
                v.assertion,
                v.formula,
                v.expected,
                v.measured
            );
        }
        s
    }
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_by(f64::total_cmp);
    xs[xs.len() / 2]
}

fn ring_for(h: usize, lanes: usize) -> usize {
    (2 * h * h * lanes.max(1)).next_power_of_two()
}

#[derive(Clone, Debug)]
pub struct MatmulOptions {
    pub hs: Vec<usize>,
    pub beta: usize,
    pub repeat: usize,
    pub seed: u64,
    /// Run the dense reference only up to this h.
    pub naive_max_h: usize,
}

/// Packed product against the dense, diagonal and analytic baselines.
pub fn matmul_bench(opt: &MatmulOptions) -> Result<BenchReport> {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(opt.seed);
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    let mut total = OpCounter::default();
    for &h in &opt.hs {
        if h < 2 || !h.is_power_of_two() {
            return Err(Error::InvalidParams(format!(
                "h = {h} must be a power of two >= 2"
            )));
        }
        let beta = opt.beta.max(1);
        let ctx =
            CryptoContext::new(ContextParams::new(ring_for(h, beta), 6, 1).with_seed(opt.seed))?;
        let mut per_call: Option<OpCounter> = None;
        let mut times = Vec::new();
        let mut worst_err: f64 = 0.0;
        let mut stable = true;
        for _ in 0..opt.repeat.max(1) {
            let a: Vec<Matrix> = (0..beta)
                .map(|_| Matrix::random(h, h, 1.0, &mut rng))
                .collect();
            let b: Vec<Matrix> = (0..beta)
                .map(|_| Matrix::random(h, h, 1.0, &mut rng))
                .collect();
            let (pa, pb) = (encode_batch(&ctx, &a)?, encode_batch(&ctx, &b)?);
            let t0 = Instant::now();
            let (c, m) = ctx.measure(|| {
                if beta > 1 {
                    he_mat_mult_batched(&ctx, &pa, &pb)
                } else {
                    he_mat_mult(&ctx, &pa, &pb)
                }
            });
            times.push(ms(t0));
            let got = decode_batch(&ctx, &c?, &[0])?;
            for k in 0..beta {
                worst_err = worst_err.max(got[k].max_abs_diff(&a[k].matmul(&b[k])?));
            }
            if per_call.is_some_and(|p| p != m) {
                stable = false;
            }
            per_call.get_or_insert(m);
            total += m;
        }
        let m = per_call.expect("repeat >= 1");
        let (adds, mul_pt, rot, _) = table_ceilings(h);
        let hf = h as f64;
        rows.push(ComparisonRow {
            method: "packed".into(),
            h,
            analytic: false,
            rotations: m.rotations as f64,
            ops: Some(m),
            wall_time_ms: Some(median(times)),
        });
        verdicts.push(Verdict::at_most(
            format!("h={h} adds"),
            "adds + subs <= 6h",
            adds,
            (m.adds + m.subs) as f64,
        ));
        verdicts.push(Verdict::at_most(
            format!("h={h} mul_pt"),
            "mul_pt <= 4h",
            mul_pt,
            m.mul_pt as f64,
        ));
        verdicts.push(Verdict::at_most(
            format!("h={h} rotations"),
            "rotations <= 3h + 5 sqrt(h)",
            rot,
            m.rotations as f64,
        ));
        verdicts.push(Verdict::equal(
            format!("h={h} mul_ct"),
            "mul_ct == h",
            hf,
            m.mul_ct as f64,
        ));
        verdicts.push(Verdict::at_most(
            format!("h={h} accuracy"),
            "max |C - AB| <= 1e-9 h max|entry|^2",
            1e-9 * hf,
            worst_err,
        ));
        verdicts.push(Verdict::equal(
            format!("h={h} tally stable"),
            "identical meter on every repeat",
            1.0,
            f64::from(u8::from(stable)),
        ));

        let a = Matrix::random(h, h, 1.0, &mut rng);
        let b = Matrix::random(h, h, 1.0, &mut rng);
        let single =
            CryptoContext::new(ContextParams::new(ring_for(h, 1), 6, 1).with_seed(opt.seed))?;
        if h <= opt.naive_max_h {
            let (pa, pb) = (encode_matrix(&single, &a)?, encode_matrix(&single, &b)?);
            let t0 = Instant::now();
            let (c, nm) = single.measure(|| naive_mat_mult(&single, &pa, &pb));
            let wall = ms(t0);
            let err = decode_matrix(&single, &c?, &[0])?.max_abs_diff(&a.matmul(&b)?);
            rows.push(ComparisonRow {
                method: "naive".into(),
                h,
                analytic: false,
                rotations: nm.rotations as f64,
                ops: Some(nm),
                wall_time_ms: Some(wall),
            });
            verdicts.push(Verdict::at_most(
                format!("h={h} naive accuracy"),
                "max |C - AB| <= 1e-9 h",
                1e-9 * hf,
                err,
            ));
            verdicts.push(Verdict::greater(
                format!("h={h} naive dominance"),
                "naive rotations > packed rotations",
                m.rotations as f64,
                nm.rotations as f64,
            ));
        } else {
            rows.push(ComparisonRow {
                method: "naive".into(),
                h,
                analytic: true,
                rotations: naive_rotations(h) as f64,
                ops: None,
                wall_time_ms: None,
            });
        }
        let t0 = Instant::now();
        let (c, dm) = single.measure(|| diagonal_mat_mult(&single, &a, &b, &[0]));
        let wall = ms(t0);
        let err = c?.max_abs_diff(&a.matmul(&b)?);
        rows.push(ComparisonRow {
            method: "diagonal".into(),
            h,
            analytic: false,
            rotations: dm.rotations as f64,
            ops: Some(dm),
            wall_time_ms: Some(wall),
        });
        verdicts.push(Verdict::equal(
            format!("h={h} diagonal rotations"),
            "h(h-1)",
            diagonal_rotations(h) as f64,
            dm.rotations as f64,
        ));
        verdicts.push(Verdict::at_most(
            format!("h={h} diagonal accuracy"),
            "max |C - AB| <= 1e-9 h",
            1e-9 * hf,
            err,
        ));
        rows.push(ComparisonRow {
            method: "poseidon_ap".into(),
            h,
            analytic: true,
            rotations: poseidon_ap_rotations(h, &[h]),
            ops: None,
            wall_time_ms: None,
        });
    }
    Ok(BenchReport {
        scenario: "matmul-bench".into(),
        parameters: json!({
            "h": opt.hs, "beta": opt.beta, "repeat": opt.repeat, "seed": opt.seed,
            "naive_max_h": opt.naive_max_h,
        }),
        meter: total,
        wall_time_ms: ms(start),
        rows,
        verdicts,
    })
}

/// Sign-approximation profile: minimal depth, bound, grid error.
/// Returns the report and `(m, g^(k)(m), |g^(k)(m) - 1|)` samples.
pub fn sign_bench(
    d: u32,
    sigma: u32,
    delta: f64,
    grid_size: usize,
) -> Result<(BenchReport, Vec<(f64, f64, f64)>)> {
    let start = Instant::now();
    let k = min_depth(d, sigma, delta)?;
    let spec = CompositePolySpec::new(d, k, sigma, delta)?;
    let bound = theorem_bound(d, sigma, delta, 0);
    let geo = (grid_size / 5).max(2);
    let grid = closeness_grid(delta, geo, grid_size.saturating_sub(geo).max(2));
    let (err, argmax) = max_sign_error(&spec, &grid);
    let target = 2f64.powi(-(sigma as i32));
    let profile = grid
        .iter()
        .map(|&m| eval_composite(m, &spec).map(|g| (m, g, (g - 1.0).abs())))
        .collect::<Result<Vec<_>>>()?;
    let verdicts = vec![
        Verdict::at_most(
            "grid error",
            "max |g^(k)(m) - sgn(m)| <= 2^-sigma",
            target,
            err,
        ),
        Verdict::at_most(
            "depth bound",
            "k <= theorem bound + slack",
            f64::from(bound + DEPTH_SLACK),
            f64::from(k),
        ),
    ];
    let report = BenchReport {
        scenario: "sign-bench".into(),
        parameters: json!({
            "d": d, "sigma": sigma, "delta": delta, "grid_size": grid.len(),
            "k": k, "theorem_bound": bound, "stage_depth": spec.stage_depth(),
            "total_depth": spec.total_depth(), "argmax_m": argmax, "max_error": err,
            "p_d": spec.p_d,
        }),
        meter: OpCounter::default(),
        wall_time_ms: ms(start),
        rows: Vec::new(),
        verdicts,
    };
    Ok((report, profile))
}

pub const MICRO_OPS: &[&str] = &[
    "add",
    "sub",
    "mul_pt",
    "mul_ct",
    "rot",
    "rescale",
    "dbootstrap",
    "dkey_switch",
    "he_mat_mult",
    "he_rect_mat_mult",
    "he_transpose",
    "app_sign",
    "app_relu",
];

/// Median wall time and meter deltas of one registered op per size.
/// `rect_t` is the row count for `he_rect_mat_mult` (default h/4).
pub fn microbench(
    op: &str,
    sizes: &[usize],
    repeat: usize,
    rect_t: Option<usize>,
    seed: u64,
) -> Result<BenchReport> {
    if !MICRO_OPS.contains(&op) {
        return Err(Error::UnknownOp(format!(
            "{op} (known: {})",
            MICRO_OPS.join(", ")
        )));
    }
    let start = Instant::now();
    let repeat = repeat.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut verdicts = Vec::new();
    let mut total = OpCounter::default();
    let spec = CompositePolySpec::new(3, 4, 8, 0.05)?;
    for &h in sizes {
        let ctx = CryptoContext::new(ContextParams::new(ring_for(h, 1), 6, 2).with_seed(seed))?;
        let boot = DirectCollective::full(&ctx);
        let a = Matrix::random(h, h, 1.0, &mut rng);
        let b = Matrix::random(h, h, 1.0, &mut rng);
        let pa = encode_matrix(&ctx, &a)?;
        let pb = encode_matrix(&ctx, &b)?;
        let t = rect_t.unwrap_or((h / 4).max(1));
        let pr = if h % t == 0 {
            Some(encode_replicated(&ctx, &a.resized(t, h), h)?)
        } else {
            None
        };
        let roster = ctx.full_roster();
        let mut times = Vec::with_capacity(repeat);
        let mut per_call: Vec<OpCounter> = Vec::with_capacity(repeat);
        for _ in 0..repeat {
            let t0 = Instant::now();
            let (r, m) = ctx.measure(|| -> Result<()> {
                match op {
                    "add" => ctx.add(&pa.ct, &pb.ct).map(drop),
                    "sub" => ctx.sub(&pa.ct, &pb.ct).map(drop),
                    "mul_pt" => ctx.mul_pt(&pa.ct, &ctx.constant(0.5)).map(drop),
                    "mul_ct" => ctx.mul_ct(&pa.ct, &pb.ct).map(drop),
                    "rot" => ctx.rot(&pa.ct, 1).map(drop),
                    "rescale" => ctx.rescale(&pa.ct).map(drop),
                    "dbootstrap" => ctx.dbootstrap(&pa.ct, &roster).map(drop),
                    "dkey_switch" => ctx.dkey_switch(&pa.ct, ctx.server_key(), &roster).map(drop),
                    "he_mat_mult" => he_mat_mult(&ctx, &pa, &pb).map(drop),
                    "he_rect_mat_mult" => match &pr {
                        Some(p) => he_rect_mat_mult(&ctx, p, &pb).map(drop),
                        None => Err(Error::InvalidParams(format!(
                            "t = {t} does not divide h = {h}"
                        ))),
                    },
                    "he_transpose" => he_transpose(&ctx, &pa).map(drop),
                    "app_sign" => app_sign(&ctx, &pa.ct, &spec, Some(&boot)).map(drop),
                    "app_relu" => app_relu(&ctx, &pa.ct, &spec, Some(&boot)).map(drop),
                    _ => unreachable!("checked against MICRO_OPS"),
                }
            });
            times.push(ms(t0));
            r?;
            per_call.push(m);
        }
        let sum = per_call
            .iter()
            .fold(OpCounter::default(), |acc, &m| acc + m);
        total += sum;
        rows.push(ComparisonRow {
            method: op.into(),
            h,
            analytic: false,
            rotations: sum.rotations as f64,
            ops: Some(sum),
            wall_time_ms: Some(median(times)),
        });
        let stable = per_call.iter().all(|m| *m == per_call[0]);
        verdicts.push(Verdict::equal(
            format!("h={h} tally stable"),
            "identical meter on every repeat",
            1.0,
            f64::from(u8::from(stable)),
        ));
        let one = per_call[0];
        match op {
            "rot" => verdicts.push(Verdict::equal(
                format!("h={h} rotations"),
                "rotations == repeat",
                repeat as f64,
                sum.rotations as f64,
            )),
            "he_transpose" => {
                let diags = build_permutation(PermKind::Transpose, h)?.nonzero_diagonals();
                verdicts.push(Verdict::equal(
                    format!("h={h} transpose diagonals"),
                    "2h - 1",
                    (2 * h - 1) as f64,
                    diags as f64,
                ));
                verdicts.push(Verdict::at_most(
                    format!("h={h} transpose rotations"),
                    "rotations <= 3 ceil(sqrt(2h-1))",
                    (3 * ceil_sqrt(2 * h - 1)) as f64,
                    one.rotations as f64,
                ));
            }
            "he_rect_mat_mult" => verdicts.push(Verdict::equal(
                format!("h={h} t={t} mul_ct"),
                "mul_ct == t",
                t as f64,
                one.mul_ct as f64,
            )),
            "he_mat_mult" => verdicts.push(Verdict::equal(
                format!("h={h} mul_ct"),
                "mul_ct == h",
                h as f64,
                one.mul_ct as f64,
            )),
            _ => {}
        }
    }
    Ok(BenchReport {
        scenario: format!("microbench:{op}"),
        parameters: json!({"op": op, "sizes": sizes, "repeat": repeat, "rect_t": rect_t, "seed": seed}),
        meter: total,
        wall_time_ms: ms(start),
        rows,
        verdicts,
    })
}

/// Encrypted run plus its two plaintext references.
#[derive(Debug)]
pub struct TrainBench {
    pub report: BenchReport,
    pub outcome: TrainingOutcome,
}

/// Mirror tolerance on every weight of every round.
pub const MIRROR_REL_TOL: f64 = 1e-6;
pub const MIRROR_ABS_TOL: f64 = 1e-12;

pub fn train_bench(
    cfg: &TrainingConfig,
    data: &FederatedData,
    transport: TransportKind,
) -> Result<TrainBench> {
    let start = Instant::now();
    let outcome = run_training(cfg, data, transport)?;
    let mirror = train_plain(cfg, data, false)?;
    let exact = train_plain(cfg, data, true)?;
    let m = &outcome.metrics;
    let acc_of = |train: f64, test: Option<f64>| test.unwrap_or(train);
    let enc_acc = acc_of(m.final_train_acc, m.final_test_acc);
    let mirror_acc = acc_of(mirror.final_train_acc(), mirror.final_test_acc());
    let exact_acc = acc_of(exact.final_train_acc(), exact.final_test_acc());
    let dev = max_relative_deviation(&outcome.trajectory, &mirror.trajectory);
    let matched = trajectories_match(
        &outcome.trajectory,
        &mirror.trajectory,
        MIRROR_REL_TOL,
        MIRROR_ABS_TOL,
    );
    let verdicts = vec![
        Verdict::equal(
            "mirror trajectory",
            "|w_enc - w_mirror| <= 1e-6 max(|w_enc|, |w_mirror|) + 1e-12 for every weight and round",
            1.0,
            f64::from(u8::from(matched)),
        ),
        Verdict::at_most("mirror accuracy delta", "|acc_enc - acc_mirror| <= 0.005", 0.005, (enc_acc - mirror_acc).abs()),
        Verdict::at_most("exact-activation delta", "|acc_enc - acc_exact| <= 0.02", 0.02, (enc_acc - exact_acc).abs()),
    ];
    let report = BenchReport {
        scenario: "train".into(),
        parameters: json!({
            "config": cfg, "transport": transport,
            "accuracy": {"encrypted": enc_acc, "mirror": mirror_acc, "exact_activation": exact_acc,
                         "split": if m.final_test_acc.is_some() { "test" } else { "train" }},
            "max_relative_deviation": dev,
        }),
        meter: m.ops_total,
        wall_time_ms: ms(start),
        rows: Vec::new(),
        verdicts,
    };
    Ok(TrainBench { report, outcome })
}
