use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use pmhe::bench::{self, BenchReport, MatmulOptions};
use pmhe::fl::{synthetic_federated, FederatedData, TrainingConfig, TransportKind};
use pmhe::matrix::Matrix;
use pmhe::{Error, Result};

#[derive(Parser)]
#[command(
    name = "pmhe",
    version,
    about = "Packed homomorphic matrix benchmarks and encrypted federated training"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// RNG seed (for train, overrides the config seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for reports, CSVs and model files.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Print the JSON report on stdout instead of the text summary.
    #[arg(long, global = true)]
    json: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Packed matrix product against dense, diagonal and analytic baselines.
    MatmulBench {
        #[arg(long, value_delimiter = ',', default_value = "4,16,64")]
        h: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        beta: usize,
        #[arg(long, default_value_t = 3)]
        repeat: usize,
        /// Execute the dense reference only up to this h; larger sizes get the analytic count.
        #[arg(long, default_value_t = 64)]
        naive_max_h: usize,
    },
    /// Depth and error profile of the composite sign approximation.
    SignBench {
        #[arg(long, default_value_t = 4)]
        d: u32,
        #[arg(long, default_value_t = 20)]
        sigma: u32,
        /// Closeness margin; defaults to 2^-sigma.
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        grid: usize,
    },
    /// Encrypted federated training with mirror and exact-activation references.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Directory with party_<i>.csv (and optional test.csv); synthetic data when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value = "in_process")]
        transport: TransportKind,
    },
    /// Median wall time and op tallies of one operation.
    Microbench {
        op: String,
        #[arg(long, value_delimiter = ',', default_value = "8")]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 10)]
        repeat: usize,
        /// Row count for he_rect_mat_mult (default h/4).
        #[arg(long)]
        t: Option<usize>,
    },
    /// Write the synthetic two-class dataset as party shards plus a test split.
    GenData {
        #[arg(long, default_value_t = 3)]
        parties: usize,
    },
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_owned(),
        source: e,
    })
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Csv {
        path: path.to_owned(),
        msg: e.to_string(),
    }
}

fn write_matrix(path: &Path, m: &Matrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for i in 0..m.rows() {
        w.write_record((0..m.cols()).map(|j| format!("{:e}", m.get(i, j))))
            .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::Io {
        path: PathBuf::from(path),
        source: e,
    })
}

fn emit(common: &Common, report: &BenchReport, file: &str) -> Result<bool> {
    write(&common.out.join(file), &report.to_json())?;
    if common.json {
        println!("{}", report.to_json());
    } else {
        print!("{}", report.summary());
    }
    Ok(report.passed())
}

fn run(cli: Cli) -> Result<bool> {
    let c = &cli.common;
    fs::create_dir_all(&c.out).map_err(|e| Error::Io {
        path: PathBuf::from(&c.out),
        source: e,
    })?;
    match cli.cmd {
        Cmd::MatmulBench {
            h,
            beta,
            repeat,
            naive_max_h,
        } => {
            let r = bench::matmul_bench(&MatmulOptions {
                hs: h,
                beta,
                repeat,
                seed: c.seed.unwrap_or(0),
                naive_max_h,
            })?;
            emit(c, &r, "matmul_bench.json")
        }
        Cmd::SignBench {
            d,
            sigma,
            delta,
            grid,
        } => {
            let delta = delta.unwrap_or(2f64.powi(-(sigma as i32)));
            let (r, profile) = bench::sign_bench(d, sigma, delta, grid)?;
            let path = c.out.join("sign_error.csv");
            let mut w = csv::Writer::from_path(&path).map_err(|e| csv_err(&path, e))?;
            w.write_record(["m", "composite_value", "abs_error"])
                .map_err(|e| csv_err(&path, e))?;
            for (m, g, e) in profile {
                w.write_record([format!("{m:e}"), format!("{g:e}"), format!("{e:e}")])
                    .map_err(|e| csv_err(&path, e))?;
            }
            w.flush().map_err(|e| Error::Io {
                path: PathBuf::from(&path),
                source: e,
            })?;
            emit(c, &r, "sign_bench.json")
        }
        Cmd::Train {
            config,
            data,
            transport,
        } => {
            let mut cfg = TrainingConfig::load(&config)?;
            if let Some(s) = c.seed {
                cfg.seed = s;
            }
            let parties = usize::from(cfg.party_count);
            let fed = match data {
                Some(dir) => FederatedData::load_dir(&dir, parties)?,
                None => synthetic_federated(parties, cfg.seed),
            };
            let tb = bench::train_bench(&cfg, &fed, transport)?;
            let metrics = serde_json::to_string_pretty(&tb.outcome.metrics)?;
            write(&c.out.join("metrics.json"), &metrics)?;
            for (j, w) in tb.outcome.weights.iter().enumerate() {
                write_matrix(&c.out.join(format!("model_layer_{j}.csv")), w)?;
            }
            let acc = &tb.report.parameters["accuracy"];
            if !c.json {
                println!(
                    "accuracy ({}): encrypted {:.4}, mirror {:.4}, exact activation {:.4}, delta vs exact {:+.4}",
                    acc["split"].as_str().unwrap_or("train"),
                    acc["encrypted"].as_f64().unwrap_or(f64::NAN),
                    acc["mirror"].as_f64().unwrap_or(f64::NAN),
                    acc["exact_activation"].as_f64().unwrap_or(f64::NAN),
                    acc["encrypted"].as_f64().unwrap_or(f64::NAN)
                        - acc["exact_activation"].as_f64().unwrap_or(f64::NAN),
                );
            }
            emit(c, &tb.report, "train_report.json")
        }
        Cmd::Microbench {
            op,
            sizes,
            repeat,
            t,
        } => {
            let r = bench::microbench(&op, &sizes, repeat, t, c.seed.unwrap_or(0))?;
            emit(c, &r, &format!("microbench_{op}.json"))
        }
        Cmd::GenData { parties } => {
            let fed = synthetic_federated(parties, c.seed.unwrap_or(7));
            fed.write_dir(&c.out)?;
            println!(
                "wrote {parties} party shards and test.csv to {}",
                c.out.display()
            );
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
