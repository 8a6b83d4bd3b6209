use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use wavefield::field::{
    sandwich_scan, CovarianceEngine, DomainBox, FieldError, FieldSpec, SpacetimePoint,
};
use wavefield::lnd::{
    proof_grid_conditional_check, sectorial_check_k1, slnd_ratio_scan, LndConfig,
};
use wavefield::modulus::{entropy_scan, modulus_experiment, ModulusConfig};
use wavefield::report::{
    j_table_to_csv, sample_to_csv, to_json_string, write_csv, write_json, RunReport,
};
use wavefield::sampler::{build_grid, sample_field, GridSpec};

#[derive(Parser)]
#[command(name = "wavefield", version, about = "Stochastic wave equation field: covariance, sampling, and verification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Cap the worker thread count (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output file; defaults to stdout (or $WAVEFIELD_OUT_DIR/<command>.<ext>)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Stamp the report with wall-clock time (breaks byte reproducibility)
    #[arg(long, global = true)]
    timestamp: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args, Clone, serde::Serialize)]
struct FieldArgs {
    /// Spatial dimension, 1..=3
    #[arg(long)]
    k: usize,
    /// Riesz exponent; 0 < beta < min(k, 2), or beta = 1 for white noise (k=1)
    #[arg(long)]
    beta: f64,
}

#[derive(Args, Clone, serde::Serialize)]
struct DomainArgs {
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    #[arg(long = "a-prime", default_value_t = 2.0)]
    a_prime: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate Cov(u(p), u(q)) for points given as t,x1[,x2[,x3]]
    Covariance {
        #[command(flatten)]
        field: FieldArgs,
        #[arg(long)]
        p: String,
        #[arg(long)]
        q: String,
    },
    /// Draw exact realizations of the field on a tensor grid
    Sample {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, default_value_t = 10)]
        time_points: usize,
        #[arg(long, default_value_t = 10)]
        space_points: usize,
        #[arg(long, default_value_t = 100)]
        n_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Scan conditional variance against the SLND sphere-integral bound
    VerifyLnd {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 4)]
        n_conditioning: usize,
        /// l1 radius of the conditioning ball; default a/2
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// k=1 sectorial LND scan (two-characteristic bound)
    Sectorial {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, default_value_t = 200)]
        trials: usize,
        #[arg(long, default_value_t = 4)]
        n_conditioning: usize,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Conditional variance along the proof's dyadic diagonal grid
    ProofGrid {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, default_value_t = 6)]
        levels: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Modulus-of-continuity experiment: J(eps), K estimate, sandwich, entropy
    Modulus {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, default_value_t = 40)]
        time_points: usize,
        #[arg(long, default_value_t = 40)]
        space_points: usize,
        #[arg(long, default_value_t = 6)]
        levels: usize,
        #[arg(long, default_value_t = 100)]
        n_samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Covering-number scan in the canonical metric
    Entropy {
        #[command(flatten)]
        field: FieldArgs,
        #[command(flatten)]
        domain: DomainArgs,
        #[arg(long, default_value_t = 60)]
        time_points: usize,
        #[arg(long, default_value_t = 60)]
        space_points: usize,
        #[arg(long, default_value_t = 0.15)]
        eps_min: f64,
        #[arg(long, default_value_t = 0.5)]
        eps_max: f64,
        #[arg(long, default_value_t = 6)]
        eps_levels: usize,
    },
}

#[derive(Debug)]
enum AppError {
    /// bad arguments: exit 2
    Usage(String),
    /// computation or I/O failure: exit 1
    Run(String),
}

impl From<FieldError> for AppError {
    fn from(e: FieldError) -> Self {
        match e {
            FieldError::Inadmissible { .. }
            | FieldError::BadDomain { .. }
            | FieldError::BadTime { .. } => AppError::Usage(e.to_string()),
            other => AppError::Run(other.to_string()),
        }
    }
}

macro_rules! run_errors {
    ($($ty:ty),*) => {$(
        impl From<$ty> for AppError {
            fn from(e: $ty) -> Self {
                AppError::Run(e.to_string())
            }
        }
    )*};
}
run_errors!(
    wavefield::lnd::LndError,
    wavefield::modulus::ModulusError,
    wavefield::sampler::SamplerError,
    wavefield::report::ReportError
);

fn parse_point(s: &str, k: usize) -> Result<SpacetimePoint, AppError> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|tok| tok.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| AppError::Usage(format!("malformed point {s:?}: {e}")))?;
    if vals.len() != 1 + k {
        return Err(AppError::Usage(format!(
            "point {s:?} has {} coordinates, expected 1 + k = {}",
            vals.len(),
            1 + k
        )));
    }
    Ok(SpacetimePoint::new(vals[0], &vals[1..])?)
}

/// Writes json/csv to --out, $WAVEFIELD_OUT_DIR/<command>.<ext>, or stdout.
fn emit(cli: &Cli, command: &str, json: &str, csv: Option<&str>) -> Result<(), AppError> {
    let (body, ext) = match (cli.format, csv) {
        (Format::Csv, Some(c)) => (c, "csv"),
        (Format::Csv, None) => {
            return Err(AppError::Usage(format!(
                "subcommand {command} has no CSV form; use --format json"
            )))
        }
        (Format::Json, _) => (json, "json"),
    };
    let path = cli.out.clone().or_else(|| {
        std::env::var_os("WAVEFIELD_OUT_DIR")
            .map(|dir| PathBuf::from(dir).join(format!("{command}.{ext}")))
    });
    match path {
        Some(p) => {
            if ext == "csv" {
                write_csv(body, &p)?;
            } else {
                write_json(&serde_json::from_str::<serde_json::Value>(body).unwrap(), &p)?;
            }
        }
        None => println!("{body}"),
    }
    Ok(())
}

fn stamp<C: serde::Serialize, R: serde::Serialize>(
    cli: &Cli,
    report: RunReport<C, R>,
) -> RunReport<C, R> {
    if cli.timestamp {
        let now = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        report.diagnostic("unix_timestamp", json!(now))
    } else {
        report
    }
}

fn lnd_config(
    domain: &DomainArgs,
    k: usize,
    trials: usize,
    n_conditioning: usize,
    delta: Option<f64>,
    seed: u64,
) -> Result<LndConfig, AppError> {
    let domain = DomainBox::new(domain.a, domain.a_prime, domain.b)?;
    let mut config = LndConfig::new(domain, k);
    config.trials = trials;
    config.n_conditioning = n_conditioning;
    config.seed = seed;
    if let Some(d) = delta {
        if !(d > 0.0 && d.is_finite()) {
            return Err(AppError::Usage(format!("delta must be positive, got {d}")));
        }
        config.delta = d;
    }
    Ok(config)
}

fn dispatch(cli: &Cli) -> Result<(), AppError> {
    match &cli.command {
        Command::Covariance { field, p, q } => {
            let spec = FieldSpec::new(field.k, field.beta)?;
            let pp = parse_point(p, field.k)?;
            let qq = parse_point(q, field.k)?;
            let engine = CovarianceEngine::new(spec);
            let value = engine.covariance(&pp, &qq)?;
            println!("{value}");
            if cli.out.is_some() || std::env::var_os("WAVEFIELD_OUT_DIR").is_some() {
                let report = stamp(
                    cli,
                    RunReport::new(
                        "covariance",
                        json!({"field": field, "p": p, "q": q}),
                        json!({"covariance": value}),
                        0,
                    ),
                );
                emit(cli, "covariance", &to_json_string(&report)?, None)?;
            }
            Ok(())
        }
        Command::Sample {
            field,
            domain,
            time_points,
            space_points,
            n_samples,
            seed,
        } => {
            let spec = FieldSpec::new(field.k, field.beta)?;
            let grid = GridSpec {
                domain: DomainBox::new(domain.a, domain.a_prime, domain.b)?,
                time_points: *time_points,
                space_points_per_axis: *space_points,
            };
            let points = build_grid(&grid, field.k)?;
            let sample = sample_field(&spec, &points, *n_samples, *seed)?;
            let rows: Vec<Vec<f64>> = (0..sample.values.nrows())
                .map(|s| sample.values.row(s).iter().copied().collect())
                .collect();
            let report = stamp(
                cli,
                RunReport::new(
                    "sample",
                    json!({"field": field, "grid": grid, "n_samples": n_samples}),
                    json!({"points": sample.points, "values": rows}),
                    *seed,
                )
                .diagnostic("applied_jitter", json!(sample.applied_jitter)),
            );
            emit(cli, "sample", &to_json_string(&report)?, Some(&sample_to_csv(&sample)))
        }
        Command::VerifyLnd {
            field,
            domain,
            trials,
            n_conditioning,
            delta,
            seed,
        } => {
            let spec = FieldSpec::new(field.k, field.beta)?;
            let config = lnd_config(domain, field.k, *trials, *n_conditioning, *delta, *seed)?;
            let engine = CovarianceEngine::new(spec);
            let scan = slnd_ratio_scan(&engine, &config)?;
            let report = stamp(
                cli,
                RunReport::new(
                    "verify-lnd",
                    json!({"field": field, "domain": config.domain, "delta": config.delta,
                           "n_conditioning": config.n_conditioning, "trials": config.trials}),
                    json!(scan),
                    *seed,
                ),
            );
            emit(cli, "verify-lnd", &to_json_string(&report)?, None)
        }
        Command::Sectorial {
            field,
            domain,
            trials,
            n_conditioning,
            delta,
            seed,
        } => {
            let spec = FieldSpec::new(field.k, field.beta)?;
            if field.k != 1 {
                return Err(AppError::Usage(format!(
                    "sectorial requires k = 1, got k = {}",
                    field.k
                )));
            }
            let config = lnd_config(domain, 1, *trials, *n_conditioning, *delta, *seed)?;
            let engine = CovarianceEngine::new(spec);
            let scan = sectorial_check_k1(&engine, &config)?;
            let report = stamp(
                cli,
                RunReport::new(
                    "sectorial",
                    json!({"field": field, "domain": config.domain, "delta": config.delta,
                           "n_conditioning": config.n_conditioning, "trials": config.trials}),
                    json!(scan),
                    *seed,
                ),
            );
            emit(cli, "sectorial", &to_json_string(&report)?, None)
        }
        Command::ProofGrid {
            field,
            domain,
            levels,
            seed,
        } => {
            let spec = FieldSpec::new(field.k, field.beta)?;
            let dom = DomainBox::new(domain.a, domain.a_prime, domain.b)?;
            let engine = CovarianceEngine::new(spec);
            let sandwich = sandwich_scan(&engine, &dom, 1000, 0.5 * dom.a, *seed)?;
            let grid = proof_grid_conditional_check(&engine, &dom, *levels, sandwich.c2)?;
            let report = stamp(
                cli,
                RunReport::new(
                    "proof-grid",
                    json!({"field": field, "domain": dom, "levels": levels}),
                    json!({"sandwich": sandwich, "grid": grid}),
                    *seed,
                ),
            );
            emit(cli, "proof-grid", &to_json_string(&report)?, None)
        }
        Command::Modulus {
            field,
            domain,
            time_points,
            space_points,
            levels,
            n_samples,
            seed,
        } => {
            let spec = FieldSpec::new(field.k, field.beta)?;
            let dom = DomainBox::new(domain.a, domain.a_prime, domain.b)?;
            let config = ModulusConfig {
                domain: dom,
                grid: GridSpec {
                    domain: dom,
                    time_points: *time_points,
                    space_points_per_axis: *space_points,
                },
                n_levels: *levels,
                n_samples: *n_samples,
                seed: *seed,
            };
            let result = modulus_experiment(&spec, &config)?;
            let csv = j_table_to_csv(&result.epsilon_schedule, &result.j_values);
            let report = stamp(
                cli,
                RunReport::new("modulus", json!({"field": field, "config": config}), json!(result), *seed),
            );
            emit(cli, "modulus", &to_json_string(&report)?, Some(&csv))
        }
        Command::Entropy {
            field,
            domain,
            time_points,
            space_points,
            eps_min,
            eps_max,
            eps_levels,
        } => {
            let spec = FieldSpec::new(field.k, field.beta)?;
            if !(0.0 < *eps_min && eps_min < eps_max && *eps_levels >= 3) {
                return Err(AppError::Usage(
                    "need 0 < eps-min < eps-max and eps-levels >= 3".into(),
                ));
            }
            let grid = GridSpec {
                domain: DomainBox::new(domain.a, domain.a_prime, domain.b)?,
                time_points: *time_points,
                space_points_per_axis: *space_points,
            };
            let epsilons: Vec<f64> = (0..*eps_levels)
                .map(|i| {
                    eps_max * (eps_min / eps_max).powf(i as f64 / (*eps_levels - 1) as f64)
                })
                .collect();
            let record = entropy_scan(&spec, &grid, &epsilons)?;
            let report = stamp(
                cli,
                RunReport::new(
                    "entropy",
                    json!({"field": field, "grid": grid, "epsilons": epsilons}),
                    json!(record),
                    0,
                ),
            );
            emit(cli, "entropy", &to_json_string(&report)?, None)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        // ignore the error if a pool already exists (repeat invocation in tests)
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Run(msg)) => {
            let err = json!({"schema_version": wavefield::report::SCHEMA_VERSION, "error": msg});
            eprintln!("{err}");
            ExitCode::from(1)
        }
    }
}
