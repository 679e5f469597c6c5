//! `cascade`: bounds, exponent tables, cascade simulation and self-checks.

mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use cascade_core::bound::{default_snr_db_grid, evaluate, exponent_ratio_table, DEFAULT_RATES};
use cascade_core::sim::simulate_cascade;
use cascade_core::special::db_to_linear;
use cascade_core::verify::{run_suite, Effort};
use cascade_core::{BoundQuery, CascadeConfig, CodeKind, DecoderKind, FactorMethod, Suite};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use output::{sink, write_record, write_rows, Format, RunManifest};

#[derive(Debug, Parser)]
#[command(
    name = "cascade",
    version,
    about = "Information bounds for Gaussian decode-and-forward line networks"
)]
struct Cli {
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output format; defaults to table on a terminal and JSON otherwise.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,

    /// Seed for Monte Carlo streams.
    #[arg(long, global = true, env = "CASCADE_SEED")]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate the per-hop cone bound and the legacy bound for one operating point.
    Bound(BoundArgs),
    /// Tabulate the large-N exponent ratio over rates and SNRs.
    Exponents(ExponentArgs),
    /// Simulate a cascade of AWGN hops and compare with the bound.
    Simulate(SimulateArgs),
    /// Run a verification suite; exits nonzero if any check fails.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Quadrature,
    MonteCarlo,
}

#[derive(Debug, Args)]
struct BoundArgs {
    /// Number of hops.
    #[arg(long = "n")]
    hops: u32,
    /// Block length N.
    #[arg(long = "N")]
    block_length: usize,
    /// Rate R in bits per channel use.
    #[arg(long = "R")]
    rate: f64,
    /// Linear SNR P0 / sigma0^2.
    #[arg(long, conflicts_with = "snr_db", required_unless_present = "snr_db")]
    snr: Option<f64>,
    /// SNR in dB, 10 log10(S).
    #[arg(long = "snr-db", allow_hyphen_values = true)]
    snr_db: Option<f64>,
    #[arg(long, value_enum, default_value = "quadrature")]
    method: MethodArg,
    /// Samples for the Monte Carlo method.
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
}

#[derive(Debug, Args)]
struct ExponentArgs {
    /// Comma-separated rates.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    rates: Option<Vec<f64>>,
    /// Comma-separated SNRs in dB.
    #[arg(long = "snr-db", value_delimiter = ',', allow_hyphen_values = true)]
    snr_db: Option<Vec<f64>>,
    /// CSV output file; stdout in the selected format when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// JSON configuration; the flags below are ignored when given.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "n", default_value_t = 5)]
    hops: u32,
    #[arg(long = "N", default_value_t = 2)]
    block_length: usize,
    #[arg(long = "R", default_value_t = 0.5)]
    rate: f64,
    #[arg(long, default_value_t = 1.0)]
    power: f64,
    /// Per-hop noise std devs (comma-separated), or one value for all hops.
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    sigma: Vec<f64>,
    /// Noise floor sigma0; defaults to the smallest hop sigma.
    #[arg(long)]
    sigma_floor: Option<f64>,
    #[arg(long, value_enum, default_value = "antipodal")]
    code: CodeArg,
    #[arg(long, value_enum, default_value = "max-likelihood")]
    decoder: DecoderArg,
    /// Transmissions per message per hop.
    #[arg(long, default_value_t = 100_000)]
    shots: u64,
    /// JSON report file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum CodeArg {
    Antipodal,
    Simplex,
    RandomSphere,
    RandomBall,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum DecoderArg {
    MaxLikelihood,
    FarthestPoint,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// qfunc, matrix, geometry or all.
    suite: String,
    /// Monte Carlo samples per check.
    #[arg(long, default_value_t = Effort::default().mc_samples)]
    samples: u64,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// `Ok(false)` marks a completed run whose self-check failed.
fn run(cli: Cli) -> Result<bool> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("configuring thread pool")?;
    }
    let format = Format::resolve(cli.format);
    let start = Instant::now();
    match cli.command {
        Command::Bound(args) => cmd_bound(args, format, cli.seed, start),
        Command::Exponents(args) => cmd_exponents(args, format, start),
        Command::Simulate(args) => cmd_simulate(args, format, cli.seed, start),
        Command::Verify(args) => cmd_verify(args, cli.seed, start),
    }
}

fn cmd_bound(args: BoundArgs, format: Format, seed: Option<u64>, start: Instant) -> Result<bool> {
    let snr = match (args.snr, args.snr_db) {
        (Some(s), _) => s,
        (None, Some(db)) => db_to_linear(db),
        (None, None) => bail!("one of --snr or --snr-db is required"),
    };
    let query = BoundQuery::new(args.hops, args.block_length, args.rate, snr)?;
    let seed = seed.unwrap_or(0);
    let (method, seed) = match args.method {
        MethodArg::Quadrature => (FactorMethod::Quadrature, None),
        MethodArg::MonteCarlo => (
            FactorMethod::MonteCarlo {
                samples: args.samples,
                seed,
            },
            Some(seed),
        ),
    };
    let report = evaluate(&query, method)?;
    write_record(&mut *sink(None)?, format, &report)?;
    RunManifest::new(
        "bound",
        json!({ "query": query, "method": method }),
        seed,
        start.elapsed(),
    )
    .emit(None)?;
    Ok(true)
}

fn cmd_exponents(args: ExponentArgs, format: Format, start: Instant) -> Result<bool> {
    let rates = args.rates.unwrap_or_else(|| DEFAULT_RATES.to_vec());
    let snr_db = args.snr_db.unwrap_or_else(default_snr_db_grid);
    if rates.is_empty() || snr_db.is_empty() {
        bail!("rate and SNR lists must be non-empty");
    }
    let rows = exponent_ratio_table(&rates, &snr_db)?;
    // A file output is always CSV.
    let format = if args.out.is_some() {
        Format::Csv
    } else {
        format
    };
    write_rows(&mut *sink(args.out.as_deref())?, format, &rows)?;
    RunManifest::new(
        "exponents",
        json!({ "rates": rates, "snr_db": snr_db }),
        None,
        start.elapsed(),
    )
    .emit(args.out.as_deref())?;
    let worst = rows
        .iter()
        .map(|r| r.ratio)
        .fold(f64::NEG_INFINITY, f64::max);
    if worst >= 1.0 {
        eprintln!("exponent ratio reached {worst}, expected < 1 everywhere");
        return Ok(false);
    }
    Ok(true)
}

fn load_config(path: &Path) -> Result<CascadeConfig> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn cmd_simulate(
    args: SimulateArgs,
    format: Format,
    seed: Option<u64>,
    start: Instant,
) -> Result<bool> {
    let mut config = match &args.config {
        Some(path) => load_config(path)?,
        None => CascadeConfig {
            hops: args.hops,
            block_length: args.block_length,
            rate: args.rate,
            power: args.power,
            sigmas: args.sigma.clone(),
            sigma_floor: args.sigma_floor,
            code_kind: match args.code {
                CodeArg::Antipodal => CodeKind::Antipodal,
                CodeArg::Simplex => CodeKind::Simplex,
                CodeArg::RandomSphere => CodeKind::RandomSphere,
                CodeArg::RandomBall => CodeKind::RandomBall,
            },
            decoder: match args.decoder {
                DecoderArg::MaxLikelihood => DecoderKind::MaxLikelihood,
                DecoderArg::FarthestPoint => DecoderKind::FarthestPoint,
            },
            shots_per_message: args.shots,
            seed: 0,
        },
    };
    // An explicit or environment seed overrides the one in a config file.
    if let Some(s) = seed {
        config.seed = s;
    }
    let report = simulate_cascade(&config)?;
    let format = if args.out.is_some() {
        Format::Json
    } else {
        format
    };
    write_record(&mut *sink(args.out.as_deref())?, format, &report)?;
    RunManifest::new(
        "simulate",
        serde_json::to_value(&config)?,
        Some(config.seed),
        start.elapsed(),
    )
    .emit(args.out.as_deref())?;
    if !report.bound_holds {
        eprintln!(
            "self-check failed: I = {} bits exceeds bound {} + 3 x {}",
            report.mi_matrix_bits, report.theorem1_bits, report.mi_matrix_stderr
        );
    }
    Ok(report.bound_holds)
}

fn cmd_verify(args: VerifyArgs, seed: Option<u64>, start: Instant) -> Result<bool> {
    let suite: Suite = args.suite.parse()?;
    let seed = seed.unwrap_or(0);
    let effort = Effort {
        mc_samples: args.samples,
        ..Effort::default()
    };
    let results = run_suite(suite, seed, effort)?;
    for r in &results {
        println!("{}", serde_json::to_string(r)?);
    }
    let failed = results.iter().filter(|r| !r.pass).count();
    eprintln!(
        "{suite}: {} of {} checks passed",
        results.len() - failed,
        results.len()
    );
    RunManifest::new(
        "verify",
        json!({ "suite": suite, "effort": effort }),
        Some(seed),
        start.elapsed(),
    )
    .emit(None)?;
    Ok(failed == 0)
}
