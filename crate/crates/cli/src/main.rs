//! `qslab` — command-line front end for the quasiperiodic spectrum lab.
//!
//! Every experiment is a subcommand with deterministic seeds and
//! machine-readable outputs. Verdicts map to exit codes so shell pipelines
//! can branch without parsing JSON:
//!
//! | code | meaning                          |
//! |------|----------------------------------|
//! | 0    | success / pass / interval        |
//! | 2    | usage or input error             |
//! | 3    | fail verdict                     |
//! | 4    | inconclusive verdict             |
//! | 5    | spectral gaps found (still a successful run) |
//!
//! Heavy subcommands write their outputs into a fresh run directory named
//! by timestamp and config hash, together with a manifest echoing the
//! canonicalized configuration.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use qslab_core::cartan::{self, ConditionKind, PairSelection, Sampler, SweepGrids, Verdict};
use qslab_core::morse::MorseOptions;
use qslab_core::potential::{self, CoefficientVector, TorusPoint};
use qslab_core::spectrum::{self, OperatorConfig, PhaseMode};
use qslab_core::survey::{self, CartanOptions, ClassifyOptions, SurveyConfig};

#[derive(Parser)]
#[command(name = "qslab", version, about = "Quasiperiodic spectrum laboratory")]
struct Cli {
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker thread cap (outputs are identical for any value).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Parent directory for run directories.
    #[arg(long, global = true, default_value = "runs")]
    out_dir: PathBuf,

    /// Stdout summary format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Print the coefficient-space dimension N for (d, n).
    Dim {
        #[arg(long)]
        d: usize,
        #[arg(long)]
        n: u32,
    },
    /// Classify a coefficient file against the four class conditions.
    Classify(ClassifyArgs),
    /// Finite-volume spectrum, gap detection, and interval verdict.
    Spectrum(SpectrumArgs),
    /// Run a randomized survey from a JSON config file.
    Survey {
        config_file: PathBuf,
    },
    /// Cartan decay sweep on one potential.
    Cartan(CartanArgs),
    /// Classify a coefficient line segment at t = k/steps.
    Slice(SliceArgs),
}

#[derive(Args)]
struct ClassifyArgs {
    coeff_file: PathBuf,
    /// Skip the Cartan sweeps (verdict is then at best inconclusive).
    #[arg(long)]
    skip_cartan: bool,
    /// Ascending K list for the Cartan sweeps.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6")]
    k_list: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    cartan_samples: u64,
    #[arg(long, default_value_t = 16)]
    h_count: usize,
    #[arg(long, default_value_t = 8)]
    eta_count: usize,
    #[arg(long, default_value_t = 8)]
    h0_count: usize,
    /// Decay exponent c1 in (0,1).
    #[arg(long, default_value_t = 0.3)]
    c1: f64,
    /// Evaluate condition 3 for one pair i,j instead of the min over pairs.
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pair: Option<Vec<usize>>,
    /// Write the report here in addition to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SpectrumArgs {
    coeff_file: PathBuf,
    #[arg(long)]
    lambda: f64,
    /// Frequency vector, comma separated, each component in (0,1).
    #[arg(long, value_delimiter = ',')]
    omega: Vec<f64>,
    /// Truncation size.
    #[arg(long, default_value_t = 1000)]
    l: usize,
    #[arg(long, default_value_t = 20)]
    phases: usize,
    /// Gap resolution; default max(10·width/L, 1e-6).
    #[arg(long)]
    resolution: Option<f64>,
    /// Accept omega without the Diophantine scan (recorded in the manifest).
    #[arg(long)]
    skip_dio: bool,
    #[arg(long, default_value_t = 0.05)]
    dio_c: f64,
    /// Diophantine exponent; default d + 1.
    #[arg(long)]
    dio_tau: Option<f64>,
    #[arg(long, default_value_t = 100)]
    dio_m: u64,
    #[arg(long, value_enum, default_value_t = PhaseModeArg::Random)]
    phase_mode: PhaseModeArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum PhaseModeArg {
    Random,
    Orbit,
}

#[derive(Args)]
struct CartanArgs {
    coeff_file: PathBuf,
    /// Condition to sweep: 3, 4, or both.
    #[arg(long, default_value = "both")]
    kind: String,
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5,6,7,8,9,10")]
    k_list: Vec<f64>,
    #[arg(long, default_value_t = 100_000)]
    samples: u64,
    #[arg(long, default_value_t = 64)]
    h_count: usize,
    #[arg(long, default_value_t = 32)]
    eta_count: usize,
    #[arg(long, default_value_t = 32)]
    h0_count: usize,
    #[arg(long, default_value_t = 0.3)]
    c1: f64,
    #[arg(long, value_delimiter = ',', num_args = 2)]
    pair: Option<Vec<usize>>,
}

#[derive(Args)]
struct SliceArgs {
    start_file: PathBuf,
    end_file: PathBuf,
    #[arg(long, default_value_t = 100)]
    steps: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // one-shot process: configuring the global pool once is enough
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
    match run(&cli) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Result<ExitCode, String> {
    match &cli.command {
        Command::Dim { d, n } => cmd_dim(*d, *n),
        Command::Classify(args) => cmd_classify(cli, args),
        Command::Spectrum(args) => cmd_spectrum(cli, args),
        Command::Survey { config_file } => cmd_survey(cli, config_file),
        Command::Cartan(args) => cmd_cartan(cli, args),
        Command::Slice(args) => cmd_slice(cli, args),
    }
}

fn fail2<E: Display>(e: E) -> String {
    e.to_string()
}

// --- helpers -----------------------------------------------------------------

fn now_unix() -> (u64, u32) {
    let t = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .unwrap_or_default();
    (t.as_secs(), t.subsec_nanos())
}

fn config_hash<T: Serialize>(config: &T) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

fn file_hash(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Creates `<out_dir>/<unix-secs>-<hash prefix>[-k]/`.
fn make_run_dir(out_dir: &Path, hash: &str) -> Result<PathBuf, String> {
    let (secs, _) = now_unix();
    let base = format!("{secs}-{}", &hash[..8.min(hash.len())]);
    let mut dir = out_dir.join(&base);
    let mut k = 1;
    while dir.exists() {
        k += 1;
        dir = out_dir.join(format!("{base}-{k}"));
    }
    std::fs::create_dir_all(&dir).map_err(fail2)?;
    Ok(dir)
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    config_hash: String,
    master_seed: u64,
    tool_version: String,
    output_paths: Vec<String>,
    started_unix_s: u64,
    finished_unix_s: u64,
    config: serde_json::Value,
}

fn write_manifest(
    dir: &Path,
    command: &str,
    hash: &str,
    master_seed: u64,
    outputs: &[&Path],
    started: u64,
    config: serde_json::Value,
) -> Result<(), String> {
    let manifest = RunManifest {
        command: command.to_string(),
        config_hash: hash.to_string(),
        master_seed,
        tool_version: qslab_core::VERSION.to_string(),
        output_paths: outputs
            .iter()
            .map(|p| p.to_string_lossy().into_owned())
            .collect(),
        started_unix_s: started,
        finished_unix_s: now_unix().0,
        config,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(fail2)?;
    std::fs::write(dir.join("manifest.json"), text).map_err(fail2)?;
    Ok(())
}

fn read_coefficients(path: &Path) -> Result<(CoefficientVector, String), String> {
    let bytes = std::fs::read(path)
        .map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|e| format!("{} is not UTF-8: {e}", path.display()))?;
    let cv = potential::coefficients_from_json(&text)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    Ok((cv, file_hash(&bytes)))
}

fn parse_pair(pair: &Option<Vec<usize>>) -> Result<PairSelection, String> {
    match pair {
        None => Ok(PairSelection::MinOverAllPairs),
        Some(v) if v.len() == 2 => Ok(PairSelection::Pair(v[0], v[1])),
        Some(v) => Err(format!("--pair needs exactly two indices, got {v:?}")),
    }
}

fn verdict_exit(v: Verdict) -> ExitCode {
    match v {
        Verdict::Pass => ExitCode::SUCCESS,
        Verdict::Fail => ExitCode::from(3),
        Verdict::Inconclusive => ExitCode::from(4),
    }
}

// --- subcommands --------------------------------------------------------------

fn cmd_dim(d: usize, n: u32) -> Result<ExitCode, String> {
    let count = potential::dimension_count(d, n).map_err(fail2)?;
    println!("{count}");
    Ok(ExitCode::SUCCESS)
}

fn cmd_classify(cli: &Cli, args: &ClassifyArgs) -> Result<ExitCode, String> {
    let (coefficients, hash) = read_coefficients(&args.coeff_file)?;
    let opts = ClassifyOptions {
        morse: MorseOptions::default(),
        cartan: if args.skip_cartan {
            None
        } else {
            Some(CartanOptions {
                k_list: args.k_list.clone(),
                grids: SweepGrids {
                    h_count: args.h_count,
                    eta_count: args.eta_count,
                    h0_count: args.h0_count,
                    pair_mode: parse_pair(&args.pair)?,
                    c1: args.c1,
                },
                samples: args.cartan_samples,
            })
        },
        spectrum: None,
    };
    let seed = cli.seed.unwrap_or(0);
    let mut report = survey::classify_potential(&coefficients, &opts, seed);
    report.coefficient_ref = Some(hash);

    let json = serde_json::to_string_pretty(&report).map_err(fail2)?;
    match cli.format {
        Format::Json => println!("{json}"),
        Format::Csv => {
            println!("in_class_G,morse,extrema,cartan3,cartan4,error");
            let v = |s: &Option<survey::SweepSummary>| {
                s.as_ref().map_or("skipped", |x| x.verdict.as_str()).to_string()
            };
            println!(
                "{},{},{},{},{},{}",
                report.in_class_g.as_str(),
                report.morse.as_ref().map_or("", |m| m.verdict.as_str()),
                report.extrema.as_ref().map_or("", |e| e.verdict.as_str()),
                v(&report.cartan3),
                v(&report.cartan4),
                report.error.as_deref().unwrap_or("")
            );
        }
    }
    if let Some(out) = &args.out {
        std::fs::write(out, &json).map_err(fail2)?;
    }
    Ok(verdict_exit(report.in_class_g))
}

fn cmd_spectrum(cli: &Cli, args: &SpectrumArgs) -> Result<ExitCode, String> {
    let (coefficients, coeff_hash) = read_coefficients(&args.coeff_file)?;
    let v = potential::TrigPolynomial::new(coefficients);
    let d = v.shape().d();
    if args.omega.len() != d {
        return Err(format!(
            "--omega has {} components, potential dimension is {d}",
            args.omega.len()
        ));
    }
    let tau = args.dio_tau.unwrap_or(d as f64 + 1.0);
    let dio = spectrum::diophantine_check(&args.omega, args.dio_c, tau, args.dio_m);
    if !dio.pass && !args.skip_dio {
        return Err(format!(
            "omega fails the Diophantine check at m = {} (distance {:.3e} < required {:.3e}); pass --skip-dio to override",
            dio.worst_m, dio.worst_value, dio.required_at_worst
        ));
    }

    let seed = cli.seed.unwrap_or(0);
    let cfg = OperatorConfig::new(
        v,
        args.omega.clone(),
        args.lambda,
        TorusPoint::origin(d),
    )
    .map_err(fail2)?;
    let mode = match args.phase_mode {
        PhaseModeArg::Random => PhaseMode::Random,
        PhaseModeArg::Orbit => PhaseMode::Orbit,
    };

    #[derive(Serialize)]
    struct ResolvedConfig<'a> {
        coeff_hash: &'a str,
        lambda: f64,
        omega: &'a [f64],
        l: usize,
        phases: usize,
        resolution: Option<f64>,
        seed: u64,
        skip_dio: bool,
        dio_c: f64,
        dio_tau: f64,
        dio_m: u64,
        phase_mode: &'a str,
    }
    let resolved = ResolvedConfig {
        coeff_hash: &coeff_hash,
        lambda: args.lambda,
        omega: &args.omega,
        l: args.l,
        phases: args.phases,
        resolution: args.resolution,
        seed,
        skip_dio: args.skip_dio,
        dio_c: args.dio_c,
        dio_tau: tau,
        dio_m: args.dio_m,
        phase_mode: match args.phase_mode {
            PhaseModeArg::Random => "random",
            PhaseModeArg::Orbit => "orbit",
        },
    };
    let hash = config_hash(&resolved);
    let started = now_unix().0;

    let union = spectrum::approximate_spectrum(&cfg, args.l, args.phases, seed, mode)
        .map_err(fail2)?;
    let width = union.eigenvalues.last().unwrap_or(&0.0)
        - union.eigenvalues.first().unwrap_or(&0.0);
    let resolution = args
        .resolution
        .unwrap_or_else(|| spectrum::default_gap_resolution(width, args.l, 1e-6));
    let estimate = union.with_gaps(resolution).map_err(fail2)?;

    #[derive(Serialize)]
    struct GapReportFile<'a> {
        gaps: &'a [spectrum::Gap],
        is_interval: bool,
        #[serde(rename = "L")]
        l: usize,
        phases: usize,
        resolution: f64,
        lambda: f64,
        omega: &'a [f64],
        diophantine_pass: bool,
        skip_dio: bool,
    }
    let report = GapReportFile {
        gaps: &estimate.gaps,
        is_interval: estimate.is_interval,
        l: estimate.l,
        phases: estimate.phases,
        resolution,
        lambda: args.lambda,
        omega: &args.omega,
        diophantine_pass: dio.pass,
        skip_dio: args.skip_dio,
    };

    let dir = make_run_dir(&cli.out_dir, &hash)?;
    let csv_path = dir.join("eigenvalues.csv");
    let json_path = dir.join("gap_report.json");
    std::fs::write(&csv_path, union.to_csv()).map_err(fail2)?;
    let report_json = serde_json::to_string_pretty(&report).map_err(fail2)?;
    std::fs::write(&json_path, &report_json).map_err(fail2)?;
    write_manifest(
        &dir,
        "spectrum",
        &hash,
        seed,
        &[&csv_path, &json_path],
        started,
        serde_json::to_value(&resolved).map_err(fail2)?,
    )?;

    println!("{report_json}");
    eprintln!("run directory: {}", dir.display());
    Ok(if estimate.is_interval {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(5)
    })
}

fn cmd_survey(cli: &Cli, config_file: &Path) -> Result<ExitCode, String> {
    let text = std::fs::read_to_string(config_file)
        .map_err(|e| format!("cannot read {}: {e}", config_file.display()))?;
    let mut config: SurveyConfig = serde_json::from_str(&text)
        .map_err(|e| format!("{}: {e}", config_file.display()))?;
    if let Some(seed) = cli.seed {
        config.master_seed = seed;
    }
    let hash = config_hash(&config);
    let started = now_unix().0;

    let outcome = survey::run_survey(&config).map_err(fail2)?;

    let dir = make_run_dir(&cli.out_dir, &hash)?;
    let csv_path = dir.join("survey.csv");
    let agg_path = dir.join("aggregate.json");
    std::fs::write(&csv_path, outcome.to_csv()).map_err(fail2)?;
    let agg_json = serde_json::to_string_pretty(&outcome.aggregate).map_err(fail2)?;
    std::fs::write(&agg_path, &agg_json).map_err(fail2)?;
    write_manifest(
        &dir,
        "survey",
        &hash,
        config.master_seed,
        &[&csv_path, &agg_path],
        started,
        serde_json::to_value(&config).map_err(fail2)?,
    )?;

    println!("{agg_json}");
    eprintln!("run directory: {}", dir.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_cartan(cli: &Cli, args: &CartanArgs) -> Result<ExitCode, String> {
    let (coefficients, coeff_hash) = read_coefficients(&args.coeff_file)?;
    let v = potential::TrigPolynomial::new(coefficients);
    let d = v.shape().d();

    let kinds: Vec<ConditionKind> = match args.kind.as_str() {
        "3" => vec![ConditionKind::Condition3],
        "4" => vec![ConditionKind::Condition4],
        "both" => {
            if d >= 2 {
                vec![ConditionKind::Condition3, ConditionKind::Condition4]
            } else {
                vec![ConditionKind::Condition4]
            }
        }
        other => return Err(format!("--kind must be 3, 4, or both, got {other}")),
    };

    let grids = SweepGrids {
        h_count: args.h_count,
        eta_count: args.eta_count,
        h0_count: args.h0_count,
        pair_mode: parse_pair(&args.pair)?,
        c1: args.c1,
    };
    let seed = cli.seed.unwrap_or(0);

    #[derive(Serialize)]
    struct ResolvedConfig<'a> {
        coeff_hash: &'a str,
        kinds: Vec<&'a str>,
        k_list: &'a [f64],
        samples: u64,
        grids: &'a SweepGrids,
        seed: u64,
    }
    let resolved = ResolvedConfig {
        coeff_hash: &coeff_hash,
        kinds: kinds.iter().map(|k| k.as_str()).collect(),
        k_list: &args.k_list,
        samples: args.samples,
        grids: &grids,
        seed,
    };
    let hash = config_hash(&resolved);
    let started = now_unix().0;

    let mut tables = Vec::new();
    for (i, kind) in kinds.iter().enumerate() {
        let table = cartan::cartan_sweep(
            &v,
            *kind,
            &args.k_list,
            &grids,
            &Sampler {
                samples: args.samples,
                seed: qslab_core::rng::derive_seed(seed, i as u64),
            },
        )
        .map_err(fail2)?;
        tables.push(table);
    }

    let mut csv = String::new();
    for (i, t) in tables.iter().enumerate() {
        let text = t.to_csv();
        if i == 0 {
            csv.push_str(&text);
        } else {
            // drop the repeated header
            csv.push_str(text.split_once('\n').map(|x| x.1).unwrap_or(""));
        }
    }

    let dir = make_run_dir(&cli.out_dir, &hash)?;
    let csv_path = dir.join("decay.csv");
    std::fs::write(&csv_path, &csv).map_err(fail2)?;
    let tables_json = serde_json::to_string_pretty(&tables).map_err(fail2)?;
    let json_path = dir.join("decay.json");
    std::fs::write(&json_path, &tables_json).map_err(fail2)?;
    write_manifest(
        &dir,
        "cartan",
        &hash,
        seed,
        &[&csv_path, &json_path],
        started,
        serde_json::to_value(&resolved).map_err(fail2)?,
    )?;

    match cli.format {
        Format::Json => println!("{tables_json}"),
        Format::Csv => print!("{csv}"),
    }
    eprintln!("run directory: {}", dir.display());

    let verdict = tables
        .iter()
        .map(|t| t.verdict())
        .fold(Verdict::Pass, |acc, v| match (acc, v) {
            (Verdict::Fail, _) | (_, Verdict::Fail) => Verdict::Fail,
            (Verdict::Inconclusive, _) | (_, Verdict::Inconclusive) => Verdict::Inconclusive,
            _ => Verdict::Pass,
        });
    Ok(verdict_exit(verdict))
}

fn cmd_slice(cli: &Cli, args: &SliceArgs) -> Result<ExitCode, String> {
    let (start, start_hash) = read_coefficients(&args.start_file)?;
    let (end, end_hash) = read_coefficients(&args.end_file)?;

    #[derive(Serialize)]
    struct ResolvedConfig<'a> {
        start_hash: &'a str,
        end_hash: &'a str,
        steps: usize,
    }
    let resolved = ResolvedConfig {
        start_hash: &start_hash,
        end_hash: &end_hash,
        steps: args.steps,
    };
    let hash = config_hash(&resolved);
    let started = now_unix().0;

    let report =
        survey::line_slice(&start, &end, args.steps, &MorseOptions::default()).map_err(fail2)?;

    let dir = make_run_dir(&cli.out_dir, &hash)?;
    let json_path = dir.join("slice.json");
    let json = serde_json::to_string_pretty(&report).map_err(fail2)?;
    std::fs::write(&json_path, &json).map_err(fail2)?;
    write_manifest(
        &dir,
        "slice",
        &hash,
        0,
        &[&json_path],
        started,
        serde_json::to_value(&resolved).map_err(fail2)?,
    )?;

    println!("{json}");
    eprintln!("run directory: {}", dir.display());
    Ok(ExitCode::SUCCESS)
}
