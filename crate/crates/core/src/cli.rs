//! The `drd` command line: argument parsing and the four subcommands.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::ffi::OsString;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::bench::{self, Normalization, ReportFormat};
use crate::config::Config;
use crate::datasets::disparity::DisparityParams;
use crate::datasets::gbg::GbgParams;
use crate::datasets::library::LibraryParams;
use crate::datasets::synthetic::SyntheticParams;
use crate::datasets::world::{WorldKind, WorldParams};
use crate::datasets::{self, DatasetBundle, DatasetSpec};
use crate::model::{GroundTruth, ValidationOptions};
use crate::policy::{Policy, PolicySpec};
use crate::runner::{self, Conditioning, RunOptions, Termination};
use crate::verify::{self, Suite, SuiteOptions};
use crate::Error;

#[derive(Parser)]
#[command(name = "drd", version, about = "Decision region determination with independent Bernoulli tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset bundle (instance plus ground truths).
    Generate(GenerateArgs),
    /// Run one policy on one problem of a bundle and print the result as JSON.
    Run(RunArgs),
    /// Benchmark policies on a bundle and write a report.
    Bench(BenchArgs),
    /// Run the oracle property suites.
    Verify(VerifyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Synthetic,
    Gbg,
    World,
    Disparity,
}

#[derive(Clone, Copy, ValueEnum)]
enum WorldArg {
    Onewall,
    Twowall,
    Forest,
}

#[derive(Clone, Copy, ValueEnum)]
enum ConditioningArg {
    All,
    AtLeastOneValid,
}

impl From<ConditioningArg> for Conditioning {
    fn from(c: ConditioningArg) -> Self {
        match c {
            ConditioningArg::All => Conditioning::All,
            ConditioningArg::AtLeastOneValid => Conditioning::AtLeastOneValid,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum NormalizationArg {
    RatioOfMeans,
    PerProblem,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file; command-line flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for every random stream.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    /// Generator; overrides the config's dataset kind.
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    /// Number of regions (synthetic, gbg) or library size (world).
    #[arg(long)]
    regions: Option<usize>,
    /// Number of tests (synthetic).
    #[arg(long)]
    tests: Option<usize>,
    /// Graph vertices (gbg, world).
    #[arg(long)]
    vertices: Option<usize>,
    /// World family (world).
    #[arg(long, value_enum)]
    world: Option<WorldArg>,
    /// Number of benchmark problems (ground truths).
    #[arg(long)]
    problems: Option<usize>,
    #[arg(long, value_enum)]
    conditioning: Option<ConditioningArg>,
    /// Output bundle path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Bundle or instance file.
    #[arg(long)]
    bundle: PathBuf,
    /// Policy as `kind:selector`, e.g. `bisect:maxprob`.
    #[arg(long, default_value = "bisect:unconstrained")]
    policy: String,
    /// Index of the bundle's ground truth to use.
    #[arg(long, default_value_t = 0)]
    problem: usize,
    /// Explicit ground truth as a 0/1 string, instead of `--problem`.
    #[arg(long)]
    truth: Option<String>,
    /// Record the objective after every observation.
    #[arg(long)]
    trace: bool,
    /// Continue until every region is validated or invalidated.
    #[arg(long)]
    check_all: bool,
    /// Clamp biases into [1e-6, 1-1e-6] instead of rejecting them.
    #[arg(long)]
    clamp_bias: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    bundle: PathBuf,
    /// Comma-separated policies (default: all nine).
    #[arg(long, value_delimiter = ',')]
    policies: Option<Vec<String>>,
    #[arg(long)]
    baseline: Option<String>,
    #[arg(long, value_enum)]
    normalization: Option<NormalizationArg>,
    #[arg(long)]
    resamples: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// csv, json or markdown.
    #[arg(long, default_value = "csv")]
    format: String,
    /// Also write long-format per-problem costs here.
    #[arg(long)]
    plot_data: Option<PathBuf>,
    /// Include per-policy runtime in the report.
    #[arg(long)]
    timings: bool,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suites to run (default: all).
    #[arg(long)]
    suite: Vec<String>,
    /// Samples per suite (default: each suite's own).
    #[arg(long)]
    samples: Option<usize>,
    /// Upper bound on the number of tests in sampled instances.
    #[arg(long)]
    size_cap: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Print reports as JSON lines.
    #[arg(long)]
    json: bool,
    /// Run the equivalence suite against a deliberately broken objective.
    #[arg(long, hide = true)]
    inject_sign_flip: bool,
}

/// Errors caused by the invocation rather than by the computation.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct Usage(String);

fn is_usage(e: &anyhow::Error) -> bool {
    e.chain().any(|c| {
        c.is::<Usage>()
            || matches!(
                c.downcast_ref::<Error>(),
                Some(
                    Error::WrongSelector(_)
                        | Error::UnknownPolicy(_)
                        | Error::UnknownFormat(_)
                        | Error::NonUnitCost(_)
                        | Error::InvalidParams(_)
                )
            )
    })
}

fn load_config(common: &Common) -> anyhow::Result<Config> {
    let mut cfg = match &common.config {
        Some(p) => Config::load(p).with_context(|| format!("reading config {}", p.display()))?,
        None => Config::default(),
    };
    if common.seed.is_some() {
        cfg.seed = common.seed;
    }
    if common.threads.is_some() {
        cfg.threads = common.threads;
    }
    Ok(cfg)
}

fn require_seed(cfg: &Config) -> anyhow::Result<u64> {
    cfg.seed
        .ok_or_else(|| Usage("a seed is required: pass --seed or set `seed` in the config".into()).into())
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> anyhow::Result<T> + Send) -> anyhow::Result<T> {
    match threads {
        Some(0) => Err(Usage("--threads must be at least 1".into()).into()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .context("building thread pool")?
            .install(f),
        None => f(),
    }
}

fn parse_policy(s: &str) -> anyhow::Result<PolicySpec> {
    Ok(s.parse::<PolicySpec>()?)
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn cmd_generate(args: GenerateArgs) -> anyhow::Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(kind) = args.kind {
        let same = matches!(
            (kind, &cfg.dataset),
            (Kind::Synthetic, DatasetSpec::Synthetic(_))
                | (Kind::Gbg, DatasetSpec::Gbg(_))
                | (Kind::World, DatasetSpec::World(_))
                | (Kind::Disparity, DatasetSpec::Disparity(_))
        );
        if !same {
            cfg.dataset = match kind {
                Kind::Synthetic => DatasetSpec::Synthetic(SyntheticParams::default()),
                Kind::Gbg => DatasetSpec::Gbg(GbgParams::default()),
                Kind::World => DatasetSpec::World(LibraryParams::default()),
                Kind::Disparity => DatasetSpec::Disparity(DisparityParams::default()),
            };
        }
    }
    match &mut cfg.dataset {
        DatasetSpec::Synthetic(p) => {
            if let Some(r) = args.regions {
                p.num_regions = r;
            }
            if let Some(t) = args.tests {
                p.num_tests = t;
            }
        }
        DatasetSpec::Gbg(p) => {
            if let Some(r) = args.regions {
                p.num_regions = r;
            }
            if let Some(v) = args.vertices {
                p.num_vertices = v;
            }
        }
        DatasetSpec::World(p) => {
            if let Some(r) = args.regions {
                p.library_size = r;
            }
            if let Some(v) = args.vertices {
                p.num_vertices = v;
            }
            if let Some(w) = args.world {
                let kind = match w {
                    WorldArg::Onewall => WorldKind::OneWall,
                    WorldArg::Twowall => WorldKind::TwoWall,
                    WorldArg::Forest => WorldKind::Forest,
                };
                if p.world.kind != kind {
                    p.world = WorldParams::of_kind(kind);
                }
            }
        }
        DatasetSpec::Disparity(_) => {}
    }
    if let Some(n) = args.problems {
        cfg.problems = n;
    }
    if let Some(c) = args.conditioning {
        cfg.conditioning = c.into();
    }
    let seed = require_seed(&cfg)?;
    info!("resolved config:\n{}", cfg.to_toml());
    let bundle = with_threads(cfg.threads, || {
        Ok(datasets::generate(&cfg.dataset, cfg.problems, cfg.conditioning, seed)?)
    })?;
    write_file(&args.out, &bundle.to_json_string()?)?;
    info!(
        "wrote {} ({} tests, {} regions, {} problems)",
        args.out.display(),
        bundle.instance.num_tests(),
        bundle.instance.num_regions(),
        bundle.ground_truths.len()
    );
    Ok(())
}

fn cmd_run(args: RunArgs) -> anyhow::Result<()> {
    let cfg = load_config(&args.common)?;
    let spec = parse_policy(&args.policy)?;
    let opts = ValidationOptions {
        clamp_bias: args.clamp_bias || cfg.clamp_bias,
    };
    let bundle = DatasetBundle::read_json(&args.bundle, opts).with_context(|| format!("reading {}", args.bundle.display()))?;
    let inst = &bundle.instance;
    let truth = match &args.truth {
        Some(bits) => {
            let parsed: Option<Vec<bool>> = bits
                .chars()
                .map(|c| match c {
                    '0' => Some(false),
                    '1' => Some(true),
                    _ => None,
                })
                .collect();
            GroundTruth(parsed.ok_or_else(|| Usage("--truth must be a string of 0s and 1s".into()))?)
        }
        None => bundle.ground_truths.get(args.problem).cloned().ok_or_else(|| {
            Usage(format!(
                "problem {} out of range: bundle has {} ground truths",
                args.problem,
                bundle.ground_truths.len()
            ))
        })?,
    };
    let seed = cfg.seed.unwrap_or(0);
    info!("resolved config:\n{}", cfg.to_toml());
    let mut policy = Policy::new(spec, inst, seed)?;
    let result = runner::run_with(
        inst,
        &mut policy,
        &truth,
        RunOptions {
            termination: if args.check_all {
                Termination::CheckAll
            } else {
                Termination::IdentifyOne
            },
            record_trajectory: args.trace,
        },
    )?;
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &result)?;
    writeln!(out)?;
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> anyhow::Result<()> {
    let mut cfg = load_config(&args.common)?;
    if let Some(list) = &args.policies {
        cfg.bench.policies = list.iter().map(|s| parse_policy(s)).collect::<anyhow::Result<_>>()?;
    }
    if let Some(b) = &args.baseline {
        cfg.bench.baseline = parse_policy(b)?;
    }
    if let Some(n) = args.normalization {
        cfg.bench.normalization = match n {
            NormalizationArg::RatioOfMeans => Normalization::RatioOfMeans,
            NormalizationArg::PerProblem => Normalization::PerProblem,
        };
    }
    if let Some(r) = args.resamples {
        cfg.bench.resamples = r;
    }
    cfg.bench.timings |= args.timings;
    let format: ReportFormat = args.format.parse()?;
    let seed = require_seed(&cfg)?;
    info!("resolved config:\n{}", cfg.to_toml());
    let opts = ValidationOptions {
        clamp_bias: cfg.clamp_bias,
    };
    let bundle = DatasetBundle::read_json(&args.bundle, opts).with_context(|| format!("reading {}", args.bundle.display()))?;
    let report = with_threads(cfg.threads, || Ok(bench::run_bench(&bundle, &cfg.bench, seed)?))?;
    write_file(&args.out, &bench::emit_report(&report, format)?)?;
    if let Some(path) = &args.plot_data {
        write_file(path, &bench::plot_data(&report))?;
    }
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> anyhow::Result<bool> {
    let suites: Vec<Suite> = if args.suite.is_empty() {
        Suite::ALL.to_vec()
    } else {
        args.suite
            .iter()
            .map(|s| s.parse::<Suite>())
            .collect::<Result<_, _>>()?
    };
    with_threads(args.threads, || {
        let mut ok = true;
        for suite in suites {
            let opts = SuiteOptions {
                samples: args.samples.unwrap_or(suite.default_samples()),
                seed: args.seed,
                max_tests: args.size_cap,
            };
            let report = if args.inject_sign_flip && suite == Suite::Equivalence {
                verify::equivalence(opts, verify::sign_flipped_f_ec)
            } else {
                suite.run_with(opts)
            };
            ok &= report.passed();
            if args.json {
                println!("{}", serde_json::to_string(&report)?);
            } else {
                println!("{report}");
            }
        }
        Ok(ok)
    })
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code: 0 on success, 1 on a runtime error or a
/// failed verification suite, 2 on a usage or configuration error.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).try_init();
    let outcome = match cli.command {
        Command::Generate(a) => cmd_generate(a).map(|_| true),
        Command::Run(a) => cmd_run(a).map(|_| true),
        Command::Bench(a) => cmd_bench(a).map(|_| true),
        Command::Verify(a) => cmd_verify(a),
    };
    match outcome {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e:#}");
            if is_usage(&e) {
                2
            } else {
                1
            }
        }
    }
}
