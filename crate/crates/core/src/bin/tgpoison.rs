use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tgpoison::audit::{audit, AuditConfig};
use tgpoison::graph::{edge_stream_to_string, load_edge_stream, DatasetFormat};
use tgpoison::manifest::Manifest;
use tgpoison::pipeline::{self, AttackConfig, BaselineMode, PoisonSettings};
use tgpoison::sparsify::{BudgetBase, Heuristic};
use tgpoison::synthetic::{replicate, SyntheticStream};
use tgpoison::{Error, Result};

#[derive(Parser)]
#[command(name = "tgpoison", version, about = "Poisoning attacks on continuous-time dynamic graphs")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sparsify the training stream and insert replacement edges.
    Attack(RunArgs),
    /// Insert-only or remove-only baseline.
    Baseline {
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Degree, Jaccard, PageRank, Preference or Random.
        #[arg(long)]
        heuristic: Heuristic,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Check a poisoned stream against its original and manifest.
    Audit(AuditArgs),
    /// Time the pipeline on streams of growing size and fit scaling slopes.
    Benchmark(BenchArgs),
    /// Write a seeded synthetic edge stream as CSV.
    Generate {
        #[arg(long, default_value_t = 10_000)]
        edges: usize,
        #[arg(long, default_value_t = 1000)]
        nodes: usize,
        /// Target partition size; 0 gives a unipartite stream.
        #[arg(long, default_value_t = 0)]
        targets: usize,
        #[arg(long, default_value_t = 10)]
        edges_per_timestamp: usize,
        #[arg(long, default_value_t = 0.5)]
        zipf: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output file; stdout when absent.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// List every strategy and baseline name.
    Catalog {
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Add,
    Rem,
}

#[derive(Clone, Copy, ValueEnum)]
enum BudgetArg {
    Training,
    Visible,
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; flags below override it.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Edge stream CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Dataset descriptor TOML.
    #[arg(long)]
    descriptor: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    bipartite: bool,
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    knowledge: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// Activity window W.
    #[arg(long)]
    window: Option<f64>,
    /// Per-node net degree capacity C.
    #[arg(long)]
    capacity: Option<u32>,
    #[arg(long)]
    max_attempts: Option<usize>,
    #[arg(long)]
    draws_per_slot: Option<usize>,
    #[arg(long)]
    topk: Option<usize>,
    #[arg(long)]
    combined_weight: Option<f64>,
    #[arg(long)]
    ks_threshold: Option<f64>,
    #[arg(long, value_enum)]
    budget_base: Option<BudgetArg>,
    /// Print the merged config as TOML and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Args)]
struct AuditArgs {
    /// Unpoisoned training stream.
    #[arg(long)]
    original: PathBuf,
    #[arg(long)]
    poisoned: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    descriptor: Option<PathBuf>,
    #[arg(long)]
    bipartite: bool,
    /// Overrides the manifest's window.
    #[arg(long)]
    window: Option<f64>,
    /// Overrides the manifest's node capacity.
    #[arg(long)]
    capacity: Option<u32>,
    #[arg(long, default_value_t = 0.1)]
    ks_threshold: f64,
    #[arg(long, default_value_t = 100)]
    ks_min_sample: usize,
    /// Also write the JSON report here.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Edge stream CSVs, one per size. Without any, a synthetic stream
    /// is replicated.
    files: Vec<PathBuf>,
    #[arg(long)]
    bipartite: bool,
    #[arg(long, default_value_t = 10_000)]
    base_edges: usize,
    #[arg(long, default_value_t = 1000)]
    nodes: usize,
    #[arg(long, default_value_t = 10)]
    edges_per_timestamp: usize,
    /// Replication factors of the synthetic base stream.
    #[arg(long, value_delimiter = ',', default_values_t = [1, 2, 4])]
    copies: Vec<usize>,
    #[arg(long, default_value = "TPR-Cosine")]
    strategy: String,
    #[arg(long, default_value_t = 0.3)]
    p: f64,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    json: bool,
}

impl RunArgs {
    fn config(&self) -> Result<AttackConfig> {
        let mut config = match &self.config {
            Some(path) => AttackConfig::from_path(path)?,
            None => AttackConfig::default(),
        };
        let d = &mut config.dataset;
        if self.data.is_some() {
            d.path.clone_from(&self.data);
        }
        if self.descriptor.is_some() {
            d.descriptor.clone_from(&self.descriptor);
        }
        if self.name.is_some() {
            d.name.clone_from(&self.name);
        }
        d.bipartite |= self.bipartite;
        let a = &mut config.attack;
        if let Some(s) = &self.strategy {
            a.strategy.clone_from(s);
        }
        set(&mut a.p, self.p);
        set(&mut a.knowledge, self.knowledge);
        set(&mut a.seed, self.seed);
        if let Some(o) = &self.output {
            a.output.clone_from(o);
        }
        let q = &mut config.parameters;
        set(&mut q.alpha.value, self.alpha);
        set(&mut q.beta.value, self.beta);
        set(&mut q.window.value, self.window);
        set(&mut q.node_capacity.value, self.capacity);
        set(&mut q.max_attempts.value, self.max_attempts);
        set(&mut q.draws_per_slot.value, self.draws_per_slot);
        set(&mut q.topk.value, self.topk);
        set(&mut q.combined_weight.value, self.combined_weight);
        set(&mut q.ks_threshold.value, self.ks_threshold);
        if let Some(b) = self.budget_base {
            q.budget_base.value = match b {
                BudgetArg::Training => BudgetBase::Training,
                BudgetArg::Visible => BudgetBase::Visible,
            };
        }
        Ok(config)
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn run(args: &RunArgs, baseline: Option<(BaselineMode, Heuristic)>) -> Result<()> {
    let mut config = args.config()?;
    if let Some((mode, heuristic)) = baseline {
        config.attack.strategy = pipeline::baseline_name(mode, heuristic);
    }
    if args.print_config {
        print!("{}", config.to_toml());
        return Ok(());
    }
    match pipeline::run_attack(&config) {
        Ok(summary) => {
            println!("{summary}");
            println!("manifest sha256 {}", summary.manifest_sha256);
            Ok(())
        }
        Err(err) => {
            if let Error::AuditFailed(report) = err.root() {
                println!("{report}");
            }
            Err(err)
        }
    }
}

fn load_format(descriptor: Option<&Path>, name: &str, bipartite: bool) -> Result<DatasetFormat> {
    let mut format = match descriptor {
        Some(path) => DatasetFormat::from_path(path)?,
        None => DatasetFormat::new(name, false),
    };
    format.bipartite |= bipartite;
    Ok(format)
}

fn run_audit(args: &AuditArgs) -> Result<()> {
    let format = load_format(args.descriptor.as_deref(), "original", args.bipartite)?;
    let original = load_edge_stream(&args.original, &format)?;
    let poisoned = load_edge_stream(&args.poisoned, &format)?;
    let manifest = Manifest::load(&args.manifest)?;
    let config = AuditConfig {
        ks_threshold: args.ks_threshold,
        ks_min_sample: args.ks_min_sample,
        window: args.window,
        node_capacity: args.capacity,
        mode: None,
    };
    let report = audit(&original, &poisoned, &manifest, &config);
    println!("{report}");
    if let Some(path) = &args.json {
        std::fs::write(path, report.to_json())?;
    }
    if report.passed() {
        Ok(())
    } else {
        Err(Error::AuditFailed(Box::new(report)))
    }
}

fn run_benchmark(args: &BenchArgs) -> Result<()> {
    let streams = if args.files.is_empty() {
        let base = SyntheticStream {
            nodes: args.nodes,
            edges: args.base_edges,
            edges_per_timestamp: args.edges_per_timestamp,
            seed: args.seed,
            ..SyntheticStream::default()
        };
        let base = if args.bipartite { base.bipartite(args.nodes) } else { base }.generate()?;
        args.copies.iter().map(|&c| replicate(&base, c)).collect::<Result<Vec<_>>>()?
    } else {
        let format = DatasetFormat::new("benchmark", args.bipartite);
        args.files.iter().map(|f| load_edge_stream(f, &format)).collect::<Result<Vec<_>>>()?
    };
    let mut settings = PoisonSettings {
        p: args.p,
        ..PoisonSettings::default()
    };
    settings.sampler.seed = args.seed;
    settings.strategy = match pipeline::resolve_plan(&args.strategy, args.seed)? {
        pipeline::Plan::Attack(s) => s,
        pipeline::Plan::Baseline(..) => {
            return Err(Error::InvalidParameter("benchmark needs an attack strategy, not a baseline".into()));
        }
    };
    let report = pipeline::benchmark(&streams, &settings, args.repeats)?;
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!("{report}");
    }
    Ok(())
}

fn exit_code(err: &Error) -> u8 {
    match err.root() {
        Error::AuditFailed(_) => 2,
        Error::SamplingInfeasible { .. } => 3,
        Error::Parse { .. }
        | Error::EmptyStream
        | Error::InvalidParameter(_)
        | Error::RatioSum(_)
        | Error::UnsupportedOnBipartite(_)
        | Error::BudgetExceedsVisible { .. }
        | Error::TooFewTimestamps(_)
        | Error::UnknownStrategy(_)
        | Error::NothingToBenchmark(_)
        | Error::Manifest { .. }
        | Error::Config(_)
        | Error::Io(_) => 4,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Attack(args) => run(args, None),
        Command::Baseline { mode, heuristic, run: args } => {
            let mode = match mode {
                ModeArg::Add => BaselineMode::Add,
                ModeArg::Rem => BaselineMode::Remove,
            };
            run(args, Some((mode, *heuristic)))
        }
        Command::Audit(args) => run_audit(args),
        Command::Benchmark(args) => run_benchmark(args),
        Command::Generate {
            edges,
            nodes,
            targets,
            edges_per_timestamp,
            zipf,
            seed,
            output,
        } => SyntheticStream {
            nodes: *nodes,
            targets: *targets,
            edges: *edges,
            edges_per_timestamp: *edges_per_timestamp,
            zipf_exponent: *zipf,
            seed: *seed,
            ..SyntheticStream::default()
        }
        .generate()
        .and_then(|g| {
            let text = edge_stream_to_string(&g);
            match output {
                Some(path) => std::fs::write(path, text).map_err(Error::from),
                None => {
                    print!("{text}");
                    Ok(())
                }
            }
        }),
        Command::Catalog { json } => {
            let names = pipeline::catalog();
            if *json {
                println!("{}", serde_json::to_string_pretty(&names).expect("names serialize"));
            } else {
                for n in names {
                    println!("{n}");
                }
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}
