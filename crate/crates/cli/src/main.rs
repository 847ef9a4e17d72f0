use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use hkt_susy::input::{parse_config, RunSection};
use hkt_susy::jets::DEFAULT_ORDER;
use hkt_susy::verifier::{self, Check, RunConfig, Tolerances, DEFAULT_POINTS, DEFAULT_SEED};
use hkt_susy::zoo::{self, ZooEntry};

const SEED_ENV: &str = "SUSY_HKT_SEED";

#[derive(Parser)]
#[command(
    name = "hkt-susy",
    version,
    about = "Verify classical supercharges of HKT, HK and Kähler sigma models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the verification suite and write a JSON report.
    Verify(RunArgs),
    /// List the built-in manifolds.
    Zoo,
    /// Classify sampled points only.
    Classify(RunArgs),
    /// Print the constructed charges of one manifold at one point.
    Explain(ExplainArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Zoo name or path to a manifold file; repeatable. Defaults to the whole zoo.
    #[arg(long = "manifold", short = 'm')]
    manifolds: Vec<String>,
    /// Configuration file with [run] and optional manifold sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated subset of classify,n4,sfhk,gauge,x_identity,complex_pair, or `all`.
    #[arg(long)]
    checks: Option<String>,
    #[arg(long)]
    points: Option<usize>,
    /// Falls back to $SUSY_HKT_SEED, then 7.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jet_order: Option<usize>,
    /// Tolerance override `name=value` (classification, closure, identity, negative, mutation).
    #[arg(long = "tol")]
    tolerances: Vec<String>,
    /// Report path; `-` writes the JSON to stdout instead of the table.
    #[arg(long, short = 'o', default_value = "report.json")]
    output: String,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ExplainArgs {
    /// Zoo name or path to a manifold file.
    #[arg(long, short = 'm')]
    manifold: String,
    /// Comma-separated coordinates; defaults to the first sample point.
    #[arg(long, allow_hyphen_values = true)]
    point: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    jet_order: Option<usize>,
}

fn looks_like_path(s: &str) -> bool {
    s.contains('/') || s.contains('.') || Path::new(s).is_file()
}

fn load_file(path: &Path) -> anyhow::Result<(RunSection, Option<ZooEntry>)> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = parse_config(&text).with_context(|| format!("in {}", path.display()))?;
    Ok((cfg.run, cfg.manifold))
}

fn resolve_manifold(arg: &str) -> anyhow::Result<ZooEntry> {
    if looks_like_path(arg) {
        match load_file(Path::new(arg))? {
            (_, Some(m)) => Ok(m),
            (_, None) => bail!("{arg} has no [metric] section"),
        }
    } else {
        Ok(zoo::zoo_get(arg)?)
    }
}

fn env_seed() -> anyhow::Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => {
            Ok(Some(v.trim().parse().with_context(|| {
                format!("{SEED_ENV}={v} is not an integer")
            })?))
        }
        Err(_) => Ok(None),
    }
}

fn apply_tolerance(tol: &mut Tolerances, arg: &str) -> anyhow::Result<()> {
    let (name, value) = arg
        .split_once('=')
        .with_context(|| format!("--tol expects name=value, got `{arg}`"))?;
    let value: f64 = value
        .trim()
        .parse()
        .with_context(|| format!("bad tolerance `{value}`"))?;
    if !(value > 0.0) {
        bail!("tolerances must be positive");
    }
    let slot = match name.trim() {
        "classification" => &mut tol.classification,
        "closure" => &mut tol.closure,
        "identity" => &mut tol.identity,
        "negative" => &mut tol.negative,
        "mutation" => &mut tol.mutation,
        other => bail!("unknown tolerance `{other}`"),
    };
    *slot = value;
    Ok(())
}

/// Flags override the config file, which overrides the environment.
fn build_config(args: &RunArgs) -> anyhow::Result<RunConfig> {
    let (file_run, file_manifold) = match &args.config {
        Some(p) => load_file(p)?,
        None => (RunSection::default(), None),
    };
    let mut manifolds = Vec::new();
    let names: Vec<String> = if args.manifolds.is_empty() {
        file_run.manifolds.clone()
    } else {
        args.manifolds.clone()
    };
    for n in &names {
        manifolds.push(resolve_manifold(n)?);
    }
    if args.manifolds.is_empty() {
        manifolds.extend(file_manifold);
    }
    if manifolds.is_empty() && args.config.is_none() {
        for n in zoo::names() {
            manifolds.push(zoo::zoo_get(n)?);
        }
    }
    let checks = match &args.checks {
        Some(s) => Check::parse_list(s)?,
        None => file_run.checks.unwrap_or_else(|| Check::ALL.to_vec()),
    };
    let seed = match (args.seed, file_run.seed) {
        (Some(s), _) | (None, Some(s)) => s,
        _ => env_seed()?.unwrap_or(DEFAULT_SEED),
    };
    let mut tolerances = Tolerances::default();
    for t in &args.tolerances {
        apply_tolerance(&mut tolerances, t)?;
    }
    let config = RunConfig {
        manifolds,
        checks,
        points: args.points.or(file_run.points).unwrap_or(DEFAULT_POINTS),
        seed,
        jet_order: args
            .jet_order
            .or(file_run.jet_order)
            .unwrap_or(DEFAULT_ORDER),
        tolerances,
        threads: args.threads,
    };
    config.validate()?;
    Ok(config)
}

fn verify(args: &RunArgs) -> anyhow::Result<bool> {
    let config = build_config(args)?;
    let report = verifier::run_suite(&config)?;
    if args.output == "-" {
        println!("{}", report.to_json());
    } else {
        fs::write(&args.output, report.to_json())
            .with_context(|| format!("writing {}", args.output))?;
        print!("{}", report.table());
        println!("report written to {}", args.output);
    }
    Ok(report.exit_ok())
}

fn classify(args: &RunArgs) -> anyhow::Result<bool> {
    let mut config = build_config(args)?;
    config.checks = vec![Check::Classify];
    let report = verifier::run_suite(&config)?;
    for m in &report.manifolds {
        println!("{} (expected {})", m.name, m.expected_class);
        for p in &m.points {
            let coords: Vec<String> = p.point.iter().map(|x| format!("{x:+.4}")).collect();
            match (&p.classification, &p.error) {
                (Some(c), _) => println!(
                    "  [{}] {:<8} complex={} kahler={} hkt={} hk={}",
                    coords.join(", "),
                    c.class.name(),
                    c.complex,
                    c.kahler,
                    c.hkt,
                    c.hk
                ),
                (None, Some(e)) => println!("  [{}] error: {e}", coords.join(", ")),
                (None, None) => println!("  [{}] not classified", coords.join(", ")),
            }
        }
    }
    for f in &report.summary.failures {
        println!("failed: {f}");
    }
    Ok(report.exit_ok())
}

fn explain(args: &ExplainArgs) -> anyhow::Result<bool> {
    let entry = resolve_manifold(&args.manifold)?;
    let order = args.jet_order.unwrap_or(DEFAULT_ORDER);
    let point = match &args.point {
        Some(s) => s
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad coordinate `{t}`"))
            })
            .collect::<anyhow::Result<Vec<_>>>()?,
        None => {
            let seed = match args.seed {
                Some(s) => s,
                None => env_seed()?.unwrap_or(DEFAULT_SEED),
            };
            verifier::sample_points(&entry, 1, seed).remove(0)
        }
    };
    if point.len() != entry.dim() {
        bail!(
            "point has {} coordinates, {} needs {}",
            point.len(),
            entry.name,
            entry.dim()
        );
    }
    print!("{}", verifier::explain(&entry, &point, order)?);
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Verify(a) => verify(a),
        Command::Classify(a) => classify(a),
        Command::Explain(a) => explain(a),
        Command::Zoo => {
            for name in zoo::names() {
                let e = zoo::zoo_get(name).expect("zoo names resolve");
                println!(
                    "{:<22} {:<8} D={}  {}",
                    e.name,
                    e.expected_class.name(),
                    e.dim(),
                    e.description
                );
            }
            Ok(true)
        }
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
