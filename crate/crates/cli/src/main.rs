use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use opbo::benchfn::{FunctionName, ObjectiveFunction, DEFAULT_LOWER, DEFAULT_UPPER};
use opbo::harness::{
    diagnose, diagnose_values, export_plots, run_experiment, summarize, DiagnoseConfig, DiagnoseTarget, ExperimentConfig,
    Preset, Summary,
};
use opbo::optimizer::SurrogateKind;

/// Order-preserving Bayesian optimization experiments.
#[derive(Parser, Debug)]
#[command(name = "opbo", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a trial matrix from a JSON config or a preset.
    Run(RunArgs),
    /// Aggregate the traces of an output directory.
    Summarize { dir: PathBuf },
    /// Render convergence SVGs for an output directory.
    Plot { dir: PathBuf },
    /// Ordered performance curve of a function or a value file.
    Diagnose(DiagnoseArgs),
    /// Benchmark listings.
    Bench {
        #[command(subcommand)]
        command: BenchCommand,
    },
}

#[derive(Subcommand, Debug)]
enum BenchCommand {
    /// List benchmark functions and their domains.
    List,
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Experiment config (JSON).
    config: Option<PathBuf>,
    /// Built-in experiment instead of a config file.
    #[arg(long, value_parser = parse_preset, conflicts_with = "config")]
    preset: Option<Preset>,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of concurrent trials.
    #[arg(long)]
    parallelism: Option<usize>,
    /// Override the number of trials per cell.
    #[arg(long)]
    trials: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Root under which relative output directories are placed.
    #[arg(long, env = "OPBO_OUTPUT_ROOT")]
    output_root: Option<PathBuf>,
    /// Skip summarizing and plotting after the run.
    #[arg(long)]
    no_summary: bool,
}

#[derive(Args, Debug)]
struct DiagnoseArgs {
    /// `gaussian-bump` or a benchmark name.
    #[arg(long, default_value = "gaussian-bump", conflicts_with = "values")]
    function: String,
    #[arg(long, default_value_t = 2)]
    dimension: usize,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Fit this surrogate and report held-out Spearman correlation.
    #[arg(long, value_parser = parse_surrogate)]
    surrogate: Option<SurrogateKind>,
    #[arg(long, default_value_t = 200)]
    train_samples: usize,
    #[arg(long, default_value_t = 50)]
    epochs: usize,
    /// Analyze values from a file instead: one number per line, or the
    /// `incumbent_y` column of a trace CSV.
    #[arg(long)]
    values: Option<PathBuf>,
    /// Print the full report, curve included, as JSON.
    #[arg(long)]
    json: bool,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    s.parse().map_err(|e: opbo::Error| e.to_string())
}

fn parse_surrogate(s: &str) -> Result<SurrogateKind, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase()))
        .map_err(|_| format!("unknown surrogate `{s}` (expected op, gp or nn)"))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Summarize { dir } => {
            let s = summarize(&dir)?;
            print_rank_table(&s);
            Ok(())
        }
        Command::Plot { dir } => cmd_plot(&dir),
        Command::Diagnose(args) => cmd_diagnose(args),
        Command::Bench {
            command: BenchCommand::List,
        } => {
            cmd_bench_list();
            Ok(())
        }
    }
}

fn resolve_output(args: &RunArgs, configured: &Path) -> PathBuf {
    if let Some(out) = &args.out {
        return out.clone();
    }
    match &args.output_root {
        Some(root) if configured.is_relative() => root.join(configured),
        _ => configured.to_path_buf(),
    }
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let mut config = match (&args.config, args.preset) {
        (Some(path), _) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
        (None, Some(preset)) => ExperimentConfig::preset(preset),
        (None, None) => bail!("give a config file or --preset desk|full"),
    };
    if let Some(seed) = args.seed {
        config.base_seed = seed;
    }
    if let Some(p) = args.parallelism {
        config.parallelism = p;
    }
    if let Some(t) = args.trials {
        config.trials_per_cell = t;
    }
    config.output_dir = resolve_output(&args, &config.output_dir);
    let report = run_experiment(&config)?;
    log::info!(
        "{}: {} run, {} skipped, {} failed",
        report.output_dir.display(),
        report.executed.len(),
        report.skipped.len(),
        report.failed.len()
    );
    for (id, msg) in &report.failed {
        log::warn!("{id}: {msg}");
    }
    if !args.no_summary {
        let s = summarize(&report.output_dir)?;
        export_plots(&s, &report.output_dir)?;
        print_rank_table(&s);
    }
    Ok(())
}

fn cmd_plot(dir: &Path) -> Result<()> {
    let summary = match Summary::load(dir) {
        Ok(s) => s,
        Err(_) => summarize(dir)?,
    };
    for path in export_plots(&summary, dir)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn print_rank_table(s: &Summary) {
    let t = &s.rank_table;
    print!("{:<24}", "problem");
    for a in &t.algorithms {
        print!("{a:>16}");
    }
    println!();
    for (p, row) in t.problems.iter().zip(&t.medians) {
        print!("{p:<24}");
        for v in row {
            print!("{v:>16.6}");
        }
        println!();
    }
    print!("{:<24}", "mean rank");
    for r in &t.mean_ranks {
        print!("{r:>16.3}");
    }
    println!();
    print!("{:<24}", "tavg (s)");
    for v in &t.tavg {
        match v {
            Some(v) => print!("{v:>16.3}"),
            None => print!("{:>16}", "-"),
        }
    }
    println!();
}

fn read_values(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let first = lines.next().context("empty value file")?;
    if first.contains(',') {
        let header: Vec<&str> = first.split(',').collect();
        let col = header
            .iter()
            .position(|h| *h == "incumbent_y")
            .context("CSV input needs an incumbent_y column")?;
        lines
            .map(|l| {
                let cell = l.split(',').nth(col).context("short CSV row")?;
                cell.trim().parse::<f64>().with_context(|| format!("bad number `{cell}`"))
            })
            .collect()
    } else {
        std::iter::once(first)
            .chain(lines)
            .map(|l| l.trim().parse::<f64>().with_context(|| format!("bad number `{l}`")))
            .collect()
    }
}

fn cmd_diagnose(args: DiagnoseArgs) -> Result<()> {
    let report = match &args.values {
        Some(path) => diagnose_values(&read_values(path)?)?,
        None => {
            let mut c = DiagnoseConfig::new(DiagnoseTarget::parse(&args.function, args.dimension)?);
            c.samples = args.samples;
            c.seed = args.seed;
            c.surrogate = args.surrogate;
            c.train_samples = args.train_samples;
            c.train.epochs = args.epochs;
            diagnose(&c)?
        }
    };
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
        return Ok(());
    }
    if let Some(t) = &report.target {
        println!("target        {t}");
    }
    println!("samples       {}", report.n);
    println!("opc type      {}", report.opc_type);
    println!("signed area   {:+.4}", report.signed_area);
    println!("half areas    {:+.4} / {:+.4}", report.left_area, report.right_area);
    println!("y(0.5)        {:.4}", report.half_point);
    if let (Some(kind), Some(rho)) = (report.surrogate, report.holdout_spearman) {
        println!("held-out rho  {rho:.4} ({kind})");
    }
    Ok(())
}

fn cmd_bench_list() {
    println!("{:<12}{:>8}  {:<16}minimizer", "function", "min d", "default box");
    for f in FunctionName::ALL {
        let minimizer = match f {
            FunctionName::Ackley => "x = 0".to_owned(),
            FunctionName::Levy | FunctionName::Rosenbrock => "x = 1".to_owned(),
            FunctionName::DixonPrice => {
                let (x, _) = ObjectiveFunction::new(f, 2)
                    .and_then(|o| o.known_minimum())
                    .expect("dixon-price minimum is inside the default box");
                format!("x_i = 2^-(1 - 2^(1-i)), x_1..2 = {:.4}, {:.4}", x[0], x[1])
            }
        };
        println!(
            "{:<12}{:>8}  [{DEFAULT_LOWER}, {DEFAULT_UPPER}]^d     {minimizer}, f* = 0",
            f.as_str(),
            f.min_dimension()
        );
    }
    println!();
    println!("frameworks: bo, opbo, turbo, random");
    println!("surrogates: op, gp, nn");
    println!("presets:    desk, full");
}
