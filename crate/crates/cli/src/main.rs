//! `sweephouse`: run the shipped convergence experiments, the path-metric
//! self-tests, or re-evaluate verdicts from persisted artifacts.

mod m1_suite;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use sweephouse_core::harness::{
    all_gates_pass, convergence_report, preset, resolve_out_dir, run_experiment, ExperimentConfig,
    PRESET_NAMES,
};

#[derive(Parser)]
#[command(name = "sweephouse", version, about = "Selective-sweep scaling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment config; replaces the subcommand's preset list.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Population-size grid override, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    grid: Option<Vec<u64>>,
    /// Replicates-per-cell override.
    #[arg(long, global = true)]
    replicates: Option<u32>,
    /// Output directory override.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Rayon thread count (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run a single named preset from the subcommand's family.
    #[arg(long, global = true)]
    preset: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Sweep duration and limit-shape experiments.
    Sweep,
    /// Stage-decomposition deviation experiments.
    Phases,
    /// Path-metric self-tests (brackets, axioms, dense-grid reference).
    M1,
    /// Conditioned-walk functional experiments.
    Walks,
    /// Recurrent-mutation runs against the deterministic trajectory system.
    Clonal,
    /// Re-evaluate verdicts from persisted JSON artifacts.
    Report {
        /// Artifact files; defaults to every *.json in the output directory.
        files: Vec<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .context("thread pool")?;
    }
    match &cli.command {
        Command::Sweep => run_experiments(&cli, &["sweep-duration", "sweep-shape"]),
        Command::Phases => run_experiments(&cli, &["phase-deviations"]),
        Command::Walks => run_experiments(&cli, &["walk-functionals"]),
        Command::Clonal => run_experiments(&cli, &["clonal-distance"]),
        Command::M1 => Ok(m1_suite::run(cli.seed.unwrap_or(9))),
        Command::Report { files } => run_report(&cli, files),
    }
}

fn load_configs(cli: &Cli, family: &[&str]) -> Result<Vec<ExperimentConfig>> {
    if cli.config.is_some() && cli.preset.is_some() {
        bail!("--config and --preset are mutually exclusive");
    }
    let mut configs = if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading {}", path.display()))?;
        vec![ExperimentConfig::from_toml_str(&text)?]
    } else if let Some(name) = &cli.preset {
        if !family.contains(&name.as_str()) {
            bail!(
                "preset {name:?} is not in this subcommand's family {family:?} (known presets: {PRESET_NAMES:?})"
            );
        }
        vec![preset(name).expect("family names are shipped presets")]
    } else {
        family
            .iter()
            .map(|n| preset(n).expect("family names are shipped presets"))
            .collect()
    };
    for config in &mut configs {
        if let Some(seed) = cli.seed {
            config.seed = seed;
        }
        if let Some(reps) = cli.replicates {
            config.replicates = reps;
        }
        if let Some(grid) = &cli.grid {
            config.grid.n = grid.clone();
        }
        if let Some(out) = &cli.out {
            config.out_dir = Some(out.clone());
        }
        config.validate()?;
    }
    Ok(configs)
}

fn run_experiments(cli: &Cli, family: &[&str]) -> Result<bool> {
    let configs = load_configs(cli, family)?;
    let mut ok = true;
    for config in &configs {
        println!(
            "== {} ({}) ==",
            config.id,
            config.statement.as_deref().unwrap_or("unnamed claim")
        );
        let run = run_experiment(config)?;
        for w in &run.warnings {
            eprintln!("warning: {w}");
        }
        for stat in run.table.statistics() {
            let medians: Vec<String> = run
                .table
                .rows_for(&stat)
                .iter()
                .map(|r| format!("N={} median {:.4}", r.n, r.median))
                .collect();
            println!("   {stat}: {}", medians.join(", "));
        }
        let verdicts = convergence_report(&run.table, &config.tolerances)?;
        for v in &verdicts {
            println!("   {}", v.line());
        }
        ok &= all_gates_pass(&verdicts);
        println!("   artifacts: {} / {}", run.csv_path.display(), run.json_path.display());
    }
    println!("overall: {}", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}

fn run_report(cli: &Cli, files: &[PathBuf]) -> Result<bool> {
    let files: Vec<PathBuf> = if files.is_empty() {
        // The report has no config of its own; resolve against an empty one.
        let probe = preset("sweep-duration").expect("shipped preset");
        let dir = resolve_out_dir(cli.out.as_deref(), &probe);
        let mut found: Vec<PathBuf> = std::fs::read_dir(&dir)
            .with_context(|| format!("listing {}", dir.display()))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        found.sort();
        if found.is_empty() {
            bail!("no artifacts in {}", dir.display());
        }
        found
    } else {
        files.to_vec()
    };
    let mut ok = true;
    for path in &files {
        let artifact = sweephouse_core::harness::read_artifact(path)?;
        println!("== {} ({}) ==", artifact.config.id, path.display());
        if artifact.table.rows.is_empty() {
            println!("   empty table; nothing to report");
            continue;
        }
        let verdicts = convergence_report(&artifact.table, &artifact.config.tolerances)?;
        for v in &verdicts {
            println!("   {}", v.line());
        }
        ok &= all_gates_pass(&verdicts);
    }
    println!("overall: {}", if ok { "PASS" } else { "FAIL" });
    Ok(ok)
}
