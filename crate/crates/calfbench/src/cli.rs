//! Command-line front end. Exit status: 0 on success, 1 on configuration or
//! usage errors, 2 on I/O errors.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::harness::{self, csvio, stats, AgentConfig, RunConfig, ScenarioConfig};

#[derive(Parser, Debug)]
#[command(
    name = "calfbench",
    version,
    about = "Benchmark harness for a safe-RL agent and its baselines on a simulated differential-drive robot"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Execute a run configuration and write raw/summary/trajectory CSVs
    Run(RunArgs),
    /// Recompute per-episode aggregates from a raw CSV
    Summarize {
        /// Raw per-episode CSV produced by `run`
        raw: PathBuf,
        /// Optional file to write the summary CSV to (stdout otherwise)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate several summary CSVs side by side
    Compare {
        /// Summary CSV files produced by `run` or `summarize`
        summaries: Vec<PathBuf>,
    },
    /// Export the globally best episode's per-step path data
    Trajectory {
        #[command(flatten)]
        run: RunArgs,
        /// Output CSV file
        #[arg(long, default_value = "trajectory.csv")]
        trajectory_out: PathBuf,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Run preset name (e.g. `preset-a-calf`) or path to a JSON config file
    #[arg(long)]
    config: Option<String>,
    /// Output directory for CSVs
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed list: `1..20` (inclusive) or `1,2,5`
    #[arg(long)]
    seeds: Option<String>,
    /// Episodes per seed
    #[arg(long)]
    episodes: Option<usize>,
    /// Agent override: calf | sarsa-m | nominal | mpc10 | mpc15 | mpc25
    #[arg(long)]
    agent: Option<String>,
    /// Scenario preset override: preset-a | preset-b
    #[arg(long)]
    preset: Option<String>,
    /// Worker threads across seeds
    #[arg(long)]
    workers: Option<usize>,
}

fn parse_seeds(text: &str) -> Result<Vec<u64>> {
    let bad = || Error::Config(format!("cannot parse seed list `{text}`"));
    if let Some((lo, hi)) = text.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
        if hi < lo {
            return Err(bad());
        }
        return Ok((lo..=hi).collect());
    }
    text.split(',')
        .map(|s| s.trim().parse().map_err(|_| bad()))
        .collect()
}

fn agent_by_name(name: &str) -> Result<AgentConfig> {
    Ok(match name {
        "calf" => AgentConfig::calf(),
        "sarsa" | "sarsa-m" => AgentConfig::sarsa_m(),
        "nominal" => AgentConfig::nominal(),
        "mpc" | "mpc10" => AgentConfig::mpc(10),
        "mpc15" => AgentConfig::mpc(15),
        "mpc25" => AgentConfig::mpc(25),
        other => {
            return Err(Error::Config(format!(
                "unknown agent `{other}` (expected calf, sarsa-m, nominal, mpc10, mpc15 or mpc25)"
            )))
        }
    })
}

fn resolve_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(spec) => match RunConfig::preset(spec) {
            Some(cfg) => cfg,
            None => {
                let path = Path::new(spec);
                if !path.exists() {
                    return Err(Error::Config(format!(
                        "`{spec}` is neither a run preset nor an existing config file \
                         (presets: {})",
                        RunConfig::preset_names().join(", ")
                    )));
                }
                RunConfig::from_json_file(path)?
            }
        },
        None => {
            let agent = args
                .agent
                .as_deref()
                .ok_or_else(|| Error::Config("provide --config or --agent".to_string()))?;
            let scen = args.preset.as_deref().unwrap_or("preset-a");
            let name = format!(
                "{scen}-{}",
                match agent {
                    "sarsa-m" => "sarsa",
                    "mpc" => "mpc10",
                    other => other,
                }
            );
            RunConfig::preset(&name)
                .ok_or_else(|| Error::Config(format!("no preset for `{name}`")))?
        }
    };
    if let Some(seeds) = &args.seeds {
        cfg.seeds = parse_seeds(seeds)?;
    }
    if let Some(episodes) = args.episodes {
        cfg.episodes = episodes;
    }
    if args.config.is_some() {
        if let Some(agent) = &args.agent {
            cfg.agent = agent_by_name(agent)?;
        }
        if let Some(preset) = &args.preset {
            cfg.scenario = ScenarioConfig::named(preset);
        }
    }
    if let Some(workers) = args.workers {
        cfg.workers = workers;
    }
    Ok(cfg)
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let cfg = resolve_config(args)?;
    let out_dir = args.out.clone();
    let output = harness::run_experiment(&cfg, out_dir.as_deref())?;
    println!(
        "agent={} seeds={} episodes={} success_rate={}",
        cfg.agent.kind_name(),
        cfg.seeds.len(),
        cfg.episodes,
        csvio::sig9(output.success_rate)
    );
    if let Some(last) = output.aggregates.last() {
        println!(
            "final episode median_top25_cost={} ci=[{}, {}]",
            csvio::sig9(last.median_top25_cost),
            csvio::sig9(last.ci_low),
            csvio::sig9(last.ci_high)
        );
    }
    if let Some(dir) = &out_dir {
        println!("wrote {}", dir.join("raw.csv").display());
        println!("wrote {}", dir.join("summary.csv").display());
    }
    Ok(())
}

fn cmd_summarize(raw: &Path, out: Option<&Path>) -> Result<()> {
    let rows = csvio::read_raw_csv(raw)?;
    let aggregates = stats::summarize(&rows)?;
    let text = csvio::summary_csv_string(&aggregates);
    match out {
        Some(path) => {
            csvio::write_summary_csv(path, &aggregates)?;
            println!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_compare(paths: &[PathBuf]) -> Result<()> {
    if paths.is_empty() {
        return Err(Error::Config(
            "compare needs at least one summary CSV".to_string(),
        ));
    }
    println!(
        "{:<40} {:>8} {:>16} {:>16} {:>12}",
        "summary", "episodes", "final_median", "best_median", "success"
    );
    for path in paths {
        let aggs = csvio::read_summary_csv(path)?;
        if aggs.is_empty() {
            return Err(Error::Config(format!("{}: empty summary", path.display())));
        }
        let final_median = aggs.last().unwrap().median_top25_cost;
        let best_median = aggs
            .iter()
            .map(|a| a.median_top25_cost)
            .fold(f64::INFINITY, f64::min);
        let success = aggs.iter().map(|a| a.success_rate).sum::<f64>() / aggs.len() as f64;
        println!(
            "{:<40} {:>8} {:>16} {:>16} {:>12}",
            path.display().to_string(),
            aggs.len(),
            csvio::sig9(final_median),
            csvio::sig9(best_median),
            csvio::sig9(success)
        );
    }
    Ok(())
}

fn cmd_trajectory(args: &RunArgs, out: &Path) -> Result<()> {
    let cfg = resolve_config(args)?;
    let output = harness::run_experiment(&cfg, None)?;
    let best = output.best_episode().ok_or(Error::NoData)?;
    csvio::write_trajectory_csv(out, &best.log, best.trace.as_deref())?;
    println!(
        "best episode: seed={} episode={} total_cost={}",
        best.seed,
        best.episode,
        csvio::sig9(best.log.total_cost)
    );
    println!("wrote {}", out.display());
    Ok(())
}

/// Runs the CLI on the given argument vector (including the program name).
pub fn run<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // Usage, help and version all flow through here; help/version are
            // successful exits.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.cmd {
        Cmd::Run(args) => cmd_run(args),
        Cmd::Summarize { raw, out } => cmd_summarize(raw, out.as_deref()),
        Cmd::Compare { summaries } => cmd_compare(summaries),
        Cmd::Trajectory {
            run,
            trajectory_out,
        } => cmd_trajectory(run, trajectory_out),
    };
    match result {
        Ok(()) => 0,
        Err(e @ Error::Io { .. }) => {
            eprintln!("error: {e}");
            2
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
