//! The full experiment pipeline: multi-seed runs, per-episode aggregation
//! and CSV outputs.
//!
//! Runs a reduced CALF protocol, writes the raw/summary/trajectory files,
//! then recomputes the aggregates from the raw CSV to show the pipeline is a
//! pure function of the exported data.
//!
//! ```bash
//! cargo run --example benchmark_summary
//! ```

use calfbench::harness::{csvio, run_experiment, stats, RunConfig};

fn main() {
    let mut cfg = RunConfig::preset("preset-a-calf").expect("preset");
    cfg.seeds = (1..=8).collect();
    cfg.episodes = 12;
    cfg.workers = 4;

    let out_dir = std::env::temp_dir().join("calfbench_example");
    let output = run_experiment(&cfg, Some(&out_dir)).expect("run");

    println!(
        "ran {} episodes, success rate {:.3}",
        output.rows.len(),
        output.success_rate
    );
    println!("\nepisode  median_top25  ci_low   ci_high  success");
    for a in output.aggregates.iter().step_by(2) {
        println!(
            "{:7} {:13.1} {:8.1} {:9.1} {:8.2}",
            a.episode, a.median_top25_cost, a.ci_low, a.ci_high, a.success_rate
        );
    }

    // The stored aggregates are reproducible from the raw file alone.
    let rows = csvio::read_raw_csv(&out_dir.join("raw.csv")).expect("read raw");
    let recomputed = stats::summarize(&rows).expect("summarize");
    assert_eq!(recomputed, output.aggregates);
    println!("\naggregates recomputed from raw.csv match the stored summary exactly");

    if let Some(best) = output.best_episode() {
        println!(
            "best episode: seed {} episode {} cost {:.1}",
            best.seed, best.episode, best.log.total_cost
        );
    }
    println!("CSV outputs under {}", out_dir.display());
}
