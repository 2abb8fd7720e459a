//! CALF vs. its SARSA-m ablation.
//!
//! SARSA-m removes the recovery line: when the constrained critic update is
//! infeasible it emits the learned action anyway instead of delegating to
//! the baseline. The goal-reaching guarantee goes with it.
//!
//! ```bash
//! cargo run --example sarsa_ablation
//! ```

use calfbench::harness::{run_experiment, RunConfig};

fn small(preset: &str) -> RunConfig {
    let mut cfg = RunConfig::preset(preset).expect("preset");
    cfg.seeds = (1..=5).collect();
    cfg.episodes = 10;
    cfg.workers = 4;
    cfg
}

fn main() {
    let calf = run_experiment(&small("preset-a-calf"), None).expect("calf run");
    let sarsa = run_experiment(&small("preset-a-sarsa"), None).expect("sarsa run");

    println!("5 seeds x 10 episodes on preset A\n");
    println!("agent    success  best_cost  worst_cost");
    for (name, run) in [("calf", &calf), ("sarsa-m", &sarsa)] {
        let best = run
            .rows
            .iter()
            .map(|r| r.total_cost)
            .fold(f64::INFINITY, f64::min);
        let worst = run
            .rows
            .iter()
            .map(|r| r.total_cost)
            .fold(f64::NEG_INFINITY, f64::max);
        println!(
            "{:8} {:7.2} {:10.1} {:11.1}",
            name, run.success_rate, best, worst
        );
    }

    let recoveries: usize = calf.rows.iter().map(|r| r.recovery_invocations).sum();
    println!(
        "\ncalf delegated {} steps to the baseline across the run; sarsa-m never does",
        recoveries
    );
}
