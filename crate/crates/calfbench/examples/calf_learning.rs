//! CALF training on a single seed: constrained critic updates with baseline
//! recovery, episode after episode.
//!
//! Prints the per-episode cost together with the update/recovery split and
//! verifies the run's certificates: every successful update decreased the
//! incumbent critic value by at least the decrease margin while staying
//! inside the sandwich.
//!
//! ```bash
//! cargo run --example calf_learning
//! ```

use calfbench::agents::{AgentKind, CalfAgent, CalfConfig};
use calfbench::env::run_episode;
use calfbench::scenario::Scenario;
use calfbench::seeds;

fn main() {
    let scen = Scenario::preset_a();
    let seed = 1u64;
    let episodes = 12;
    let mut agent =
        CalfAgent::new(AgentKind::Calf, CalfConfig::default(), scen.clone(), seed).expect("agent");

    println!("episode   cost  reached  updates  recoveries  q0");
    for episode in 0..episodes {
        let episode_seed = seeds::child_seed(seed, &format!("episode-{episode}"));
        let log = run_episode(&mut agent, &scen, episode_seed, None).expect("episode");
        println!(
            "{:7} {:7.1} {:>8} {:8} {:11} {:6.2}",
            episode,
            log.total_cost,
            log.reached_goal,
            agent.state().successful_updates,
            agent.state().recovery_invocations,
            agent.q_dagger_initial(),
        );
    }

    let certs = agent.certificates();
    let violated = certs.iter().filter(|c| !c.holds()).count();
    println!(
        "\n{} successful updates across {} episodes, {} certificate violations",
        certs.len(),
        episodes,
        violated
    );
    let max_gap = certs
        .iter()
        .map(|c| c.q_before - c.q_after)
        .fold(0.0f64, f64::max);
    println!("largest single q-dagger decrease: {max_gap:.3}");
}
