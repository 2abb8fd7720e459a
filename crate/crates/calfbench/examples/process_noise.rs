//! CALF under process noise: the stochastic transition setting.
//!
//! Zero-mean Gaussian noise perturbs the state after every transition. The
//! certificates still hold (they are checked pointwise at each update) and
//! the recovery mechanism keeps finishing the episodes.
//!
//! ```bash
//! cargo run --example process_noise
//! ```

use calfbench::agents::{AgentKind, CalfAgent, CalfConfig};
use calfbench::env::{run_episode, NoiseConfig};
use calfbench::scenario::Scenario;
use calfbench::seeds;

fn main() {
    let scen = Scenario::preset_a();
    let noise = NoiseConfig {
        std: [2e-3, 2e-3, 5e-3],
    };

    println!("seed  episodes_reached  updates  recoveries  cert_violations");
    for seed in 1..=5u64 {
        let mut agent = CalfAgent::new(AgentKind::Calf, CalfConfig::default(), scen.clone(), seed)
            .expect("agent");
        let mut reached = 0usize;
        let mut updates = 0usize;
        let mut recoveries = 0usize;
        let episodes = 8;
        for episode in 0..episodes {
            let episode_seed = seeds::child_seed(seed, &format!("episode-{episode}"));
            let log = run_episode(&mut agent, &scen, episode_seed, Some(&noise)).expect("episode");
            reached += usize::from(log.reached_goal);
            updates += agent.state().successful_updates;
            recoveries += agent.state().recovery_invocations;
        }
        let violations = agent.certificates().iter().filter(|c| !c.holds()).count();
        println!(
            "{:4} {:11}/{:<6} {:7} {:11} {:16}",
            seed, reached, episodes, updates, recoveries, violations
        );
    }
}
