//! Closed-loop run of the polar-coordinate exponential stabilizer.
//!
//! The baseline drives the robot from the default start pose into the goal
//! disk. It knows nothing about the high-cost spot, so its path cuts close
//! to the spot center and crawls through the speed-limit zone.
//!
//! ```bash
//! cargo run --example nominal_stabilizer
//! ```

use calfbench::env::{run_episode, FnPolicy};
use calfbench::nominal::{nominal_action, to_polar, NominalGains};
use calfbench::scenario::{Scenario, State};

fn main() {
    let scen = Scenario::preset_a();
    let gains = NominalGains::default();

    let start = scen.initial_state;
    let polar = to_polar(&start);
    println!(
        "start pose ({:.2}, {:.2}, {:.2}) -> rho {:.3}, alpha {:.3}, beta {:.3}",
        start.x, start.y, start.theta, polar.rho, polar.alpha, polar.beta
    );

    let mut policy = FnPolicy(|_: usize, s: &State| nominal_action(s, &gains));
    let log = run_episode(&mut policy, &scen, 1, None).expect("episode");

    println!(
        "reached = {}, reach time = {:?} s, total cost = {:.1}",
        log.reached_goal, log.reach_time, log.total_cost
    );

    let spot = scen.hot_spot;
    let mut min_dist = f64::INFINITY;
    let mut zone_steps = 0usize;
    for r in &log.records {
        let d = ((r.state.x - spot.mu_x).powi(2) + (r.state.y - spot.mu_y).powi(2)).sqrt();
        min_dist = min_dist.min(d);
        zone_steps += usize::from(r.in_zone);
    }
    println!(
        "min distance to the spot center = {:.3} m, {} steps inside the speed-limit zone",
        min_dist, zone_steps
    );

    println!("\n  t      x       y    theta     v_app   cost");
    for r in log.records.iter().step_by(20) {
        println!(
            "{:4} {:7.3} {:7.3} {:7.3} {:9.3} {:7.2}",
            r.t_index, r.state.x, r.state.y, r.state.theta, r.action_applied.v, r.cost
        );
    }
}
