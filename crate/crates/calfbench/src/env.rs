//! Discrete-time simulation of the differential-drive robot: kinematics
//! integration, actuator saturation, zone speed limiting, cost accumulation
//! and episode termination.

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{in_goal, in_zone, stage_cost, Action, Scenario, State};
use crate::seeds;

/// Integration scheme for the unicycle vector field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    #[default]
    Euler,
    Rk4,
}

/// Clamps an action to the actuator bounds, then applies the in-zone speed
/// cap. Actuator limits first, zone second.
pub fn saturate(a: Action, scen: &Scenario, s: &State) -> Action {
    let mut v = a.v.clamp(-scen.v_max, scen.v_max);
    let omega = a.omega.clamp(-scen.omega_max, scen.omega_max);
    if in_zone(s, &scen.hot_spot) {
        let cap = scen.hot_spot.zone_speed_cap;
        v = v.clamp(-cap, cap);
    }
    Action::new(v, omega)
}

fn derivative(s: &State, a: &Action) -> (f64, f64, f64) {
    (a.v * s.theta.cos(), a.v * s.theta.sin(), a.omega)
}

/// Advances the state by one step of `dt` under a constant (already
/// saturated) action.
pub fn step(s: &State, a: &Action, dt: f64, method: Integrator) -> State {
    match method {
        Integrator::Euler => {
            let (dx, dy, dt_theta) = derivative(s, a);
            State::new(s.x + dt * dx, s.y + dt * dy, s.theta + dt * dt_theta)
        }
        Integrator::Rk4 => {
            let add = |s: &State, k: (f64, f64, f64), h: f64| {
                State::new(s.x + h * k.0, s.y + h * k.1, s.theta + h * k.2)
            };
            let k1 = derivative(s, a);
            let k2 = derivative(&add(s, k1, dt / 2.0), a);
            let k3 = derivative(&add(s, k2, dt / 2.0), a);
            let k4 = derivative(&add(s, k3, dt), a);
            State::new(
                s.x + dt / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
                s.y + dt / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
                s.theta + dt / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2),
            )
        }
    }
}

/// One logged transition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub t_index: usize,
    pub state: State,
    pub action_commanded: Action,
    pub action_applied: Action,
    pub cost: f64,
    pub in_zone: bool,
    pub in_goal: bool,
}

/// Full episode trace plus aggregates. The last record is always a terminal
/// row (zero action, zero cost) holding the state the episode ended in.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub records: Vec<StepRecord>,
    pub total_cost: f64,
    pub reached_goal: bool,
    /// Present iff the goal was reached.
    pub reach_time: Option<f64>,
    pub seed: u64,
}

/// Optional zero-mean Gaussian process noise added to `(x, y, theta)` after
/// each transition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseConfig {
    pub std: [f64; 3],
}

/// Decision callback: maps `(t_index, state)` to an action.
pub trait Policy {
    fn act(&mut self, t_index: usize, state: &State) -> Result<Action>;
}

/// Adapter for closures.
pub struct FnPolicy<F>(pub F);

impl<F: FnMut(usize, &State) -> Action> Policy for FnPolicy<F> {
    fn act(&mut self, t_index: usize, state: &State) -> Result<Action> {
        Ok(self.0(t_index, state))
    }
}

/// Runs one episode: query policy, saturate, accumulate the stage cost at the
/// pre-transition state, advance. Terminates early the first time the state
/// enters the goal set; on timeout the non-reaching penalty is added.
pub fn run_episode(
    policy: &mut dyn Policy,
    scen: &Scenario,
    seed: u64,
    noise: Option<&NoiseConfig>,
) -> Result<EpisodeLog> {
    let max_steps = scen.max_steps();
    let mut noise_rng = noise.map(|_| seeds::stream(seed, "process-noise"));
    let unit = Normal::new(0.0, 1.0).expect("unit normal");

    let mut s = scen.initial_state;
    let mut records = Vec::with_capacity(max_steps + 1);
    let mut total_cost = 0.0;
    let mut reached_goal = false;
    let mut reach_time = None;

    for t in 0..=max_steps {
        if !s.is_finite() {
            return Err(Error::NonFiniteState { t_index: t });
        }
        if in_goal(&s, scen) {
            reached_goal = true;
            reach_time = Some(t as f64 * scen.dt);
            records.push(terminal_record(t, &s, scen, true));
            break;
        }
        if t == max_steps {
            records.push(terminal_record(t, &s, scen, false));
            break;
        }

        let commanded = policy.act(t, &s)?;
        if !commanded.is_finite() {
            return Err(Error::Policy {
                t_index: t,
                message: "non-finite action".to_string(),
            });
        }
        let applied = saturate(commanded, scen, &s);
        let cost = stage_cost(&s, &applied, scen);
        records.push(StepRecord {
            t_index: t,
            state: s,
            action_commanded: commanded,
            action_applied: applied,
            cost,
            in_zone: in_zone(&s, &scen.hot_spot),
            in_goal: false,
        });
        total_cost += cost;

        s = step(&s, &applied, scen.dt, Integrator::Euler);
        if let (Some(rng), Some(cfg)) = (noise_rng.as_mut(), noise) {
            s.x += cfg.std[0] * unit.sample(rng);
            s.y += cfg.std[1] * unit.sample(rng);
            s.theta += cfg.std[2] * unit.sample(rng);
        }
    }

    if !reached_goal {
        total_cost += scen.non_reaching_penalty;
    }
    Ok(EpisodeLog {
        records,
        total_cost,
        reached_goal,
        reach_time,
        seed,
    })
}

fn terminal_record(t: usize, s: &State, scen: &Scenario, reached: bool) -> StepRecord {
    StepRecord {
        t_index: t,
        state: *s,
        action_commanded: Action::zero(),
        action_applied: Action::zero(),
        cost: 0.0,
        in_zone: in_zone(s, &scen.hot_spot),
        in_goal: reached,
    }
}
