//! Model-predictive baseline: finite-horizon open-loop optimization over the
//! Euler-discretized model, replanned every step.
//!
//! The optimizer is deliberately dependency-free: candidate seeding (zero
//! plan, nominal plans, shifted warm start) plus either an exhaustive
//! first-stage grid or multistart projected gradient descent with
//! finite-difference gradients. The returned plan never scores worse than
//! any seeded candidate.

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{saturate, step, Integrator, Policy};
use crate::error::Result;
use crate::nominal::{nominal_action, NominalGains};
use crate::scenario::{stage_cost, Action, Scenario, State};
use crate::seeds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MpcOptimizer {
    MultistartProjectedGradient,
    GridFirstStage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcConfig {
    /// Number of decision stages.
    pub horizon: usize,
    /// Euler substeps of size `dt` per stage ("step size").
    #[serde(rename = "substeps")]
    pub prediction_substeps: usize,
    pub optimizer: MpcOptimizer,
    /// Gradient-descent iterations per start.
    pub iterations: usize,
    /// Number of optimizer starts (first start is the best seeded candidate).
    pub restarts: usize,
    /// First-stage grid resolution for [`MpcOptimizer::GridFirstStage`].
    pub grid: (usize, usize),
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self::with_horizon(10)
    }
}

impl MpcConfig {
    /// Defaults for a given horizon: grid search on the first stage for
    /// short horizons, multistart projected gradient otherwise.
    pub fn with_horizon(horizon: usize) -> Self {
        MpcConfig {
            horizon,
            prediction_substeps: 4,
            optimizer: if horizon <= 2 {
                MpcOptimizer::GridFirstStage
            } else {
                MpcOptimizer::MultistartProjectedGradient
            },
            iterations: 100,
            restarts: 5,
            grid: (15, 15),
        }
    }
}

pub type Plan = Vec<Action>;

/// Rolls the plan out on the model: each stage holds its action constant for
/// `prediction_substeps` Euler steps. Zone speed limiting applies inside the
/// prediction. Returns the stage-end states.
pub fn predict(s: &State, plan: &[Action], cfg: &MpcConfig, scen: &Scenario) -> Vec<State> {
    let mut out = Vec::with_capacity(plan.len());
    let mut cur = *s;
    for a in plan {
        for _ in 0..cfg.prediction_substeps {
            let applied = saturate(*a, scen, &cur);
            cur = step(&cur, &applied, scen.dt, Integrator::Euler);
        }
        out.push(cur);
    }
    out
}

/// Undiscounted sum of stage costs at the predicted stage-end states.
pub fn mpc_objective(s: &State, plan: &[Action], cfg: &MpcConfig, scen: &Scenario) -> f64 {
    let mut cost = 0.0;
    let mut cur = *s;
    for a in plan {
        for _ in 0..cfg.prediction_substeps {
            let applied = saturate(*a, scen, &cur);
            cur = step(&cur, &applied, scen.dt, Integrator::Euler);
        }
        cost += stage_cost(&cur, a, scen);
    }
    cost
}

/// Seeded candidate plans, in tie-break order: the all-zero plan, the
/// closed-loop nominal rollout, the constant nominal action, and the previous
/// plan shifted by one stage.
fn candidate_plans(s: &State, cfg: &MpcConfig, scen: &Scenario, warm: Option<&Plan>) -> Vec<Plan> {
    let n = cfg.horizon;
    let gains = NominalGains::default();
    let mut plans = Vec::with_capacity(4);
    plans.push(vec![Action::zero(); n]);

    let mut rollout = Vec::with_capacity(n);
    let mut cur = *s;
    for _ in 0..n {
        let a = nominal_action(&cur, &gains);
        for _ in 0..cfg.prediction_substeps {
            let applied = saturate(a, scen, &cur);
            cur = step(&cur, &applied, scen.dt, Integrator::Euler);
        }
        rollout.push(a);
    }
    plans.push(rollout);
    plans.push(vec![nominal_action(s, &gains); n]);

    if let Some(prev) = warm {
        if prev.len() == n && n > 0 {
            let mut shifted: Plan = prev[1..].to_vec();
            shifted.push(*prev.last().unwrap());
            plans.push(shifted);
        }
    }
    plans
}

fn clamp_plan(plan: &mut Plan, scen: &Scenario) {
    for a in plan.iter_mut() {
        a.v = a.v.clamp(-scen.v_max, scen.v_max);
        a.omega = a.omega.clamp(-scen.omega_max, scen.omega_max);
    }
}

/// Projected gradient descent with central-difference gradients
/// (`h = 1e-4` per action component) and a backtracking line search.
fn refine_plan(start: &Plan, s: &State, cfg: &MpcConfig, scen: &Scenario) -> (f64, Plan) {
    const H: f64 = 1e-4;
    let mut plan = start.clone();
    clamp_plan(&mut plan, scen);
    let mut best = mpc_objective(s, &plan, cfg, scen);
    let mut step_len: f64 = 0.1;
    for _ in 0..cfg.iterations {
        // Finite-difference gradient, scaled per component so v and omega
        // move on comparable fractions of their ranges.
        let mut grad = vec![Action::zero(); plan.len()];
        for k in 0..plan.len() {
            for comp in 0..2 {
                let mut up = plan.clone();
                let mut dn = plan.clone();
                let (u, d) = (&mut up[k], &mut dn[k]);
                if comp == 0 {
                    u.v += H;
                    d.v -= H;
                } else {
                    u.omega += H;
                    d.omega -= H;
                }
                let g = (mpc_objective(s, &up, cfg, scen) - mpc_objective(s, &dn, cfg, scen))
                    / (2.0 * H);
                if comp == 0 {
                    grad[k].v = g * scen.v_max;
                } else {
                    grad[k].omega = g * scen.omega_max;
                }
            }
        }
        let gnorm: f64 = grad
            .iter()
            .map(|g| g.v * g.v + g.omega * g.omega)
            .sum::<f64>()
            .sqrt();
        if gnorm < 1e-10 {
            break;
        }

        step_len = (step_len * 2.0).min(10.0);
        let mut improved = false;
        for _ in 0..30 {
            let mut cand = plan.clone();
            for (a, g) in cand.iter_mut().zip(&grad) {
                a.v -= step_len / gnorm * g.v * scen.v_max;
                a.omega -= step_len / gnorm * g.omega * scen.omega_max;
            }
            clamp_plan(&mut cand, scen);
            let c = mpc_objective(s, &cand, cfg, scen);
            if c < best {
                plan = cand;
                best = c;
                improved = true;
                break;
            }
            step_len *= 0.5;
        }
        if !improved {
            break;
        }
    }
    (best, plan)
}

/// One receding-horizon decision. Returns the first action of the best plan
/// found together with the plan itself (for warm starting the next step).
/// By construction the result scores no worse than every seeded candidate.
pub fn mpc_action(
    s: &State,
    cfg: &MpcConfig,
    scen: &Scenario,
    seed: u64,
    warm: Option<&Plan>,
) -> (Action, Plan) {
    let candidates = candidate_plans(s, cfg, scen, warm);
    let mut best: Option<(f64, Plan)> = None;
    for plan in &candidates {
        let c = mpc_objective(s, plan, cfg, scen);
        match &best {
            Some((b, _)) if *b <= c => {}
            _ => best = Some((c, plan.clone())),
        }
    }
    let (mut best_cost, mut best_plan) = best.expect("non-empty candidate set");

    match cfg.optimizer {
        MpcOptimizer::GridFirstStage => {
            let (nv, nw) = cfg.grid;
            let tail = &best_plan[1..];
            let mut grid_best: Option<(f64, Plan)> = None;
            for iv in 0..nv {
                let v = -scen.v_max + 2.0 * scen.v_max * iv as f64 / (nv - 1) as f64;
                for iw in 0..nw {
                    let omega =
                        -scen.omega_max + 2.0 * scen.omega_max * iw as f64 / (nw - 1) as f64;
                    let mut plan = Vec::with_capacity(cfg.horizon);
                    plan.push(Action::new(v, omega));
                    plan.extend_from_slice(tail);
                    let c = mpc_objective(s, &plan, cfg, scen);
                    match &grid_best {
                        Some((b, _)) if *b <= c => {}
                        _ => grid_best = Some((c, plan)),
                    }
                }
            }
            if let Some((c, plan)) = grid_best {
                if c < best_cost {
                    best_plan = plan;
                }
            }
        }
        MpcOptimizer::MultistartProjectedGradient => {
            let mut rng: ChaCha8Rng = seeds::stream(seed, "mpc-restarts");
            for attempt in 0..cfg.restarts.max(1) {
                let start = if attempt == 0 {
                    best_plan.clone()
                } else {
                    let mut p = best_plan.clone();
                    for a in p.iter_mut() {
                        a.v += 0.25 * scen.v_max * normal(&mut rng);
                        a.omega += 0.25 * scen.omega_max * normal(&mut rng);
                    }
                    p
                };
                let (c, plan) = refine_plan(&start, s, cfg, scen);
                if c < best_cost {
                    best_cost = c;
                    best_plan = plan;
                }
            }
        }
    }
    (best_plan[0], best_plan)
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

/// MPC as a reusable policy with per-instance warm start.
#[derive(Debug, Clone)]
pub struct MpcAgent {
    cfg: MpcConfig,
    scen: Scenario,
    seed_root: u64,
    prev_plan: Option<Plan>,
    decision: u64,
}

impl MpcAgent {
    pub fn new(cfg: MpcConfig, scen: Scenario, seed_root: u64) -> Self {
        MpcAgent {
            cfg,
            scen,
            seed_root,
            prev_plan: None,
            decision: 0,
        }
    }
}

impl Policy for MpcAgent {
    fn act(&mut self, t_index: usize, state: &State) -> Result<Action> {
        if t_index == 0 {
            self.prev_plan = None;
        }
        let seed = seeds::child_seed(self.seed_root, &format!("mpc-step-{}", self.decision));
        self.decision += 1;
        let (a, plan) = mpc_action(state, &self.cfg, &self.scen, seed, self.prev_plan.as_ref());
        self.prev_plan = Some(plan);
        Ok(a)
    }
}
