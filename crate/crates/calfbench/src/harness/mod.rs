//! Experiment orchestration: multi-seed, multi-episode runs of every agent,
//! deterministic parallelism across seeds and file outputs.

pub mod csvio;
pub mod stats;

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::agents::{CalfAgent, CalfConfig, CalfTrace, UpdateCertificate};
use crate::env::{run_episode, EpisodeLog, NoiseConfig, Policy};
use crate::error::{Error, Result};
use crate::mpc::{MpcAgent, MpcConfig};
use crate::nominal::{NominalGains, NominalPolicy};
use crate::scenario::{GoalNorm, Scenario, State};
use crate::seeds;
use stats::{EpisodeAggregate, EpisodeRow};

/// Scenario selection: a named preset plus optional field overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ScenarioConfig {
    pub preset: String,
    #[serde(flatten)]
    pub overrides: ScenarioOverrides,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ScenarioOverrides {
    pub goal_radius: Option<f64>,
    pub goal_norm: Option<GoalNorm>,
    pub initial_state: Option<State>,
    pub dt: Option<f64>,
    pub episode_duration: Option<f64>,
    pub non_reaching_penalty: Option<f64>,
    pub v_max: Option<f64>,
    pub omega_max: Option<f64>,
    pub zone_radius: Option<f64>,
    pub zone_speed_cap: Option<f64>,
    pub cost_coeffs: Option<[f64; 3]>,
    pub hot_spot_center: Option<[f64; 2]>,
    pub hot_spot_sigma: Option<[f64; 2]>,
    pub hot_spot_weight: Option<f64>,
}

impl ScenarioConfig {
    pub fn named(preset: &str) -> Self {
        ScenarioConfig {
            preset: preset.to_string(),
            overrides: ScenarioOverrides::default(),
        }
    }

    pub fn resolve(&self) -> Result<Scenario> {
        let name = if self.preset.is_empty() {
            "preset-a"
        } else {
            &self.preset
        };
        let mut scen = Scenario::by_name(name)
            .ok_or_else(|| Error::Config(format!("unknown scenario preset `{name}`")))?;
        let o = &self.overrides;
        if let Some(v) = o.goal_radius {
            scen.goal_radius = v;
        }
        if let Some(v) = o.goal_norm {
            scen.goal_norm = v;
        }
        if let Some(v) = o.initial_state {
            scen.initial_state = v;
        }
        if let Some(v) = o.dt {
            scen.dt = v;
        }
        if let Some(v) = o.episode_duration {
            scen.episode_duration = v;
        }
        if let Some(v) = o.non_reaching_penalty {
            scen.non_reaching_penalty = v;
        }
        if let Some(v) = o.v_max {
            scen.v_max = v;
        }
        if let Some(v) = o.omega_max {
            scen.omega_max = v;
        }
        if let Some(v) = o.zone_radius {
            scen.hot_spot.zone_radius = v;
        }
        if let Some(v) = o.zone_speed_cap {
            scen.hot_spot.zone_speed_cap = v;
        }
        if let Some(v) = o.cost_coeffs {
            scen.cost_coeffs = v;
        }
        if let Some([x, y]) = o.hot_spot_center {
            scen.hot_spot.mu_x = x;
            scen.hot_spot.mu_y = y;
        }
        if let Some([sx, sy]) = o.hot_spot_sigma {
            scen.hot_spot.sigma_x = sx;
            scen.hot_spot.sigma_y = sy;
        }
        if let Some(v) = o.hot_spot_weight {
            scen.hot_spot.weight = v;
        }
        scen.validate()?;
        Ok(scen)
    }
}

/// Agent selection and hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AgentConfig {
    Nominal {
        #[serde(default)]
        gains: NominalGains,
        #[serde(default)]
        forward_only: bool,
    },
    Calf {
        #[serde(flatten)]
        cfg: CalfConfig,
    },
    SarsaM {
        #[serde(flatten)]
        cfg: CalfConfig,
    },
    Mpc {
        #[serde(flatten)]
        cfg: MpcConfig,
    },
}

impl AgentConfig {
    pub fn nominal() -> Self {
        AgentConfig::Nominal {
            gains: NominalGains::default(),
            forward_only: false,
        }
    }

    pub fn calf() -> Self {
        AgentConfig::Calf {
            cfg: CalfConfig::default(),
        }
    }

    pub fn sarsa_m() -> Self {
        AgentConfig::SarsaM {
            cfg: CalfConfig::sarsa_m(),
        }
    }

    pub fn mpc(horizon: usize) -> Self {
        AgentConfig::Mpc {
            cfg: MpcConfig::with_horizon(horizon),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            AgentConfig::Nominal { .. } => "nominal",
            AgentConfig::Calf { .. } => "calf",
            AgentConfig::SarsaM { .. } => "sarsa-m",
            AgentConfig::Mpc { .. } => "mpc",
        }
    }
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub agent: AgentConfig,
    pub seeds: Vec<u64>,
    pub episodes: usize,
    pub workers: usize,
    pub noise: Option<NoiseConfig>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: ScenarioConfig::named("preset-a"),
            agent: AgentConfig::nominal(),
            seeds: vec![1],
            episodes: 1,
            workers: 1,
            noise: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds must be non-empty".to_string()));
        }
        if self.episodes == 0 {
            return Err(Error::Config("episodes must be at least 1".to_string()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be at least 1".to_string()));
        }
        Ok(())
    }

    /// Named run presets: `preset-{a,b}-{calf,sarsa,nominal,mpc10,mpc15,mpc25}`.
    /// Learners default to 20 seeds and 40 episodes; the deterministic
    /// baselines to a single seed and episode.
    pub fn preset(name: &str) -> Option<RunConfig> {
        let rest = name.strip_prefix("preset-")?;
        let (scen, agent_part) = if let Some(a) = rest.strip_prefix("a-") {
            ("preset-a", a)
        } else if let Some(b) = rest.strip_prefix("b-") {
            ("preset-b", b)
        } else {
            return None;
        };
        let (agent, learner) = match agent_part {
            "calf" => (AgentConfig::calf(), true),
            "sarsa" | "sarsa-m" => (AgentConfig::sarsa_m(), true),
            "nominal" => (AgentConfig::nominal(), false),
            "mpc" | "mpc10" => (AgentConfig::mpc(10), false),
            "mpc15" => (AgentConfig::mpc(15), false),
            "mpc25" => (AgentConfig::mpc(25), false),
            _ => return None,
        };
        Some(RunConfig {
            scenario: ScenarioConfig::named(scen),
            agent,
            seeds: if learner { (1..=20).collect() } else { vec![1] },
            episodes: if learner { 40 } else { 1 },
            workers: 1,
            noise: None,
        })
    }

    pub fn preset_names() -> Vec<String> {
        let mut names = Vec::new();
        for scen in ["a", "b"] {
            for agent in ["calf", "sarsa", "nominal", "mpc10", "mpc15", "mpc25"] {
                names.push(format!("preset-{scen}-{agent}"));
            }
        }
        names
    }

    /// Loads a config from a JSON file.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// A constructed agent, one per seed.
pub enum AgentInstance {
    Nominal(NominalPolicy),
    Learner(Box<CalfAgent>),
    Mpc(Box<MpcAgent>),
}

impl AgentInstance {
    pub fn build(cfg: &AgentConfig, scen: &Scenario, seed_root: u64) -> Result<Self> {
        Ok(match cfg {
            AgentConfig::Nominal {
                gains,
                forward_only,
            } => AgentInstance::Nominal(NominalPolicy {
                gains: *gains,
                forward_only: *forward_only,
            }),
            AgentConfig::Calf { cfg } => AgentInstance::Learner(Box::new(CalfAgent::new(
                crate::agents::AgentKind::Calf,
                cfg.clone(),
                scen.clone(),
                seed_root,
            )?)),
            AgentConfig::SarsaM { cfg } => AgentInstance::Learner(Box::new(CalfAgent::new(
                crate::agents::AgentKind::SarsaM,
                cfg.clone(),
                scen.clone(),
                seed_root,
            )?)),
            AgentConfig::Mpc { cfg } => AgentInstance::Mpc(Box::new(MpcAgent::new(
                cfg.clone(),
                scen.clone(),
                seeds::child_seed(seed_root, "mpc"),
            ))),
        })
    }

    fn episode_stats(&self) -> (usize, usize) {
        match self {
            AgentInstance::Learner(agent) => (
                agent.state().successful_updates,
                agent.state().recovery_invocations,
            ),
            _ => (0, 0),
        }
    }

    fn trace(&self) -> Option<Vec<CalfTrace>> {
        match self {
            AgentInstance::Learner(agent) => Some(agent.trace().to_vec()),
            _ => None,
        }
    }

    pub fn learner(&self) -> Option<&CalfAgent> {
        match self {
            AgentInstance::Learner(agent) => Some(agent),
            _ => None,
        }
    }
}

impl Policy for AgentInstance {
    fn act(&mut self, t_index: usize, state: &State) -> Result<crate::scenario::Action> {
        match self {
            AgentInstance::Nominal(p) => p.act(t_index, state),
            AgentInstance::Learner(p) => p.act(t_index, state),
            AgentInstance::Mpc(p) => p.act(t_index, state),
        }
    }
}

/// Best episode of one seed, kept for trajectory export.
#[derive(Debug, Clone)]
pub struct BestEpisode {
    pub seed: u64,
    pub episode: usize,
    pub log: EpisodeLog,
    pub trace: Option<Vec<CalfTrace>>,
}

/// In-memory result of a run. `rows` carry costs rounded through the CSV
/// number format, so recomputing aggregates from the exported file
/// reproduces them exactly.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<EpisodeRow>,
    pub aggregates: Vec<EpisodeAggregate>,
    pub success_rate: f64,
    pub best_by_seed: Vec<BestEpisode>,
    /// Successful-update certificates per seed (learner agents only),
    /// in seed order.
    pub certificates_by_seed: Vec<(u64, Vec<UpdateCertificate>)>,
}

impl RunOutput {
    /// Globally best episode (lowest cost; ties by seed order, then episode).
    pub fn best_episode(&self) -> Option<&BestEpisode> {
        self.best_by_seed.iter().min_by(|a, b| {
            a.log
                .total_cost
                .total_cmp(&b.log.total_cost)
                .then(a.seed.cmp(&b.seed))
                .then(a.episode.cmp(&b.episode))
        })
    }
}

struct SeedResult {
    rows: Vec<EpisodeRow>,
    best: Option<BestEpisode>,
    certificates: Vec<UpdateCertificate>,
}

fn run_seed(cfg: &RunConfig, scen: &Scenario, seed: u64) -> Result<SeedResult> {
    let mut agent = AgentInstance::build(&cfg.agent, scen, seed)?;
    let mut rows = Vec::with_capacity(cfg.episodes);
    let mut best: Option<BestEpisode> = None;
    for episode in 0..cfg.episodes {
        let episode_seed = seeds::child_seed(seed, &format!("episode-{episode}"));
        match run_episode(&mut agent, scen, episode_seed, cfg.noise.as_ref()) {
            Ok(log) => {
                // An episode that terminates on its very first state never
                // queries the agent; its counters belong to the previous one.
                let (updates, recoveries) = if log.records.len() > 1 {
                    agent.episode_stats()
                } else {
                    (0, 0)
                };
                rows.push(EpisodeRow {
                    seed,
                    episode,
                    total_cost: log.total_cost,
                    reached_goal: log.reached_goal,
                    reach_time_s: log.reach_time,
                    successful_updates: updates,
                    recovery_invocations: recoveries,
                });
                let better = best
                    .as_ref()
                    .map_or(true, |b| log.total_cost < b.log.total_cost);
                if better {
                    let trace = if log.records.len() > 1 {
                        agent.trace()
                    } else {
                        None
                    };
                    best = Some(BestEpisode {
                        seed,
                        episode,
                        trace,
                        log,
                    });
                }
            }
            // A diverged episode counts as failed with the penalty; the run
            // continues.
            Err(Error::NonFiniteState { .. }) => rows.push(EpisodeRow {
                seed,
                episode,
                total_cost: scen.non_reaching_penalty,
                reached_goal: false,
                reach_time_s: None,
                successful_updates: 0,
                recovery_invocations: 0,
            }),
            Err(e) => return Err(e),
        }
    }
    let certificates = agent
        .learner()
        .map(|l| l.certificates().to_vec())
        .unwrap_or_default();
    Ok(SeedResult {
        rows,
        best,
        certificates,
    })
}

/// Runs the configured experiment: each seed is an independent worker task
/// (episodes within a seed stay sequential so learning carries over), results
/// are merged in seed order, and the output files are written when an output
/// directory is given.
pub fn run_experiment(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunOutput> {
    cfg.validate()?;
    let scen = cfg.scenario.resolve()?;
    let n = cfg.seeds.len();
    let workers = cfg.workers.min(n).max(1);

    let slots: Mutex<Vec<Option<Result<SeedResult>>>> = Mutex::new((0..n).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                let result = run_seed(cfg, &scen, cfg.seeds[i]);
                slots.lock().unwrap()[i] = Some(result);
            });
        }
    });

    let mut rows = Vec::with_capacity(n * cfg.episodes);
    let mut best_by_seed = Vec::with_capacity(n);
    let mut certificates_by_seed = Vec::with_capacity(n);
    for (seed, slot) in cfg.seeds.iter().zip(slots.into_inner().unwrap()) {
        let result = slot.expect("every seed slot filled")?;
        rows.extend(result.rows);
        if let Some(best) = result.best {
            best_by_seed.push(best);
        }
        certificates_by_seed.push((*seed, result.certificates));
    }

    // Round through the file number format so on-disk and in-memory
    // aggregates agree exactly.
    for row in rows.iter_mut() {
        row.total_cost = csvio::round_sig9(row.total_cost);
        row.reach_time_s = row.reach_time_s.map(csvio::round_sig9);
    }

    let aggregates = stats::summarize(&rows)?;
    let success_rate = stats::success_rate(&rows);
    let output = RunOutput {
        rows,
        aggregates,
        success_rate,
        best_by_seed,
        certificates_by_seed,
    };

    if let Some(dir) = out_dir {
        write_outputs(&output, dir)?;
    }
    Ok(output)
}

fn write_outputs(output: &RunOutput, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    csvio::write_raw_csv(&dir.join("raw.csv"), &output.rows)?;
    csvio::write_summary_csv(&dir.join("summary.csv"), &output.aggregates)?;
    for best in &output.best_by_seed {
        let path = dir.join(format!("trajectory_seed{}.csv", best.seed));
        csvio::write_trajectory_csv(&path, &best.log, best.trace.as_deref())?;
        if let Some(trace) = &best.trace {
            let wpath = dir.join(format!("weights_seed{}.csv", best.seed));
            csvio::write_weights_csv(&wpath, best.episode, trace)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::FnPolicy;
    use crate::nominal::nominal_action;
    use crate::scenario::Action;

    #[test]
    fn nominal_single_run_matches_plain_episode() {
        let cfg = RunConfig::preset("preset-a-nominal").unwrap();
        let output = run_experiment(&cfg, None).unwrap();
        assert_eq!(output.rows.len(), 1);
        let gains = NominalGains::default();
        let scen = Scenario::preset_a();
        let mut policy = FnPolicy(|_: usize, s: &State| nominal_action(s, &gains));
        let log = run_episode(&mut policy, &scen, 1, None).unwrap();
        assert_eq!(output.rows[0].total_cost, csvio::round_sig9(log.total_cost));
        assert!(output.rows[0].reached_goal);
        assert_eq!(output.success_rate, 1.0);
    }

    #[test]
    fn unknown_preset_is_a_config_error() {
        assert!(RunConfig::preset("preset-c-calf").is_none());
        let cfg = RunConfig {
            scenario: ScenarioConfig::named("preset-z"),
            ..RunConfig::default()
        };
        assert!(matches!(run_experiment(&cfg, None), Err(Error::Config(_))));
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let mut cfg = RunConfig::preset("preset-a-calf").unwrap();
        cfg.seeds = vec![1, 2, 3];
        cfg.episodes = 2;
        let one = run_experiment(&cfg, None).unwrap();
        cfg.workers = 4;
        let four = run_experiment(&cfg, None).unwrap();
        assert_eq!(one.rows, four.rows);
        assert_eq!(one.aggregates, four.aggregates);
    }

    #[test]
    fn summarize_of_written_rows_reproduces_aggregates() {
        let mut cfg = RunConfig::preset("preset-a-calf").unwrap();
        cfg.seeds = vec![1, 2, 3, 4];
        cfg.episodes = 2;
        let dir = tempfile::tempdir().unwrap();
        let output = run_experiment(&cfg, Some(dir.path())).unwrap();
        let rows = csvio::read_raw_csv(&dir.path().join("raw.csv")).unwrap();
        let recomputed = stats::summarize(&rows).unwrap();
        assert_eq!(recomputed, output.aggregates);
        let stored = csvio::read_summary_csv(&dir.path().join("summary.csv")).unwrap();
        assert_eq!(stored, recomputed);
        assert_eq!(stats::success_rate(&rows), output.success_rate);
    }

    #[test]
    fn config_json_round_trip() {
        let cfg = RunConfig::preset("preset-b-sarsa").unwrap();
        let json = cfg.to_json();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn scenario_overrides_apply() {
        let mut sc = ScenarioConfig::named("preset-a");
        sc.overrides.goal_radius = Some(0.3);
        sc.overrides.episode_duration = Some(10.0);
        let scen = sc.resolve().unwrap();
        assert_eq!(scen.goal_radius, 0.3);
        assert_eq!(scen.max_steps(), 100);
    }

    #[test]
    fn diverged_episode_is_recorded_not_fatal() {
        let mut cfg = RunConfig::default();
        // Infinite noise std overflows the state on the first transition.
        cfg.noise = Some(NoiseConfig {
            std: [f64::INFINITY, 0.0, 0.0],
        });
        let out = run_experiment(&cfg, None).unwrap();
        assert_eq!(out.rows.len(), 1);
        assert!(!out.rows[0].reached_goal);
        let scen = cfg.scenario.resolve().unwrap();
        assert_eq!(out.rows[0].total_cost, scen.non_reaching_penalty);
        let _ = Action::zero();
    }
}
