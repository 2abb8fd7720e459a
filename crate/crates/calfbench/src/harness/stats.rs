//! Per-episode aggregation: top-25% medians, bootstrap confidence intervals
//! and success rates.

use rand::Rng;

use crate::error::{Error, Result};
use crate::seeds;

/// One raw result row: a single `(seed, episode)` outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub seed: u64,
    pub episode: usize,
    pub total_cost: f64,
    pub reached_goal: bool,
    pub reach_time_s: Option<f64>,
    pub successful_updates: usize,
    pub recovery_invocations: usize,
}

/// Aggregate over seeds at one episode index.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeAggregate {
    pub episode: usize,
    pub median_top25_cost: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub success_rate: f64,
}

pub const BOOTSTRAP_RESAMPLES: usize = 2000;

fn median_sorted(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Median of the `ceil(n/4)` (at least one) lowest values.
pub fn top25_median(costs: &[f64]) -> f64 {
    let mut sorted = costs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let k = sorted.len().div_ceil(4).max(1);
    median_sorted(&sorted[..k])
}

/// Percentile-method bootstrap CI of the top-25% median, seeded internally so
/// the aggregate is a pure function of the sample.
pub fn bootstrap_ci_top25(costs: &[f64], resamples: usize) -> (f64, f64) {
    let mut rng = seeds::stream(0, "bootstrap");
    let n = costs.len();
    let mut stats = Vec::with_capacity(resamples);
    let mut sample = vec![0.0; n];
    for _ in 0..resamples {
        for slot in sample.iter_mut() {
            *slot = costs[rng.random_range(0..n)];
        }
        stats.push(top25_median(&sample));
    }
    stats.sort_by(|a, b| a.total_cmp(b));
    let lower_idx = (0.025 * resamples as f64) as usize;
    let upper_idx = ((0.975 * resamples as f64) as usize).min(resamples - 1);
    (stats[lower_idx], stats[upper_idx])
}

/// Groups rows by episode index and aggregates across seeds.
pub fn summarize(rows: &[EpisodeRow]) -> Result<Vec<EpisodeAggregate>> {
    if rows.is_empty() {
        return Err(Error::NoData);
    }
    let max_episode = rows.iter().map(|r| r.episode).max().unwrap();
    let mut out = Vec::with_capacity(max_episode + 1);
    for episode in 0..=max_episode {
        let costs: Vec<f64> = rows
            .iter()
            .filter(|r| r.episode == episode)
            .map(|r| r.total_cost)
            .collect();
        if costs.is_empty() {
            continue;
        }
        let reached = rows
            .iter()
            .filter(|r| r.episode == episode && r.reached_goal)
            .count();
        let (ci_low, ci_high) = bootstrap_ci_top25(&costs, BOOTSTRAP_RESAMPLES);
        out.push(EpisodeAggregate {
            episode,
            median_top25_cost: top25_median(&costs),
            ci_low,
            ci_high,
            success_rate: reached as f64 / costs.len() as f64,
        });
    }
    Ok(out)
}

/// Fraction of rows that reached the goal.
pub fn success_rate(rows: &[EpisodeRow]) -> f64 {
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().filter(|r| r.reached_goal).count() as f64 / rows.len() as f64
}
