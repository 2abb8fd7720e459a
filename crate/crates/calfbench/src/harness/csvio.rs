//! CSV readers and writers with fixed, reproducible number formatting.
//!
//! Floats are printed with nine significant digits (`%.9g`-style): fixed
//! notation with trailing zeros trimmed when the decimal exponent is small,
//! scientific otherwise. The formatting is a pure function of the value, so
//! identical runs produce byte-identical files.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::agents::{CalfTrace, StepMode};
use crate::env::EpisodeLog;
use crate::error::{Error, Result};
use crate::harness::stats::{EpisodeAggregate, EpisodeRow};

/// Formats a float with nine significant digits.
pub fn sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".to_string()
        } else if x > 0.0 {
            "inf".to_string()
        } else {
            "-inf".to_string()
        };
    }
    // 8 fractional digits in scientific notation = 9 significant digits.
    let sci = format!("{:.8e}", x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific notation");
    let exp: i32 = exp.parse().expect("exponent");
    let negative = mantissa.starts_with('-');
    let digits: String = mantissa.chars().filter(|c| c.is_ascii_digit()).collect();
    debug_assert_eq!(digits.len(), 9);

    let body = if (-4..9).contains(&exp) {
        let mut s = String::new();
        if exp >= 0 {
            let int_len = exp as usize + 1;
            s.push_str(&digits[..int_len.min(9)]);
            for _ in 9..int_len {
                s.push('0');
            }
            if int_len < 9 {
                s.push('.');
                s.push_str(&digits[int_len..]);
            }
        } else {
            s.push_str("0.");
            for _ in 0..(-exp - 1) {
                s.push('0');
            }
            s.push_str(&digits);
        }
        trim_fraction(s)
    } else {
        let mut s = String::new();
        s.push_str(&digits[..1]);
        s.push('.');
        s.push_str(&digits[1..]);
        let trimmed = trim_fraction(s);
        format!("{trimmed}e{exp}")
    };
    if negative {
        format!("-{body}")
    } else {
        body
    }
}

fn trim_fraction(mut s: String) -> String {
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    s
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(content.as_bytes())
        .map_err(|e| Error::io(path, e))
}

pub const RAW_HEADER: &str =
    "seed,episode,total_cost,reached_goal,reach_time_s,successful_updates,recovery_invocations";

pub fn raw_csv_string(rows: &[EpisodeRow]) -> String {
    let mut out = String::from(RAW_HEADER);
    out.push('\n');
    for r in rows {
        let reach = r.reach_time_s.map(sig9).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.seed,
            r.episode,
            sig9(r.total_cost),
            r.reached_goal,
            reach,
            r.successful_updates,
            r.recovery_invocations
        ));
    }
    out
}

pub fn write_raw_csv(path: &Path, rows: &[EpisodeRow]) -> Result<()> {
    write_file(path, &raw_csv_string(rows))
}

pub fn read_raw_csv(path: &Path) -> Result<Vec<EpisodeRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != RAW_HEADER {
                return Err(Error::Config(format!(
                    "{}: unexpected raw CSV header",
                    path.display()
                )));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Config(format!(
                "{}: line {} has {} fields, expected 7",
                path.display(),
                i + 1,
                fields.len()
            )));
        }
        let bad =
            |what: &str| Error::Config(format!("{}: line {}: bad {what}", path.display(), i + 1));
        rows.push(EpisodeRow {
            seed: fields[0].parse().map_err(|_| bad("seed"))?,
            episode: fields[1].parse().map_err(|_| bad("episode"))?,
            total_cost: fields[2].parse().map_err(|_| bad("total_cost"))?,
            reached_goal: fields[3].parse().map_err(|_| bad("reached_goal"))?,
            reach_time_s: if fields[4].is_empty() {
                None
            } else {
                Some(fields[4].parse().map_err(|_| bad("reach_time_s"))?)
            },
            successful_updates: fields[5].parse().map_err(|_| bad("successful_updates"))?,
            recovery_invocations: fields[6].parse().map_err(|_| bad("recovery_invocations"))?,
        });
    }
    Ok(rows)
}

pub const SUMMARY_HEADER: &str = "episode,median_top25_cost,ci_low,ci_high,success_rate";

pub fn summary_csv_string(aggregates: &[EpisodeAggregate]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for a in aggregates {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            a.episode,
            sig9(a.median_top25_cost),
            sig9(a.ci_low),
            sig9(a.ci_high),
            sig9(a.success_rate)
        ));
    }
    out
}

pub fn write_summary_csv(path: &Path, aggregates: &[EpisodeAggregate]) -> Result<()> {
    write_file(path, &summary_csv_string(aggregates))
}

pub fn read_summary_csv(path: &Path) -> Result<Vec<EpisodeAggregate>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != SUMMARY_HEADER {
                return Err(Error::Config(format!(
                    "{}: unexpected summary CSV header",
                    path.display()
                )));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(Error::Config(format!(
                "{}: line {} has {} fields, expected 5",
                path.display(),
                i + 1,
                fields.len()
            )));
        }
        let bad =
            |what: &str| Error::Config(format!("{}: line {}: bad {what}", path.display(), i + 1));
        out.push(EpisodeAggregate {
            episode: fields[0].parse().map_err(|_| bad("episode"))?,
            median_top25_cost: fields[1].parse().map_err(|_| bad("median_top25_cost"))?,
            ci_low: fields[2].parse().map_err(|_| bad("ci_low"))?,
            ci_high: fields[3].parse().map_err(|_| bad("ci_high"))?,
            success_rate: fields[4].parse().map_err(|_| bad("success_rate"))?,
        });
    }
    Ok(out)
}

pub const TRAJECTORY_HEADER: &str =
    "t_index,x,y,theta,v_cmd,omega_cmd,v_app,omega_app,cost,in_zone,in_goal";

/// One row per step record; agent columns (`mode`, `q_dagger`) are appended
/// when a trace is supplied.
pub fn trajectory_csv_string(log: &EpisodeLog, trace: Option<&[CalfTrace]>) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    if trace.is_some() {
        out.push_str(",mode,q_dagger");
    }
    out.push('\n');
    for (i, r) in log.records.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.t_index,
            sig9(r.state.x),
            sig9(r.state.y),
            sig9(r.state.theta),
            sig9(r.action_commanded.v),
            sig9(r.action_commanded.omega),
            sig9(r.action_applied.v),
            sig9(r.action_applied.omega),
            sig9(r.cost),
            r.in_zone,
            r.in_goal
        ));
        if let Some(trace) = trace {
            match trace.get(i) {
                Some(t) => {
                    let mode = match t.mode {
                        StepMode::Learned => "learned",
                        StepMode::Recovery => "recovery",
                    };
                    out.push_str(&format!(",{},{}", mode, sig9(t.q_dagger)));
                }
                // Terminal row: the agent never acted there.
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_trajectory_csv(
    path: &Path,
    log: &EpisodeLog,
    trace: Option<&[CalfTrace]>,
) -> Result<()> {
    write_file(path, &trajectory_csv_string(log, trace))
}

/// Critic weight trajectory: `episode,t,w1..wn,feasible`.
pub fn weights_csv_string(episode: usize, trace: &[CalfTrace]) -> String {
    let n = trace.first().map_or(0, |t| t.weights.len());
    let mut out = String::from("episode,t");
    for i in 1..=n {
        out.push_str(&format!(",w{i}"));
    }
    out.push_str(",feasible\n");
    for t in trace {
        out.push_str(&format!("{episode},{}", t.t_index));
        for w in t.weights.as_slice() {
            out.push_str(&format!(",{}", sig9(*w)));
        }
        out.push_str(&format!(",{}\n", t.update_feasible));
    }
    out
}

pub fn write_weights_csv(path: &Path, episode: usize, trace: &[CalfTrace]) -> Result<()> {
    write_file(path, &weights_csv_string(episode, trace))
}

/// Rounds a value through its nine-significant-digit representation, so that
/// aggregates computed in memory match aggregates recomputed from a CSV.
pub fn round_sig9(x: f64) -> f64 {
    sig9(x).parse().expect("sig9 output parses")
}
