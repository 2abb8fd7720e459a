//! Affine-in-weights critic models, the class-K-infinity sandwich bounds,
//! the TD(1) on-policy loss and the constrained critic-update solver.
//!
//! All critics here are linear in their weights, so the constrained update is
//! a linearly-constrained least-squares problem. It is solved by projected
//! gradient descent with multi-start; feasibility is restored by exact
//! Euclidean projection onto the box-and-slab constraint set.

use std::collections::VecDeque;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{Action, State};

/// Absolute slack used when checking constraint satisfaction.
pub const FEASIBILITY_SLACK: f64 = 1e-9;

/// Largest feature vector across the supported sets.
pub const MAX_FEATURES: usize = 6;

/// Critic feature parameterizations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum FeatureSet {
    /// `(x, y, theta)`.
    #[default]
    StateLinear,
    /// `(x^2, y^2, theta^2)`.
    StateQuadratic,
    /// `(x^2, y^2, theta^2, v^2, omega^2, x v)`.
    StateActionQuadratic,
}

impl FeatureSet {
    pub fn len(&self) -> usize {
        match self {
            FeatureSet::StateLinear | FeatureSet::StateQuadratic => 3,
            FeatureSet::StateActionQuadratic => 6,
        }
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Whether the critic value depends on the action.
    pub fn uses_action(&self) -> bool {
        matches!(self, FeatureSet::StateActionQuadratic)
    }

    pub fn eval(&self, s: &State, a: &Action) -> FeatureVec {
        let mut buf = [0.0; MAX_FEATURES];
        let len = self.len();
        match self {
            FeatureSet::StateLinear => {
                buf[0] = s.x;
                buf[1] = s.y;
                buf[2] = s.theta;
            }
            FeatureSet::StateQuadratic => {
                buf[0] = s.x * s.x;
                buf[1] = s.y * s.y;
                buf[2] = s.theta * s.theta;
            }
            FeatureSet::StateActionQuadratic => {
                buf[0] = s.x * s.x;
                buf[1] = s.y * s.y;
                buf[2] = s.theta * s.theta;
                buf[3] = a.v * a.v;
                buf[4] = a.omega * a.omega;
                buf[5] = s.x * a.v;
            }
        }
        FeatureVec { buf, len }
    }
}

/// Stack-allocated feature vector.
#[derive(Debug, Clone, Copy)]
pub struct FeatureVec {
    buf: [f64; MAX_FEATURES],
    len: usize,
}

impl FeatureVec {
    pub fn as_slice(&self) -> &[f64] {
        &self.buf[..self.len]
    }
}

/// Critic configuration: feature set, sandwich constants, decrease margin,
/// weight box, replay length, loss regularization and discount.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CriticSpec {
    pub features: FeatureSet,
    /// Lower sandwich coefficient (`kappa_low(r) = c_low r^2`), positive.
    pub c_low: f64,
    /// Upper sandwich coefficient (`kappa_up(r) = c_up r^2`), above `c_low`.
    pub c_up: f64,
    /// Minimum decrease of the critic value per successful update.
    pub nu_bar: f64,
    /// Upper end of the optional decrease-margin ramp.
    pub nu_bar_max: f64,
    /// Linearly ramp the decrease margin from `nu_bar` to `nu_bar_max`
    /// across an episode. Off by default.
    pub nu_ramp: bool,
    /// Per-weight interval; the same box for every component.
    pub weight_bounds: (f64, f64),
    /// TD(1) replay length; the buffer holds at most `replay_len + 2`
    /// transitions.
    pub replay_len: usize,
    /// Coefficient of the `||w - w_dagger||^2` proximity term.
    pub reg: f64,
    /// Discount factor used inside the TD residual.
    pub gamma: f64,
    /// Drop the discount from the TD residual (the literal TD(1) form).
    pub undiscounted_td: bool,
}

impl Default for CriticSpec {
    fn default() -> Self {
        CriticSpec {
            features: FeatureSet::StateLinear,
            c_low: 0.1,
            c_up: 1e3,
            nu_bar: 1e-6,
            nu_bar_max: 0.1,
            nu_ramp: false,
            weight_bounds: (-1e4, 1e4),
            replay_len: 4,
            reg: 0.0,
            gamma: 0.9,
            undiscounted_td: false,
        }
    }
}

impl CriticSpec {
    pub fn validate(&self) -> Result<()> {
        let err = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.c_low > 0.0 && self.c_low < self.c_up) {
            return err("sandwich constants must satisfy 0 < c_low < c_up");
        }
        if !(self.nu_bar > 0.0) {
            return err("nu_bar must be positive");
        }
        if self.nu_bar_max < self.nu_bar {
            return err("nu_bar_max must be at least nu_bar");
        }
        if !(self.weight_bounds.0 < self.weight_bounds.1) {
            return err("weight bounds must form a non-empty interval");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return err("gamma must lie in (0, 1]");
        }
        if self.reg < 0.0 {
            return err("reg must be non-negative");
        }
        Ok(())
    }

    fn gamma_eff(&self) -> f64 {
        if self.undiscounted_td {
            1.0
        } else {
            self.gamma
        }
    }
}

/// Critic weight vector, one entry per feature.
#[derive(Debug, Clone, Copy)]
pub struct CriticWeights {
    buf: [f64; MAX_FEATURES],
    len: usize,
}

impl CriticWeights {
    pub fn zeros(len: usize) -> Self {
        assert!(len <= MAX_FEATURES);
        CriticWeights {
            buf: [0.0; MAX_FEATURES],
            len,
        }
    }

    pub fn from_slice(w: &[f64]) -> Self {
        assert!(w.len() <= MAX_FEATURES);
        let mut buf = [0.0; MAX_FEATURES];
        buf[..w.len()].copy_from_slice(w);
        CriticWeights { buf, len: w.len() }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.buf[..self.len]
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

impl PartialEq for CriticWeights {
    fn eq(&self, other: &Self) -> bool {
        self.as_slice() == other.as_slice()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// One on-policy transition sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayEntry {
    pub state: State,
    pub action: Action,
    pub cost: f64,
}

/// Chronological buffer of the most recent transitions; oldest evicted first.
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    entries: VecDeque<ReplayEntry>,
    cap: usize,
}

impl ReplayBuffer {
    pub fn new(replay_len: usize) -> Self {
        ReplayBuffer {
            entries: VecDeque::with_capacity(replay_len + 2),
            cap: replay_len + 2,
        }
    }

    pub fn push(&mut self, entry: ReplayEntry) {
        if self.entries.len() == self.cap {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn iter(&self) -> impl Iterator<Item = &ReplayEntry> {
        self.entries.iter()
    }
}

/// Critic value: inner product of the weights with the feature vector.
/// State-only feature sets ignore the action.
pub fn q_value(w: &CriticWeights, s: &State, a: &Action, spec: &CriticSpec) -> f64 {
    let phi = spec.features.eval(s, a);
    assert_eq!(
        w.len(),
        phi.as_slice().len(),
        "critic weight dimension does not match the feature set"
    );
    dot(w.as_slice(), phi.as_slice())
}

/// Quadratic sandwich bounds `(c_low ||s||^2, c_up ||s||^2)` at a state.
pub fn kappa_bounds(s: &State, spec: &CriticSpec) -> (f64, f64) {
    let n2 = s.norm_sq();
    (spec.c_low * n2, spec.c_up * n2)
}

/// Least-squares rows for the TD(1) residuals over consecutive buffer pairs:
/// `phi(s_k, a_k)^T w - (c_k + gamma * Q^{w_dagger}(s_{k+1}, a_{k+1}))`.
fn residual_rows(
    w_dagger: &CriticWeights,
    buf: &ReplayBuffer,
    spec: &CriticSpec,
) -> Vec<([f64; MAX_FEATURES], f64)> {
    let gamma = spec.gamma_eff();
    let entries: Vec<&ReplayEntry> = buf.iter().collect();
    let mut rows = Vec::with_capacity(entries.len().saturating_sub(1));
    for pair in entries.windows(2) {
        let (cur, next) = (pair[0], pair[1]);
        let phi = spec.features.eval(&cur.state, &cur.action);
        let target = cur.cost + gamma * q_value(w_dagger, &next.state, &next.action, spec);
        let mut buf_phi = [0.0; MAX_FEATURES];
        buf_phi[..phi.as_slice().len()].copy_from_slice(phi.as_slice());
        rows.push((buf_phi, target));
    }
    rows
}

/// TD(1) on-policy loss: sum of squared one-step Bellman residuals along the
/// buffered trajectory plus the proximity regularizer `reg ||w - w_dagger||^2`.
pub fn td1_loss(
    w: &CriticWeights,
    w_dagger: &CriticWeights,
    buf: &ReplayBuffer,
    spec: &CriticSpec,
) -> Result<f64> {
    if buf.len() < 2 {
        return Err(Error::InsufficientReplay {
            have: buf.len(),
            need: 2,
        });
    }
    let rows = residual_rows(w_dagger, buf, spec);
    Ok(eval_loss(
        w.as_slice(),
        &rows,
        spec.reg,
        w_dagger.as_slice(),
    ))
}

fn eval_loss(w: &[f64], rows: &[([f64; MAX_FEATURES], f64)], reg: f64, w_dagger: &[f64]) -> f64 {
    let mut loss = 0.0;
    for (phi, target) in rows {
        let r = dot(&phi[..w.len()], w) - target;
        loss += r * r;
    }
    let prox: f64 = w.iter().zip(w_dagger).map(|(a, b)| (a - b) * (a - b)).sum();
    loss + reg * prox
}

fn eval_grad(
    w: &[f64],
    rows: &[([f64; MAX_FEATURES], f64)],
    reg: f64,
    w_dagger: &[f64],
    out: &mut [f64; MAX_FEATURES],
) {
    out.fill(0.0);
    for (phi, target) in rows {
        let r = dot(&phi[..w.len()], w) - target;
        for i in 0..w.len() {
            out[i] += 2.0 * r * phi[i];
        }
    }
    for i in 0..w.len() {
        out[i] += 2.0 * reg * (w[i] - w_dagger[i]);
    }
}

/// Outcome of a constrained critic update attempt. Infeasibility is a normal
/// outcome, not an error.
#[derive(Debug, Clone, PartialEq)]
pub enum UpdateOutcome {
    Feasible(CriticWeights),
    Infeasible,
}

impl UpdateOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self, UpdateOutcome::Feasible(_))
    }
}

/// Exact Euclidean projection of `p` onto
/// `{w in [blo, bhi]^n : lo <= phi^T w <= hi}`.
///
/// The projection has the closed form `clamp(p + lambda phi)` with the scalar
/// multiplier found by bisection (`phi^T clamp(p + lambda phi)` is monotone in
/// `lambda`). Returns `None` when the set is empty within the feasibility
/// slack.
fn project_box_slab(
    p: &[f64],
    phi: &[f64],
    mut lo: f64,
    mut hi: f64,
    (blo, bhi): (f64, f64),
) -> Option<CriticWeights> {
    if lo > hi {
        if lo - hi > 2.0 * FEASIBILITY_SLACK {
            return None;
        }
        // Degenerate sliver: collapse to the midpoint, satisfiable within slack.
        let mid = 0.5 * (lo + hi);
        lo = mid;
        hi = mid;
    }
    let n = p.len();
    let point_at = |lambda: f64| {
        let mut w = [0.0; MAX_FEATURES];
        for i in 0..n {
            w[i] = (p[i] + lambda * phi[i]).clamp(blo, bhi);
        }
        w
    };
    let z_at = |lambda: f64| dot(&point_at(lambda)[..n], phi);

    let z0 = z_at(0.0);
    if z0 >= lo && z0 <= hi {
        return Some(CriticWeights::from_slice(&point_at(0.0)[..n]));
    }

    // Aim for the violated bound; z is monotone non-decreasing in lambda.
    let (target, mut lam_in, mut lam_out, upward) = if z0 < lo {
        (lo, 0.0f64, 1.0f64, true)
    } else {
        (hi, 0.0f64, -1.0f64, false)
    };

    // Grow the bracket until the target side is reached or z saturates.
    let mut reached = false;
    for _ in 0..200 {
        let z = z_at(lam_out);
        if (upward && z >= target) || (!upward && z <= target) {
            reached = true;
            break;
        }
        lam_out *= 2.0;
    }
    if !reached {
        let z_sat = z_at(lam_out);
        if (z_sat - target).abs() <= FEASIBILITY_SLACK {
            return Some(CriticWeights::from_slice(&point_at(lam_out)[..n]));
        }
        return None;
    }

    // Bisect; keep the outer endpoint so the target bound is satisfied.
    for _ in 0..200 {
        let mid = 0.5 * (lam_in + lam_out);
        let z = z_at(mid);
        if (upward && z >= target) || (!upward && z <= target) {
            lam_out = mid;
        } else {
            lam_in = mid;
        }
        if lam_out == lam_in {
            break;
        }
    }
    let w = point_at(lam_out);
    let z = dot(&w[..n], phi);
    if z >= lo - FEASIBILITY_SLACK && z <= hi + FEASIBILITY_SLACK {
        Some(CriticWeights::from_slice(&w[..n]))
    } else {
        None
    }
}

fn constraints_hold(w: &CriticWeights, phi: &[f64], lo: f64, hi: f64) -> bool {
    let z = dot(w.as_slice(), phi);
    z >= lo - FEASIBILITY_SLACK && z <= hi + FEASIBILITY_SLACK
}

/// Projected gradient descent on the TD(1) loss over the feasible set,
/// with backtracking line search.
#[allow(clippy::too_many_arguments)]
fn pgd(
    start: CriticWeights,
    rows: &[([f64; MAX_FEATURES], f64)],
    spec: &CriticSpec,
    w_dagger: &CriticWeights,
    phi: &[f64],
    lo: f64,
    hi: f64,
    iterations: usize,
) -> CriticWeights {
    let n = start.len();
    let mut w = start;
    let mut fw = eval_loss(w.as_slice(), rows, spec.reg, w_dagger.as_slice());
    let mut grad = [0.0; MAX_FEATURES];
    let mut step: f64 = 1.0;
    for _ in 0..iterations {
        eval_grad(w.as_slice(), rows, spec.reg, w_dagger.as_slice(), &mut grad);
        let gnorm2 = dot(&grad[..n], &grad[..n]);
        if gnorm2 < 1e-24 {
            break;
        }
        step = (step * 4.0).min(1e8);
        let mut improved = false;
        for _ in 0..80 {
            let mut cand_raw = [0.0; MAX_FEATURES];
            for i in 0..n {
                cand_raw[i] = w.buf[i] - step * grad[i];
            }
            if let Some(cand) = project_box_slab(&cand_raw[..n], phi, lo, hi, spec.weight_bounds) {
                let fc = eval_loss(cand.as_slice(), rows, spec.reg, w_dagger.as_slice());
                if fc < fw {
                    w = cand;
                    fw = fc;
                    improved = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if !improved {
            break;
        }
    }
    w
}

/// The constrained critic update: minimizes the TD(1) loss subject to
/// the pointwise decrease constraint
/// `Q^w(s_t, a_t) <= q_dagger - nu_bar`, the sandwich
/// `kappa_low(||s_t||) <= Q^w(s_t, a_t) <= kappa_up(||s_t||)` and the weight
/// box. Multi-start: the incumbent plus four random perturbations.
#[allow(clippy::too_many_arguments)]
pub fn constrained_update(
    w_dagger: &CriticWeights,
    q_dagger: f64,
    s_t: &State,
    a_t: &Action,
    buf: &ReplayBuffer,
    spec: &CriticSpec,
    nu_bar: f64,
    rng: &mut ChaCha8Rng,
) -> UpdateOutcome {
    let phi_vec = spec.features.eval(s_t, a_t);
    let phi = phi_vec.as_slice();
    let (klo, kup) = kappa_bounds(s_t, spec);
    let lo = klo;
    let hi = (q_dagger - nu_bar).min(kup);
    let rows = residual_rows(w_dagger, buf, spec);

    let mut best: Option<(f64, CriticWeights)> = None;
    for attempt in 0..5 {
        let start = if attempt == 0 {
            *w_dagger
        } else {
            let mut s = *w_dagger;
            for i in 0..s.len {
                let scale = 0.25 * (1.0 + s.buf[i].abs());
                s.buf[i] += scale * normal_sample(rng);
            }
            s
        };
        let Some(feasible) = project_box_slab(start.as_slice(), phi, lo, hi, spec.weight_bounds)
        else {
            // The feasible set is empty; no start can help.
            break;
        };
        let w_opt = pgd(feasible, &rows, spec, w_dagger, phi, lo, hi, 200);
        if !constraints_hold(&w_opt, phi, lo, hi) {
            continue;
        }
        let l = eval_loss(w_opt.as_slice(), &rows, spec.reg, w_dagger.as_slice());
        match &best {
            Some((lb, _)) if *lb <= l => {}
            _ => best = Some((l, w_opt)),
        }
    }
    match best {
        Some((_, w)) => UpdateOutcome::Feasible(w),
        None => UpdateOutcome::Infeasible,
    }
}

fn normal_sample(rng: &mut ChaCha8Rng) -> f64 {
    use rand_distr::{Distribution, StandardNormal};
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

/// Moves `start` minimally so the critic value at `(s, a)` equals `target`,
/// staying inside the weight box. `None` when unreachable (e.g. a zero
/// feature vector).
pub fn anchor_weights(
    start: &CriticWeights,
    s: &State,
    a: &Action,
    target: f64,
    spec: &CriticSpec,
) -> Option<CriticWeights> {
    let phi = spec.features.eval(s, a);
    project_box_slab(
        start.as_slice(),
        phi.as_slice(),
        target,
        target,
        spec.weight_bounds,
    )
}

/// Deterministic initialization: weights whose value at `(s0, a0)` is the
/// geometric midpoint `sqrt(kappa_low * kappa_up)` of the sandwich.
pub fn initial_weights(s0: &State, a0: &Action, spec: &CriticSpec) -> Option<CriticWeights> {
    let (klo, kup) = kappa_bounds(s0, spec);
    let target = (klo * kup).sqrt();
    anchor_weights(
        &CriticWeights::zeros(spec.features.len()),
        s0,
        a0,
        target,
        spec,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeds;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_PI_2;

    fn spec_linear() -> CriticSpec {
        CriticSpec::default()
    }

    #[test]
    fn q_value_is_the_inner_product() {
        let spec = spec_linear();
        let w = CriticWeights::from_slice(&[1.0, 2.0, 3.0]);
        let s = State::new(-1.0, -1.0, FRAC_PI_2);
        let q = q_value(&w, &s, &Action::zero(), &spec);
        assert!((q - 1.7123890).abs() < 1e-7);
    }

    #[test]
    fn zero_weights_give_zero_value() {
        for features in [
            FeatureSet::StateLinear,
            FeatureSet::StateQuadratic,
            FeatureSet::StateActionQuadratic,
        ] {
            let spec = CriticSpec {
                features,
                ..CriticSpec::default()
            };
            let w = CriticWeights::zeros(features.len());
            let q = q_value(
                &w,
                &State::new(0.3, -0.2, 1.0),
                &Action::new(0.1, -0.4),
                &spec,
            );
            assert_eq!(q, 0.0);
        }
    }

    #[test]
    fn state_quadratic_features_align_with_preset_a_cost() {
        let spec = CriticSpec {
            features: FeatureSet::StateQuadratic,
            ..CriticSpec::default()
        };
        let w = CriticWeights::from_slice(&[1.0, 1.0, 0.1]);
        let s = State::new(0.7, -1.1, 2.0);
        let q = q_value(&w, &s, &Action::zero(), &spec);
        let quad = s.x * s.x + s.y * s.y + 0.1 * s.theta * s.theta;
        assert!((q - quad).abs() < 1e-12);
    }

    #[test]
    fn kappa_bounds_match_hand_computation() {
        let spec = spec_linear();
        let s = State::new(-1.0, -1.0, FRAC_PI_2);
        let (lo, up) = kappa_bounds(&s, &spec);
        assert!((lo - 0.4467401).abs() < 1e-7);
        assert!((up - 4467.4011).abs() < 1e-4);

        let (lo, up) = kappa_bounds(&State::new(0.0, 0.0, 0.0), &spec);
        assert_eq!((lo, up), (0.0, 0.0));
    }

    fn push_bellman_consistent(buf: &mut ReplayBuffer, w: &CriticWeights, spec: &CriticSpec) {
        // Build states whose costs satisfy the Bellman identity exactly
        // under weights w.
        let states = [
            State::new(1.0, 0.5, 0.2),
            State::new(0.8, 0.4, 0.1),
            State::new(0.6, 0.3, 0.05),
            State::new(0.4, 0.2, 0.02),
        ];
        for k in 0..states.len() - 1 {
            let q_cur = q_value(w, &states[k], &Action::zero(), spec);
            let q_next = q_value(w, &states[k + 1], &Action::zero(), spec);
            let cost = q_cur - spec.gamma_eff() * q_next;
            buf.push(ReplayEntry {
                state: states[k],
                action: Action::zero(),
                cost,
            });
        }
        buf.push(ReplayEntry {
            state: states[states.len() - 1],
            action: Action::zero(),
            cost: 0.0,
        });
    }

    #[test]
    fn td1_loss_vanishes_on_bellman_consistent_data() {
        // reg > 0 pins that the proximity term is exactly zero at w_dagger.
        let spec = CriticSpec {
            reg: 5.0,
            ..spec_linear()
        };
        let w = CriticWeights::from_slice(&[2.0, -1.0, 0.5]);
        let mut buf = ReplayBuffer::new(spec.replay_len);
        push_bellman_consistent(&mut buf, &w, &spec);
        let loss = td1_loss(&w, &w, &buf, &spec).unwrap();
        assert!(loss.abs() < 1e-18, "loss {loss} should vanish");
    }

    #[test]
    fn td1_loss_single_transition_is_squared_residual() {
        let spec = CriticSpec {
            reg: 0.0,
            ..spec_linear()
        };
        let w = CriticWeights::from_slice(&[1.0, 0.0, 0.0]);
        let mut buf = ReplayBuffer::new(spec.replay_len);
        buf.push(ReplayEntry {
            state: State::new(1.0, 0.0, 0.0),
            action: Action::zero(),
            cost: 0.3,
        });
        buf.push(ReplayEntry {
            state: State::new(0.5, 0.0, 0.0),
            action: Action::zero(),
            cost: 0.0,
        });
        // residual = q(s0) - c0 - gamma q(s1) = 1 - 0.3 - 0.9 * 0.5 = 0.25
        let loss = td1_loss(&w, &w, &buf, &spec).unwrap();
        assert!((loss - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn td1_loss_reduces_to_regularizer_on_zero_data() {
        let spec = CriticSpec {
            reg: 2.5,
            ..spec_linear()
        };
        let w_dagger = CriticWeights::zeros(3);
        let w = CriticWeights::from_slice(&[0.3, -0.4, 0.0]);
        let mut buf = ReplayBuffer::new(spec.replay_len);
        // All-zero costs at the origin: every residual is exactly zero.
        for _ in 0..3 {
            buf.push(ReplayEntry {
                state: State::new(0.0, 0.0, 0.0),
                action: Action::zero(),
                cost: 0.0,
            });
        }
        let loss = td1_loss(&w, &w_dagger, &buf, &spec).unwrap();
        assert!((loss - 2.5 * 0.25).abs() < 1e-15);
    }

    #[test]
    fn td1_loss_requires_two_entries() {
        let spec = spec_linear();
        let w = CriticWeights::zeros(3);
        let mut buf = ReplayBuffer::new(spec.replay_len);
        buf.push(ReplayEntry {
            state: State::new(1.0, 0.0, 0.0),
            action: Action::zero(),
            cost: 0.0,
        });
        assert!(matches!(
            td1_loss(&w, &w, &buf, &spec),
            Err(Error::InsufficientReplay { have: 1, need: 2 })
        ));
    }

    #[test]
    fn replay_buffer_evicts_oldest() {
        let mut buf = ReplayBuffer::new(1); // cap 3
        for i in 0..5 {
            buf.push(ReplayEntry {
                state: State::new(i as f64, 0.0, 0.0),
                action: Action::zero(),
                cost: 0.0,
            });
        }
        assert_eq!(buf.len(), 3);
        let xs: Vec<f64> = buf.iter().map(|e| e.state.x).collect();
        assert_eq!(xs, vec![2.0, 3.0, 4.0]);
    }

    fn small_buf(spec: &CriticSpec) -> ReplayBuffer {
        let mut buf = ReplayBuffer::new(spec.replay_len);
        buf.push(ReplayEntry {
            state: State::new(1.1, -0.4, 0.3),
            action: Action::new(0.1, 0.2),
            cost: 1.0,
        });
        buf.push(ReplayEntry {
            state: State::new(1.0, -0.3, 0.2),
            action: Action::new(0.1, 0.1),
            cost: 0.8,
        });
        buf
    }

    #[test]
    fn update_feasible_with_wide_interval_decreases_value() {
        let spec = spec_linear();
        let s_t = State::new(-1.0, -1.0, FRAC_PI_2);
        let a_t = Action::zero();
        let (_, kup) = kappa_bounds(&s_t, &spec);
        let q_dagger = kup; // very large incumbent value
        let w_dagger =
            anchor_weights(&CriticWeights::zeros(3), &s_t, &a_t, q_dagger, &spec).unwrap();
        let buf = small_buf(&spec);
        let mut rng = seeds::stream(1, "critic-restarts");
        let nu = 0.5;
        match constrained_update(&w_dagger, q_dagger, &s_t, &a_t, &buf, &spec, nu, &mut rng) {
            UpdateOutcome::Feasible(w) => {
                let q_new = q_value(&w, &s_t, &a_t, &spec);
                assert!(q_new <= q_dagger - nu + FEASIBILITY_SLACK);
                let (klo, kup) = kappa_bounds(&s_t, &spec);
                assert!(q_new >= klo - FEASIBILITY_SLACK);
                assert!(q_new <= kup + FEASIBILITY_SLACK);
            }
            UpdateOutcome::Infeasible => panic!("wide interval must be feasible"),
        }
    }

    #[test]
    fn update_infeasible_when_decrease_target_undercuts_sandwich() {
        let spec = spec_linear();
        let s_t = State::new(-1.0, -1.0, FRAC_PI_2);
        let a_t = Action::zero();
        let (klo, _) = kappa_bounds(&s_t, &spec);
        assert!(klo > 0.0);
        let nu = 0.1;
        let q_dagger = klo + nu / 2.0;
        let w_dagger =
            anchor_weights(&CriticWeights::zeros(3), &s_t, &a_t, q_dagger, &spec).unwrap();
        let buf = small_buf(&spec);
        let mut rng = seeds::stream(2, "critic-restarts");
        let out = constrained_update(&w_dagger, q_dagger, &s_t, &a_t, &buf, &spec, nu, &mut rng);
        assert_eq!(out, UpdateOutcome::Infeasible);
    }

    #[test]
    fn initial_weights_hit_geometric_midpoint() {
        let spec = spec_linear();
        let s0 = State::new(-1.0, -1.0, FRAC_PI_2);
        let a0 = Action::zero();
        let w0 = initial_weights(&s0, &a0, &spec).unwrap();
        let (klo, kup) = kappa_bounds(&s0, &spec);
        let q0 = q_value(&w0, &s0, &a0, &spec);
        assert!((q0 - (klo * kup).sqrt()).abs() < 1e-9);
        assert!(q0 >= klo && q0 <= kup);
    }

    #[test]
    #[should_panic(expected = "critic weight dimension")]
    fn dimension_mismatch_is_a_contract_violation() {
        let spec = spec_linear();
        let w = CriticWeights::from_slice(&[1.0, 2.0]); // 2 weights, 3 features
        let _ = q_value(&w, &State::new(1.0, 0.0, 0.0), &Action::zero(), &spec);
    }

    #[test]
    fn anchoring_at_the_origin() {
        let spec = spec_linear();
        // At the origin the sandwich collapses to [0, 0]: the zero critic is
        // the (only) valid anchor.
        let w = initial_weights(&State::new(0.0, 0.0, 0.0), &Action::zero(), &spec).unwrap();
        assert_eq!(
            q_value(&w, &State::new(0.0, 0.0, 0.0), &Action::zero(), &spec),
            0.0
        );
        // A positive target is unreachable there: the feature vector is zero.
        assert!(anchor_weights(
            &CriticWeights::zeros(3),
            &State::new(0.0, 0.0, 0.0),
            &Action::zero(),
            1.0,
            &spec
        )
        .is_none());
    }

    /// Test-side oracle: feasibility of the affine constraint set by direct
    /// interval computation.
    fn interval_oracle(
        phi: &[f64],
        q_dagger: f64,
        nu: f64,
        klo: f64,
        kup: f64,
        (blo, bhi): (f64, f64),
    ) -> bool {
        let lo = klo;
        let hi = (q_dagger - nu).min(kup);
        let mut z_min = 0.0;
        let mut z_max = 0.0;
        for &p in phi {
            if p >= 0.0 {
                z_min += p * blo;
                z_max += p * bhi;
            } else {
                z_min += p * bhi;
                z_max += p * blo;
            }
        }
        z_max >= lo - FEASIBILITY_SLACK
            && z_min <= hi + FEASIBILITY_SLACK
            && lo <= hi + 2.0 * FEASIBILITY_SLACK
    }

    #[test]
    fn solver_feasibility_matches_interval_oracle() {
        use rand::Rng;
        let mut rng = seeds::stream(17, "oracle");
        let mut solver_rng = seeds::stream(18, "critic-restarts");
        let mut feasible_seen = 0usize;
        let mut infeasible_seen = 0usize;
        for case in 0..1000 {
            let spec = CriticSpec {
                // Narrow boxes now and then so the box constraint can bind.
                weight_bounds: if case % 3 == 0 {
                    (-2.0, 2.0)
                } else {
                    (-1e4, 1e4)
                },
                ..spec_linear()
            };
            let s_t = State::new(
                rng.random_range(-2.0..2.0),
                rng.random_range(-2.0..2.0),
                rng.random_range(-3.0..3.0),
            );
            let a_t = Action::zero();
            let (klo, kup) = kappa_bounds(&s_t, &spec);
            // Half the cases hug the sandwich floor so both verdicts occur
            // often.
            let q_dagger = if case % 2 == 0 {
                rng.random_range(-0.5..3.0)
            } else {
                rng.random_range(0.0..30.0)
            };
            let nu = rng.random_range(1e-6..0.5);
            let w_dagger = CriticWeights::from_slice(&[
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
                rng.random_range(-3.0..3.0),
            ]);
            let buf = small_buf(&spec);
            let phi = spec.features.eval(&s_t, &a_t);
            let expected =
                interval_oracle(phi.as_slice(), q_dagger, nu, klo, kup, spec.weight_bounds);
            let got = constrained_update(
                &w_dagger,
                q_dagger,
                &s_t,
                &a_t,
                &buf,
                &spec,
                nu,
                &mut solver_rng,
            )
            .is_feasible();
            assert_eq!(
                got, expected,
                "case {case}: solver {got} oracle {expected} (s_t {s_t:?} q {q_dagger} nu {nu})"
            );
            if expected {
                feasible_seen += 1;
            } else {
                infeasible_seen += 1;
            }
        }
        assert!(feasible_seen > 100 && infeasible_seen > 100);
    }

    proptest! {
        #[test]
        fn q_value_is_linear_in_weights(
            w1 in prop::array::uniform3(-5.0f64..5.0),
            w2 in prop::array::uniform3(-5.0f64..5.0),
            a in -3.0f64..3.0, b in -3.0f64..3.0,
            x in -2.0f64..2.0, y in -2.0f64..2.0, t in -3.0f64..3.0,
        ) {
            let spec = CriticSpec::default();
            let s = State::new(x, y, t);
            let act = Action::zero();
            let combo: Vec<f64> = w1.iter().zip(&w2).map(|(p, q)| a * p + b * q).collect();
            let lhs = q_value(&CriticWeights::from_slice(&combo), &s, &act, &spec);
            let rhs = a * q_value(&CriticWeights::from_slice(&w1), &s, &act, &spec)
                + b * q_value(&CriticWeights::from_slice(&w2), &s, &act, &spec);
            prop_assert!((lhs - rhs).abs() < 1e-9);
        }

        #[test]
        fn kappa_ordering(x in -5.0f64..5.0, y in -5.0f64..5.0, t in -5.0f64..5.0) {
            let spec = CriticSpec::default();
            let (lo, up) = kappa_bounds(&State::new(x, y, t), &spec);
            prop_assert!(lo <= up);
        }
    }
}
