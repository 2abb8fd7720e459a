//! Baseline goal-reaching policy: exponential stabilizer in polar
//! coordinates with a sign branch for rear-half-plane headings.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::env::Policy;
use crate::error::Result;
use crate::scenario::{Action, State};

/// Polar representation `(rho, alpha, beta)` of a pose relative to the
/// origin: `rho` the planar distance, `alpha` the heading error towards the
/// origin wrapped into `(-pi, pi]`, `beta = -theta - alpha` left unwrapped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarState {
    pub rho: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Stabilizer gains. Stability requires `k_rho > 0`, `k_beta < 0` and
/// `k_alpha - k_rho > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NominalGains {
    pub k_rho: f64,
    pub k_alpha: f64,
    pub k_beta: f64,
}

impl Default for NominalGains {
    fn default() -> Self {
        NominalGains {
            k_rho: 0.2,
            k_alpha: 1.5,
            k_beta: -0.15,
        }
    }
}

impl NominalGains {
    pub fn is_valid(&self) -> bool {
        self.k_rho > 0.0 && self.k_beta < 0.0 && self.k_alpha - self.k_rho > 0.0
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Polar transformation. At the origin `atan2(0, 0)` is taken as 0, so the
/// mapping is total.
pub fn to_polar(s: &State) -> PolarState {
    let rho = s.x.hypot(s.y);
    let bearing = if rho == 0.0 { 0.0 } else { s.y.atan2(s.x) };
    let alpha = wrap_angle(-s.theta + bearing);
    let beta = -s.theta - alpha;
    PolarState { rho, alpha, beta }
}

/// Stabilizer output before saturation: `|v| = k_rho rho`,
/// `omega = k_alpha alpha_eff + k_beta beta_eff`.
///
/// `alpha` here measures the heading against the bearing of the robot as
/// seen from the origin, so `alpha` near zero means the robot faces away
/// from the goal: the vehicle reverses (`v < 0`) and the literal angles
/// already describe the mirrored vehicle. In the rear half-plane the robot
/// faces the goal: it drives forward with `alpha` reflected by pi towards
/// zero. (Pairing `v = +k_rho rho` with the front half-plane makes
/// `d(rho)/dt = v cos(alpha) >= 0` and the loop diverges.)
pub fn nominal_action(s: &State, g: &NominalGains) -> Action {
    nominal_action_cfg(s, g, false)
}

/// Same as [`nominal_action`]; `forward_only` disables reversing entirely
/// (always `v = +k_rho rho`, turning in place to face the goal instead).
pub fn nominal_action_cfg(s: &State, g: &NominalGains, forward_only: bool) -> Action {
    let p = to_polar(s);
    let facing_away = p.alpha > -FRAC_PI_2 && p.alpha <= FRAC_PI_2;
    if facing_away && !forward_only {
        Action::new(-g.k_rho * p.rho, g.k_alpha * p.alpha + g.k_beta * p.beta)
    } else {
        let sign = if p.alpha >= 0.0 { 1.0 } else { -1.0 };
        let alpha_eff = wrap_angle(p.alpha - PI * sign);
        let beta_eff = -s.theta - alpha_eff;
        Action::new(g.k_rho * p.rho, g.k_alpha * alpha_eff + g.k_beta * beta_eff)
    }
}

/// The stabilizer as a reusable policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NominalPolicy {
    pub gains: NominalGains,
    pub forward_only: bool,
}

impl Default for NominalPolicy {
    fn default() -> Self {
        NominalPolicy {
            gains: NominalGains::default(),
            forward_only: false,
        }
    }
}

impl Policy for NominalPolicy {
    fn act(&mut self, _t_index: usize, state: &State) -> Result<Action> {
        Ok(nominal_action_cfg(state, &self.gains, self.forward_only))
    }
}
