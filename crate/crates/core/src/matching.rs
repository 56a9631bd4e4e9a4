//! Junction with a generalized Vaidya exterior and endstate classification.
//!
//! On the boundary `r = r_b` the areal radius is `Y = r_b a(t)` and the
//! Misner–Sharp mass is `M = ½ r_b³ a ȧ²`. The exterior null coordinate obeys
//! `dU/dt = 1/(1 + ȧ r_b)`. An apparent horizon crosses the boundary when
//! `r_b² ȧ² = 1`.

use serde::{Deserialize, Serialize};

use crate::collapse::CollapseReport;
use crate::dynamics::{Branch, SQRT3};
use crate::integrator::{locate_event, Event, EventKind, Trajectory};
use crate::potentials::Potential;
use crate::{Error, Result};

/// `|u| = √3/3` separates black holes from naked singularities on special branches.
pub const U_THRESHOLD: f64 = 0.577_350_269_189_625_8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingSample {
    pub t: f64,
    pub y: f64,
    pub u: f64,
    pub m: f64,
    pub dm_dy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchingData {
    pub r_b: f64,
    pub samples: Vec<MatchingSample>,
    /// First time where `1 + ȧ r_b` changes sign; `U` is not continued past it.
    pub denominator_sign_change: Option<f64>,
}

/// Boundary radius that starts untrapped: `0.1/|ȧ(0)|`, or `0.1` when `ȧ(0) = 0`.
pub fn default_r_b(traj: &Trajectory) -> f64 {
    let adot0 = traj.first().adot().abs();
    if adot0 > 0.0 {
        0.1 / adot0
    } else {
        0.1
    }
}

/// Matching data along every sample of a collapse trajectory.
///
/// `∂M/∂Y = ½ r_b² (ȧ² + 2aä)`, the factor that makes
/// `dM/dt = (∂M/∂Y)(dY/dt)` hold along the boundary.
pub fn compute_matching(traj: &Trajectory, p: &Potential, r_b: f64) -> Result<MatchingData> {
    if !(r_b > 0.0) {
        return Err(Error::Precondition(format!("r_b = {r_b} must be positive")));
    }
    let mut samples = Vec::with_capacity(traj.samples.len());
    let mut u = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    let mut sign_change = None;
    for s in &traj.samples {
        let a = s.state.a();
        let adot = s.adot();
        let addot = s.addot(p);
        let denom = 1.0 + adot * r_b;
        if let Some((t0, d0)) = prev {
            if sign_change.is_none() && denom.signum() != d0.signum() {
                sign_change = Some(s.t());
            }
            if sign_change.is_none() {
                u += 0.5 * (s.t() - t0) * (1.0 / d0 + 1.0 / denom);
            }
        }
        prev = Some((s.t(), denom));
        samples.push(MatchingSample {
            t: s.t(),
            y: r_b * a,
            u: if sign_change.is_some() { f64::NAN } else { u },
            m: 0.5 * r_b.powi(3) * a * adot * adot,
            dm_dy: 0.5 * r_b * r_b * (adot * adot + 2.0 * a * addot),
        });
    }
    Ok(MatchingData {
        r_b,
        samples,
        denominator_sign_change: sign_change,
    })
}

fn adot_at(traj: &Trajectory, p: &Potential, t: f64) -> Option<f64> {
    let k = traj.samples.partition_point(|s| s.t() < t).min(traj.samples.len() - 1);
    let chi = traj.samples[k].state.chi.sign();
    traj.interpolate(t, p).map(|y| chi * y[3] / SQRT3 * y[2].exp())
}

/// Earliest time with `r_b² ȧ² ≥ 1` on the collapsing part of the run.
pub fn apparent_horizon_time(traj: &Trajectory, p: &Potential, r_b: f64) -> Option<f64> {
    let hit =
        |s: &crate::integrator::Sample| s.state.chi == Branch::Collapsing && r_b * r_b * s.adot() * s.adot() >= 1.0;
    let k = traj.samples.iter().position(hit)?;
    if k == 0 || traj.samples[k - 1].state.chi != Branch::Collapsing {
        return Some(traj.samples[k].t());
    }
    let (a, b) = (traj.samples[k - 1].t(), traj.samples[k].t());
    locate_event(
        |t| adot_at(traj, p, t).map_or(f64::NAN, |v| r_b * r_b * v * v - 1.0),
        a,
        b,
        1e-13 * (1.0 + b.abs()),
    )
    .ok()
    .or(Some(b))
}

/// Returns a copy of the trajectory with a `HorizonCrossing` event inserted.
pub fn with_horizon_event(traj: &Trajectory, p: &Potential, r_b: f64) -> Trajectory {
    let mut out = traj.clone();
    if let Some(t) = apparent_horizon_time(traj, p, r_b) {
        let k = traj.samples.partition_point(|s| s.t() < t).min(traj.samples.len() - 1);
        let mut state = traj.samples[k].state;
        if let Some(y) = traj.interpolate(t, p) {
            state.t = t;
            state.phi = y[0];
            state.v = y[1];
            state.log_a = y[2];
        }
        let pos = out.events.partition_point(|e| e.t <= t);
        out.events.insert(
            pos,
            Event {
                t,
                state,
                kind: EventKind::HorizonCrossing { r_b },
            },
        );
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    BlackHole,
    NakedSingularity,
    Undetermined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndstateReport {
    pub verdict: Verdict,
    pub horizon_time: Option<f64>,
    /// The horizon lies beyond the last sample and was placed using the
    /// power law `ȧ ∝ (t_s − t)^{(1+ρ∞)/3 − 1}`.
    pub horizon_extrapolated: bool,
    pub max_adot_sq: f64,
    pub rho_inf: f64,
    /// Estimates of `(liminf |u|, limsup |u|)` over the tail of the run.
    pub u_tail_band: (f64, f64),
    pub r_b: f64,
}

/// Horizon time from the closed-form tail `a ∝ (t_s − t)^{(1+ρ)/3}`.
fn extrapolated_horizon(traj: &Trajectory, report: &CollapseReport, r_b: f64) -> Option<f64> {
    let t_s = report.t_s?;
    let last = traj.last();
    let q = (1.0 + report.rho_inf) / 3.0 - 1.0;
    let (adot, dt) = (last.adot().abs(), t_s - last.t());
    if !(q < 0.0) || !(dt > 0.0) || !(adot > 0.0) {
        return None;
    }
    // r_b·adot·((t_s − t)/dt)^q = 1.
    let remaining = dt * (1.0 / (r_b * adot)).powf(1.0 / q);
    Some(t_s - remaining)
}

/// Black hole or naked singularity from a finished collapse run.
pub fn classify_endstate(p: &Potential, report: &CollapseReport, traj: &Trajectory, r_b: f64) -> EndstateReport {
    let max_adot_sq = traj
        .samples
        .iter()
        .filter(|s| s.state.chi == Branch::Collapsing)
        .map(|s| s.adot() * s.adot())
        .fold(0.0, f64::max);
    let n = traj.samples.len();
    let tail = &traj.samples[n - (n / 10).max(1)..];
    let band = tail
        .iter()
        .filter_map(|s| p.u(s.state.phi).ok())
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), u| {
            (lo.min(u.abs()), hi.max(u.abs()))
        });

    let mut out = EndstateReport {
        verdict: Verdict::Undetermined,
        horizon_time: None,
        horizon_extrapolated: false,
        max_adot_sq,
        rho_inf: report.rho_inf,
        u_tail_band: band,
        r_b,
    };
    if report.t_s.is_none() {
        return out;
    }
    let horizon = apparent_horizon_time(traj, p, r_b);
    let black = if report.generic || band.0 > U_THRESHOLD {
        true
    } else if band.1 < U_THRESHOLD {
        out.verdict = Verdict::NakedSingularity;
        return out;
    } else {
        return out;
    };
    if black {
        match horizon {
            Some(t) => out.horizon_time = Some(t),
            None => {
                out.horizon_time = extrapolated_horizon(traj, report, r_b);
                out.horizon_extrapolated = out.horizon_time.is_some();
            }
        }
        if out.horizon_time.is_some() {
            out.verdict = Verdict::BlackHole;
        }
    }
    out
}
