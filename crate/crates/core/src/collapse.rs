//! Collapsing solutions.
//!
//! Generic collapse runs forward in time until blow-up. Special branches of
//! `dy/dφ = √3(y²−1)(u y − 1)` repel forward in `φ`, so they are built by
//! integrating backward in `φ` from far out, where `y ≈ 1/u`, and the time
//! trajectory is recovered by quadrature.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{clamp_energy, Branch, FieldState, SQRT3};
use crate::integrator::dopri::{self, Flow, SolveEnd, SolveOptions};
use crate::integrator::{
    extrapolate_blowup_time, integrate, locate_event, BlowupEstimate, Event, EventKind, IntegratorConfig, Sample,
    Termination, Trajectory,
};
use crate::potentials::{default_v_star, Potential};
use crate::roots::bisect_predicate;
use crate::{Error, Result};

/// `|ρ∞|` below which a blow-up counts as generic.
pub const GENERICITY_TOL: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CollapseOutcome {
    BlowUp,
    ConvergedToCritical { phi_star: f64 },
    TimeLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseReport {
    pub outcome: CollapseOutcome,
    /// Extrapolated singularity time (blow-up only).
    pub t_s: Option<f64>,
    pub rho_inf: f64,
    pub generic: bool,
    pub settled: bool,
    /// First time with `ε ≥ 2V*`, for starts below that level.
    pub escape_time: Option<f64>,
    pub v_star: f64,
    /// Sign of `φ` at the end of the run: the direction of divergence.
    pub orientation: i8,
    pub final_eps: f64,
    pub final_phi: f64,
    pub final_v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CollapseOptions {
    pub t_max: f64,
    /// Level `V*` of the sublevel set; computed from the potential when absent.
    pub v_star: Option<f64>,
}

impl Default for CollapseOptions {
    fn default() -> Self {
        Self {
            t_max: 1e3,
            v_star: None,
        }
    }
}

fn resolve_v_star(p: &Potential, opts: &CollapseOptions) -> f64 {
    opts.v_star.unwrap_or_else(|| default_v_star(p, -20.0, 20.0, 4000))
}

pub fn run_collapse(
    s0: &FieldState,
    p: &Potential,
    cfg: &IntegratorConfig,
    opts: &CollapseOptions,
) -> Result<CollapseReport> {
    collapse(s0, p, cfg, opts).map(|(r, _)| r)
}

/// Runs the collapse branch and returns the report with its trajectory.
pub fn collapse(
    s0: &FieldState,
    p: &Potential,
    cfg: &IntegratorConfig,
    opts: &CollapseOptions,
) -> Result<(CollapseReport, Trajectory)> {
    if s0.chi != Branch::Collapsing {
        return Err(Error::Precondition("collapse analysis needs chi = -1".into()));
    }
    let vphi = p.value(s0.phi);
    let eps0 = clamp_energy(s0.v * s0.v + 2.0 * vphi, vphi, s0.phi)?;
    let v_star = resolve_v_star(p, opts);
    let traj = integrate(s0, p, cfg, opts.t_max)?;

    let escape_time = if eps0 < 2.0 * v_star {
        escape_time(&traj, p, 2.0 * v_star)
    } else {
        None
    };
    Ok((report_from(&traj, v_star, escape_time), traj))
}

fn report_from(traj: &Trajectory, v_star: f64, escape_time: Option<f64>) -> CollapseReport {
    let last = traj.last();
    let mut report = CollapseReport {
        outcome: CollapseOutcome::TimeLimit,
        t_s: None,
        rho_inf: f64::NAN,
        generic: false,
        settled: false,
        escape_time,
        v_star,
        orientation: if last.state.phi >= 0.0 { 1 } else { -1 },
        final_eps: last.eps(),
        final_phi: last.state.phi,
        final_v: last.state.v,
    };
    if let Some((_, b)) = traj.blowup() {
        report.outcome = CollapseOutcome::BlowUp;
        report.t_s = Some(b.t_s);
        report.rho_inf = b.rho_inf;
        report.settled = b.settled;
        report.generic = is_generic(&b);
    } else if let Some(phi_star) = traj.events.iter().find_map(|e| match e.kind {
        EventKind::ConvergedToCritical { phi_star } => Some(phi_star),
        _ => None,
    }) {
        report.outcome = CollapseOutcome::ConvergedToCritical { phi_star };
    }
    report
}

/// `|ρ∞| < 0.01` and `|ρ|` shrinking over the tail.
pub fn is_generic(b: &BlowupEstimate) -> bool {
    b.rho_inf.abs() < GENERICITY_TOL && b.decreasing
}

fn escape_time(traj: &Trajectory, p: &Potential, level: f64) -> Option<f64> {
    let k = traj.samples.iter().position(|s| s.eps() >= level)?;
    if k == 0 {
        return Some(traj.first().t());
    }
    let (a, b) = (traj.samples[k - 1].t(), traj.samples[k].t());
    locate_event(
        |t| match traj.interpolate(t, p) {
            Some(y) => y[3] * y[3] - level,
            None => f64::NAN,
        },
        a,
        b,
        1e-12 * (1.0 + b.abs()),
    )
    .ok()
    .or(Some(b))
}

/// `dρ/dφ = 2ρ√(3(1+ρ))(u√(1+ρ) − 1)` for `φ̇ > 0`.
///
/// For `φ̇ < 0` the run is reflected (`φ → −φ`, `V → V(−·)`) and the
/// derivative is returned with respect to the reflected variable `−φ`.
pub fn rho_flow_rhs(phi: f64, rho: f64, p: &Potential, direction: f64) -> Result<f64> {
    if rho < -1.0 {
        return Err(Error::Precondition(format!("rho = {rho} < -1")));
    }
    let u = p.u(phi)?;
    let u = if direction < 0.0 { -u } else { u };
    let w = (1.0 + rho).sqrt();
    Ok(2.0 * rho * SQRT3 * w * (u * w - 1.0))
}

/// `dy/dφ = √3(y²−1)(u y − 1)`.
#[inline]
pub fn y_flow_rhs(phi: f64, y: f64, p: &Potential) -> Result<f64> {
    Ok(SQRT3 * (y * y - 1.0) * (p.u(phi)? * y - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YCase {
    /// Eventually weakly decreasing toward 1 (generic).
    DecaysToOne,
    /// `|u y − 1|` comes arbitrarily close to zero (special branch).
    TracksSpecial,
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YFlow {
    /// `(φ, y)` in increasing `φ`.
    pub samples: Vec<(f64, f64)>,
    pub case: YCase,
}

/// `y` above which the flow is treated as escaping (`ε → 0`).
const Y_ESCAPE: f64 = 1e6;

fn y_solve(
    p: &Potential,
    phi0: f64,
    y0: f64,
    phi_end: f64,
    mut keep: impl FnMut(f64, f64),
) -> std::result::Result<(), f64> {
    let sys = |phi: f64, y: &[f64; 1], dy: &mut [f64; 1]| {
        dy[0] = SQRT3 * (y[0] * y[0] - 1.0) * (p.u(phi).unwrap_or(f64::NAN) * y[0] - 1.0);
    };
    let opts = SolveOptions {
        rtol: 1e-12,
        atol: 1e-14,
        max_step: 0.05,
        ..Default::default()
    };
    let mut escaped = None;
    let (_, _, end) = dopri::solve(&sys, phi0, [y0], phi_end, &opts, |acc| {
        keep(acc.x1, acc.y1[0]);
        if acc.y1[0] > Y_ESCAPE {
            escaped = Some(acc.x1);
            Flow::Stop
        } else {
            Flow::Continue
        }
    });
    match (escaped, end) {
        (Some(phi), _) => Err(phi),
        (None, SolveEnd::Underflow(phi)) | (None, SolveEnd::NonFinite(phi)) => Err(phi),
        _ => Ok(()),
    }
}

/// Integrates the `y` flow from `(φ₀, y₀)` to `φ_max > φ₀` and classifies the
/// outcome.
pub fn y_flow(phi0: f64, y0: f64, p: &Potential, phi_max: f64) -> Result<YFlow> {
    if !(y0 >= 1.0) {
        return Err(Error::Precondition(format!("y0 = {y0} < 1")));
    }
    if !(phi_max > phi0) {
        return Err(Error::Precondition("phi_max must exceed phi0".into()));
    }
    let mut samples = vec![(phi0, y0)];
    y_solve(p, phi0, y0, phi_max, |x, y| samples.push((x, y))).map_err(|phi| Error::Escape { phi })?;

    let tail = &samples[samples.len() - (samples.len() / 5).max(2)..];
    let decreasing = tail.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-13);
    let y_end = tail[tail.len() - 1].1;
    let min_gap = tail
        .iter()
        .map(|&(x, y)| p.u(x).map(|u| (u * y - 1.0).abs()).unwrap_or(f64::INFINITY))
        .fold(f64::INFINITY, f64::min);
    let case = if decreasing && y_end - 1.0 < 1e-3 {
        YCase::DecaysToOne
    } else if min_gap < 1e-3 {
        YCase::TracksSpecial
    } else {
        YCase::Undetermined
    };
    Ok(YFlow { samples, case })
}

/// Shoots on `y₀` at `φ₀`: bisection between decay to 1 and escape over
/// `span` units of `φ`.
pub fn shoot_special_y0(p: &Potential, phi0: f64, span: f64) -> Result<f64> {
    let escapes = |y0: f64| {
        let mut last = y0;
        match y_solve(p, phi0, y0, phi0 + span, |_, y| last = y) {
            Err(_) => true,
            Ok(()) => last > y0.max(2.0),
        }
    };
    let lo = 1.0 + 1e-12;
    let mut hi = 2.0;
    while !escapes(hi) {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::BracketNotFound { lo, hi });
        }
    }
    if escapes(lo) {
        return Err(Error::BracketNotFound { lo, hi });
    }
    let (a, b) = bisect_predicate(escapes, lo, hi, 1e-15 * hi);
    Ok(0.5 * (a + b))
}

/// Asymptotic `u` along `+∞`, analytic when known.
fn tail_u(p: &Potential) -> Result<f64> {
    if let Some(u) = p.analytic_asymptote_u() {
        return Ok(u);
    }
    p.u(50.0)
}

/// Special-branch trajectory with `φ → +∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpecialBranch {
    pub phi0: f64,
    pub y0: f64,
    pub trajectory: Trajectory,
    pub report: CollapseReport,
}

/// Builds the special collapsing branch through `φ₀` by backward
/// integration in `φ` from beyond the blow-up threshold.
///
/// The trajectory is parametrised by `φ`: `φ̇ = √(2V/(y²−1))`,
/// `dt/dφ = 1/φ̇`, `d(log a)/dφ = −y/√3`, `√ε = φ̇ y`.
pub fn special_branch(p: &Potential, phi0: f64, log_a0: f64, cfg: &IntegratorConfig) -> Result<SpecialBranch> {
    cfg.validate()?;
    let u_inf = tail_u(p)?;
    if !(u_inf > 0.0 && u_inf < 1.0) {
        return Err(Error::Precondition(format!(
            "special branch needs 0 < u(+inf) < 1, got {u_inf}"
        )));
    }
    if !(p.value(phi0) > 0.0) || !(p.u(phi0)? > 0.0) {
        return Err(Error::Precondition(
            "special branch needs V > 0 and u > 0 at phi0".into(),
        ));
    }
    let threshold = cfg.blowup_epsilon_threshold;
    let eps_on_branch = |phi: f64| {
        let u = p.u(phi).unwrap_or(u_inf);
        let y2 = 1.0 / (u * u);
        2.0 * p.value(phi) * y2 / (y2 - 1.0)
    };
    let mut phi_thr = phi0;
    while eps_on_branch(phi_thr) < 10.0 * threshold {
        phi_thr += 0.25;
        if phi_thr - phi0 > 1e4 {
            return Err(Error::Precondition(
                "potential grows too slowly to reach blow-up".into(),
            ));
        }
    }
    let repulsion = SQRT3 * (1.0 / (u_inf * u_inf) - 1.0) * u_inf;
    let phi_far = phi_thr + (40.0 / repulsion).clamp(2.0, 200.0);

    // ψ = φ_far − φ; state (y, T, A) with T = t(φ_far) − t(φ), A = log a(φ) − log a(φ_far).
    let sys = |psi: f64, s: &[f64; 3], ds: &mut [f64; 3]| {
        let phi = phi_far - psi;
        let y = s[0];
        let u = p.u(phi).unwrap_or(f64::NAN);
        let v = (2.0 * p.value(phi) / (y * y - 1.0)).sqrt();
        ds[0] = -SQRT3 * (y * y - 1.0) * (u * y - 1.0);
        ds[1] = 1.0 / v;
        ds[2] = y / SQRT3;
    };
    let opts = SolveOptions {
        rtol: cfg.rel_tol,
        atol: cfg.abs_tol,
        max_step: 0.02,
        ..Default::default()
    };
    let y_far = 1.0 / p.u(phi_far)?;
    let mut nodes: Vec<(f64, [f64; 3])> = vec![(phi_far, [y_far, 0.0, 0.0])];
    let (_, _, end) = dopri::solve(&sys, 0.0, [y_far, 0.0, 0.0], phi_far - phi0, &opts, |acc| {
        nodes.push((phi_far - acc.x1, acc.y1));
        Flow::Continue
    });
    if end != SolveEnd::Reached {
        return Err(Error::StepSizeUnderflow {
            t: f64::NAN,
            phi: nodes.last().map(|n| n.0).unwrap_or(phi0),
            eps: f64::NAN,
            h: 0.0,
        });
    }
    nodes.reverse();
    let (_, base) = nodes[0];
    let y0 = base[0];

    let mut samples = Vec::new();
    for &(phi, s) in &nodes {
        let y = s[0];
        let v = (2.0 * p.value(phi) / (y * y - 1.0)).sqrt();
        let state = FieldState {
            t: base[1] - s[1],
            phi,
            v,
            log_a: log_a0 + s[2] - base[2],
            chi: Branch::Collapsing,
        };
        let sigma = v * y;
        let derived = crate::dynamics::derived(&state, p);
        samples.push(Sample {
            state,
            sigma,
            derived,
            constraint_residual: (sigma * sigma - derived.eps) / 3.0,
        });
        if sigma * sigma >= threshold {
            break;
        }
    }
    let est = extrapolate_blowup_time(&samples, threshold)?;
    let last = *samples.last().expect("nonempty");
    let trajectory = Trajectory {
        events: vec![Event {
            t: last.t(),
            state: last.state,
            kind: EventKind::BlowUp(est),
        }],
        samples,
        termination: Termination::BlowUp,
    };
    let report = report_from(&trajectory, default_v_star(p, -20.0, 20.0, 4000), None);
    Ok(SpecialBranch {
        phi0,
        y0,
        trajectory,
        report,
    })
}

/// Collapsing state on the `y`-level `y` at `φ`, moving toward `+∞`.
pub fn state_from_y(p: &Potential, t: f64, phi: f64, y: f64, a: f64) -> Result<FieldState> {
    let vphi = p.value(phi);
    if !(y > 1.0) || !(vphi > 0.0) {
        return Err(Error::Precondition("state_from_y needs y > 1 and V > 0".into()));
    }
    FieldState::new(t, phi, (2.0 * vphi / (y * y - 1.0)).sqrt(), a, Branch::Collapsing)
}

/// Uniform box of initial data; draws with `ε₀ < 0` or `ε₀ > eps_max` are rejected.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataDistribution {
    pub phi: (f64, f64),
    pub v: (f64, f64),
    pub a0: f64,
    pub chi: Branch,
    #[serde(default)]
    pub eps_max: Option<f64>,
}

impl Default for DataDistribution {
    fn default() -> Self {
        Self {
            phi: (-2.0, 2.0),
            v: (-3.0, 3.0),
            a0: 1.0,
            chi: Branch::Collapsing,
            eps_max: None,
        }
    }
}

/// Draws sample `index` of a sweep. Each index owns its own ChaCha stream,
/// so results do not depend on evaluation order.
pub fn sample_initial_data(p: &Potential, dist: &DataDistribution, seed: u64, index: u64) -> Result<FieldState> {
    if !(dist.phi.1 >= dist.phi.0) || !(dist.v.1 >= dist.v.0) {
        return Err(Error::Precondition("empty data distribution".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
        if hi > lo {
            rng.random_range(lo..hi)
        } else {
            lo
        }
    };
    for _ in 0..10_000 {
        let phi = draw(&mut rng, dist.phi);
        let v = draw(&mut rng, dist.v);
        let eps = v * v + 2.0 * p.value(phi);
        if eps >= 0.0 && dist.eps_max.is_none_or(|m| eps <= m) {
            return FieldState::new(0.0, phi, v, dist.a0, dist.chi);
        }
    }
    Err(Error::Precondition(
        "distribution has (almost) no admissible data with eps >= 0".into(),
    ))
}

/// Applies `f` to `count` sampled initial data in parallel; results come back
/// in index order.
pub fn sweep_map<T, F>(
    p: &Potential,
    count: usize,
    dist: &DataDistribution,
    seed: u64,
    f: F,
) -> Vec<(FieldState, Result<T>)>
where
    T: Send,
    F: Fn(&FieldState) -> Result<T> + Sync,
{
    (0..count as u64)
        .into_par_iter()
        .map(|i| match sample_initial_data(p, dist, seed, i) {
            Ok(s0) => {
                let r = f(&s0);
                (s0, r)
            }
            Err(e) => (
                FieldState {
                    t: 0.0,
                    phi: f64::NAN,
                    v: f64::NAN,
                    log_a: 0.0,
                    chi: dist.chi,
                },
                Err(e),
            ),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub fraction_generic: f64,
    pub reports: Vec<(FieldState, Option<CollapseReport>)>,
}

/// Fraction of random collapse data whose blow-up is generic.
pub fn genericity_sweep(
    p: &Potential,
    sample_count: usize,
    dist: &DataDistribution,
    cfg: &IntegratorConfig,
    opts: &CollapseOptions,
    seed: u64,
) -> Result<SweepSummary> {
    if sample_count < 100 {
        return Err(Error::Precondition(format!("sample_count = {sample_count} < 100")));
    }
    let dist = DataDistribution {
        chi: Branch::Collapsing,
        ..*dist
    };
    let v_star = resolve_v_star(p, opts);
    let opts = CollapseOptions {
        v_star: Some(v_star),
        ..*opts
    };
    let results = sweep_map(p, sample_count, &dist, seed, |s0| run_collapse(s0, p, cfg, &opts));
    let generic = results
        .iter()
        .filter(|(_, r)| matches!(r, Ok(rep) if rep.generic))
        .count();
    Ok(SweepSummary {
        fraction_generic: generic as f64 / sample_count as f64,
        reports: results.into_iter().map(|(s, r)| (s, r.ok())).collect(),
    })
}

/// Penalized and limit solutions of the zero-energy Cauchy problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroEnergySolution {
    /// `(t, φ, φ̇)` of the selected solution on a uniform grid over `[0, t*]`.
    pub samples: Vec<(f64, f64, f64)>,
    pub levels: Vec<u64>,
    /// `sup |φ_{n_k} − φ_{n_{k+1}}|` for consecutive levels.
    pub level_differences: Vec<f64>,
    /// `sup |φ_n − φ|` against the returned solution, per level.
    pub limit_distances: Vec<f64>,
    /// `sup |√ε_n − 1/n − √3∫v_n²|` per level.
    pub integral_law_defects: Vec<f64>,
    /// `sup |ε − 3(∫v²)²|` on the returned solution.
    pub selection_defect: f64,
}

const ZERO_ENERGY_GRID: usize = 400;

/// Integrates `(φ, φ̇, ∫φ̇²)` and records values on a uniform grid.
fn grid_solve<S: dopri::OdeSystem<3>>(
    sys: &S,
    y0: [f64; 3],
    t_star: f64,
    cfg: &IntegratorConfig,
) -> Result<Vec<[f64; 3]>> {
    let grid: Vec<f64> = (0..=ZERO_ENERGY_GRID)
        .map(|k| t_star * k as f64 / ZERO_ENERGY_GRID as f64)
        .collect();
    let mut out = vec![y0];
    let mut next = 1;
    let opts = SolveOptions {
        rtol: cfg.rel_tol,
        atol: cfg.abs_tol,
        max_step: cfg.max_step,
        ..Default::default()
    };
    let (_, y_end, end) = dopri::solve(sys, 0.0, y0, t_star, &opts, |acc| {
        while next < grid.len() && grid[next] <= acc.x1 {
            out.push(if grid[next] == acc.x1 {
                acc.y1
            } else {
                acc.interpolate(grid[next])
            });
            next += 1;
        }
        Flow::Continue
    });
    if end != SolveEnd::Reached {
        return Err(Error::LevelsNotConverging(format!(
            "integration stopped early: {end:?}"
        )));
    }
    while out.len() < grid.len() {
        out.push(y_end);
    }
    Ok(out)
}

/// Solves the collapse problem from `ε(0) = 0`.
///
/// Each level `n` integrates the penalized equation
/// `φ̈ = −V' + √3·√(φ̇² + 2V + 1/n²)·φ̇` and checks the law
/// `√ε_n = 1/n + √3∫φ̇²`. The returned samples are the limit solution,
/// integrated with `√ε = √3∫φ̇²` carried as a state variable.
pub fn solve_zero_energy(
    phi0: f64,
    v0: f64,
    p: &Potential,
    n_levels: &[u64],
    t_star: f64,
    cfg: &IntegratorConfig,
) -> Result<ZeroEnergySolution> {
    let pv = p.eval(phi0);
    let eps0 = v0 * v0 + 2.0 * pv.v;
    if eps0.abs() > 1e-10 * (1.0 + pv.v.abs()) {
        return Err(Error::Precondition(format!("initial energy {eps0:e} is not zero")));
    }
    if v0 == 0.0 && pv.dv == 0.0 {
        return Err(Error::Precondition(
            "v0 = 0 at a critical point with V = 0: only the static solution exists".into(),
        ));
    }
    if !(t_star > 0.0) || n_levels.is_empty() || n_levels.contains(&0) {
        return Err(Error::Precondition("need t* > 0 and positive levels".into()));
    }

    let limit_sys = |_t: f64, y: &[f64; 3], dy: &mut [f64; 3]| {
        let sigma = SQRT3 * y[2];
        dy[0] = y[1];
        dy[1] = -p.derivative(y[0]) + SQRT3 * sigma * y[1];
        dy[2] = y[1] * y[1];
    };
    let limit = grid_solve(&limit_sys, [phi0, v0, 0.0], t_star, cfg)?;

    let mut level_grids = Vec::with_capacity(n_levels.len());
    let mut integral_law_defects = Vec::with_capacity(n_levels.len());
    for &n in n_levels {
        let pen = 1.0 / (n as f64 * n as f64);
        let sys = move |_t: f64, y: &[f64; 3], dy: &mut [f64; 3]| {
            let eps_n = (y[1] * y[1] + 2.0 * p.value(y[0]) + pen).max(0.0);
            dy[0] = y[1];
            dy[1] = -p.derivative(y[0]) + SQRT3 * eps_n.sqrt() * y[1];
            dy[2] = y[1] * y[1];
        };
        let g = grid_solve(&sys, [phi0, v0, 0.0], t_star, cfg)?;
        let defect = g
            .iter()
            .map(|y| {
                let eps_n = y[1] * y[1] + 2.0 * p.value(y[0]) + pen;
                (eps_n.max(0.0).sqrt() - 1.0 / n as f64 - SQRT3 * y[2]).abs()
            })
            .fold(0.0, f64::max);
        integral_law_defects.push(defect);
        level_grids.push(g);
    }

    let sup_diff =
        |a: &[[f64; 3]], b: &[[f64; 3]]| a.iter().zip(b).map(|(x, y)| (x[0] - y[0]).abs()).fold(0.0, f64::max);
    let level_differences: Vec<f64> = level_grids.windows(2).map(|w| sup_diff(&w[0], &w[1])).collect();
    let limit_distances: Vec<f64> = level_grids.iter().map(|g| sup_diff(g, &limit)).collect();
    if level_differences.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::LevelsNotConverging(format!(
            "consecutive sup-norm differences {level_differences:?} do not shrink"
        )));
    }

    let selection_defect = limit
        .iter()
        .map(|y| (y[1] * y[1] + 2.0 * p.value(y[0]) - 3.0 * y[2] * y[2]).abs())
        .fold(0.0, f64::max);
    let samples = limit
        .iter()
        .enumerate()
        .map(|(k, y)| (t_star * k as f64 / ZERO_ENERGY_GRID as f64, y[0], y[1]))
        .collect();
    Ok(ZeroEnergySolution {
        samples,
        levels: n_levels.to_vec(),
        level_differences,
        limit_distances,
        integral_law_defects,
        selection_defect,
    })
}
