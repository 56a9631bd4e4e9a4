//! Expanding solutions: energy-zero exits, convergence to critical points,
//! saddle linearization and separatrix shooting.

use serde::{Deserialize, Serialize};

use crate::dynamics::{clamp_energy, Branch, FieldState, SQRT3};
use crate::integrator::dopri::{self, Flow, SolveOptions};
use crate::integrator::{integrate, EventKind, IntegratorConfig, Trajectory};
use crate::potentials::Potential;
use crate::roots::bisect_predicate;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VerdictKind {
    EnergyZeroExit { t: f64, potential: f64 },
    ConvergesToMinimum { phi_star: f64 },
    ConvergesToMaximum { phi_star: f64 },
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpansionVerdict {
    pub kind: VerdictKind,
    pub final_phi: f64,
    pub final_v: f64,
    pub final_eps: f64,
    pub oscillations: usize,
}

/// Runs an expanding solution and classifies its fate.
pub fn classify_expanding(
    s0: &FieldState,
    p: &Potential,
    cfg: &IntegratorConfig,
    t_max: f64,
) -> Result<ExpansionVerdict> {
    expand(s0, p, cfg, t_max).map(|(v, _)| v)
}

/// As [`classify_expanding`], also returning the trajectory.
pub fn expand(
    s0: &FieldState,
    p: &Potential,
    cfg: &IntegratorConfig,
    t_max: f64,
) -> Result<(ExpansionVerdict, Trajectory)> {
    if s0.chi != Branch::Expanding {
        return Err(Error::Precondition("expanding analysis needs chi = +1".into()));
    }
    let vphi = p.value(s0.phi);
    let eps0 = clamp_energy(s0.v * s0.v + 2.0 * vphi, vphi, s0.phi)?;
    if eps0 <= 0.0 {
        return Err(Error::Precondition(format!(
            "expanding analysis needs eps > 0 (got {eps0:e} at phi = {})",
            s0.phi
        )));
    }
    let traj = integrate(s0, p, cfg, t_max)?;

    let mut kind = VerdictKind::Inconclusive;
    for e in &traj.events {
        match e.kind {
            EventKind::EnergyZero { potential, .. } => {
                kind = VerdictKind::EnergyZeroExit { t: e.t, potential };
                break;
            }
            EventKind::ConvergedToCritical { phi_star } => {
                kind = if is_local_minimum(p, phi_star) {
                    VerdictKind::ConvergesToMinimum { phi_star }
                } else {
                    VerdictKind::ConvergesToMaximum { phi_star }
                };
                break;
            }
            _ => {}
        }
    }

    // Diagnostics refer to the expanding part of the run.
    let end = traj
        .samples
        .iter()
        .rposition(|s| s.state.chi == Branch::Expanding)
        .unwrap_or(0);
    let last = &traj.samples[end];
    let oscillations = match kind {
        VerdictKind::ConvergesToMinimum { phi_star } => sign_changes(&traj, phi_star, end + 1),
        _ => 0,
    };
    Ok((
        ExpansionVerdict {
            kind,
            final_phi: last.state.phi,
            final_v: last.state.v,
            final_eps: last.eps(),
            oscillations,
        },
        traj,
    ))
}

fn is_local_minimum(p: &Potential, phi: f64) -> bool {
    let ddv = p.second_derivative(phi);
    if ddv != 0.0 {
        return ddv > 0.0;
    }
    let h = 1e-3 * (1.0 + phi.abs());
    let v = p.value(phi);
    p.value(phi - h) >= v && p.value(phi + h) >= v
}

fn sign_changes(traj: &Trajectory, phi_star: f64, upto: usize) -> usize {
    let mut count = 0;
    let mut prev = 0.0f64;
    for s in &traj.samples[..upto.min(traj.samples.len())] {
        let d = s.state.phi - phi_star;
        if d != 0.0 {
            if prev != 0.0 && d.signum() != prev.signum() {
                count += 1;
            }
            prev = d;
        }
    }
    count
}

/// Eigen-decomposition of a 2×2 linearization in `(δφ̇, δφ)` coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaddleLinearization {
    /// `[unstable, stable]`.
    pub eigenvalues: [f64; 2],
    /// Unit eigenvectors `(δφ̇, δφ)` matching `eigenvalues`.
    pub eigenvectors: [[f64; 2]; 2],
}

fn saddle_from_coefficients(damping: f64, ddv: f64) -> SaddleLinearization {
    // λ² + damping·λ + V'' = 0 with V'' < 0.
    let disc = (damping * damping - 4.0 * ddv).sqrt();
    let q = -0.5 * (damping + disc);
    let stable = q;
    let unstable = ddv / q;
    let vec = |l: f64| {
        let n = (l * l + 1.0).sqrt();
        [l / n, 1.0 / n]
    };
    SaddleLinearization {
        eigenvalues: [unstable, stable],
        eigenvectors: [vec(unstable), vec(stable)],
    }
}

fn check_maximum(p: &Potential, phi_star: f64) -> Result<(f64, f64)> {
    let pv = p.eval(phi_star);
    let tol = 1e-8 * (1.0 + pv.v.abs());
    if pv.dv.abs() > tol || !(pv.ddv < 0.0) || pv.v < -tol {
        return Err(Error::Precondition(format!(
            "phi* = {phi_star} is not a nondegenerate maximum with V >= 0 (V = {}, V' = {:e}, V'' = {})",
            pv.v, pv.dv, pv.ddv
        )));
    }
    Ok((pv.v.max(0.0), pv.ddv))
}

/// Eigenpairs of `[[−√(2V*), −V''*], [1, 0]]` at a nondegenerate maximum.
pub fn saddle_linearization(p: &Potential, phi_star: f64) -> Result<SaddleLinearization> {
    let (v, ddv) = check_maximum(p, phi_star)?;
    Ok(saddle_from_coefficients((2.0 * v).sqrt(), ddv))
}

/// Linearization of the expanding flow itself, with damping `√3·√(2V*)`.
pub fn flow_linearization(p: &Potential, phi_star: f64) -> Result<SaddleLinearization> {
    let (v, ddv) = check_maximum(p, phi_star)?;
    Ok(saddle_from_coefficients(SQRT3 * (2.0 * v).sqrt(), ddv))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Left => -1.0,
            Side::Right => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Separatrix {
    pub phi0: f64,
    pub v0: f64,
    /// Final bisection bracket on `v₀`.
    pub bracket: (f64, f64),
    /// Initial velocity range that was searched.
    pub search_range: (f64, f64),
    /// Time the returned solution stays within `delta` of `φ*`.
    pub horizon: f64,
    pub delta: f64,
}

/// Fate of a shot toward a maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShotOutcome {
    Overshoots,
    FallsBack,
    Undecided,
}

/// Shoots from `(φ₀, v₀)` on the expanding branch and reports whether `φ`
/// crosses `φ*` or turns back, together with the time spent within `delta`
/// of `φ*`.
pub fn shoot(
    p: &Potential,
    phi_star: f64,
    phi0: f64,
    v0: f64,
    delta: f64,
    t_max: f64,
    cfg: &IntegratorConfig,
) -> (ShotOutcome, f64) {
    let side = (phi0 - phi_star).signum();
    let vphi = p.value(phi0);
    let sigma0 = (v0 * v0 + 2.0 * vphi).max(0.0).sqrt();
    let sys = |_t: f64, y: &[f64; 3], dy: &mut [f64; 3]| {
        dy[0] = y[1];
        dy[1] = -p.derivative(y[0]) - SQRT3 * y[2] * y[1];
        dy[2] = -SQRT3 * y[1] * y[1];
    };
    let opts = SolveOptions {
        rtol: cfg.rel_tol,
        atol: cfg.abs_tol,
        max_step: cfg.max_step.max(0.1),
        ..Default::default()
    };
    let mut outcome = ShotOutcome::Undecided;
    let mut near_until = 0.0;
    dopri::solve(&sys, 0.0, [phi0, v0, sigma0], t_max, &opts, |acc| {
        let d = acc.y1[0] - phi_star;
        if d.abs() <= delta {
            near_until = acc.x1;
        }
        if d * side < 0.0 {
            outcome = ShotOutcome::Overshoots;
            return Flow::Stop;
        }
        if acc.y1[1] * side > 0.0 {
            outcome = ShotOutcome::FallsBack;
            return Flow::Stop;
        }
        Flow::Continue
    });
    (outcome, near_until)
}

/// Locates the initial velocity at `φ₀ = φ* ± δ` whose expanding solution
/// converges to the maximum `φ*`, by bisection between overshooting and
/// falling back.
pub fn find_separatrix(
    p: &Potential,
    phi_star: f64,
    side: Side,
    delta: f64,
    max_speed: f64,
    cfg: &IntegratorConfig,
) -> Result<Separatrix> {
    check_maximum(p, phi_star)?;
    if !(delta > 0.0) || !(max_speed > 0.0) {
        return Err(Error::Precondition("delta and max_speed must be positive".into()));
    }
    let phi0 = phi_star + side.sign() * delta;
    let toward = -side.sign();
    let t_max = 400.0;
    let fate = |speed: f64| shoot(p, phi_star, phi0, toward * speed, delta, t_max, cfg).0;

    let (lo, hi) = (0.0, max_speed);
    if fate(lo) != ShotOutcome::FallsBack || fate(hi) != ShotOutcome::Overshoots {
        return Err(Error::BracketNotFound {
            lo: toward * lo,
            hi: toward * hi,
        });
    }
    let (s_lo, s_hi) = bisect_predicate(
        |s| fate(s) != ShotOutcome::FallsBack,
        lo,
        hi,
        4.0 * f64::EPSILON * max_speed,
    );
    let speed = 0.5 * (s_lo + s_hi);
    let v0 = toward * speed;
    let (_, horizon) = shoot(p, phi_star, phi0, v0, delta, t_max, cfg);
    Ok(Separatrix {
        phi0,
        v0,
        bracket: (toward * s_lo, toward * s_hi),
        search_range: (toward * lo, toward * hi),
        horizon,
        delta,
    })
}

/// Number of sign changes of `φ − φ*` along a run converging to a minimum
/// with `V(φ*) = 0`.
pub fn count_oscillations(traj: &Trajectory, p: &Potential, phi_star: f64) -> Result<usize> {
    let pv = p.eval(phi_star);
    if pv.v.abs() > 1e-10 || !(pv.ddv > 0.0) || pv.dv.abs() > 1e-8 {
        return Err(Error::Precondition(format!(
            "oscillation count needs a nondegenerate minimum with V = 0 (V = {}, V'' = {})",
            pv.v, pv.ddv
        )));
    }
    Ok(sign_changes(traj, phi_star, traj.samples.len()))
}

/// `true` when `|φ̇|` over the last `window` is below its maximum over the
/// first `window` and both `|φ̇|` and `|V'(φ)|` end below `tol`.
pub fn velocity_decay_check(traj: &Trajectory, p: &Potential, window: f64, tol: f64) -> bool {
    let (t0, t1) = (traj.first().t(), traj.last().t());
    let max_v = |pred: &dyn Fn(f64) -> bool| {
        traj.samples
            .iter()
            .filter(|s| pred(s.t()))
            .map(|s| s.state.v.abs())
            .fold(0.0, f64::max)
    };
    let first = max_v(&|t| t <= t0 + window);
    let last = max_v(&|t| t >= t1 - window);
    let end = traj.last();
    let shrinking = last < first || (first == 0.0 && last == 0.0);
    shrinking && end.state.v.abs() < tol && p.derivative(end.state.phi).abs() < tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{figure1, quadratic};
    use approx::assert_relative_eq;

    fn expanding(phi: f64, v: f64) -> FieldState {
        FieldState::new(0.0, phi, v, 1.0, Branch::Expanding).unwrap()
    }

    fn saddle(v: f64, ddv: f64) -> Potential {
        // V = v + ddv·φ²/2 near φ* = 0.
        Potential::new("saddle", move |x| [v + 0.5 * ddv * x * x, ddv * x, ddv])
    }

    #[test]
    fn saddle_eigenvalues() {
        let l = saddle_linearization(&saddle(0.0, -2.0), 0.0).unwrap();
        assert_relative_eq!(l.eigenvalues[0], 2f64.sqrt(), max_relative = 1e-14);
        assert_relative_eq!(l.eigenvalues[1], -(2f64.sqrt()), max_relative = 1e-14);

        let l = saddle_linearization(&saddle(2.0, -2.0), 0.0).unwrap();
        assert_relative_eq!(l.eigenvalues[0], -1.0 + 3f64.sqrt(), max_relative = 1e-12);
        assert_relative_eq!(l.eigenvalues[1], -1.0 - 3f64.sqrt(), max_relative = 1e-12);

        let l = saddle_linearization(&figure1(), 0.0).unwrap();
        let (a, b) = (
            (10f64.sqrt() - 2f64.sqrt()) / 2.0,
            (-(2f64.sqrt()) - 10f64.sqrt()) / 2.0,
        );
        assert_relative_eq!(l.eigenvalues[0], a, max_relative = 1e-12);
        assert_relative_eq!(l.eigenvalues[1], b, max_relative = 1e-12);
        assert_relative_eq!(l.eigenvalues[0], 0.874_032_048_898_302_6, max_relative = 1e-12);
    }

    #[test]
    fn saddle_spectral_invariants() {
        for (v, ddv) in [(0.0, -1.0), (0.3, -5.0), (7.0, -0.01), (1.0, -2.0)] {
            let l = saddle_linearization(&saddle(v, ddv), 0.0).unwrap();
            let [a, b] = l.eigenvalues;
            assert_relative_eq!(a * b, ddv, max_relative = 1e-12);
            assert_relative_eq!(a + b, -(2.0 * v).sqrt(), max_relative = 1e-12, epsilon = 1e-15);
            for (lam, vec) in l.eigenvalues.iter().zip(l.eigenvectors) {
                // M·x = λx with M = [[−√(2V), −V''], [1, 0]].
                let mx = [-(2.0 * v).sqrt() * vec[0] - ddv * vec[1], vec[0]];
                assert_relative_eq!(mx[0], lam * vec[0], epsilon = 1e-12);
                assert_relative_eq!(mx[1], lam * vec[1], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn non_maximum_rejected() {
        assert!(saddle_linearization(&quadratic(1.0, 0.0), 0.0).is_err());
        assert!(saddle_linearization(&saddle(-1.0, -2.0), 0.0).is_err());
    }

    #[test]
    fn quadratic_converges_to_minimum() {
        let cfg = IntegratorConfig {
            convergence_tol: 2e-2,
            ..Default::default()
        };
        let v = classify_expanding(&expanding(1.0, 0.0), &quadratic(1.0, 0.0), &cfg, 1000.0).unwrap();
        match v.kind {
            VerdictKind::ConvergesToMinimum { phi_star } => assert!(phi_star.abs() < 1e-12),
            k => panic!("{k:?}"),
        }
        assert!(v.oscillations >= 10);
    }

    #[test]
    fn negative_well_exits_through_energy_zero() {
        let p = figure1().shifted(-2.0);
        let v = classify_expanding(&expanding(0.7, 1.6), &p, &IntegratorConfig::default(), 100.0).unwrap();
        match v.kind {
            VerdictKind::EnergyZeroExit { potential, .. } => assert!(potential < 0.0),
            k => panic!("{k:?}"),
        }
    }

    #[test]
    fn static_start_rejected() {
        let r = classify_expanding(
            &expanding(0.0, 0.0),
            &quadratic(1.0, 0.0),
            &IntegratorConfig::default(),
            10.0,
        );
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn oscillations_grow_with_horizon() {
        let p = quadratic(1.0, 0.0);
        let cfg = IntegratorConfig {
            stop_on_convergence: false,
            ..Default::default()
        };
        let count = |t: f64| {
            let traj = integrate(&expanding(1.0, 0.0), &p, &cfg, t).unwrap();
            count_oscillations(&traj, &p, 0.0).unwrap()
        };
        let (c50, c100) = (count(50.0), count(100.0));
        assert!(c50 >= 10 && c100 > c50, "{c50} {c100}");
        assert_eq!(count(0.5), 0);
        assert!(count_oscillations(
            &integrate(&expanding(1.0, 0.0), &quadratic(1.0, 1.0), &cfg, 5.0).unwrap(),
            &quadratic(1.0, 1.0),
            0.0
        )
        .is_err());
    }

    #[test]
    fn velocity_decays() {
        let p = quadratic(1.0, 0.0);
        let cfg = IntegratorConfig {
            stop_on_convergence: false,
            ..Default::default()
        };
        let traj = integrate(&expanding(1.0, 0.0), &p, &cfg, 400.0).unwrap();
        assert!(velocity_decay_check(&traj, &p, 20.0, 1e-2));
        let still = integrate(&expanding(0.0, 0.0), &p, &cfg, 50.0).unwrap();
        assert!(velocity_decay_check(&still, &p, 20.0, 1e-12));
    }

    #[test]
    fn separatrix_follows_stable_direction() {
        let p = figure1();
        let cfg = IntegratorConfig::default();
        let delta = 1e-3;
        let sep = find_separatrix(&p, 0.0, Side::Right, delta, 1.0, &cfg).unwrap();
        let stable = flow_linearization(&p, 0.0).unwrap().eigenvalues[1];
        assert_relative_eq!(sep.v0, stable * delta, max_relative = 2e-2);
        let (lo, _) = shoot(&p, 0.0, sep.phi0, sep.v0 - 1e-3, delta, 100.0, &cfg);
        let (hi, _) = shoot(&p, 0.0, sep.phi0, sep.v0 + 1e-3, delta, 100.0, &cfg);
        assert_eq!(lo, ShotOutcome::Overshoots);
        assert_eq!(hi, ShotOutcome::FallsBack);
        // Linear-regime residence time.
        assert!(sep.horizon >= (1.0 / stable.abs()) * (delta / 1e-10f64).ln());
    }
}
