//! Adaptive integration of the field system with event location.
//!
//! The integrated state is `(t, φ, φ̇, log a, σ)` with `σ = √ε` carried as an
//! independent variable:
//!
//! ```text
//! σ̇ = −χ√3 φ̇²        φ̈ = −V'(φ) − χ√3 σ φ̇        d(log a)/dt = χ σ/√3
//! ```
//!
//! `σ² − (φ̇² + 2V)` is conserved by the flow and reported as the constraint
//! residual. Carrying `σ` turns the energy-zero event into a transversal zero
//! crossing. Once `ε` exceeds [`IntegratorConfig::rescale_threshold`] the
//! clock switches to `dτ = σ dt`.

pub mod dopri;

use serde::{Deserialize, Serialize};

use crate::dynamics::{clamp_energy, energy_clamp_tol, Branch, DerivedQuantities, FieldState, SQRT3};
use crate::potentials::Potential;
use crate::roots::brent;
use crate::{Error, Result};

use dopri::{hermite, initial_step, next_step_size, step, OdeSystem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// Largest step in the integration clock (comoving or rescaled time).
    pub max_step: f64,
    pub blowup_epsilon_threshold: f64,
    /// Time span over which `|φ̇|` and `|V'|` must stay below
    /// `convergence_tol` to report convergence to a critical point.
    pub convergence_window: f64,
    pub convergence_tol: f64,
    pub event_refine_tol: f64,
    /// `ε` above which the clock switches to `dτ = √ε dt`.
    pub rescale_threshold: f64,
    pub stop_on_convergence: bool,
    /// Terminate with `DomainExit` once `|φ|` exceeds this.
    pub phi_limit: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_step: 0.05,
            blowup_epsilon_threshold: 1e8,
            convergence_window: 20.0,
            convergence_tol: 1e-8,
            event_refine_tol: 1e-12,
            rescale_threshold: 1e4,
            stop_on_convergence: true,
            phi_limit: f64::INFINITY,
            max_steps: 5_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("convergence_window", self.convergence_window),
            ("convergence_tol", self.convergence_tol),
            ("event_refine_tol", self.event_refine_tol),
            ("rescale_threshold", self.rescale_threshold),
            ("phi_limit", self.phi_limit),
        ];
        for (name, value) in positive {
            if !(value > 0.0) {
                return Err(Error::InvalidParameter {
                    name: name.into(),
                    value,
                    reason: "must be positive".into(),
                });
            }
        }
        if !(self.blowup_epsilon_threshold > 1.0) {
            return Err(Error::InvalidParameter {
                name: "blowup_epsilon_threshold".into(),
                value: self.blowup_epsilon_threshold,
                reason: "must exceed 1".into(),
            });
        }
        if self.max_steps == 0 {
            return Err(Error::Precondition("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Kind-specific event data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    /// `ε` reached zero. `potential` is `V(φ(T))`; `flipped` tells whether the
    /// branch switched to collapse (`V < 0`) or the run stopped on the
    /// `V = 0` boundary where uniqueness may fail.
    EnergyZero {
        potential: f64,
        flipped: bool,
    },
    /// `ε` crossed the blow-up threshold.
    BlowUp(BlowupEstimate),
    HorizonCrossing {
        r_b: f64,
    },
    ConvergedToCritical {
        phi_star: f64,
    },
    DomainExit {
        bound: f64,
    },
}

impl EventKind {
    pub fn label(&self) -> &'static str {
        match self {
            EventKind::EnergyZero { .. } => "energy_zero",
            EventKind::BlowUp(_) => "blow_up",
            EventKind::HorizonCrossing { .. } => "horizon_crossing",
            EventKind::ConvergedToCritical { .. } => "converged_to_critical",
            EventKind::DomainExit { .. } => "domain_exit",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub t: f64,
    pub state: FieldState,
    pub kind: EventKind,
}

/// Extrapolated singularity time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlowupEstimate {
    pub t_s: f64,
    pub rho_inf: f64,
    /// `false` when `ρ` had not settled; `t_s` is then the raw crossing time.
    pub settled: bool,
    /// `|ρ|` shrank from the earlier to the later half of the tail.
    pub decreasing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    TMax,
    BlowUp,
    ConvergedToCritical,
    /// Energy reached zero where `V = 0`; the run stops instead of flipping.
    EnergyZeroBoundary,
    DomainExit,
}

/// One accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub state: FieldState,
    /// Carried `√ε`.
    pub sigma: f64,
    pub derived: DerivedQuantities,
    /// `(ȧ/a)² − ε/3` with `ȧ/a = χσ/√3`.
    pub constraint_residual: f64,
}

impl Sample {
    fn new(y: &[f64; 5], chi: Branch, p: &Potential) -> Self {
        let state = FieldState {
            t: y[0],
            phi: y[1],
            v: y[2],
            log_a: y[3],
            chi,
        };
        let sigma = y[4];
        let derived = crate::dynamics::derived(&state, p);
        Self {
            state,
            sigma,
            derived,
            constraint_residual: (sigma * sigma - derived.eps) / 3.0,
        }
    }

    #[inline]
    pub fn t(&self) -> f64 {
        self.state.t
    }

    /// `ε` from the carried `σ`.
    #[inline]
    pub fn eps(&self) -> f64 {
        self.sigma * self.sigma
    }

    #[inline]
    pub fn hubble(&self) -> f64 {
        self.state.chi.sign() * self.sigma / SQRT3
    }

    #[inline]
    pub fn adot(&self) -> f64 {
        self.hubble() * self.state.a()
    }

    /// `dε/dt = −2χ√3 σ φ̇²`.
    #[inline]
    pub fn eps_rate(&self) -> f64 {
        -2.0 * self.state.chi.sign() * SQRT3 * self.sigma * self.state.v * self.state.v
    }

    /// `ä = −(ȧ² + a²(φ̇² − 2V))/(2a)`.
    pub fn addot(&self, p: &Potential) -> f64 {
        let a = self.state.a();
        let adot = self.adot();
        let v = self.state.v;
        -(adot * adot + a * a * (v * v - 2.0 * p.value(self.state.phi))) / (2.0 * a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub events: Vec<Event>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    pub fn blowup(&self) -> Option<(&Event, BlowupEstimate)> {
        self.events.iter().find_map(|e| match e.kind {
            EventKind::BlowUp(b) => Some((e, b)),
            _ => None,
        })
    }

    /// Time derivatives `(φ̇, φ̈, d log a/dt, σ̇)` at a sample.
    pub fn time_derivatives(&self, i: usize, p: &Potential) -> [f64; 4] {
        let s = &self.samples[i];
        let chi = s.state.chi.sign();
        let v = s.state.v;
        [
            v,
            -p.derivative(s.state.phi) - chi * SQRT3 * s.sigma * v,
            chi * s.sigma / SQRT3,
            -chi * SQRT3 * v * v,
        ]
    }

    /// Cubic Hermite interpolation of `(φ, φ̇, log a, σ)` at time `t`.
    ///
    /// Returns `None` outside the sampled span or across an energy-zero flip.
    pub fn interpolate(&self, t: f64, p: &Potential) -> Option<[f64; 4]> {
        let n = self.samples.len();
        if n == 0 || t < self.samples[0].t() || t > self.samples[n - 1].t() {
            return None;
        }
        let k = self.samples.partition_point(|s| s.t() < t);
        if k == 0 {
            let s = &self.samples[0];
            return Some([s.state.phi, s.state.v, s.state.log_a, s.sigma]);
        }
        let (a, b) = (&self.samples[k - 1], &self.samples[k]);
        if a.state.chi != b.state.chi {
            return None;
        }
        let (fa, fb) = (self.time_derivatives(k - 1, p), self.time_derivatives(k, p));
        let ya = [a.state.phi, a.state.v, a.state.log_a, a.sigma];
        let yb = [b.state.phi, b.state.v, b.state.log_a, b.sigma];
        let mut out = [0.0; 4];
        for i in 0..4 {
            out[i] = hermite(a.t(), ya[i], fa[i], b.t(), yb[i], fb[i], t);
        }
        Some(out)
    }
}

/// Right-hand side in the integration clock.
struct FieldSystem<'a> {
    p: &'a Potential,
    chi: f64,
    rescaled: bool,
}

impl OdeSystem<5> for FieldSystem<'_> {
    fn rhs(&self, _s: f64, y: &[f64; 5], dy: &mut [f64; 5]) {
        let (phi, v, sigma) = (y[1], y[2], y[4]);
        let w = if self.rescaled {
            1.0 / sigma.max(f64::MIN_POSITIVE)
        } else {
            1.0
        };
        dy[0] = w;
        dy[1] = w * v;
        dy[2] = w * (-self.p.derivative(phi) - self.chi * SQRT3 * sigma * v);
        dy[3] = w * self.chi * sigma / SQRT3;
        dy[4] = -w * self.chi * SQRT3 * v * v;
    }
}

/// Finds the root of `f` on `[lo, hi]` to within `tol` by Brent's method.
///
/// Used with dense output, `f` is typically a Hermite interpolant of an event
/// function between two accepted steps.
pub fn locate_event<F>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    brent(f, lo, hi, tol, 200)
}

/// Least-squares fit of `ρ = ρ∞ + C e^{-k x}` for fixed `k`; returns `(ρ∞, C, sse)`.
fn fit_fixed_k(pts: &[(f64, f64)], k: f64) -> (f64, f64, f64) {
    let n = pts.len() as f64;
    let x0 = pts[0].0;
    let basis = |x: f64| (-k * (x - x0)).exp();
    let (sb, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + basis(x), b + y));
    let (mb, my) = (sb / n, sy / n);
    let (sbb, sby) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| {
        let d = basis(x) - mb;
        (a + d * d, b + d * (y - my))
    });
    let c = if sbb > 0.0 { sby / sbb } else { 0.0 };
    let r_inf = my - c * mb;
    let sse = pts.iter().map(|&(x, y)| (y - r_inf - c * basis(x)).powi(2)).sum();
    (r_inf, c, sse)
}

const K_RANGE: (f64, f64) = (0.25, 4.0);

/// Best decay exponent by golden-section search; returns `(ρ∞, k)`.
fn fit_decay(pts: &[(f64, f64)]) -> (f64, f64) {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = K_RANGE;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (fit_fixed_k(pts, c).2, fit_fixed_k(pts, d).2);
    while b - a > 1e-8 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = fit_fixed_k(pts, c).2;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = fit_fixed_k(pts, d).2;
        }
    }
    let k = 0.5 * (a + b);
    (fit_fixed_k(pts, k).0, k)
}

/// `|ρ|` below this is numerically zero for the trend test.
const RHO_NOISE_FLOOR: f64 = 1e-6;

/// Closes `ε̇ = 2√3 ε^{3/2}/(1+ρ)` from the last sample of a collapsing tail.
///
/// Over samples with `ε ≥ threshold/100`, `ρ` is fitted as `ρ∞ + Cσ^{-k}`
/// with `k ∈ [1/4, 4]`. The estimate is settled when the tail is flat or when
/// fits on its two halves agree to `1e-2·(1+|ρ∞|)`.
pub fn extrapolate_blowup_time(tail: &[Sample], threshold: f64) -> Result<BlowupEstimate> {
    let last = tail.last().ok_or_else(|| Error::Precondition("empty tail".into()))?;
    if last.state.chi != Branch::Collapsing {
        return Err(Error::Precondition("blow-up tail must be collapsing".into()));
    }
    let mut pts: Vec<(f64, f64)> = tail
        .iter()
        .filter(|s| s.state.chi == Branch::Collapsing && s.eps() >= threshold / 100.0 && s.sigma > 0.0)
        .filter_map(|s| s.derived.rho.map(|r| (s.sigma.ln(), r)))
        .collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let rho_last = last.derived.rho;
    let sigma = last.sigma;

    let (rho_inf, k, settled, decreasing) = match (pts.len(), rho_last) {
        (0, None) => (0.0, None, false, false),
        (0, Some(r)) | (1, Some(r)) => (r, None, true, false),
        (1, None) => (pts[0].1, None, true, false),
        _ => {
            let (lo, hi) = pts
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, y)| {
                    (lo.min(y), hi.max(y))
                });
            let half = pts.len() / 2;
            let mean_abs = |s: &[(f64, f64)]| s.iter().map(|p| p.1.abs()).sum::<f64>() / s.len() as f64;
            let decreasing =
                lo.abs().max(hi.abs()) <= RHO_NOISE_FLOOR || mean_abs(&pts[half..]) <= mean_abs(&pts[..half]);
            let reference = rho_last.unwrap_or(pts[pts.len() - 1].1);
            if hi - lo <= 1e-6 * (1.0 + reference.abs()) || pts.len() < 8 {
                (reference, None, hi - lo <= 1e-2 * (1.0 + reference.abs()), decreasing)
            } else {
                let (r, k) = fit_decay(&pts);
                let (r0, _) = fit_decay(&pts[..half]);
                let (r1, _) = fit_decay(&pts[half..]);
                let settled = (r1 - r0).abs() <= 1e-2 * (1.0 + r.abs());
                (r, Some(k), settled, decreasing)
            }
        }
    };

    let t_s = if settled {
        // ∫_σ^∞ (1 + ρ∞ + Cs^{-k}) ds/(√3 s²) with Cσ^{-k} = ρ(σ) − ρ∞.
        let excess = match (k, rho_last) {
            (Some(k), Some(r)) => (r - rho_inf) / (1.0 + k),
            _ => 0.0,
        };
        last.t() + (1.0 + rho_inf + excess) / (SQRT3 * sigma)
    } else {
        last.t()
    };
    Ok(BlowupEstimate {
        t_s,
        rho_inf,
        settled,
        decreasing,
    })
}

/// Integrates forward from `s0` until `t_max`, blow-up, convergence to a
/// critical point, an energy-zero boundary or a domain exit.
pub fn integrate(s0: &FieldState, p: &Potential, cfg: &IntegratorConfig, t_max: f64) -> Result<Trajectory> {
    cfg.validate()?;
    if !s0.log_a.is_finite() {
        return Err(Error::Precondition("log a must be finite".into()));
    }
    if !(t_max >= s0.t) {
        return Err(Error::Precondition(format!("t_max = {t_max} precedes t0 = {}", s0.t)));
    }
    let v0 = p.value(s0.phi);
    let eps0 = clamp_energy(s0.v * s0.v + 2.0 * v0, v0, s0.phi)?;
    Runner::new(p, cfg, t_max).run(s0, eps0.sqrt())
}

/// Integrates toward the past, down to `t_min`.
///
/// Runs the forward integrator on the time-reversed data (`φ̇ → −φ̇`,
/// `χ → −χ`) and maps the result back. Samples and events are returned in
/// increasing `t`. Convergence detection is disabled.
pub fn integrate_backward(s0: &FieldState, p: &Potential, cfg: &IntegratorConfig, t_min: f64) -> Result<Trajectory> {
    if !(t_min <= s0.t) {
        return Err(Error::Precondition(format!("t_min = {t_min} exceeds t0 = {}", s0.t)));
    }
    let t0 = s0.t;
    let reversed = FieldState {
        v: -s0.v,
        chi: s0.chi.flipped(),
        ..*s0
    };
    let cfg = IntegratorConfig {
        stop_on_convergence: false,
        ..*cfg
    };
    let fwd = integrate(&reversed, p, &cfg, t0 + (t0 - t_min))?;

    let unmap = |s: &FieldState| FieldState {
        t: 2.0 * t0 - s.t,
        v: -s.v,
        chi: s.chi.flipped(),
        ..*s
    };
    let mut samples: Vec<Sample> = fwd
        .samples
        .iter()
        .map(|s| {
            let state = unmap(&s.state);
            Sample {
                state,
                derived: crate::dynamics::derived(&state, p),
                ..*s
            }
        })
        .collect();
    samples.reverse();
    let mut events: Vec<Event> = fwd
        .events
        .iter()
        .map(|e| Event {
            t: 2.0 * t0 - e.t,
            state: unmap(&e.state),
            kind: match e.kind {
                EventKind::BlowUp(b) => EventKind::BlowUp(BlowupEstimate {
                    t_s: 2.0 * t0 - b.t_s,
                    ..b
                }),
                k => k,
            },
        })
        .collect();
    events.reverse();
    Ok(Trajectory {
        samples,
        events,
        termination: fwd.termination,
    })
}

struct Runner<'a> {
    p: &'a Potential,
    cfg: &'a IntegratorConfig,
    t_max: f64,
    samples: Vec<Sample>,
    events: Vec<Event>,
    /// Index of the first sample of the current `χ` segment.
    segment_start: usize,
    quiet_since: Option<f64>,
}

enum Outcome {
    Continue,
    Stop(Termination),
}

impl<'a> Runner<'a> {
    fn new(p: &'a Potential, cfg: &'a IntegratorConfig, t_max: f64) -> Self {
        Self {
            p,
            cfg,
            t_max,
            samples: Vec::new(),
            events: Vec::new(),
            segment_start: 0,
            quiet_since: None,
        }
    }

    fn finish(self, termination: Termination) -> Result<Trajectory> {
        Ok(Trajectory {
            samples: self.samples,
            events: self.events,
            termination,
        })
    }

    fn run(mut self, s0: &FieldState, sigma0: f64) -> Result<Trajectory> {
        let p = self.p;
        let cfg = self.cfg;
        let mut chi = s0.chi;
        let mut y = [s0.t, s0.phi, s0.v, s0.log_a, sigma0];
        self.samples.push(Sample::new(&y, chi, p));

        // Expanding start exactly on ε = 0 with motion: σ turns negative at once.
        if chi == Branch::Expanding && sigma0 == 0.0 && (s0.v != 0.0 || p.derivative(s0.phi) != 0.0) {
            match self.energy_zero(&mut y, &mut chi) {
                Outcome::Stop(t) => return self.finish(t),
                Outcome::Continue => {}
            }
        }

        let mut sys = FieldSystem {
            p,
            chi: chi.sign(),
            rescaled: y[4] * y[4] > cfg.rescale_threshold,
        };
        let mut f = [0.0; 5];
        sys.rhs(0.0, &y, &mut f);
        let mut h = initial_step(&y, &f, cfg.rel_tol, cfg.abs_tol).min(cfg.max_step);

        for _ in 0..cfg.max_steps {
            if y[0] >= self.t_max - 1e-15 * (1.0 + self.t_max.abs()) {
                return self.finish(Termination::TMax);
            }
            let rescaled = y[4] * y[4] > cfg.rescale_threshold;
            if rescaled != sys.rescaled || sys.chi != chi.sign() {
                // Keep the physical step length across a clock change.
                if rescaled && !sys.rescaled {
                    h *= y[4];
                } else if !rescaled && sys.rescaled {
                    h /= y[4].max(1.0);
                }
                sys.rescaled = rescaled;
                sys.chi = chi.sign();
                sys.rhs(0.0, &y, &mut f);
                h = h.min(cfg.max_step);
            }

            let trial = step(&sys, 0.0, &y, &f, h, cfg.rel_tol, cfg.abs_tol);
            let h_min = 1e-15 * (1.0 + y[0].abs());
            let finite = trial.y.iter().all(|v| v.is_finite());
            let sigma_ok = chi.sign() * (trial.y[4] - y[4]) <= 4.0 * f64::EPSILON * (1.0 + y[4].abs());
            if !(trial.err <= 1.0) || !finite || !sigma_ok {
                let shrunk = if trial.err.is_finite() && finite && sigma_ok {
                    next_step_size(h, trial.err).min(0.9 * h)
                } else {
                    0.5 * h
                };
                if shrunk < h_min || (sys.rescaled && shrunk * y[4].max(1.0).recip() < h_min * 1e-3) {
                    return Err(Error::StepSizeUnderflow {
                        t: y[0],
                        phi: y[1],
                        eps: y[4] * y[4],
                        h: shrunk,
                    });
                }
                h = shrunk;
                continue;
            }

            let mut y_new = trial.y;
            let mut f_new = trial.f;
            let mut h_used = h;

            // Clip to t_max.
            if y_new[0] > self.t_max {
                let target = self.t_max;
                let x = locate_event(
                    |s| hermite(0.0, y[0], f[0], h, y_new[0], f_new[0], s) - target,
                    0.0,
                    h,
                    1e-14 * h,
                )
                .unwrap_or(h);
                let t2 = step(&sys, 0.0, &y, &f, x, cfg.rel_tol, cfg.abs_tol);
                y_new = t2.y;
                f_new = t2.f;
                h_used = x;
                y_new[0] = target;
            }

            // Energy zero on the expanding branch.
            if chi == Branch::Expanding && y_new[4] < 0.0 {
                let (y0, f0, y1, f1) = (y, f, y_new, f_new);
                let x = locate_event(
                    |s| hermite(0.0, y0[4], f0[4], h_used, y1[4], f1[4], s),
                    0.0,
                    h_used,
                    1e-14 * h_used,
                )?;
                let mut yz = step(&sys, 0.0, &y, &f, x, cfg.rel_tol, cfg.abs_tol).y;
                yz[4] = yz[4].max(0.0);
                y = yz;
                self.samples.push(Sample::new(&y, chi, p));
                match self.energy_zero(&mut y, &mut chi) {
                    Outcome::Stop(t) => return self.finish(t),
                    Outcome::Continue => {}
                }
                sys.chi = chi.sign();
                sys.rhs(0.0, &y, &mut f);
                h = (h_used - x).max(h_min * 10.0).min(cfg.max_step);
                continue;
            }

            let prev = y;
            y = y_new;
            f = f_new;
            let sample = Sample::new(&y, chi, p);
            let eps_derived = sample.derived.eps;
            if eps_derived < -(energy_clamp_tol(p.value(y[1])) + 1e-6 * (1.0 + y[4] * y[4])) {
                return Err(Error::NegativeEnergy {
                    eps: eps_derived,
                    phi: y[1],
                });
            }
            self.samples.push(sample);

            if y[4] * y[4] >= cfg.blowup_epsilon_threshold && chi == Branch::Collapsing {
                let tail = &self.samples[self.segment_start..];
                let est = extrapolate_blowup_time(tail, cfg.blowup_epsilon_threshold)?;
                self.events.push(Event {
                    t: y[0],
                    state: sample.state,
                    kind: EventKind::BlowUp(est),
                });
                return self.finish(Termination::BlowUp);
            }
            if y[1].abs() > cfg.phi_limit {
                self.events.push(Event {
                    t: y[0],
                    state: sample.state,
                    kind: EventKind::DomainExit { bound: cfg.phi_limit },
                });
                return self.finish(Termination::DomainExit);
            }
            if cfg.stop_on_convergence {
                let quiet = y[2].abs() < cfg.convergence_tol && p.derivative(y[1]).abs() < cfg.convergence_tol;
                if quiet {
                    let since = *self.quiet_since.get_or_insert(prev[0]);
                    if y[0] - since >= cfg.convergence_window {
                        let phi_star = refine_critical_point(p, y[1]);
                        self.events.push(Event {
                            t: y[0],
                            state: sample.state,
                            kind: EventKind::ConvergedToCritical { phi_star },
                        });
                        return self.finish(Termination::ConvergedToCritical);
                    }
                } else {
                    self.quiet_since = None;
                }
            }
            if y[0] >= self.t_max {
                return self.finish(Termination::TMax);
            }
            h = next_step_size(h_used, trial.err).min(cfg.max_step);
        }
        Err(Error::StepSizeUnderflow {
            t: y[0],
            phi: y[1],
            eps: y[4] * y[4],
            h,
        })
    }

    /// Handles `ε = 0` at the current state: projects onto the constraint and
    /// flips to collapse when `V < 0`, otherwise stops on the boundary.
    fn energy_zero(&mut self, y: &mut [f64; 5], chi: &mut Branch) -> Outcome {
        let p = self.p;
        let vphi = p.value(y[1]);
        let flip = vphi < -self.cfg.event_refine_tol.max(energy_clamp_tol(vphi));
        if flip {
            y[2] = (-2.0 * vphi).sqrt().copysign(y[2]);
        }
        y[4] = 0.0;
        let state = FieldState {
            t: y[0],
            phi: y[1],
            v: y[2],
            log_a: y[3],
            chi: *chi,
        };
        self.events.push(Event {
            t: y[0],
            state,
            kind: EventKind::EnergyZero {
                potential: vphi,
                flipped: flip,
            },
        });
        if !flip {
            return Outcome::Stop(Termination::EnergyZeroBoundary);
        }
        *chi = chi.flipped();
        if let Some(last) = self.samples.last_mut() {
            if last.t() == y[0] {
                self.samples.pop();
            }
        }
        self.samples.push(Sample::new(y, *chi, p));
        self.segment_start = self.samples.len() - 1;
        self.quiet_since = None;
        Outcome::Continue
    }
}

/// Newton polish of a critical point of `V` near `phi`.
fn refine_critical_point(p: &Potential, phi: f64) -> f64 {
    let mut x = phi;
    for _ in 0..30 {
        let pv = p.eval(x);
        if pv.ddv == 0.0 || !pv.ddv.is_finite() {
            break;
        }
        let dx = pv.dv / pv.ddv;
        if !dx.is_finite() || dx.abs() > 1.0 {
            break;
        }
        x -= dx;
        if dx.abs() < 1e-15 * (1.0 + x.abs()) {
            break;
        }
    }
    if p.derivative(x).abs() <= p.derivative(phi).abs() {
        x
    } else {
        phi
    }
}
