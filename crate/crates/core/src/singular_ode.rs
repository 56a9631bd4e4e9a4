//! Singular initial value problems `h(s) ż = f(s, z) + g(s)`, `z(0) = 0`,
//! with `h(0) = 0`, `f(s, 0) = 0` and `∂f/∂z(0, 0) < 0`.
//!
//! The distinguished solution is the fixed point of
//! `z ↦ L⁻¹[g + f(·, z) − ℓz]`, where `ℓ(s) = ∂f/∂z(s, 0)` and `L⁻¹λ` solves
//! `h ξ' = ℓ ξ + λ`, `ξ(0) = 0`:
//!
//! ```text
//! ξ(s) = ∫₀ˢ (λ(t)/h(t)) · exp(∫ₜˢ ℓ/h) dt
//! ```
//!
//! The kernel is evaluated cell by cell on a geometric mesh, so only finite
//! pieces of the non-integrable `∫ ℓ/h` are ever exponentiated.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::dynamics::SQRT3;
use crate::integrator::dopri::{self, Flow, SolveOptions};
use crate::potentials::Potential;
use crate::{Error, Result};

type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct SingularProblem {
    pub h: Fn1,
    pub f: Fn2,
    pub g: Fn1,
    /// `ℓ(s) = ∂f/∂z(s, 0)`; estimated by central differences when absent.
    pub ell: Option<Fn1>,
    pub beta: f64,
}

impl fmt::Debug for SingularProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SingularProblem")
            .field("beta", &self.beta)
            .finish_non_exhaustive()
    }
}

impl SingularProblem {
    pub fn new<H, F, G>(h: H, f: F, g: G, beta: f64) -> Self
    where
        H: Fn(f64) -> f64 + Send + Sync + 'static,
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        G: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            h: Arc::new(h),
            f: Arc::new(f),
            g: Arc::new(g),
            ell: None,
            beta,
        }
    }

    pub fn with_ell<L>(mut self, ell: L) -> Self
    where
        L: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.ell = Some(Arc::new(ell));
        self
    }

    pub fn ell(&self, s: f64) -> f64 {
        match &self.ell {
            Some(l) => l(s),
            None => {
                let d = 1e-6;
                ((self.f)(s, d) - (self.f)(s, -d)) / (2.0 * d)
            }
        }
    }

    /// Checks `h(0) = 0`, `h > 0` and `f(s, 0) = 0` on a probe grid, and
    /// `ℓ(0) < 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::Precondition(format!("beta = {} must be positive", self.beta)));
        }
        let h0 = (self.h)(0.0);
        if !(h0.abs() <= 1e-12) {
            return Err(Error::Precondition(format!("h(0) = {h0:e} is not zero")));
        }
        for k in 1..=64 {
            let s = self.beta * (k as f64 / 64.0).powi(3);
            let h = (self.h)(s);
            if !(h > 0.0) {
                return Err(Error::Precondition(format!("h({s}) = {h} is not positive")));
            }
            let f0 = (self.f)(s, 0.0);
            if !(f0.abs() <= 1e-12) {
                return Err(Error::Precondition(format!("f({s}, 0) = {f0:e} is not zero")));
            }
        }
        let l0 = self.ell(0.0);
        if !(l0 < 0.0) {
            return Err(Error::Precondition(format!("df/dz(0, 0) = {l0} is not negative")));
        }
        Ok(())
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_47,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_47,
    0.101_228_536_290_376_26,
];

fn gauss<F: FnMut(f64) -> f64>(a: f64, b: f64, mut f: F) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    let mut acc = 0.0;
    for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
        acc += w * f(m + r * x);
    }
    acc * r
}

/// Ratio between the first mesh node and `α`.
const FIRST_NODE: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionSolution {
    pub alpha: f64,
    /// Mesh, starting with `s = 0`.
    pub s: Vec<f64>,
    pub z: Vec<f64>,
    pub iterations: usize,
    /// `‖z_{k+1} − z_k‖ / ‖z_k − z_{k−1}‖` per iteration.
    pub ratios: Vec<f64>,
    pub last_change: f64,
}

impl ContractionSolution {
    /// Cubic Lagrange interpolation on the mesh.
    pub fn eval(&self, s: f64) -> f64 {
        lagrange(&self.s, &self.z, s)
    }
}

fn lagrange(xs: &[f64], ys: &[f64], x: f64) -> f64 {
    let n = xs.len();
    if x <= xs[0] {
        return ys[0];
    }
    if x >= xs[n - 1] {
        return ys[n - 1];
    }
    let k = xs.partition_point(|&v| v <= x).saturating_sub(1);
    let lo = k.saturating_sub(1).min(n.saturating_sub(4));
    let hi = (lo + 4).min(n);
    let mut acc = 0.0;
    for i in lo..hi {
        let mut w = 1.0;
        for j in lo..hi {
            if j != i {
                w *= (x - xs[j]) / (xs[i] - xs[j]);
            }
        }
        acc += w * ys[i];
    }
    acc
}

fn mesh(alpha: f64, cells: usize) -> Vec<f64> {
    let s1 = alpha * FIRST_NODE;
    let ratio = (alpha / s1).ln() / cells as f64;
    let mut s = Vec::with_capacity(cells + 2);
    s.push(0.0);
    for k in 0..=cells {
        s.push(s1 * (ratio * k as f64).exp());
    }
    *s.last_mut().expect("nonempty") = alpha;
    s
}

/// One application of `L⁻¹` to `λ = g + f(·, z) − ℓz`, with `z` given on the mesh.
fn apply_inverse(pr: &SingularProblem, s: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    let ell_over_h = |t: f64| pr.ell(t) / (pr.h)(t);
    let lambda = |t: f64| {
        let zt = lagrange(s, z, t);
        (pr.g)(t) + (pr.f)(t, zt) - pr.ell(t) * zt
    };
    let mut out = vec![0.0; s.len()];
    let s1 = s[1];
    let (h1, l1) = ((pr.h)(s1), pr.ell(s1));
    out[1] = lambda(s1) * s1 / (h1 - l1 * s1);
    for k in 1..s.len() - 1 {
        let (a, b) = (s[k], s[k + 1]);
        let decay = gauss(a, b, ell_over_h).exp();
        let source = gauss(a, b, |t| {
            let inner = gauss(t, b, ell_over_h);
            lambda(t) / (pr.h)(t) * inner.exp()
        });
        out[k + 1] = out[k] * decay + source;
        if !out[k + 1].is_finite() {
            return Err(Error::Quadrature(format!("non-finite kernel value on [{a:e}, {b:e}]")));
        }
    }
    Ok(out)
}

/// Fixed-point iteration for the distinguished solution on `[0, α]`.
///
/// `grid_size` is the number of geometric cells between `α·1e-14` and `α`.
pub fn solve_contraction(
    pr: &SingularProblem,
    alpha: f64,
    grid_size: usize,
    max_iter: usize,
    tol: f64,
) -> Result<ContractionSolution> {
    pr.validate()?;
    if !(alpha > 0.0 && alpha <= pr.beta) {
        return Err(Error::Precondition(format!("alpha = {alpha} must lie in (0, beta]")));
    }
    if grid_size < 4 || max_iter == 0 || !(tol > 0.0) {
        return Err(Error::Precondition(
            "need grid_size >= 4, max_iter >= 1, tol > 0".into(),
        ));
    }
    let s = mesh(alpha, grid_size);
    let mut z = vec![0.0; s.len()];
    let mut ratios = Vec::new();
    let mut prev_change = f64::NAN;
    for it in 1..=max_iter {
        let next = apply_inverse(pr, &s, &z)?;
        let change = next.iter().zip(&z).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if prev_change.is_finite() && prev_change > 0.0 {
            ratios.push(change / prev_change);
        }
        z = next;
        if change < tol {
            return Ok(ContractionSolution {
                alpha,
                s,
                z,
                iterations: it,
                ratios,
                last_change: change,
            });
        }
        if ratios.len() >= 3 && ratios[ratios.len() - 3..].iter().all(|&r| r >= 1.0) {
            return Err(Error::NotContracting {
                iterations: it,
                ratio: *ratios.last().expect("nonempty"),
            });
        }
        prev_change = change;
    }
    Err(Error::NotContracting {
        iterations: max_iter,
        ratio: ratios.last().copied().unwrap_or(f64::NAN),
    })
}

/// `max |h ż − f(s, z) − g|` over interior mesh nodes, with `ż` from the
/// second-order three-point formula on the nonuniform mesh.
pub fn residual(pr: &SingularProblem, sol: &ContractionSolution) -> f64 {
    let (s, z) = (&sol.s, &sol.z);
    (2..s.len() - 1)
        .map(|k| {
            let (hm, hp) = (s[k] - s[k - 1], s[k + 1] - s[k]);
            let zd =
                -hp / (hm * (hm + hp)) * z[k - 1] + (hp - hm) / (hm * hp) * z[k] + hm / (hp * (hm + hp)) * z[k + 1];
            ((pr.h)(s[k]) * zd - (pr.f)(s[k], z[k]) - (pr.g)(s[k])).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniquenessProbe {
    pub offset: f64,
    /// `z` at the innermost point `s_min`.
    pub z_end: f64,
    /// Distinguished solution at `s_min`.
    pub reference: f64,
    /// `max |z − z*|` over the backward run.
    pub max_deviation: f64,
    /// `min |z|` over `s ∈ [s_min, s_probe/5]`.
    pub min_abs_inner: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub s_probe: f64,
    pub s_min: f64,
    pub probes: Vec<UniquenessProbe>,
    /// Zero offset tracks `z*`; nonzero offsets leave it.
    pub passes: bool,
}

/// Integrates backward from `(s_probe, z*(s_probe) + offset)` toward `s → 0⁺`
/// in `w = ln s`.
pub fn verify_uniqueness(
    pr: &SingularProblem,
    sol: &ContractionSolution,
    offsets: &[f64],
    s_probe: f64,
    tol: f64,
) -> Result<UniquenessReport> {
    if !(s_probe > 0.0 && s_probe < sol.alpha) {
        return Err(Error::Precondition(format!("s_probe = {s_probe} outside (0, alpha)")));
    }
    let s_min = 1e-3 * s_probe;
    let sys = |w: f64, z: &[f64; 1], dz: &mut [f64; 1]| {
        let s = w.exp();
        dz[0] = s * ((pr.f)(s, z[0]) + (pr.g)(s)) / (pr.h)(s);
    };
    let opts = SolveOptions {
        rtol: 1e-12,
        atol: 1e-14,
        max_step: 0.05,
        ..Default::default()
    };
    let mut probes = Vec::with_capacity(offsets.len());
    let mut passes = true;
    for &offset in offsets {
        let z0 = sol.eval(s_probe) + offset;
        let mut max_dev: f64 = 0.0;
        let mut min_inner = f64::INFINITY;
        let (_, z_end, _) = dopri::solve(&sys, s_probe.ln(), [z0], s_min.ln(), &opts, |acc| {
            let s = acc.x1.exp();
            let z = acc.y1[0];
            if z.is_finite() {
                max_dev = max_dev.max((z - sol.eval(s)).abs());
                if s <= 0.2 * s_probe {
                    min_inner = min_inner.min(z.abs());
                }
                Flow::Continue
            } else {
                Flow::Stop
            }
        });
        let probe = UniquenessProbe {
            offset,
            z_end: z_end[0],
            reference: sol.eval(s_min),
            max_deviation: max_dev,
            min_abs_inner: min_inner,
        };
        passes &= if offset == 0.0 {
            max_dev <= 10.0 * tol
        } else {
            (probe.z_end - probe.reference).abs() >= 10.0 * offset.abs()
                && (probe.z_end - probe.reference).signum() == offset.signum()
        };
        probes.push(probe);
    }
    Ok(UniquenessReport {
        s_probe,
        s_min,
        probes,
        passes,
    })
}

/// The `z = u y − 1` form of the `y` flow in `s = e^{−√3 φ}`:
///
/// ```text
/// (s u) ż = −(z+1)² z + (u² + s u̇) z + s u̇,     s u̇ = −u'(φ)/√3
/// ```
///
/// posed on `(0, β]` with `β = e^{−√3 φ_min}`.
pub fn perla_problem(p: &Potential, phi_min: f64) -> Result<SingularProblem> {
    let beta = (-SQRT3 * phi_min).exp();
    let phi_of = |s: f64| -s.ln() / SQRT3;
    // Tail probe: u must stay in (0, 1) and u' must be small and shrinking.
    let mut prev_up = f64::INFINITY;
    for k in 0..=40 {
        let phi = phi_min + k as f64 * (200.0 - phi_min).max(1.0) / 40.0;
        let u = p.u(phi)?;
        let up = p.u_prime(phi)?.abs();
        if !(u > 0.0 && u < 1.0) {
            return Err(Error::Precondition(format!(
                "tail condition fails: u({phi}) = {u} not in (0, 1)"
            )));
        }
        if k > 20 && up > prev_up * (1.0 + 1e-6) + 1e-12 {
            return Err(Error::Precondition(format!(
                "tail condition fails: |u'| grows at phi = {phi}"
            )));
        }
        prev_up = up;
    }
    let u_inf = match p.analytic_asymptote_u() {
        Some(u) => u,
        None => p.u(phi_of(1e-200))?,
    };

    let p1 = p.clone();
    let u = move |s: f64| {
        if s <= 0.0 {
            u_inf
        } else {
            p1.u(phi_of(s)).unwrap_or(f64::NAN)
        }
    };
    let p2 = p.clone();
    let su_dot = move |s: f64| {
        if s <= 0.0 {
            0.0
        } else {
            -p2.u_prime(phi_of(s)).unwrap_or(f64::NAN) / SQRT3
        }
    };
    let (u_h, u_f, u_l) = (u.clone(), u.clone(), u);
    let (d_f, d_g, d_l) = (su_dot.clone(), su_dot.clone(), su_dot);
    Ok(SingularProblem::new(
        move |s| s * u_h(s),
        move |s, z| {
            let uu = u_f(s);
            -(z + 1.0) * (z + 1.0) * z + (uu * uu + d_f(s)) * z
        },
        d_g,
        beta,
    )
    .with_ell(move |s| {
        let uu = u_l(s);
        uu * uu + d_l(s) - 1.0
    }))
}
