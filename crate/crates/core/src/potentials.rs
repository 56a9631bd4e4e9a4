//! Scalar potentials `V(φ)`, the slope function `u(φ)`, critical points and
//! grid-certified class membership.
//!
//! Three nested classes are tested:
//!
//! * **V**: `V` is `C²`, bounded below, and its critical points are isolated
//!   minima or nondegenerate maxima.
//! * **E**: additionally `V → +∞` as `|φ| → ∞`.
//! * **C**: additionally there is a threshold `V*` whose sublevel set
//!   `B = {V ≤ V*}` is bounded, `V'` points outward outside `B`, and the slope
//!   function satisfies `limsup |u| < 1` and `u' → 0` in both tails.
//!
//! Asymptotic conditions are checked on finite tail samples; every
//! [`ClassReport`] carries the grid it was certified on.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::roots::brent;
use crate::{Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Tolerance on `|V'(φ*)|` for a refined critical point.
pub const CRITICAL_ROOT_TOL: f64 = 1e-9;

/// Below this `|V''|` a critical point is reported as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-8;

type Evaluator = dyn Fn(f64) -> [f64; 3] + Send + Sync;

/// `(V, V', V'')` at one field value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialValue {
    pub v: f64,
    pub dv: f64,
    pub ddv: f64,
}

/// A scalar potential with analytic first and second derivatives.
///
/// Cloning is cheap; the evaluator is shared.
#[derive(Clone)]
pub struct Potential {
    name: String,
    asymptote_u: Option<f64>,
    eval: Arc<Evaluator>,
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Potential")
            .field("name", &self.name)
            .field("asymptote_u", &self.asymptote_u)
            .finish()
    }
}

impl Potential {
    /// Wraps an evaluator returning `[V, V', V'']`.
    pub fn new<F>(name: impl Into<String>, eval: F) -> Self
    where
        F: Fn(f64) -> [f64; 3] + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            asymptote_u: None,
            eval: Arc::new(eval),
        }
    }

    /// Records the known limit of `|u(φ)|` as `|φ| → ∞`.
    pub fn with_asymptote_u(mut self, u: f64) -> Self {
        self.asymptote_u = Some(u);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn analytic_asymptote_u(&self) -> Option<f64> {
        self.asymptote_u
    }

    #[inline]
    pub fn eval(&self, phi: f64) -> PotentialValue {
        let [v, dv, ddv] = (self.eval)(phi);
        PotentialValue { v, dv, ddv }
    }

    #[inline]
    pub fn value(&self, phi: f64) -> f64 {
        (self.eval)(phi)[0]
    }

    #[inline]
    pub fn derivative(&self, phi: f64) -> f64 {
        (self.eval)(phi)[1]
    }

    #[inline]
    pub fn second_derivative(&self, phi: f64) -> f64 {
        (self.eval)(phi)[2]
    }

    /// Slope function `u = V' / (2√3 V)`.
    pub fn u(&self, phi: f64) -> Result<f64> {
        u_of_phi(self, phi)
    }

    /// Derivative of the slope function, `u' = (V''V − V'²) / (2√3 V²)`.
    pub fn u_prime(&self, phi: f64) -> Result<f64> {
        let p = self.eval(phi);
        check_nonzero(phi, p.v)?;
        Ok((p.ddv * p.v - p.dv * p.dv) / (2.0 * SQRT3 * p.v * p.v))
    }

    /// The reflected potential `Ṽ(ψ) = V(−ψ)`.
    pub fn mirrored(&self) -> Potential {
        let inner = Arc::clone(&self.eval);
        Potential {
            name: format!("{} (mirrored)", self.name),
            asymptote_u: self.asymptote_u,
            eval: Arc::new(move |psi| {
                let [v, dv, ddv] = inner(-psi);
                [v, -dv, ddv]
            }),
        }
    }

    /// `V(φ) + c`.
    pub fn shifted(&self, c: f64) -> Potential {
        let inner = Arc::clone(&self.eval);
        Potential {
            name: format!("{} {:+}", self.name, c),
            asymptote_u: self.asymptote_u,
            eval: Arc::new(move |phi| {
                let [v, dv, ddv] = inner(phi);
                [v + c, dv, ddv]
            }),
        }
    }
}

fn check_nonzero(phi: f64, v: f64) -> Result<()> {
    if v.abs() < f64::MIN_POSITIVE.sqrt() {
        Err(Error::ZeroPotential { phi, value: v.abs() })
    } else {
        Ok(())
    }
}

/// `u(φ) = V'(φ) / (2√3 V(φ))`.
pub fn u_of_phi(p: &Potential, phi: f64) -> Result<f64> {
    let PotentialValue { v, dv, .. } = p.eval(phi);
    check_nonzero(phi, v)?;
    Ok(dv / (2.0 * SQRT3 * v))
}

/// Centered finite-difference step for derivative cross-checks.
pub fn fd_step(phi: f64) -> f64 {
    (1.0 + phi.abs()) * f64::EPSILON.cbrt()
}

// ---------------------------------------------------------------------------
// Presets

/// A named preset plus numeric parameters, as read from configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PresetSpec {
    pub name: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
}

impl PresetSpec {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            params: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: f64) -> Self {
        self.params.insert(key.to_string(), value);
        self
    }
}

/// Preset names accepted by [`builtin_potential`].
pub const PRESET_NAMES: &[&str] = &[
    "quartic",
    "figure1",
    "figure2",
    "figure2_printed",
    "figure3",
    "exponential",
    "decaying_exp",
    "quadratic",
    "sextic",
];

struct Params<'a> {
    preset: &'a str,
    given: &'a BTreeMap<String, f64>,
    allowed: &'static [&'static str],
}

impl<'a> Params<'a> {
    fn new(spec: &'a PresetSpec, allowed: &'static [&'static str]) -> Result<Self> {
        for (k, &v) in &spec.params {
            if !allowed.contains(&k.as_str()) {
                return Err(Error::InvalidParameter {
                    name: k.clone(),
                    value: v,
                    reason: format!("not a parameter of preset `{}`", spec.name),
                });
            }
            if !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name: k.clone(),
                    value: v,
                    reason: "must be finite".into(),
                });
            }
        }
        Ok(Self {
            preset: &spec.name,
            given: &spec.params,
            allowed,
        })
    }

    fn get(&self, key: &str, default: f64) -> f64 {
        debug_assert!(self.allowed.contains(&key), "{} has no {key}", self.preset);
        self.given.get(key).copied().unwrap_or(default)
    }

    fn positive(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.get(key, default);
        if v > 0.0 {
            Ok(v)
        } else {
            Err(Error::InvalidParameter {
                name: key.into(),
                value: v,
                reason: "must be positive".into(),
            })
        }
    }

    fn nonnegative(&self, key: &str, default: f64) -> Result<f64> {
        let v = self.get(key, default);
        if v >= 0.0 {
            Ok(v)
        } else {
            Err(Error::InvalidParameter {
                name: key.into(),
                value: v,
                reason: "must be non-negative".into(),
            })
        }
    }
}

/// Builds one of the named potentials.
///
/// | preset | formula | parameters (defaults) |
/// |---|---|---|
/// | `quartic` | `−½m²φ² + λ²φ⁴` | `m` (1), `lambda` (1) |
/// | `figure1` | `1 − φ² + φ⁴` | none |
/// | `figure2` | `A·exp(2√(3/2)·√(φ²+1))` | `amplitude` (1/1000) |
/// | `figure2_printed` | same, `A = 1/100` | none |
/// | `figure3` | `2(1−e^{−√(φ²+1)})² − e^{−(φ+4)²}/6 − e^{−(φ−4)²}/2 + c` | `offset` (1) |
/// | `exponential` | `V₀·exp(2√3·λ·√(φ²+γ²))` | `v0` (1), `lambda` (0.5), `gamma` (1) |
/// | `decaying_exp` | `(1 − e^{−α√(φ²+γ²)})²` | `alpha` (1), `gamma` (1) |
/// | `quadratic` | `kφ² + c` | `k` (1), `c` (0) |
/// | `sextic` | `−½m²φ² + λ²φ⁶` | `m` (1), `lambda` (1) |
///
/// `exponential` accepts `gamma = 0`, giving `V₀·exp(2√3λ|φ|)` with a kink at
/// the origin and `u ≡ ±λ` away from it.
pub fn builtin_potential(spec: &PresetSpec) -> Result<Potential> {
    match spec.name.as_str() {
        "quartic" => {
            let p = Params::new(spec, &["m", "lambda"])?;
            Ok(quartic(p.get("m", 1.0), p.get("lambda", 1.0)))
        }
        "figure1" => {
            Params::new(spec, &[])?;
            Ok(figure1())
        }
        "figure2" => {
            let p = Params::new(spec, &["amplitude"])?;
            Ok(figure2(p.positive("amplitude", FIGURE2_AMPLITUDE)?))
        }
        "figure2_printed" => {
            Params::new(spec, &[])?;
            Ok(figure2(FIGURE2_PRINTED_AMPLITUDE).renamed("figure2_printed"))
        }
        "figure3" => {
            let p = Params::new(spec, &["offset"])?;
            Ok(figure3(p.get("offset", 1.0)))
        }
        "exponential" => {
            let p = Params::new(spec, &["v0", "lambda", "gamma"])?;
            Ok(exponential(
                p.positive("v0", 1.0)?,
                p.positive("lambda", 0.5)?,
                p.nonnegative("gamma", 1.0)?,
            ))
        }
        "decaying_exp" => {
            let p = Params::new(spec, &["alpha", "gamma"])?;
            Ok(decaying_exp(p.positive("alpha", 1.0)?, p.nonnegative("gamma", 1.0)?))
        }
        "quadratic" => {
            let p = Params::new(spec, &["k", "c"])?;
            Ok(quadratic(p.positive("k", 1.0)?, p.get("c", 0.0)))
        }
        "sextic" => {
            let p = Params::new(spec, &["m", "lambda"])?;
            Ok(sextic(p.get("m", 1.0), p.get("lambda", 1.0)))
        }
        other => Err(Error::UnknownPreset(other.to_string())),
    }
}

impl Potential {
    fn renamed(mut self, name: &str) -> Self {
        self.name = name.to_string();
        self
    }
}

/// Amplitude of the `figure2` preset; reproduces the reported collapse time.
pub const FIGURE2_AMPLITUDE: f64 = 1e-3;
/// Amplitude of the `figure2_printed` preset.
pub const FIGURE2_PRINTED_AMPLITUDE: f64 = 1e-2;

pub fn quartic(m: f64, lambda: f64) -> Potential {
    let m2 = m * m;
    let l2 = lambda * lambda;
    Potential::new(format!("quartic(m={m}, lambda={lambda})"), move |x| {
        let x2 = x * x;
        [
            -0.5 * m2 * x2 + l2 * x2 * x2,
            -m2 * x + 4.0 * l2 * x2 * x,
            -m2 + 12.0 * l2 * x2,
        ]
    })
}

pub fn sextic(m: f64, lambda: f64) -> Potential {
    let m2 = m * m;
    let l2 = lambda * lambda;
    Potential::new(format!("sextic(m={m}, lambda={lambda})"), move |x| {
        let x2 = x * x;
        let x4 = x2 * x2;
        [
            -0.5 * m2 * x2 + l2 * x4 * x2,
            -m2 * x + 6.0 * l2 * x4 * x,
            -m2 + 30.0 * l2 * x4,
        ]
    })
}

pub fn figure1() -> Potential {
    Potential::new("figure1", |x| {
        let x2 = x * x;
        [1.0 - x2 + x2 * x2, -2.0 * x + 4.0 * x2 * x, -2.0 + 12.0 * x2]
    })
}

pub fn figure2(amplitude: f64) -> Potential {
    // 2·√(3/2) = √6, i.e. the exponential family with λ = 1/√2.
    exponential_raw(amplitude, 6f64.sqrt(), 1.0)
        .renamed("figure2")
        .with_asymptote_u(std::f64::consts::FRAC_1_SQRT_2)
}

pub fn figure3(offset: f64) -> Potential {
    Potential::new(format!("figure3(offset={offset})"), move |x| {
        let r = (x * x + 1.0).sqrt();
        let e = (-r).exp();
        let g = 1.0 - e;
        let r1 = x / r;
        let r2 = 1.0 / (r * r * r);
        let g1 = e * r1;
        let g2 = e * (r2 - r1 * r1);

        let gl = (-(x + 4.0) * (x + 4.0)).exp();
        let gr = (-(x - 4.0) * (x - 4.0)).exp();
        let (kl, kr) = (1.0 / 6.0, 0.5);

        let v = 2.0 * g * g - kl * gl - kr * gr + offset;
        let dv = 4.0 * g * g1 + 2.0 * kl * (x + 4.0) * gl + 2.0 * kr * (x - 4.0) * gr;
        let ddv = 4.0 * (g1 * g1 + g * g2)
            + 2.0 * kl * (1.0 - 2.0 * (x + 4.0) * (x + 4.0)) * gl
            + 2.0 * kr * (1.0 - 2.0 * (x - 4.0) * (x - 4.0)) * gr;
        [v, dv, ddv]
    })
}

/// `V₀·exp(2√3·λ·√(φ²+γ²))`; `u → ±λ` in the tails.
pub fn exponential(v0: f64, lambda: f64, gamma: f64) -> Potential {
    exponential_raw(v0, 2.0 * SQRT3 * lambda, gamma)
        .renamed(&format!("exponential(v0={v0}, lambda={lambda}, gamma={gamma})"))
        .with_asymptote_u(lambda)
}

fn exponential_raw(v0: f64, kappa: f64, gamma: f64) -> Potential {
    let g2 = gamma * gamma;
    Potential::new("exponential", move |x| {
        let q = (x * x + g2).sqrt();
        let v = v0 * (kappa * q).exp();
        if q == 0.0 {
            return [v, 0.0, v * kappa * kappa];
        }
        let q1 = x / q;
        let q2 = g2 / (q * q * q);
        [v, v * kappa * q1, v * (kappa * kappa * q1 * q1 + kappa * q2)]
    })
}

/// `(1 − exp(−α√(φ²+γ²)))²`; `u → 0` in the tails.
pub fn decaying_exp(alpha: f64, gamma: f64) -> Potential {
    let g2 = gamma * gamma;
    Potential::new(format!("decaying_exp(alpha={alpha}, gamma={gamma})"), move |x| {
        let q = (x * x + g2).sqrt();
        let e = (-alpha * q).exp();
        let g = 1.0 - e;
        if q == 0.0 {
            return [g * g, 0.0, 2.0 * alpha * alpha];
        }
        let q1 = x / q;
        let q2 = g2 / (q * q * q);
        let g1 = alpha * e * q1;
        let g2_ = alpha * e * (q2 - alpha * q1 * q1);
        [g * g, 2.0 * g * g1, 2.0 * (g1 * g1 + g * g2_)]
    })
}

/// `kφ² + c`.
pub fn quadratic(k: f64, c: f64) -> Potential {
    Potential::new(format!("quadratic(k={k}, c={c})"), move |x| {
        [k * x * x + c, 2.0 * k * x, 2.0 * k]
    })
}

// ---------------------------------------------------------------------------
// Critical points

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticalKind {
    Minimum,
    Maximum,
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub phi: f64,
    pub kind: CriticalKind,
    pub value: f64,
    /// `V'` changes sign from negative to positive across the point.
    /// Distinguishes degenerate minima (admissible) from inflections.
    pub sign_change: i8,
}

/// Locates the critical points of `V` on `[lo, hi]`.
///
/// `V'` is sampled at `resolution + 1` equispaced points; sign changes are
/// refined with Brent's method and touch-zero minima of `|V'|` by golden
/// section. Points are returned in increasing order.
pub fn find_critical_points(p: &Potential, lo: f64, hi: f64, resolution: usize) -> Vec<CriticalPoint> {
    let n = resolution.max(2);
    let step = (hi - lo) / n as f64;
    let grid: Vec<f64> = (0..=n).map(|i| lo + step * i as f64).collect();
    let dv: Vec<f64> = grid.iter().map(|&x| p.derivative(x)).collect();
    let mut roots: Vec<f64> = Vec::new();

    for i in 0..n {
        let (a, b) = (dv[i], dv[i + 1]);
        if a == 0.0 {
            roots.push(grid[i]);
        } else if a * b < 0.0 {
            if let Ok(r) = brent(|x| p.derivative(x), grid[i], grid[i + 1], 1e-15, 200) {
                roots.push(r);
            }
        }
    }
    if dv[n] == 0.0 {
        roots.push(grid[n]);
    }

    // Critical points where V' touches zero without changing sign.
    for i in 1..n {
        let (l, m, r) = (dv[i - 1].abs(), dv[i].abs(), dv[i + 1].abs());
        if m < l && m <= r && dv[i - 1] * dv[i + 1] > 0.0 {
            let x = golden_min(|x| p.derivative(x).abs(), grid[i - 1], grid[i + 1], 1e-14);
            if p.derivative(x).abs() <= CRITICAL_ROOT_TOL {
                roots.push(x);
            }
        }
    }

    roots.sort_by(|a, b| a.total_cmp(b));
    roots.dedup_by(|a, b| (*a - *b).abs() <= 0.5 * step.min(1e-9 * (1.0 + b.abs())).max(1e-13));

    roots
        .into_iter()
        .filter(|&x| p.derivative(x).abs() <= CRITICAL_ROOT_TOL.max(1e-12 * p.value(x).abs()))
        .map(|x| {
            let pv = p.eval(x);
            let h = 0.25 * step;
            let left = p.derivative(x - h);
            let right = p.derivative(x + h);
            let sign_change = if left < 0.0 && right > 0.0 {
                1
            } else if left > 0.0 && right < 0.0 {
                -1
            } else {
                0
            };
            let kind = if pv.ddv > DEGENERACY_TOL {
                CriticalKind::Minimum
            } else if pv.ddv < -DEGENERACY_TOL {
                CriticalKind::Maximum
            } else {
                CriticalKind::Degenerate
            };
            CriticalPoint {
                phi: x,
                kind,
                value: pv.v,
                sign_change,
            }
        })
        .collect()
}

fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + a.abs()) {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

// ---------------------------------------------------------------------------
// Class membership

/// Per-condition verdicts for class C.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CollapseConditions {
    /// `B = {V ≤ V*}` bounded inside the scan range.
    pub bounded_sublevel: bool,
    /// `V' > 0` right of `sup B`, `V' < 0` left of `inf B`.
    pub outward_slope: bool,
    /// `limsup |u| < 1` in both tails.
    pub u_below_one: bool,
    /// `u' → 0` in both tails.
    pub u_prime_vanishes: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub lo: f64,
    pub hi: f64,
    pub resolution: usize,
}

/// Outcome of [`classify_potential`]. All asymptotic verdicts are
/// grid-certified on [`ClassReport::grid`], not proved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub in_v: bool,
    pub in_e: bool,
    pub in_c: bool,
    pub critical_points: Vec<CriticalPoint>,
    /// Reasons for failing class V (empty when `in_v`).
    pub v_failures: Vec<String>,
    pub c_conditions: Option<CollapseConditions>,
    pub v_star: f64,
    /// `(inf B, sup B)`; present iff the class-C verdict was attempted.
    pub b_bounds: Option<(f64, f64)>,
    /// Maximum `|u|` over the left and right tail samples.
    pub tail_u: Option<(f64, f64)>,
    pub grid: ScanGrid,
}

/// `V* = 1 + 2·max(0, min V)` over the sampled grid.
pub fn default_v_star(p: &Potential, lo: f64, hi: f64, resolution: usize) -> f64 {
    let n = resolution.max(2);
    let min = (0..=n)
        .map(|i| p.value(lo + (hi - lo) * i as f64 / n as f64))
        .fold(f64::INFINITY, f64::min);
    1.0 + 2.0 * min.max(0.0)
}

/// Fraction of the grid treated as tail on each side.
const TAIL_FRACTION: f64 = 0.1;

/// Tests membership in the classes V, E and C on a finite grid.
///
/// Fails with [`Error::Inconclusive`] when a tail has not settled inside the
/// scan range (|u| hovering at 1, or `|u'|` still growing outward).
pub fn classify_potential(p: &Potential, lo: f64, hi: f64, v_star: f64, resolution: usize) -> Result<ClassReport> {
    if !(hi > lo) {
        return Err(Error::Precondition(format!("empty scan range [{lo}, {hi}]")));
    }
    if resolution < 16 {
        return Err(Error::Precondition(format!("resolution {resolution} < 16")));
    }
    let n = resolution;
    let xs: Vec<f64> = (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect();
    let vals: Vec<PotentialValue> = xs.iter().map(|&x| p.eval(x)).collect();
    let grid = ScanGrid { lo, hi, resolution };

    let mut failures = Vec::new();

    // Bounded below: the grid minimum must not sit on a boundary that is still
    // descending outward.
    let (imin, vmin) = vals.iter().enumerate().fold(
        (0, f64::INFINITY),
        |acc, (i, pv)| {
            if pv.v < acc.1 {
                (i, pv.v)
            } else {
                acc
            }
        },
    );
    if !vmin.is_finite() || vals.iter().any(|pv| !pv.v.is_finite()) {
        failures.push("non-finite potential values on the grid".to_string());
    } else if (imin == 0 && vals[0].dv > 0.0) || (imin == n && vals[n].dv < 0.0) {
        failures.push(format!(
            "unbounded below: minimum at scan boundary phi = {} with V' pointing outward-down",
            xs[imin]
        ));
    }

    // Isolated critical points: no run of near-zero slope across the grid.
    let mut run = 0;
    let mut plateau = false;
    for pv in &vals {
        if pv.dv.abs() <= 1e-12 * (1.0 + pv.v.abs()) {
            run += 1;
            if run >= 3 {
                plateau = true;
            }
        } else {
            run = 0;
        }
    }
    if plateau {
        failures.push("critical points are not isolated (flat stretch of V')".to_string());
    }

    let critical_points = find_critical_points(p, lo, hi, n);
    for c in &critical_points {
        if c.kind == CriticalKind::Degenerate && c.sign_change != 1 {
            failures.push(format!(
                "degenerate critical point at phi = {:.6} is not a minimum",
                c.phi
            ));
        }
    }
    let in_v = failures.is_empty();

    // Divergence at both ends, certified by outward growth past every critical value.
    let crit_max = critical_points
        .iter()
        .map(|c| c.value)
        .fold(f64::NEG_INFINITY, f64::max);
    let in_e = in_v
        && vals[0].dv < 0.0
        && vals[n].dv > 0.0
        && vals[0].v > crit_max
        && vals[n].v > crit_max
        && vals[0].v > vals[1].v
        && vals[n].v > vals[n - 1].v;

    let mut report = ClassReport {
        in_v,
        in_e,
        in_c: false,
        critical_points,
        v_failures: failures,
        c_conditions: None,
        v_star,
        b_bounds: None,
        tail_u: None,
        grid,
    };
    if !in_v {
        return Ok(report);
    }

    if v_star < vmin {
        return Err(Error::Precondition(format!(
            "V* = {v_star} lies below the sampled minimum {vmin}; B would be empty"
        )));
    }

    let below: Vec<usize> = (0..=n).filter(|&i| vals[i].v <= v_star).collect();
    let (ib_lo, ib_hi) = (below[0], below[below.len() - 1]);
    let bounded_sublevel = ib_lo > 0 && ib_hi < n;
    report.b_bounds = Some((xs[ib_lo], xs[ib_hi]));

    let outward_slope = (ib_hi + 1..=n).all(|i| vals[i].dv > 0.0) && (0..ib_lo).all(|i| vals[i].dv < 0.0);

    let tail = ((n as f64 * TAIL_FRACTION).ceil() as usize).max(2);
    let left: Vec<usize> = (0..tail).collect();
    let right: Vec<usize> = (n + 1 - tail..=n).collect();
    let tails_outside_b = left.iter().all(|&i| i < ib_lo) && right.iter().all(|&i| i > ib_hi);

    let mut tail_max_u = [0.0f64; 2];
    let mut u_prime_ok = true;
    for (side, idx) in [&left, &right].into_iter().enumerate() {
        let mut up = Vec::with_capacity(idx.len());
        for &i in idx {
            let u = u_of_phi(p, xs[i])?;
            tail_max_u[side] = tail_max_u[side].max(u.abs());
            up.push(p.u_prime(xs[i])?.abs());
        }
        // Order from inner to outer.
        if side == 0 {
            up.reverse();
        }
        let outer_half = &up[up.len() / 2..];
        let settled = outer_half.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9) + 1e-15);
        if !settled {
            return Err(Error::Inconclusive {
                advice: format!(
                    "|u'| is not decreasing toward the {} boundary; widen the scan range beyond [{lo}, {hi}]",
                    if side == 0 { "left" } else { "right" }
                ),
            });
        }
        u_prime_ok &= *up.last().unwrap() < 0.05;
    }
    for m in tail_max_u {
        if (m - 1.0).abs() < 0.02 {
            return Err(Error::Inconclusive {
                advice: format!(
                    "tail |u| = {m:.4} is too close to 1 to decide; widen the scan range beyond [{lo}, {hi}]"
                ),
            });
        }
    }
    let u_below_one = tail_max_u.iter().all(|&m| m < 1.0);
    report.tail_u = Some((tail_max_u[0], tail_max_u[1]));

    let cond = CollapseConditions {
        bounded_sublevel: bounded_sublevel && tails_outside_b,
        outward_slope,
        u_below_one,
        u_prime_vanishes: u_prime_ok,
    };
    report.in_c = cond.bounded_sublevel && cond.outward_slope && cond.u_below_one && cond.u_prime_vanishes;
    report.c_conditions = Some(cond);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_second(p: &Potential, x: f64) -> f64 {
        let h = fd_step(x);
        (p.derivative(x + h) - p.derivative(x - h)) / (2.0 * h)
    }

    fn fd_first(p: &Potential, x: f64) -> f64 {
        let h = fd_step(x);
        (p.value(x + h) - p.value(x - h)) / (2.0 * h)
    }

    fn all_presets() -> Vec<Potential> {
        PRESET_NAMES
            .iter()
            .map(|n| builtin_potential(&PresetSpec::new(*n)).unwrap())
            .chain([exponential(1.0, 0.8, 0.0), decaying_exp(2.0, 0.5)])
            .collect()
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for p in all_presets() {
            for i in -40..=40 {
                let x = 0.15 * i as f64 + 0.013;
                let pv = p.eval(x);
                let tol = 1e-6;
                assert!(
                    (pv.ddv - fd_second(&p, x)).abs() <= tol * (1.0 + pv.ddv.abs()),
                    "{} V'' at {x}",
                    p.name()
                );
                assert!(
                    (pv.dv - fd_first(&p, x)).abs() <= tol * (1.0 + pv.dv.abs()),
                    "{} V' at {x}",
                    p.name()
                );
            }
        }
    }

    #[test]
    fn evaluation_is_pure() {
        let p = figure3(1.0);
        assert_eq!(p.eval(0.37), p.eval(0.37));
    }

    #[test]
    fn u_of_quartic_at_one() {
        let p = figure1();
        let u = u_of_phi(&p, 1.0).unwrap();
        assert!((u - 1.0 / 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn u_of_quartic_tail() {
        let p = quartic(1.0, 1.0);
        let x = 1e4;
        let scaled = u_of_phi(&p, x).unwrap() * x;
        assert!((scaled - 2.0 / 3f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn u_of_exponential_tail() {
        let p = exponential(1.0, 0.5, 1.0);
        assert!((u_of_phi(&p, 200.0).unwrap() - 0.5).abs() < 1e-4);
        assert!((u_of_phi(&p, -200.0).unwrap() + 0.5).abs() < 1e-4);
    }

    #[test]
    fn u_undefined_on_zero_potential() {
        let p = quadratic(1.0, 0.0);
        assert!(matches!(u_of_phi(&p, 0.0), Err(Error::ZeroPotential { .. })));
    }

    #[test]
    fn presets_match_closed_forms() {
        let f1 = builtin_potential(&PresetSpec::new("figure1")).unwrap();
        for x in [-1.3, 0.0, 0.4, 2.0] {
            assert!((f1.value(x) - (1.0 - x * x + x.powi(4))).abs() < 1e-14);
        }
        let f2 = builtin_potential(&PresetSpec::new("figure2_printed")).unwrap();
        for x in [-1.3f64, 0.0, 0.4, 2.0] {
            let want = (2.0 * (1.5 * (x * x + 1.0)).sqrt()).exp() / 100.0;
            assert!((f2.value(x) - want).abs() < 1e-12 * want);
        }
        let f3 = builtin_potential(&PresetSpec::new("figure3")).unwrap();
        for x in [-4.2, -0.3, 0.0, 3.9] {
            let want = 2.0 * (1.0 - (-(x * x + 1.0f64).sqrt()).exp()).powi(2)
                - (-(x + 4.0) * (x + 4.0)).exp() / 6.0
                - 0.5 * (-(x - 4.0) * (x - 4.0)).exp()
                + 1.0;
            assert!((f3.value(x) - want).abs() < 1e-14);
        }
    }

    #[test]
    fn unknown_preset_and_parameter() {
        assert!(matches!(
            builtin_potential(&PresetSpec::new("cosine")),
            Err(Error::UnknownPreset(_))
        ));
        assert!(matches!(
            builtin_potential(&PresetSpec::new("figure1").with("m", 2.0)),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            builtin_potential(&PresetSpec::new("exponential").with("lambda", -1.0)),
            Err(Error::InvalidParameter { .. })
        ));
    }

    #[test]
    fn critical_points_of_figure1() {
        let cps = find_critical_points(&figure1(), -2.0, 2.0, 400);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert_eq!(cps.len(), 3);
        assert!((cps[0].phi + r).abs() < 1e-12 && cps[0].kind == CriticalKind::Minimum);
        assert!(cps[1].phi.abs() < 1e-12 && cps[1].kind == CriticalKind::Maximum);
        assert!((cps[2].phi - r).abs() < 1e-12 && cps[2].kind == CriticalKind::Minimum);
    }

    #[test]
    fn critical_point_of_parabola() {
        let cps = find_critical_points(&quadratic(1.0, 0.0), -1.0, 1.0, 64);
        assert_eq!(cps.len(), 1);
        assert_eq!(cps[0].kind, CriticalKind::Minimum);
        assert!(cps[0].phi.abs() < 1e-14);
    }

    #[test]
    fn figure3_has_several_critical_points() {
        let cps = find_critical_points(&figure3(1.0), -6.0, 6.0, 1200);
        assert!(cps.len() >= 3, "{cps:?}");
    }

    #[test]
    fn critical_points_stable_under_refinement() {
        let p = figure3(1.0);
        let a = find_critical_points(&p, -6.0, 6.0, 600);
        let b = find_critical_points(&p, -6.0, 6.0, 1200);
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            assert!((x.phi - y.phi).abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_minimum_is_admissible() {
        let p = Potential::new("phi^4", |x| [x.powi(4), 4.0 * x.powi(3), 12.0 * x * x]);
        let cps = find_critical_points(&p, -1.0, 1.0, 64);
        assert_eq!(cps.len(), 1);
        assert_eq!(cps[0].kind, CriticalKind::Degenerate);
        let r = classify_potential(&p, -10.0, 10.0, 1.0, 256).unwrap();
        assert!(r.in_v, "{:?}", r.v_failures);
    }

    #[test]
    fn degenerate_maximum_violates_class_v() {
        // -phi^4 near zero inside a confining envelope.
        let p = Potential::new("flat-top", |x| {
            [
                -x.powi(4) + x.powi(6),
                -4.0 * x.powi(3) + 6.0 * x.powi(5),
                -12.0 * x * x + 30.0 * x.powi(4),
            ]
        });
        let r = classify_potential(&p, -3.0, 3.0, 1.0, 300).unwrap();
        assert!(!r.in_v);
        assert!(!r.in_c);
    }

    #[test]
    fn standard_quartic_is_in_all_classes() {
        let r = classify_potential(&quartic(1.0, 1.0), -10.0, 10.0, 1.0, 2000).unwrap();
        assert!(r.in_v && r.in_e && r.in_c, "{r:?}");
        let (lo, hi) = r.b_bounds.unwrap();
        assert!(lo <= hi);
    }

    #[test]
    fn exponential_half_is_in_c() {
        let p = exponential(1.0, 0.5, 1.0);
        let r = classify_potential(&p, -10.0, 10.0, default_v_star(&p, -10.0, 10.0, 2000), 2000).unwrap();
        assert!(r.in_c, "{r:?}");
        let (l, rt) = r.tail_u.unwrap();
        assert!((l - 0.5).abs() < 0.025 && (rt - 0.5).abs() < 0.025);
    }

    #[test]
    fn steep_exponential_is_not_in_c() {
        let p = exponential(1.0, 1.5, 1.0);
        let r = classify_potential(&p, -10.0, 10.0, 200.0, 2000).unwrap();
        assert!(r.in_e && !r.in_c, "{r:?}");
        assert!(!r.c_conditions.unwrap().u_below_one);
    }

    #[test]
    fn linear_potential_is_unbounded_below() {
        let p = Potential::new("linear", |x| [x, 1.0, 0.0]);
        let r = classify_potential(&p, -10.0, 10.0, 1.0, 64).unwrap();
        assert!(!r.in_v && !r.in_c);
        assert!(r.b_bounds.is_none());
        // Enlarging the range keeps the verdict.
        let r = classify_potential(&p, -100.0, 100.0, 1.0, 64).unwrap();
        assert!(!r.in_v);
    }

    #[test]
    fn tail_u_matches_analytic_asymptote() {
        for p in [exponential(1.0, 0.5, 1.0), exponential(0.1, 0.3, 2.0), figure2(1e-3)] {
            let asym = p.analytic_asymptote_u().unwrap();
            let est = u_of_phi(&p, 40.0).unwrap().abs();
            assert!((est - asym).abs() <= 0.05 * asym, "{}", p.name());
        }
    }

    #[test]
    fn classify_rejects_bad_input() {
        let p = figure1();
        assert!(classify_potential(&p, 1.0, 1.0, 1.0, 64).is_err());
        assert!(classify_potential(&p, -1.0, 1.0, 1.0, 8).is_err());
    }

    #[test]
    fn mirror_reflects() {
        let p = figure3(1.0);
        let m = p.mirrored();
        for x in [-2.0, 0.3, 4.1] {
            assert_eq!(m.value(x), p.value(-x));
            assert_eq!(m.derivative(x), -p.derivative(-x));
        }
    }
}
