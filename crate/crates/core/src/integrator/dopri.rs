//! Dormand–Prince 5(4) embedded pair with cubic Hermite dense output.

/// `dy/dx = f(x, y)` on a fixed-size state.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, x: f64, y: &[f64; N], dy: &mut [f64; N]);
}

impl<const N: usize, F> OdeSystem<N> for F
where
    F: Fn(f64, &[f64; N], &mut [f64; N]),
{
    #[inline]
    fn rhs(&self, x: f64, y: &[f64; N], dy: &mut [f64; N]) {
        self(x, y, dy)
    }
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

// Fifth-order weights minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Result of one trial step.
#[derive(Debug, Clone, Copy)]
pub struct Trial<const N: usize> {
    pub y: [f64; N],
    /// Derivative at the new point (first stage of the next step).
    pub f: [f64; N],
    /// Scaled RMS error; the step is acceptable when `err <= 1`.
    pub err: f64,
}

#[inline]
fn axpy<const N: usize>(y: &[f64; N], h: f64, terms: &[(f64, &[f64; N])]) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

/// One Dormand–Prince step of size `h` from `(x, y)` with `f0 = f(x, y)`.
pub fn step<const N: usize, S: OdeSystem<N> + ?Sized>(
    sys: &S,
    x: f64,
    y: &[f64; N],
    f0: &[f64; N],
    h: f64,
    rtol: f64,
    atol: f64,
) -> Trial<N> {
    let k1 = *f0;
    let mut k2 = [0.0; N];
    let mut k3 = [0.0; N];
    let mut k4 = [0.0; N];
    let mut k5 = [0.0; N];
    let mut k6 = [0.0; N];
    let mut k7 = [0.0; N];

    sys.rhs(x + C2 * h, &axpy(y, h, &[(A21, &k1)]), &mut k2);
    sys.rhs(x + C3 * h, &axpy(y, h, &[(A31, &k1), (A32, &k2)]), &mut k3);
    sys.rhs(x + C4 * h, &axpy(y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]), &mut k4);
    sys.rhs(
        x + C5 * h,
        &axpy(y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
        &mut k5,
    );
    sys.rhs(
        x + h,
        &axpy(y, h, &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)]),
        &mut k6,
    );
    let y_new = axpy(y, h, &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)]);
    sys.rhs(x + h, &y_new, &mut k7);

    let mut sum = 0.0;
    for i in 0..N {
        let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
        let scale = atol + rtol * y[i].abs().max(y_new[i].abs());
        sum += (e / scale) * (e / scale);
    }
    let err = if N == 0 { 0.0 } else { (sum / N as f64).sqrt() };

    Trial {
        y: y_new,
        f: k7,
        err: if err.is_finite() { err } else { f64::INFINITY },
    }
}

/// Next step size from a scaled error, with the usual safety factor and
/// growth limits.
#[inline]
pub fn next_step_size(h: f64, err: f64) -> f64 {
    let factor = if err == 0.0 {
        5.0
    } else {
        (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
    };
    h * factor
}

/// Initial step-size guess for a problem starting at `(x, y)`.
pub fn initial_step<const N: usize>(y: &[f64; N], f: &[f64; N], rtol: f64, atol: f64) -> f64 {
    let mut d0 = 0.0;
    let mut d1 = 0.0;
    for i in 0..N {
        let sc = atol + rtol * y[i].abs();
        d0 += (y[i] / sc).powi(2);
        d1 += (f[i] / sc).powi(2);
    }
    let (d0, d1) = ((d0 / N as f64).sqrt(), (d1 / N as f64).sqrt());
    if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
}

/// Cubic Hermite interpolant on `[x0, x1]` for one component.
#[inline]
pub fn hermite(x0: f64, y0: f64, f0: f64, x1: f64, y1: f64, f1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    if h == 0.0 {
        return y0;
    }
    let s = (x - x0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * f0 + h01 * y1 + h11 * h * f1
}

/// Accepted step handed to [`solve`] observers.
#[derive(Debug, Clone, Copy)]
pub struct Accepted<const N: usize> {
    pub x0: f64,
    pub y0: [f64; N],
    pub f0: [f64; N],
    pub x1: f64,
    pub y1: [f64; N],
    pub f1: [f64; N],
}

impl<const N: usize> Accepted<N> {
    pub fn interpolate(&self, x: f64) -> [f64; N] {
        let mut out = [0.0; N];
        for (i, o) in out.iter_mut().enumerate() {
            *o = hermite(self.x0, self.y0[i], self.f0[i], self.x1, self.y1[i], self.f1[i], x);
        }
        out
    }
}

/// Observer verdict on an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flow {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: f64::INFINITY,
            max_steps: 2_000_000,
        }
    }
}

/// Why [`solve`] returned.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveEnd {
    Reached,
    Stopped,
    /// Step size collapsed at this abscissa.
    Underflow(f64),
    NonFinite(f64),
    TooManySteps(f64),
}

/// Integrates from `x0` toward `x_end` (either direction), reporting every
/// accepted step. Returns the last accepted point and the reason for stopping.
pub fn solve<const N: usize, S, O>(
    sys: &S,
    x0: f64,
    y0: [f64; N],
    x_end: f64,
    opts: &SolveOptions,
    mut observe: O,
) -> (f64, [f64; N], SolveEnd)
where
    S: OdeSystem<N> + ?Sized,
    O: FnMut(&Accepted<N>) -> Flow,
{
    let dir = if x_end >= x0 { 1.0 } else { -1.0 };
    let mut x = x0;
    let mut y = y0;
    let mut f = [0.0; N];
    sys.rhs(x, &y, &mut f);
    let span = (x_end - x0).abs();
    if span == 0.0 {
        return (x, y, SolveEnd::Reached);
    }
    let mut h = initial_step(&y, &f, opts.rtol, opts.atol).min(opts.max_step).min(span);
    let h_min = 1e-14 * (1.0 + x0.abs().max(x_end.abs()));

    for _ in 0..opts.max_steps {
        let remaining = (x_end - x).abs();
        if remaining <= 1e-15 * (1.0 + x.abs()) {
            return (x, y, SolveEnd::Reached);
        }
        let last = h >= remaining;
        let hh = if last { remaining } else { h };
        let trial = step(sys, x, &y, &f, dir * hh, opts.rtol, opts.atol);
        if trial.err <= 1.0 && trial.y.iter().all(|v| v.is_finite()) {
            let x1 = if last { x_end } else { x + dir * hh };
            let acc = Accepted {
                x0: x,
                y0: y,
                f0: f,
                x1,
                y1: trial.y,
                f1: trial.f,
            };
            x = x1;
            y = trial.y;
            f = trial.f;
            if observe(&acc) == Flow::Stop {
                return (x, y, SolveEnd::Stopped);
            }
            if last {
                return (x, y, SolveEnd::Reached);
            }
            h = next_step_size(hh, trial.err).min(opts.max_step);
        } else {
            if !trial.err.is_finite() && hh <= h_min {
                return (x, y, SolveEnd::NonFinite(x));
            }
            h = if trial.err.is_finite() {
                next_step_size(hh, trial.err).min(0.9 * hh)
            } else {
                0.25 * hh
            };
            if h < h_min {
                return (x, y, SolveEnd::Underflow(x));
            }
        }
    }
    (x, y, SolveEnd::TooManySteps(x))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let sys = |_x: f64, y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = -y[0];
        let (x, y, end) = solve(&sys, 0.0, [1.0], 3.0, &SolveOptions::default(), |_| Flow::Continue);
        assert_eq!(end, SolveEnd::Reached);
        assert_eq!(x, 3.0);
        assert!((y[0] - (-3.0f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn backward_direction() {
        let sys = |x: f64, _y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = x.cos();
        let (_, y, end) = solve(&sys, 2.0, [2f64.sin()], -1.0, &SolveOptions::default(), |_| {
            Flow::Continue
        });
        assert_eq!(end, SolveEnd::Reached);
        assert!((y[0] - (-1f64).sin()).abs() < 1e-10);
    }

    #[test]
    fn harmonic_oscillator_dense_output() {
        let sys = |_x: f64, y: &[f64; 2], dy: &mut [f64; 2]| {
            dy[0] = y[1];
            dy[1] = -y[0];
        };
        let mut worst: f64 = 0.0;
        let opts = SolveOptions {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: 0.1,
            ..Default::default()
        };
        solve(&sys, 0.0, [0.0, 1.0], 10.0, &opts, |acc| {
            let xm = 0.5 * (acc.x0 + acc.x1);
            worst = worst.max((acc.interpolate(xm)[0] - xm.sin()).abs());
            Flow::Continue
        });
        // Hermite error is O(h^4) with h <= 0.1.
        assert!(worst < 1e-5, "{worst}");
    }

    #[test]
    fn error_shrinks_with_tolerance() {
        let sys = |x: f64, y: &[f64; 1], dy: &mut [f64; 1]| dy[0] = y[0] * x.cos();
        let exact = (5f64.sin()).exp();
        let err = |tol: f64| {
            let opts = SolveOptions {
                rtol: tol,
                atol: tol,
                ..Default::default()
            };
            let (_, y, _) = solve(&sys, 0.0, [1.0], 5.0, &opts, |_| Flow::Continue);
            (y[0] - exact).abs()
        };
        let (e1, e2) = (err(1e-6), err(1e-8));
        assert!(e2 * 2.0 <= e1, "{e1} {e2}");
    }
}
