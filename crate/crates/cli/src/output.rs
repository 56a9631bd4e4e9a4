use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use plotters::prelude::*;
use serde::Serialize;

use scalar_collapse::integrator::Trajectory;
use scalar_collapse::matching::MatchingData;

pub const TRAJECTORY_HEADER: &str = "t,phi,dphi,a,log_a,eps,rho,chi,constraint_residual";
pub const MATCHING_HEADER: &str = "t,Y,U,M,dM_dY";

/// 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn trajectory_csv(traj: &Trajectory) -> String {
    let mut out = String::with_capacity(160 * (traj.samples.len() + 1));
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for s in &traj.samples {
        let st = &s.state;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            num(st.t),
            num(st.phi),
            num(st.v),
            num(st.a()),
            num(st.log_a),
            num(s.eps()),
            num(s.derived.rho.unwrap_or(f64::NAN)),
            st.chi.as_i32(),
            num(s.constraint_residual)
        );
    }
    out
}

pub fn matching_csv(m: &MatchingData) -> String {
    let mut out = String::from(MATCHING_HEADER);
    out.push('\n');
    for s in &m.samples {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            num(s.t),
            num(s.y),
            num(s.u),
            num(s.m),
            num(s.dm_dy)
        );
    }
    out
}

pub fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report values serialize");
    s.push('\n');
    s
}

pub fn write(dir: &Path, name: &str, contents: &str) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(name), contents)
}

fn bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

/// Stacked line charts of `φ`, `log₁₀ ε` and `a` against `t`.
pub fn plot_trajectory(path: &Path, traj: &Trajectory, title: &str) -> Result<(), String> {
    let root = SVGBackend::new(path, (800, 900)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| e.to_string())?;
    let root = root.titled(title, ("sans-serif", 22)).map_err(|e| e.to_string())?;
    let panels = root.split_evenly((3, 1));

    type Series = (&'static str, fn(&scalar_collapse::integrator::Sample) -> f64);
    let series: [Series; 3] = [
        ("phi", |s| s.state.phi),
        ("log10 eps", |s| s.eps().max(1e-300).log10()),
        ("a", |s| s.state.a()),
    ];
    let (t0, t1) = bounds(traj.samples.iter().map(|s| s.t()));
    for (area, (label, f)) in panels.iter().zip(series) {
        let (lo, hi) = bounds(traj.samples.iter().map(f));
        let mut chart = ChartBuilder::on(area)
            .margin(10)
            .x_label_area_size(30)
            .y_label_area_size(60)
            .build_cartesian_2d(t0..t1, lo..hi)
            .map_err(|e| e.to_string())?;
        chart
            .configure_mesh()
            .x_desc("t")
            .y_desc(label)
            .draw()
            .map_err(|e| e.to_string())?;
        chart
            .draw_series(LineSeries::new(traj.samples.iter().map(|s| (s.t(), f(s))), &BLUE))
            .map_err(|e| e.to_string())?;
    }
    root.present().map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-2.0), "-2.0000000000000000e0");
        assert_eq!(num(f64::NAN), "NaN");
        let x = 2.092_431_234_567_891;
        assert_eq!(num(x).parse::<f64>().unwrap(), x);
    }
}
