//! Browser bindings. Every export returns a JSON string; `www/main.js` draws it.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use scalar_collapse::collapse::{collapse, y_flow, CollapseOptions, YCase};
use scalar_collapse::expansion::{expand, VerdictKind};
use scalar_collapse::matching::{classify_endstate, default_r_b, Verdict};
use scalar_collapse::potentials::{builtin_potential, find_critical_points, CriticalPoint, PresetSpec, PRESET_NAMES};
use scalar_collapse::scenarios::{scenario, SCENARIO_NAMES};
use scalar_collapse::{Branch, FieldState, IntegratorConfig, Potential, Trajectory};

/// Points sent to the page per curve.
const MAX_POINTS: usize = 1500;

#[derive(Serialize)]
struct Series {
    t: Vec<f64>,
    phi: Vec<f64>,
    log10_eps: Vec<f64>,
    a: Vec<f64>,
}

#[derive(Serialize)]
struct Simulation {
    potential: String,
    phi0: f64,
    v0: f64,
    chi: i32,
    termination: String,
    t_s: Option<f64>,
    rho_inf: Option<f64>,
    verdict: String,
    reading: Option<String>,
    series: Series,
}

#[derive(Serialize)]
struct Curve {
    phi: Vec<f64>,
    v: Vec<f64>,
    u: Vec<Option<f64>>,
    critical_points: Vec<CriticalPoint>,
}

#[derive(Serialize)]
struct Flow {
    phi: Vec<f64>,
    y: Vec<f64>,
    case: YCase,
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn potential_for(name: &str) -> Result<Potential, String> {
    if SCENARIO_NAMES.contains(&name) {
        return scenario(name).map(|s| s.potential).map_err(|e| e.to_string());
    }
    builtin_potential(&PresetSpec::new(name)).map_err(|e| e.to_string())
}

fn series(traj: &Trajectory) -> Series {
    let stride = traj.samples.len().div_ceil(MAX_POINTS).max(1);
    let mut picked: Vec<_> = traj.samples.iter().step_by(stride).collect();
    if picked.last().map(|s| s.t()) != Some(traj.last().t()) {
        picked.push(traj.last());
    }
    Series {
        t: picked.iter().map(|s| s.t()).collect(),
        phi: picked.iter().map(|s| s.state.phi).collect(),
        log10_eps: picked.iter().map(|s| s.eps().max(1e-300).log10()).collect(),
        a: picked.iter().map(|s| s.state.a()).collect(),
    }
}

fn verdict_name(v: Verdict) -> &'static str {
    match v {
        Verdict::BlackHole => "black hole",
        Verdict::NakedSingularity => "naked singularity",
        Verdict::Undetermined => "undetermined",
    }
}

/// Preset and scenario names as a JSON object.
pub fn preset_names_json() -> String {
    serde_json::json!({ "scenarios": SCENARIO_NAMES, "potentials": PRESET_NAMES }).to_string()
}

/// Runs a scenario with its own data, or any preset from `(phi0, v0, chi)`.
pub fn simulate_json(
    name: &str,
    phi0: f64,
    v0: f64,
    chi: i32,
    use_scenario_data: bool,
    t_max: f64,
) -> Result<String, String> {
    let (p, s0, reading) = if use_scenario_data {
        let s = scenario(name).map_err(|e| e.to_string())?;
        (s.potential, s.initial, s.reading.map(str::to_string))
    } else {
        let p = potential_for(name)?;
        let branch = Branch::from_sign(chi).ok_or("chi must be -1 or +1")?;
        let s0 = FieldState::new(0.0, phi0, v0, 1.0, branch).map_err(|e| e.to_string())?;
        (p, s0, None)
    };
    let eps0 = s0.v * s0.v + 2.0 * p.value(s0.phi);
    if eps0 < 0.0 {
        return Err(format!("inadmissible data: eps0 = {eps0:.4} < 0"));
    }
    let cfg = IntegratorConfig::default();
    let (termination, t_s, rho_inf, verdict, traj) = match s0.chi {
        Branch::Collapsing => {
            let (rep, traj) =
                collapse(&s0, &p, &cfg, &CollapseOptions { t_max, v_star: None }).map_err(|e| e.to_string())?;
            let end = classify_endstate(&p, &rep, &traj, default_r_b(&traj));
            let rho = rep.rho_inf.is_finite().then_some(rep.rho_inf);
            (
                traj.termination,
                rep.t_s,
                rho,
                verdict_name(end.verdict).to_string(),
                traj,
            )
        }
        Branch::Expanding => {
            let (v, traj) = expand(&s0, &p, &cfg, t_max).map_err(|e| e.to_string())?;
            let verdict = match v.kind {
                VerdictKind::EnergyZeroExit { t, .. } => format!("energy reaches zero at t = {t:.4}"),
                VerdictKind::ConvergesToMinimum { phi_star } => format!("converges to the minimum at {phi_star:.4}"),
                VerdictKind::ConvergesToMaximum { phi_star } => format!("converges to the maximum at {phi_star:.4}"),
                VerdictKind::Inconclusive => "inconclusive within t_max".to_string(),
            };
            (traj.termination, None, None, verdict, traj)
        }
    };
    to_json(&Simulation {
        potential: p.name().to_string(),
        phi0: s0.phi,
        v0: s0.v,
        chi: s0.chi.as_i32(),
        termination: format!("{termination:?}"),
        t_s,
        rho_inf,
        verdict,
        reading,
        series: series(&traj),
    })
}

/// `V`, `u = V'/(2√3 V)` and critical points on `[lo, hi]`.
pub fn potential_curve_json(name: &str, lo: f64, hi: f64, n: usize) -> Result<String, String> {
    if !(hi > lo) || n < 2 {
        return Err("need lo < hi and at least two points".into());
    }
    let p = potential_for(name)?;
    let n = n.min(4000);
    let phi: Vec<f64> = (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect();
    to_json(&Curve {
        v: phi.iter().map(|&x| p.value(x)).collect(),
        u: phi.iter().map(|&x| p.u(x).ok()).collect(),
        critical_points: find_critical_points(&p, lo, hi, 2000),
        phi,
    })
}

/// The `y` flow from `(phi0, y0)` up to `phi_max`.
pub fn y_flow_json(name: &str, phi0: f64, y0: f64, phi_max: f64) -> Result<String, String> {
    let p = potential_for(name)?;
    let f = y_flow(phi0, y0, &p, phi_max).map_err(|e| e.to_string())?;
    let stride = f.samples.len().div_ceil(MAX_POINTS).max(1);
    let picked: Vec<_> = f.samples.iter().step_by(stride).collect();
    to_json(&Flow {
        phi: picked.iter().map(|s| s.0).collect(),
        y: picked.iter().map(|s| s.1).collect(),
        case: f.case,
    })
}

#[wasm_bindgen]
pub fn preset_names() -> String {
    preset_names_json()
}

#[wasm_bindgen]
pub fn simulate(
    name: &str,
    phi0: f64,
    v0: f64,
    chi: i32,
    use_scenario_data: bool,
    t_max: f64,
) -> Result<String, JsError> {
    simulate_json(name, phi0, v0, chi, use_scenario_data, t_max).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn potential_curve(name: &str, lo: f64, hi: f64, n: usize) -> Result<String, JsError> {
    potential_curve_json(name, lo, hi, n).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn y_flow_trace(name: &str, phi0: f64, y0: f64, phi_max: f64) -> Result<String, JsError> {
    y_flow_json(name, phi0, y0, phi_max).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn figure1_scenario_round_trip() {
        let out: Value = serde_json::from_str(&simulate_json("figure1", 0.0, 0.0, -1, true, 100.0).unwrap()).unwrap();
        let t_s = out["t_s"].as_f64().unwrap();
        assert!((2.0..2.2).contains(&t_s));
        assert_eq!(out["verdict"], "black hole");
        let n = out["series"]["t"].as_array().unwrap().len();
        assert!(n > 10 && n <= MAX_POINTS + 1);
    }

    #[test]
    fn custom_expanding_data() {
        let out: Value = serde_json::from_str(&simulate_json("figure1", 0.5, 0.1, 1, false, 400.0).unwrap()).unwrap();
        assert!(out["verdict"].as_str().unwrap().starts_with("converges to the minimum"));
        assert!(simulate_json("quadratic", 0.0, 0.0, 1, false, 10.0).is_err());
        assert!(simulate_json("figure1", 0.0, 0.0, 3, false, 10.0).is_err());
    }

    #[test]
    fn curve_and_flow() {
        let c: Value = serde_json::from_str(&potential_curve_json("figure1", -2.0, 2.0, 101).unwrap()).unwrap();
        assert_eq!(c["phi"].as_array().unwrap().len(), 101);
        assert_eq!(c["critical_points"].as_array().unwrap().len(), 3);
        assert_eq!(c["v"][50].as_f64(), Some(1.0));

        let f: Value = serde_json::from_str(&y_flow_json("quartic", 2.0, 1.5, 12.0).unwrap()).unwrap();
        assert_eq!(f["case"], "decays_to_one");
        assert!(y_flow_json("quartic", 2.0, 0.5, 12.0).is_err());
    }
}
