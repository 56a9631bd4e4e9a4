use std::fmt;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use scalar_collapse::collapse::{collapse, CollapseOptions, CollapseOutcome, DataDistribution};
use scalar_collapse::dynamics::clamp_energy;
use scalar_collapse::expansion::{classify_expanding, expand, VerdictKind};
use scalar_collapse::matching::{
    classify_endstate, compute_matching, default_r_b, with_horizon_event, EndstateReport, Verdict,
};
use scalar_collapse::potentials::{builtin_potential, classify_potential, default_v_star, PresetSpec, PRESET_NAMES};
use scalar_collapse::scenarios::{scenario, SCENARIO_NAMES};
use scalar_collapse::singular_ode::{perla_problem, residual, solve_contraction, verify_uniqueness, SingularProblem};
use scalar_collapse::{collapse as sc, Branch, Error, FieldState, IntegratorConfig, Potential, Trajectory};

use crate::config::{CheckSection, ConfigError, Mode, Source, Velocity};
use crate::output::{self, num};

/// Failure classes, one per non-zero exit code.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Precondition(_) | Error::UnknownPreset(_) | Error::InvalidParameter { .. } => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Sweep,
    Classify,
    Match,
    ZeroEnergy,
    VerifyOde,
    CheckPotential,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Sweep => "sweep",
            Command::Classify => "classify",
            Command::Match => "match",
            Command::ZeroEnergy => "zero-energy",
            Command::VerifyOde => "verify-ode",
            Command::CheckPotential => "check-potential",
        }
    }

    fn accepts(self, m: Mode) -> bool {
        match self {
            Command::Simulate => matches!(m, Mode::Expand | Mode::Collapse),
            Command::Classify => matches!(m, Mode::Expand | Mode::Collapse | Mode::Match),
            Command::Match => matches!(m, Mode::Match | Mode::Collapse),
            Command::Sweep => m == Mode::Sweep,
            Command::ZeroEnergy => m == Mode::ZeroEnergy,
            Command::VerifyOde => m == Mode::VerifyOde,
            Command::CheckPotential => true,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Globals {
    pub preset: Option<String>,
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub plot: bool,
}

pub struct Context {
    src: Source,
    preset: Option<String>,
    preset_from_cli: bool,
    out: PathBuf,
    seed: u64,
    plot: bool,
}

struct Problem {
    potential: Potential,
    initial: Option<FieldState>,
    scenario: Option<&'static str>,
    reading: Option<&'static str>,
    reference_t_s: Option<f64>,
}

impl Context {
    pub fn new(globals: &Globals) -> Result<Self, Failure> {
        let src = match &globals.config {
            Some(path) => Source::load(path)?,
            None => Source::default(),
        };
        let preset_from_cli = globals.preset.is_some();
        let preset = globals.preset.clone().or_else(|| src.config.preset.clone());
        let out = globals
            .out
            .clone()
            .or_else(|| src.config.output.dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        let seed = globals.seed.or(src.config.seed).unwrap_or(0);
        let plot = globals.plot || src.config.output.plot;
        Ok(Self {
            src,
            preset,
            preset_from_cli,
            out,
            seed,
            plot,
        })
    }

    fn check_mode(&self, cmd: Command) -> Result<(), Failure> {
        match self.src.config.mode {
            Some(m) if !cmd.accepts(m) => Err(self
                .src
                .error("", "mode", format!("`{m}` does not match subcommand `{}`", cmd.name()))
                .into()),
            _ => Ok(()),
        }
    }

    fn preset_error(&self, message: String) -> Failure {
        if self.preset_from_cli {
            Failure::Config(format!("--preset: {message}"))
        } else {
            self.src.error("", "preset", message).into()
        }
    }

    fn integrator(&self) -> Result<IntegratorConfig, Failure> {
        let cfg = self.src.config.integrator.unwrap_or_default();
        cfg.validate().map_err(|e| match &e {
            Error::InvalidParameter { name, .. } => self.src.error("integrator", name, e.to_string()),
            _ => self.src.error("integrator", "", e.to_string()),
        })?;
        Ok(cfg)
    }

    fn problem(&self) -> Result<Problem, Failure> {
        let mut prob = Problem {
            potential: Potential::new("none", |_| [0.0; 3]),
            initial: None,
            scenario: None,
            reading: None,
            reference_t_s: None,
        };
        let mut have_potential = false;
        if let Some(name) = &self.preset {
            if SCENARIO_NAMES.contains(&name.as_str()) {
                let s = scenario(name)?;
                prob.potential = s.potential;
                prob.initial = Some(s.initial);
                prob.scenario = Some(s.name);
                prob.reading = s.reading;
                prob.reference_t_s = Some(s.reference_t_s);
            } else if PRESET_NAMES.contains(&name.as_str()) {
                prob.potential = builtin_potential(&PresetSpec::new(name.clone()))?;
            } else {
                return Err(self.preset_error(format!(
                    "unknown preset `{name}` (scenarios: {}; potentials: {})",
                    SCENARIO_NAMES.join(", "),
                    PRESET_NAMES.join(", ")
                )));
            }
            have_potential = true;
        }
        if let Some(sec) = &self.src.config.potential {
            let spec = PresetSpec {
                name: sec.preset.clone(),
                params: sec.params.clone(),
            };
            prob.potential = builtin_potential(&spec).map_err(|e| match &e {
                Error::UnknownPreset(_) => self.src.error("potential", "preset", e.to_string()),
                Error::InvalidParameter { name, .. } => self.src.error("potential", name, e.to_string()),
                _ => self.src.error("potential", "", e.to_string()),
            })?;
            have_potential = true;
        }
        if !have_potential {
            return Err(Failure::Config(
                "no potential: give --preset, a top-level `preset` or a [potential] section".into(),
            ));
        }
        if let Some(init) = &self.src.config.initial {
            let chi =
                Branch::from_sign(init.chi).ok_or_else(|| self.src.error("initial", "chi", "must be -1 or +1"))?;
            let v = match &init.v {
                Velocity::Value(v) => *v,
                Velocity::Keyword(k) if k == "zero-energy" => {
                    let vphi = prob.potential.value(init.phi);
                    if vphi > 0.0 {
                        return Err(self
                            .src
                            .error("initial", "v", format!("zero-energy data need V(phi) <= 0, got {vphi}"))
                            .into());
                    }
                    (-2.0 * vphi).sqrt()
                }
                Velocity::Keyword(k) => {
                    return Err(self
                        .src
                        .error(
                            "initial",
                            "v",
                            format!("expected a number or \"zero-energy\", got \"{k}\""),
                        )
                        .into())
                }
            };
            let s0 = FieldState::new(init.t, init.phi, v, init.a, chi)
                .map_err(|e| self.src.error("initial", "", e.to_string()))?;
            let vphi = prob.potential.value(s0.phi);
            clamp_energy(v * v + 2.0 * vphi, vphi, s0.phi)
                .map_err(|e| self.src.error("initial", "", format!("inadmissible data: {e}")))?;
            prob.initial = Some(s0);
            prob.reading = None;
        }
        Ok(prob)
    }

    fn initial(&self, prob: &Problem) -> Result<FieldState, Failure> {
        prob.initial
            .ok_or_else(|| Failure::Config("no initial data: use a scenario preset or an [initial] section".into()))
    }

    fn t_max(&self) -> Result<f64, Failure> {
        let t = self.src.config.run.t_max.unwrap_or(1e3);
        if t.is_finite() {
            Ok(t)
        } else {
            Err(self.src.error("run", "t_max", "must be finite").into())
        }
    }

    fn r_b(&self, traj: &Trajectory) -> Result<f64, Failure> {
        match self.src.config.run.r_b {
            Some(r) if !(r > 0.0) => Err(self.src.error("run", "r_b", "must be positive").into()),
            Some(r) => Ok(r),
            None => Ok(default_r_b(traj)),
        }
    }

    fn write(&self, name: &str, contents: &str) -> Result<(), Failure> {
        output::write(&self.out, name, contents)
            .map_err(|e| Failure::Config(format!("cannot write {}: {e}", self.out.join(name).display())))
    }

    fn write_trajectory(&self, traj: &Trajectory, title: &str) -> Result<(), Failure> {
        self.write("trajectory.csv", &output::trajectory_csv(traj))?;
        self.write("events.json", &output::json(&traj.events))?;
        if self.plot {
            let path = self.out.join("plot.svg");
            output::plot_trajectory(&path, traj, title)
                .map_err(|e| Failure::Config(format!("cannot write {}: {e}", path.display())))?;
        }
        Ok(())
    }

    pub fn out_dir(&self) -> &Path {
        &self.out
    }
}

fn header(prob: &Problem, cmd: Command, s0: &FieldState) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(cmd.name()));
    m.insert("scenario".into(), json!(prob.scenario));
    m.insert("reading".into(), json!(prob.reading));
    m.insert("reference_t_s".into(), json!(prob.reference_t_s));
    m.insert("potential".into(), json!(prob.potential.name()));
    m.insert("initial".into(), json!(s0));
    m
}

fn trajectory_summary(m: &mut serde_json::Map<String, Value>, traj: &Trajectory) {
    let max_res = traj.samples.iter().map(|s| s.constraint_residual).fold(0.0, f64::max);
    m.insert("termination".into(), json!(traj.termination));
    m.insert("samples".into(), json!(traj.samples.len()));
    m.insert("max_constraint_residual".into(), json!(max_res));
}

/// Runs one subcommand and returns the lines to print on success.
pub fn run(cmd: Command, ctx: &Context) -> Result<Vec<String>, Failure> {
    ctx.check_mode(cmd)?;
    match cmd {
        Command::Simulate => simulate(ctx, false, false),
        Command::Classify => simulate(ctx, true, false),
        Command::Match => simulate(ctx, true, true),
        Command::Sweep => sweep(ctx),
        Command::ZeroEnergy => zero_energy(ctx),
        Command::VerifyOde => verify_ode(ctx),
        Command::CheckPotential => check_potential(ctx),
    }
}

fn simulate(ctx: &Context, endstate: bool, matching: bool) -> Result<Vec<String>, Failure> {
    let cmd = match (endstate, matching) {
        (_, true) => Command::Match,
        (true, false) => Command::Classify,
        _ => Command::Simulate,
    };
    let prob = ctx.problem()?;
    let s0 = ctx.initial(&prob)?;
    let cfg = ctx.integrator()?;
    let t_max = ctx.t_max()?;
    let p = &prob.potential;
    match ctx.src.config.mode {
        Some(Mode::Expand) if s0.chi != Branch::Expanding => {
            return Err(ctx.src.error("initial", "chi", "mode `expand` needs chi = +1").into())
        }
        Some(Mode::Collapse | Mode::Match) if s0.chi != Branch::Collapsing => {
            return Err(ctx.src.error("initial", "chi", "collapse modes need chi = -1").into())
        }
        _ => {}
    }
    if matching && s0.chi != Branch::Collapsing {
        return Err(Failure::Config("match needs collapsing data (chi = -1)".into()));
    }

    let mut report = header(&prob, cmd, &s0);
    let mut lines = Vec::new();
    let title = prob.scenario.unwrap_or(p.name()).to_string();
    match s0.chi {
        Branch::Collapsing => {
            let opts = CollapseOptions {
                t_max,
                v_star: ctx.src.config.run.v_star,
            };
            let (rep, mut traj) = collapse(&s0, p, &cfg, &opts)?;
            report.insert("t_s".into(), json!(rep.t_s));
            report.insert("collapse".into(), json!(rep));
            match rep.t_s {
                Some(t_s) => lines.push(format!("t_s = {}", num(t_s))),
                None => lines.push(format!("no blow-up: {:?}", rep.outcome)),
            }
            if endstate {
                let r_b = ctx.r_b(&traj)?;
                let end = classify_endstate(p, &rep, &traj, r_b);
                traj = with_horizon_event(&traj, p, r_b);
                lines.push(format!("endstate = {}", verdict_label(end.verdict)));
                report.insert("endstate".into(), json!(end));
                if matching {
                    let m = compute_matching(&traj, p, r_b)?;
                    report.insert("denominator_sign_change".into(), json!(m.denominator_sign_change));
                    ctx.write("matching.csv", &output::matching_csv(&m))?;
                }
            }
            trajectory_summary(&mut report, &traj);
            ctx.write_trajectory(&traj, &title)?;
        }
        Branch::Expanding => {
            let (verdict, traj) = expand(&s0, p, &cfg, t_max)?;
            lines.push(format!("verdict = {}", expansion_label(&verdict.kind)));
            report.insert("t_s".into(), Value::Null);
            report.insert("expansion".into(), json!(verdict));
            trajectory_summary(&mut report, &traj);
            ctx.write_trajectory(&traj, &title)?;
        }
    }
    if let Some(r) = prob.reading {
        lines.push(format!("reading: {r}"));
    }
    ctx.write("report.json", &output::json(&Value::Object(report)))?;
    Ok(lines)
}

fn verdict_label(v: Verdict) -> &'static str {
    match v {
        Verdict::BlackHole => "black_hole",
        Verdict::NakedSingularity => "naked_singularity",
        Verdict::Undetermined => "undetermined",
    }
}

fn expansion_label(k: &VerdictKind) -> &'static str {
    match k {
        VerdictKind::EnergyZeroExit { .. } => "energy_zero_exit",
        VerdictKind::ConvergesToMinimum { .. } => "converges_to_minimum",
        VerdictKind::ConvergesToMaximum { .. } => "converges_to_maximum",
        VerdictKind::Inconclusive => "inconclusive",
    }
}

enum SampleResult {
    Collapse(sc::CollapseReport, EndstateReport),
    Expand(VerdictKind),
    Failed(String),
}

pub const SAMPLES_HEADER: &str = "index,phi0,dphi0,eps0,chi,outcome,t_s,rho_inf,generic,verdict";

fn sweep(ctx: &Context) -> Result<Vec<String>, Failure> {
    let prob = ctx.problem()?;
    let p = &prob.potential;
    let cfg = ctx.integrator()?;
    let t_max = ctx.t_max()?;
    let sec = ctx.src.config.sweep.clone();
    let samples = sec.as_ref().map_or(1000, |s| s.samples);
    if samples == 0 {
        return Err(ctx.src.error("sweep", "samples", "must be at least 1").into());
    }
    let mut dist = DataDistribution::default();
    if let Some(s) = &sec {
        dist.phi = (s.phi[0], s.phi[1]);
        dist.v = (s.v[0], s.v[1]);
        dist.a0 = s.a0;
        dist.eps_max = s.eps_max;
        dist.chi = Branch::from_sign(s.chi).ok_or_else(|| ctx.src.error("sweep", "chi", "must be -1 or +1"))?;
        for (key, (lo, hi)) in [("phi", dist.phi), ("v", dist.v)] {
            if !(hi >= lo) {
                return Err(ctx.src.error("sweep", key, format!("empty range [{lo}, {hi}]")).into());
            }
        }
        if !(s.a0 > 0.0) {
            return Err(ctx.src.error("sweep", "a0", "must be positive").into());
        }
    }
    sc::sample_initial_data(p, &dist, ctx.seed, 0)
        .map_err(|e| ctx.src.error("sweep", "", format!("empty distribution: {e}")))?;

    let opts = CollapseOptions {
        t_max,
        v_star: Some(
            ctx.src
                .config
                .run
                .v_star
                .unwrap_or_else(|| default_v_star(p, -20.0, 20.0, 4000)),
        ),
    };
    let results = sc::sweep_map(p, samples, &dist, ctx.seed, |s0| {
        Ok(match s0.chi {
            Branch::Collapsing => match collapse(s0, p, &cfg, &opts) {
                Ok((rep, traj)) => {
                    let end = classify_endstate(p, &rep, &traj, default_r_b(&traj));
                    SampleResult::Collapse(rep, end)
                }
                Err(e) => SampleResult::Failed(e.to_string()),
            },
            Branch::Expanding => match classify_expanding(s0, p, &cfg, t_max) {
                Ok(v) => SampleResult::Expand(v.kind),
                Err(e) => SampleResult::Failed(e.to_string()),
            },
        })
    });

    let mut csv = String::from(SAMPLES_HEADER);
    csv.push('\n');
    let mut counts = std::collections::BTreeMap::<&str, usize>::new();
    let mut first_error: Option<String> = None;
    for (i, (s0, r)) in results.iter().enumerate() {
        let eps0 = s0.v * s0.v + 2.0 * p.value(s0.phi);
        let (outcome, t_s, rho, generic, verdict) = match r {
            Ok(SampleResult::Collapse(rep, end)) => {
                let outcome = match rep.outcome {
                    CollapseOutcome::BlowUp => "blow_up",
                    CollapseOutcome::ConvergedToCritical { .. } => "converged_to_critical",
                    CollapseOutcome::TimeLimit => "time_limit",
                };
                (
                    outcome,
                    rep.t_s.unwrap_or(f64::NAN),
                    rep.rho_inf,
                    rep.generic,
                    verdict_label(end.verdict),
                )
            }
            Ok(SampleResult::Expand(k)) => (expansion_label(k), f64::NAN, f64::NAN, false, ""),
            Ok(SampleResult::Failed(msg)) => {
                first_error.get_or_insert_with(|| format!("sample {i}: {msg}"));
                ("error", f64::NAN, f64::NAN, false, "")
            }
            Err(e) => {
                first_error.get_or_insert_with(|| format!("sample {i}: {e}"));
                ("error", f64::NAN, f64::NAN, false, "")
            }
        };
        *counts.entry(outcome).or_default() += 1;
        if generic {
            *counts.entry("generic").or_default() += 1;
        }
        if !verdict.is_empty() {
            *counts.entry(verdict).or_default() += 1;
        }
        csv.push_str(&format!(
            "{i},{},{},{},{},{outcome},{},{},{},{verdict}\n",
            num(s0.phi),
            num(s0.v),
            num(eps0),
            s0.chi.as_i32(),
            num(t_s),
            num(rho),
            u8::from(generic)
        ));
    }
    let frac = |k: &str| counts.get(k).copied().unwrap_or(0) as f64 / samples as f64;
    let converged = frac("converged_to_critical") + frac("converges_to_minimum") + frac("converges_to_maximum");
    let summary = json!({
        "command": "sweep",
        "potential": p.name(),
        "seed": ctx.seed,
        "samples": samples,
        "chi": dist.chi.as_i32(),
        "fraction_generic": frac("generic"),
        "fraction_black_hole": frac("black_hole"),
        "fraction_naked_singularity": frac("naked_singularity"),
        "fraction_undetermined": frac("undetermined"),
        "fraction_converged": converged,
        "fraction_converges_to_minimum": frac("converges_to_minimum"),
        "fraction_converges_to_maximum": frac("converges_to_maximum"),
        "fraction_energy_zero_exit": frac("energy_zero_exit"),
        "fraction_inconclusive": frac("inconclusive") + frac("time_limit"),
        "fraction_errors": frac("error"),
        "first_error": first_error,
    });
    ctx.write("samples.csv", &csv)?;
    ctx.write("summary.json", &output::json(&summary))?;
    let keys = [
        "fraction_generic",
        "fraction_black_hole",
        "fraction_naked_singularity",
        "fraction_converged",
        "fraction_errors",
    ];
    Ok(keys.iter().map(|k| format!("{k} = {}", summary[*k])).collect())
}

fn zero_energy(ctx: &Context) -> Result<Vec<String>, Failure> {
    let prob = ctx.problem()?;
    let s0 = ctx.initial(&prob)?;
    let cfg = ctx.integrator()?;
    let sec = ctx.src.config.zero_energy.clone();
    let levels = sec
        .as_ref()
        .map_or_else(|| vec![10, 100, 1000, 10_000], |s| s.levels.clone());
    let t_star = sec.as_ref().map_or(1.0, |s| s.t_star);
    let sol = sc::solve_zero_energy(s0.phi, s0.v, &prob.potential, &levels, t_star, &cfg)?;
    let mut csv = String::from("t,phi,dphi\n");
    for &(t, phi, v) in &sol.samples {
        csv.push_str(&format!("{},{},{}\n", num(t), num(phi), num(v)));
    }
    ctx.write("zero_energy.csv", &csv)?;
    let mut report = header(&prob, Command::ZeroEnergy, &s0);
    report.insert("t_star".into(), json!(t_star));
    report.insert("levels".into(), json!(sol.levels));
    report.insert("level_differences".into(), json!(sol.level_differences));
    report.insert("limit_distances".into(), json!(sol.limit_distances));
    report.insert("integral_law_defects".into(), json!(sol.integral_law_defects));
    report.insert("selection_defect".into(), json!(sol.selection_defect));
    ctx.write("report.json", &output::json(&Value::Object(report)))?;
    Ok(sol
        .levels
        .windows(2)
        .zip(&sol.level_differences)
        .map(|(w, d)| format!("sup |phi_{} - phi_{}| = {d:.3e}", w[0], w[1]))
        .collect())
}

fn verify_ode(ctx: &Context) -> Result<Vec<String>, Failure> {
    let sec = ctx
        .src
        .config
        .verify_ode
        .clone()
        .unwrap_or(crate::config::VerifyOdeSection {
            problem: "linear".into(),
            alpha: None,
            grid: 400,
            max_iter: 50,
            tol: 1e-12,
            phi_min: None,
        });
    let toy = |g: fn(f64) -> f64| SingularProblem::new(|s| s, |_s, z| -z, g, 1.0).with_ell(|_| -1.0);
    type Exact = Option<fn(f64) -> f64>;
    let (pr, exact): (SingularProblem, Exact) = match sec.problem.as_str() {
        "linear" => (toy(|s| s), Some(|s| 0.5 * s)),
        "quadratic" => (toy(|s| s * s), Some(|s| s * s / 3.0)),
        "perla" => {
            let phi_min = sec
                .phi_min
                .ok_or_else(|| ctx.src.error("verify_ode", "problem", "`perla` needs phi_min"))?;
            let prob = ctx.problem()?;
            (perla_problem(&prob.potential, phi_min)?, None)
        }
        other => {
            return Err(ctx
                .src
                .error(
                    "verify_ode",
                    "problem",
                    format!("unknown problem `{other}` (linear, quadratic, perla)"),
                )
                .into())
        }
    };
    let alpha = sec.alpha.unwrap_or(0.5 * pr.beta.min(1.0));
    let sol = solve_contraction(&pr, alpha, sec.grid, sec.max_iter, sec.tol)?;
    let res = residual(&pr, &sol);
    let uniq = verify_uniqueness(&pr, &sol, &[0.0, 1e-3, -1e-3], 0.5 * sol.alpha, 1e-10)?;
    let sup_error = exact.map(|f| {
        sol.s
            .iter()
            .zip(&sol.z)
            .map(|(&s, &z)| (z - f(s)).abs())
            .fold(0.0, f64::max)
    });

    let mut csv = String::from("s,z\n");
    for (s, z) in sol.s.iter().zip(&sol.z) {
        csv.push_str(&format!("{},{}\n", num(*s), num(*z)));
    }
    ctx.write("solution.csv", &csv)?;
    let report = json!({
        "command": "verify-ode",
        "problem": sec.problem,
        "alpha": sol.alpha,
        "beta": pr.beta,
        "iterations": sol.iterations,
        "ratios": sol.ratios,
        "last_change": sol.last_change,
        "residual": res,
        "sup_error": sup_error,
        "uniqueness": uniq,
    });
    ctx.write("report.json", &output::json(&report))?;
    let mut lines = vec![
        format!("iterations = {}", sol.iterations),
        format!("residual = {res:.3e}"),
        format!("uniqueness probe passes = {}", uniq.passes),
    ];
    if let Some(z) = uniq.probes.iter().find(|p| p.offset == 0.0) {
        lines.push(format!("zero-offset backward deviation = {:.3e}", z.max_deviation));
    }
    if let Some(e) = sup_error {
        lines.push(format!("sup error = {e:.3e}"));
    }
    Ok(lines)
}

fn check_potential(ctx: &Context) -> Result<Vec<String>, Failure> {
    let prob = ctx.problem()?;
    let p = &prob.potential;
    let c = ctx.src.config.check.clone().unwrap_or_default();
    let CheckSection {
        lo,
        hi,
        resolution,
        v_star,
    } = c;
    if !(hi > lo) {
        return Err(ctx
            .src
            .error("check", "hi", format!("empty scan range [{lo}, {hi}]"))
            .into());
    }
    let v_star = v_star
        .or(ctx.src.config.run.v_star)
        .unwrap_or_else(|| default_v_star(p, lo, hi, resolution));
    let rep = classify_potential(p, lo, hi, v_star, resolution)?;
    let report = json!({
        "command": "check-potential",
        "potential": p.name(),
        "class": rep,
    });
    ctx.write("report.json", &output::json(&report))?;
    let mut lines = vec![format!(
        "class V: {}, class E: {}, class C: {}",
        rep.in_v, rep.in_e, rep.in_c
    )];
    lines.extend(rep.v_failures.iter().map(|f| format!("  {f}")));
    for cp in &rep.critical_points {
        lines.push(format!(
            "critical point phi = {} ({:?}, V = {})",
            num(cp.phi),
            cp.kind,
            num(cp.value)
        ));
    }
    Ok(lines)
}
