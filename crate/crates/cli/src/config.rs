//! Scenario files: TOML with one table per concern.
//!
//! ```toml
//! mode = "collapse"          # optional; must agree with the subcommand
//! preset = "figure1"         # scenario or potential preset
//! seed = 7
//!
//! [potential]                # overrides the preset's potential
//! preset = "quartic"
//! m = 1.0
//! lambda = 1.0
//!
//! [initial]
//! phi = -0.6
//! v = 0.0                    # or "zero-energy"
//! a = 1.0
//! chi = -1
//!
//! [integrator]               # any IntegratorConfig field
//! rel_tol = 1e-10
//!
//! [run]
//! t_max = 100.0
//! r_b = 0.1
//!
//! [sweep]
//! samples = 1000
//! phi = [-2.0, 2.0]
//! v = [-3.0, 3.0]
//! chi = -1
//! eps_max = 1.5
//!
//! [zero_energy]
//! levels = [10, 100, 1000, 10000]
//! t_star = 1.0
//!
//! [verify_ode]
//! problem = "linear"         # linear | quadratic | perla
//!
//! [check]
//! lo = -20.0
//! hi = 20.0
//!
//! [output]
//! dir = "out"
//! plot = true
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::Deserialize;

use scalar_collapse::IntegratorConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Expand,
    Collapse,
    Match,
    Sweep,
    VerifyOde,
    ZeroEnergy,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Mode::Expand => "expand",
            Mode::Collapse => "collapse",
            Mode::Match => "match",
            Mode::Sweep => "sweep",
            Mode::VerifyOde => "verify-ode",
            Mode::ZeroEnergy => "zero-energy",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub mode: Option<Mode>,
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub potential: Option<PotentialSection>,
    pub initial: Option<InitialSection>,
    pub integrator: Option<IntegratorConfig>,
    #[serde(default)]
    pub run: RunSection,
    pub sweep: Option<SweepSection>,
    pub zero_energy: Option<ZeroEnergySection>,
    pub verify_ode: Option<VerifyOdeSection>,
    pub check: Option<CheckSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
pub struct PotentialSection {
    pub preset: String,
    #[serde(flatten)]
    pub params: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum Velocity {
    Value(f64),
    Keyword(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    pub phi: f64,
    pub v: Velocity,
    #[serde(default = "one")]
    pub a: f64,
    #[serde(default = "minus_one")]
    pub chi: i32,
    #[serde(default)]
    pub t: f64,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub t_max: Option<f64>,
    pub r_b: Option<f64>,
    pub v_star: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub samples: usize,
    #[serde(default = "phi_box")]
    pub phi: [f64; 2],
    #[serde(default = "v_box")]
    pub v: [f64; 2],
    #[serde(default = "one")]
    pub a0: f64,
    #[serde(default = "minus_one")]
    pub chi: i32,
    pub eps_max: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZeroEnergySection {
    #[serde(default = "default_levels")]
    pub levels: Vec<u64>,
    #[serde(default = "one")]
    pub t_star: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyOdeSection {
    pub problem: String,
    /// Defaults to `min(β, 1)/2`.
    pub alpha: Option<f64>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    /// Start of the tail for the `perla` problem.
    pub phi_min: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSection {
    #[serde(default = "check_lo")]
    pub lo: f64,
    #[serde(default = "check_hi")]
    pub hi: f64,
    #[serde(default = "check_resolution")]
    pub resolution: usize,
    pub v_star: Option<f64>,
}

impl Default for CheckSection {
    fn default() -> Self {
        Self {
            lo: check_lo(),
            hi: check_hi(),
            resolution: check_resolution(),
            v_star: None,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
    #[serde(default)]
    pub plot: bool,
}

fn one() -> f64 {
    1.0
}
fn minus_one() -> i32 {
    -1
}
fn phi_box() -> [f64; 2] {
    [-2.0, 2.0]
}
fn v_box() -> [f64; 2] {
    [-3.0, 3.0]
}
fn default_levels() -> Vec<u64> {
    vec![10, 100, 1000, 10_000]
}
fn default_grid() -> usize {
    400
}
fn default_max_iter() -> usize {
    50
}
fn default_tol() -> f64 {
    1e-12
}
fn check_lo() -> f64 {
    -20.0
}
fn check_hi() -> f64 {
    20.0
}
fn check_resolution() -> usize {
    4000
}

/// Configuration problem, anchored to a line of the source file when possible.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub file: Option<String>,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (&self.file, self.line) {
            (Some(file), Some(line)) => write!(f, "{file}:{line}: {}", self.message),
            (Some(file), None) => write!(f, "{file}: {}", self.message),
            (None, _) => f.write_str(&self.message),
        }
    }
}

/// Parsed file plus its text, kept for anchoring later validation errors.
#[derive(Debug, Clone, Default)]
pub struct Source {
    pub file: Option<String>,
    pub text: String,
    pub config: Config,
}

impl Source {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let file = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            file: Some(file.clone()),
            line: None,
            message: format!("cannot read config: {e}"),
        })?;
        Self::parse(&text, Some(file))
    }

    pub fn parse(text: &str, file: Option<String>) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text).map_err(|e| ConfigError {
            file: file.clone(),
            line: e.span().map(|s| line_of_offset(text, s.start)),
            message: e.message().trim().to_string(),
        })?;
        Ok(Self {
            file,
            text: text.to_string(),
            config,
        })
    }

    /// Error pointing at `key` inside `[section]` (top level when `section` is empty).
    pub fn error(&self, section: &str, key: &str, message: impl Into<String>) -> ConfigError {
        let name = if section.is_empty() {
            key.to_string()
        } else if key.is_empty() {
            format!("[{section}]")
        } else {
            format!("[{section}] {key}")
        };
        ConfigError {
            file: self.file.clone(),
            line: find_key(&self.text, section, key),
            message: format!("{name}: {}", message.into()),
        }
    }
}

fn line_of_offset(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

/// 1-based line of `key = ...` inside `[section]`, or of the section header
/// when `key` is empty.
pub fn find_key(text: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if let Some(rest) = line.strip_prefix('[') {
            current = rest.trim_end_matches(']').trim().to_string();
            if key.is_empty() && current == section {
                return Some(i + 1);
            }
            continue;
        }
        if current == section && !key.is_empty() {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    None
}
