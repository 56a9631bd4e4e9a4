//! Named initial-value problems for the figure reproductions.

use crate::dynamics::{Branch, FieldState};
use crate::potentials::{figure1, figure2, figure3, Potential, FIGURE2_AMPLITUDE, FIGURE2_PRINTED_AMPLITUDE};
use crate::{Error, Result};

pub const SCENARIO_NAMES: &[&str] = &["figure1", "figure2", "figure2_printed", "figure3", "figure3_printed"];

#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: &'static str,
    pub potential: Potential,
    pub initial: FieldState,
    /// How the initial data were read, when more than one reading exists.
    pub reading: Option<&'static str>,
    /// Collapse time quoted with the figure.
    pub reference_t_s: f64,
}

pub fn scenario(name: &str) -> Result<Scenario> {
    let collapsing = |phi: f64, v: f64| FieldState::new(0.0, phi, v, 1.0, Branch::Collapsing);
    let s = match name {
        "figure1" => Scenario {
            name: "figure1",
            potential: figure1(),
            initial: collapsing(-0.6, 0.0)?,
            reading: None,
            reference_t_s: 2.1,
        },
        "figure2" => Scenario {
            name: "figure2",
            potential: figure2(FIGURE2_AMPLITUDE),
            initial: collapsing(0.1, 0.0)?,
            reading: Some("amplitude 1/1000"),
            reference_t_s: 15.3,
        },
        "figure2_printed" => Scenario {
            name: "figure2_printed",
            potential: figure2(FIGURE2_PRINTED_AMPLITUDE),
            initial: collapsing(0.1, 0.0)?,
            reading: Some("amplitude 1/100 as printed"),
            reference_t_s: 15.3,
        },
        "figure3" => {
            let p = figure3(-1.0);
            let v0 = (-2.0 * p.value(0.0)).sqrt();
            Scenario {
                name: "figure3",
                initial: collapsing(0.0, v0)?,
                potential: p,
                reading: Some("constant term -1, v0 = sqrt(-2V(0)), zero initial energy"),
                reference_t_s: 1.8,
            }
        }
        "figure3_printed" => {
            let p = figure3(1.0);
            let v0 = (2.0 * p.value(0.0)).sqrt();
            Scenario {
                name: "figure3_printed",
                initial: collapsing(0.0, v0)?,
                potential: p,
                reading: Some("constant term +1 as printed, v0 = sqrt(2V(0))"),
                reference_t_s: 1.8,
            }
        }
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(s)
}
