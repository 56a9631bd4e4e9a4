//! Homogeneous, spatially flat, self-gravitating scalar fields.
//!
//! The crate integrates the Einstein–scalar system for a field `φ(t)` in a
//! flat FLRW background across expanding and collapsing regimes, detects
//! finite-time blow-up, and classifies collapse endstates by matching the
//! interior to a generalized Vaidya exterior.
//!
//! Module map:
//!
//! * [`potentials`]: scalar potentials, presets and class membership tests.
//! * [`dynamics`]: state, right-hand sides and derived quantities (`ε`, `ρ`, `y`).
//! * [`integrator`]: adaptive Dormand–Prince stepping with event location and
//!   blow-up extrapolation.
//! * [`expansion`]: qualitative analysis of expanding solutions.
//! * [`collapse`]: collapse runs, the `ρ`/`y` flows, special branches and the
//!   zero-energy solver.
//! * [`singular_ode`]: contraction solver for `h(s) z' = f(s, z) + g(s)`, `z(0) = 0`.
//! * [`matching`]: Vaidya junction data, apparent horizons and endstates.

pub mod collapse;
pub mod dynamics;
mod error;
pub mod expansion;
pub mod integrator;
pub mod matching;
pub mod potentials;
pub mod roots;
pub mod scenarios;
pub mod singular_ode;

pub use error::{Error, Result};

pub use dynamics::{Branch, DerivedQuantities, FieldState};
pub use integrator::{Event, EventKind, IntegratorConfig, Termination, Trajectory};
pub use potentials::Potential;
