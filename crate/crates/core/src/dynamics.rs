//! State and right-hand sides of the flat Einstein–scalar system
//!
//! ```text
//! ȧ/a = χ √(ε/3)
//! φ̈ + V'(φ) = −χ √3 √ε φ̇
//! ε = φ̇² + 2V(φ)
//! ```
//!
//! together with the collapse-analysis variables `ρ = 2V/φ̇²` and `y = √(1+ρ)`.
//! Units absorb `8πG`; the Friedmann constraint reads `3ȧ²/a² = φ̇² + 2V`.

use serde::{Deserialize, Serialize};

use crate::potentials::Potential;
use crate::{Error, Result};

pub(crate) const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Sign of `ȧ`: the branch of the square-rooted Friedmann constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Expanding,
    Collapsing,
}

impl Branch {
    #[inline]
    pub fn sign(self) -> f64 {
        match self {
            Branch::Expanding => 1.0,
            Branch::Collapsing => -1.0,
        }
    }

    pub fn from_sign(chi: i32) -> Option<Self> {
        match chi {
            1 => Some(Branch::Expanding),
            -1 => Some(Branch::Collapsing),
            _ => None,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Branch::Expanding => Branch::Collapsing,
            Branch::Collapsing => Branch::Expanding,
        }
    }

    pub fn as_i32(self) -> i32 {
        self.sign() as i32
    }
}

/// Instantaneous state `(t, φ, φ̇, a, χ)`.
///
/// The scale factor is stored as `log a`, so `a > 0` holds by construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub t: f64,
    pub phi: f64,
    pub v: f64,
    pub log_a: f64,
    pub chi: Branch,
}

impl FieldState {
    pub fn new(t: f64, phi: f64, v: f64, a: f64, chi: Branch) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::Precondition(format!(
                "scale factor must be positive and finite, got {a}"
            )));
        }
        Ok(Self {
            t,
            phi,
            v,
            log_a: a.ln(),
            chi,
        })
    }

    #[inline]
    pub fn a(&self) -> f64 {
        self.log_a.exp()
    }
}

/// `ε`, `ρ` and `y` at one state. `ρ` needs `φ̇ ≠ 0`; `y` additionally `ε ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedQuantities {
    pub eps: f64,
    pub rho: Option<f64>,
    pub y: Option<f64>,
}

/// `(φ̇, φ̈, ȧ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rhs {
    pub dphi: f64,
    pub dv: f64,
    pub da: f64,
}

/// `ε = φ̇² + 2V(φ)`.
#[inline]
pub fn energy_density(s: &FieldState, p: &Potential) -> f64 {
    s.v * s.v + 2.0 * p.value(s.phi)
}

/// Roundoff allowance below zero for `ε`: `1e-12·(1 + |2V|)`.
#[inline]
pub fn energy_clamp_tol(v_phi: f64) -> f64 {
    1e-12 * (1.0 + (2.0 * v_phi).abs())
}

/// Maps `ε` slightly below zero (roundoff) to zero; rejects anything lower.
pub fn clamp_energy(eps: f64, v_phi: f64, phi: f64) -> Result<f64> {
    if eps >= 0.0 {
        Ok(eps)
    } else if eps > -energy_clamp_tol(v_phi) {
        Ok(0.0)
    } else {
        Err(Error::NegativeEnergy { eps, phi })
    }
}

fn clamped_energy(s: &FieldState, p: &Potential) -> Result<(f64, f64)> {
    let vphi = p.value(s.phi);
    let eps = clamp_energy(s.v * s.v + 2.0 * vphi, vphi, s.phi)?;
    Ok((eps, vphi))
}

/// Right-hand side of the first-order system in `(φ, φ̇, a)`.
pub fn system_rhs(s: &FieldState, p: &Potential) -> Result<Rhs> {
    let (eps, _) = clamped_energy(s, p)?;
    let chi = s.chi.sign();
    let root = eps.sqrt();
    Ok(Rhs {
        dphi: s.v,
        dv: -p.derivative(s.phi) - chi * SQRT3 * root * s.v,
        da: chi * s.a() * (eps / 3.0).sqrt(),
    })
}

/// `ε̇ = −2χ√3 √ε φ̇²`.
pub fn energy_rate(s: &FieldState, p: &Potential) -> Result<f64> {
    let (eps, _) = clamped_energy(s, p)?;
    Ok(-2.0 * s.chi.sign() * SQRT3 * eps.sqrt() * s.v * s.v)
}

/// `ρ = 2V/φ̇²`.
pub fn rho(s: &FieldState, p: &Potential) -> Result<f64> {
    if s.v == 0.0 {
        return Err(Error::ZeroVelocity { quantity: "rho" });
    }
    Ok(2.0 * p.value(s.phi) / (s.v * s.v))
}

/// `y = √(1+ρ) = √ε / |φ̇|`.
pub fn y_variable(s: &FieldState, p: &Potential) -> Result<f64> {
    let (eps, _) = clamped_energy(s, p)?;
    if s.v == 0.0 {
        return Err(Error::ZeroVelocity { quantity: "y" });
    }
    Ok(eps.sqrt() / s.v.abs())
}

pub fn derived(s: &FieldState, p: &Potential) -> DerivedQuantities {
    let eps = energy_density(s, p);
    let rho = rho(s, p).ok();
    let y = if eps >= 0.0 { y_variable(s, p).ok() } else { None };
    DerivedQuantities { eps, rho, y }
}

/// Hubble rate `ȧ/a = χ√(ε/3)` reconstructed from the constraint.
pub fn hubble_rate(s: &FieldState, p: &Potential) -> Result<f64> {
    let (eps, _) = clamped_energy(s, p)?;
    Ok(s.chi.sign() * (eps / 3.0).sqrt())
}

/// `ä = −(ȧ²/a)·(2−ρ)/(1+ρ)`, the ρ-form of the second Friedmann equation.
pub fn scale_factor_acceleration(s: &FieldState, p: &Potential) -> Result<f64> {
    let r = rho(s, p)?;
    let adot = hubble_rate(s, p)? * s.a();
    Ok(-(adot * adot / s.a()) * (2.0 - r) / (1.0 + r))
}

/// `ä = −(ȧ² + a²(φ̇² − 2V))/(2a)`, valid also at `φ̇ = 0`.
pub fn scale_factor_acceleration_direct(s: &FieldState, p: &Potential) -> Result<f64> {
    let a = s.a();
    let adot = hubble_rate(s, p)? * a;
    let vphi = p.value(s.phi);
    Ok(-(adot * adot + a * a * (s.v * s.v - 2.0 * vphi)) / (2.0 * a))
}

/// ρ-form where defined, falling back to the direct form at `φ̇ = 0`.
pub fn scale_factor_acceleration_any(s: &FieldState, p: &Potential) -> Result<f64> {
    match scale_factor_acceleration(s, p) {
        Err(Error::ZeroVelocity { .. }) => scale_factor_acceleration_direct(s, p),
        other => other,
    }
}

/// `(ȧ/a)² − ε/3` for an independently carried Hubble rate `hubble`.
pub fn constraint_residual(s: &FieldState, p: &Potential, hubble: f64) -> f64 {
    hubble * hubble - energy_density(s, p) / 3.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{figure1, quadratic, Potential};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn state(phi: f64, v: f64, chi: Branch) -> FieldState {
        FieldState::new(0.0, phi, v, 1.0, chi).unwrap()
    }

    fn constant(value: f64) -> Potential {
        Potential::new("const", move |_| [value, 0.0, 0.0])
    }

    #[test]
    fn energy_density_examples() {
        assert_eq!(energy_density(&state(0.0, 0.0, Branch::Expanding), &constant(0.7)), 1.4);
        let s = state(-0.6, 0.0, Branch::Collapsing);
        assert_relative_eq!(energy_density(&s, &figure1()), 1.5392, epsilon = 1e-14);
        assert_eq!(
            energy_density(&state(0.0, 1.0, Branch::Collapsing), &constant(-0.5)),
            0.0
        );
    }

    #[test]
    fn rhs_examples() {
        let p = figure1();
        let r = system_rhs(&state(-0.6, 0.0, Branch::Collapsing), &p).unwrap();
        assert_eq!(r.dphi, 0.0);
        assert_relative_eq!(r.dv, -0.336, epsilon = 1e-14);
        assert_eq!(r.dv, -p.derivative(-0.6));

        let s = state(0.3, 0.8, Branch::Expanding);
        let r = system_rhs(&s, &p).unwrap();
        assert!(r.dv < -p.derivative(0.3));
        assert!(r.da > 0.0);
    }

    #[test]
    fn negative_energy_is_rejected() {
        let err = system_rhs(&state(0.0, 0.1, Branch::Expanding), &constant(-1.0)).unwrap_err();
        assert!(matches!(err, Error::NegativeEnergy { .. }));
        // Roundoff-sized deficits are clamped.
        let s = state(0.0, 1.0, Branch::Expanding);
        let p = constant(-0.5 - 1e-14);
        assert!(system_rhs(&s, &p).is_ok());
    }

    #[test]
    fn energy_rate_signs() {
        let p = figure1();
        for v in [-2.0, -0.1, 0.5, 3.0] {
            assert!(energy_rate(&state(0.2, v, Branch::Expanding), &p).unwrap() <= 0.0);
            assert!(energy_rate(&state(0.2, v, Branch::Collapsing), &p).unwrap() >= 0.0);
        }
        assert_eq!(energy_rate(&state(0.2, 0.0, Branch::Collapsing), &p).unwrap(), 0.0);
    }

    #[test]
    fn rho_examples() {
        let p = figure1();
        assert_relative_eq!(rho(&state(1.0, 2.0, Branch::Collapsing), &p).unwrap(), 0.5);
        let v = (2.0 * p.value(0.3)).sqrt();
        assert_relative_eq!(
            rho(&state(0.3, v, Branch::Collapsing), &p).unwrap(),
            1.0,
            epsilon = 1e-14
        );
        assert_eq!(
            rho(&state(0.0, 1.0, Branch::Collapsing), &quadratic(1.0, 0.0)).unwrap(),
            0.0
        );
        assert!(rho(&state(1.0, 0.0, Branch::Collapsing), &p).is_err());
    }

    #[test]
    fn acceleration_limits() {
        // rho = 2 => no acceleration.
        let p = constant(1.0);
        let s = state(0.0, 1.0, Branch::Collapsing);
        assert!(scale_factor_acceleration(&s, &p).unwrap().abs() < 1e-15);
        // rho = 0 => a'' = -2 a'^2 / a.
        let q = quadratic(1.0, 0.0);
        let s = state(0.0, 3.0, Branch::Collapsing);
        let adot = hubble_rate(&s, &q).unwrap() * s.a();
        assert_relative_eq!(
            scale_factor_acceleration(&s, &q).unwrap(),
            -2.0 * adot * adot / s.a(),
            max_relative = 1e-14
        );
    }

    #[test]
    fn acceleration_falls_back_at_rest() {
        let p = figure1();
        let s = state(0.5, 0.0, Branch::Collapsing);
        assert!(scale_factor_acceleration(&s, &p).is_err());
        let a = scale_factor_acceleration_any(&s, &p).unwrap();
        assert_eq!(a, scale_factor_acceleration_direct(&s, &p).unwrap());
    }

    #[test]
    fn constraint_residual_examples() {
        let p = figure1();
        let s = state(0.4, -0.3, Branch::Collapsing);
        let r = system_rhs(&s, &p).unwrap();
        assert!(constraint_residual(&s, &p, r.da / s.a()).abs() < 1e-15);
        let p3 = constant(1.5);
        assert_eq!(constraint_residual(&state(0.0, 0.0, Branch::Expanding), &p3, 1.0), 0.0);
    }

    proptest! {
        #[test]
        fn acceleration_forms_agree(phi in -2.0f64..2.0, v in 0.05f64..5.0, log_a in -3.0f64..3.0,
                                    collapsing in any::<bool>()) {
            let p = figure1();
            let chi = if collapsing { Branch::Collapsing } else { Branch::Expanding };
            let s = FieldState { t: 0.0, phi, v, log_a, chi };
            let x = scale_factor_acceleration(&s, &p).unwrap();
            let y = scale_factor_acceleration_direct(&s, &p).unwrap();
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs().max(y.abs())));
        }

        #[test]
        fn rho_y_consistency(phi in -3.0f64..3.0, v in prop_oneof![-5.0f64..-0.01, 0.01f64..5.0]) {
            let p = figure1();
            let s = state(phi, v, Branch::Collapsing);
            let d = derived(&s, &p);
            let (r, y) = (d.rho.unwrap(), d.y.unwrap());
            prop_assert!((y * y - 1.0 - r).abs() <= 1e-12 * (1.0 + r.abs()));
            prop_assert!((d.eps - v * v * (1.0 + r)).abs() <= 1e-12 * (1.0 + d.eps));
        }
    }
}
