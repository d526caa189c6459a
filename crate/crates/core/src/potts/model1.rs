//! Model I: double-well relaxation of the Potts model.
//!
//! Gradient flow
//! `u_t + F - (λε) Δu + 2(λ/ε)(2u^3 - 3u^2 + u) + W * u + b = 0`
//! split into an explicit step on everything linear and a backward-Euler
//! step on the double-well reaction.

use serde::{Deserialize, Serialize};

use super::Init;
use crate::error::{invalid, Result};
use crate::field::{
    convolve_periodic, gradient_energy, integrate, laplacian_periodic, ConvKernel, ScalarField,
};
use crate::splitting::resolve_double_well;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelIConfig {
    pub dt: f64,
    pub lambda_eps: f64,
    pub lambda_over_eps: f64,
    pub steps: usize,
    /// `W^n`, one per step.
    pub control_kernels: Option<Vec<ConvKernel>>,
    /// `b^n`, one per step.
    pub control_biases: Option<Vec<ScalarField>>,
    pub init: Init,
}

impl Default for ModelIConfig {
    fn default() -> Self {
        ModelIConfig {
            dt: 0.2,
            lambda_eps: 1.0,
            lambda_over_eps: 15.0,
            steps: 100,
            control_kernels: None,
            control_biases: None,
            init: Init::NormalizedInput,
        }
    }
}

impl ModelIConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dt", self.dt),
            ("lambda_eps", self.lambda_eps),
            ("lambda_over_eps", self.lambda_over_eps),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.steps == 0 {
            return Err(invalid("steps must be at least 1"));
        }
        if let Some(w) = &self.control_kernels {
            if w.len() != self.steps {
                return Err(invalid(format!(
                    "{} control kernels for {} steps",
                    w.len(),
                    self.steps
                )));
            }
        }
        if let Some(b) = &self.control_biases {
            if b.len() != self.steps {
                return Err(invalid(format!(
                    "{} control biases for {} steps",
                    b.len(),
                    self.steps
                )));
            }
        }
        Ok(())
    }

    /// Double-well resolvent parameter `2 (λ/ε) dt`.
    pub fn well_strength(&self) -> f64 {
        2.0 * self.lambda_over_eps * self.dt
    }
}

/// One step `u^n -> u^{n+1}`.
pub fn model1_step(
    u: &ScalarField,
    force: &ScalarField,
    cfg: &ModelIConfig,
    n: usize,
) -> Result<ScalarField> {
    u.check_shape(force)?;
    let le = cfg.lambda_eps;
    let lap = laplacian_periodic(u)?;
    let mut rhs = force.zip_map(&lap, |f, l| f - le * l)?;
    if let Some(w) = cfg.control_kernels.as_ref().and_then(|w| w.get(n)) {
        rhs = rhs.zip_map(&convolve_periodic(u, w)?, |r, c| r + c)?;
    }
    if let Some(b) = cfg.control_biases.as_ref().and_then(|b| b.get(n)) {
        rhs = rhs.zip_map(b, |r, bv| r + bv)?;
    }
    let dt = cfg.dt;
    let ubar = u.zip_map(&rhs, |v, r| v - dt * r)?;
    let c = cfg.well_strength();
    Ok(ubar.map(|v| resolve_double_well(v, c)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model1Energy {
    pub total: f64,
    pub data: f64,
    pub reg: f64,
}

/// `∫F u + (λε)/2 Σ|∇u|^2 + (λ/ε) Σ u^2 (1-u)^2`, forward differences.
pub fn energy_model1(
    u: &ScalarField,
    force: &ScalarField,
    lambda_eps: f64,
    lambda_over_eps: f64,
) -> Result<Model1Energy> {
    let data = integrate(&force.zip_map(u, |f, v| f * v)?);
    let well: f64 = u
        .values()
        .iter()
        .map(|&v| v * v * (1.0 - v) * (1.0 - v))
        .sum();
    let reg = 0.5 * lambda_eps * gradient_energy(u) + lambda_over_eps * well;
    Ok(Model1Energy {
        total: data + reg,
        data,
        reg,
    })
}
