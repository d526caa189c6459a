//! Model II: threshold-dynamics perimeter with an entropy penalty.
//!
//! Energy `∫F u + ε ∫[u ln u + (1-u) ln(1-u)] + λ p ∫u G_δ*(1-u)`, where `p`
//! is the perimeter prefactor. One step runs `K` Lie substeps; the last one
//! carries the interaction term implicitly.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Init;
use crate::error::{invalid, Error, Result};
use crate::field::{
    convolve_periodic, gaussian_kernel, integrate, ConvKernel, GaussianConvention, ScalarField,
};
use crate::splitting::{
    resolve_logit, resolve_logit_nonlocal, DEFAULT_FP_MAX_ITERS, DEFAULT_FP_TOL,
};

/// Constant in front of `∫v G*(1-v)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerimeterPrefactor {
    /// `sqrt(π/δ)`.
    #[default]
    Paper,
    /// `sqrt(2π)/σ` with `σ` the kernel standard deviation.
    Calibrated,
}

impl PerimeterPrefactor {
    pub fn value(self, delta: f64, convention: GaussianConvention) -> f64 {
        match self {
            PerimeterPrefactor::Paper => (std::f64::consts::PI / delta).sqrt(),
            PerimeterPrefactor::Calibrated => {
                (2.0 * std::f64::consts::PI).sqrt() / convention.std_dev(delta)
            }
        }
    }
}

impl FromStr for PerimeterPrefactor {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(PerimeterPrefactor::Paper),
            "calibrated" => Ok(PerimeterPrefactor::Calibrated),
            other => Err(invalid(format!("unknown prefactor '{other}'"))),
        }
    }
}

/// Threshold-dynamics estimate `p ∫ v (G_δ * (1 - v))`.
pub fn approx_perimeter(
    v: &ScalarField,
    delta: f64,
    convention: GaussianConvention,
    prefactor: PerimeterPrefactor,
) -> Result<f64> {
    let g = gaussian_kernel(delta, convention, None)?;
    let p = prefactor.value(delta, convention);
    let smoothed = convolve_periodic(&v.map(|x| 1.0 - x), &g)?;
    Ok(p * integrate(&v.zip_map(&smoothed, |a, b| a * b)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelIIConfig {
    pub dt: f64,
    pub eps: f64,
    pub lambda: f64,
    pub delta: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub steps: usize,
    pub convention: GaussianConvention,
    pub prefactor: PerimeterPrefactor,
    /// `A_k^n`, indexed `[n][k]`.
    pub term_kernels: Option<Vec<Vec<ConvKernel>>>,
    /// `g_k^n`, indexed `[n][k]`.
    pub term_sources: Option<Vec<Vec<ScalarField>>>,
    pub fp_tol: f64,
    pub fp_max_iters: usize,
    pub init: Init,
}

impl Default for ModelIIConfig {
    fn default() -> Self {
        ModelIIConfig {
            dt: 0.5,
            eps: 2.0,
            lambda: 80.0,
            delta: 2.0,
            k: 1,
            steps: 100,
            convention: GaussianConvention::HeatTime,
            prefactor: PerimeterPrefactor::Paper,
            term_kernels: None,
            term_sources: None,
            fp_tol: DEFAULT_FP_TOL,
            fp_max_iters: DEFAULT_FP_MAX_ITERS,
            init: Init::NormalizedInput,
        }
    }
}

impl ModelIIConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("dt", self.dt),
            ("eps", self.eps),
            ("lambda", self.lambda),
            ("delta", self.delta),
            ("fp_tol", self.fp_tol),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if self.k == 0 {
            return Err(invalid("K must be at least 1"));
        }
        if self.steps == 0 {
            return Err(invalid("steps must be at least 1"));
        }
        if self.fp_max_iters == 0 {
            return Err(invalid("fp_max_iters must be at least 1"));
        }
        fn check<T>(name: &str, lists: &Option<Vec<Vec<T>>>, steps: usize, k: usize) -> Result<()> {
            if let Some(l) = lists {
                if l.len() != steps || l.iter().any(|row| row.len() != k) {
                    return Err(invalid(format!(
                        "{name} must be sized steps x K = {steps} x {k}"
                    )));
                }
            }
            Ok(())
        }
        check("term_kernels", &self.term_kernels, self.steps, self.k)?;
        check("term_sources", &self.term_sources, self.steps, self.k)
    }

    pub fn prefactor_value(&self) -> f64 {
        self.prefactor.value(self.delta, self.convention)
    }

    pub fn kernel(&self) -> Result<ConvKernel> {
        gaussian_kernel(self.delta, self.convention, None)
    }
}

/// One step `u^n -> u^{n+1}`. The region force is shared evenly across the
/// `K` substeps, each adding `F/K` to its source.
pub fn model2_step(
    u: &ScalarField,
    cfg: &ModelIIConfig,
    force: &ScalarField,
    n: usize,
) -> Result<ScalarField> {
    let g = cfg.kernel()?;
    model2_step_with_kernel(u, cfg, force, n, &g)
}

pub(crate) fn model2_step_with_kernel(
    u: &ScalarField,
    cfg: &ModelIIConfig,
    force: &ScalarField,
    n: usize,
    g: &ConvKernel,
) -> Result<ScalarField> {
    u.check_shape(force)?;
    let dt = cfg.dt;
    let mu = dt * cfg.eps;
    let nu = dt * cfg.lambda * cfg.prefactor_value();
    let share = 1.0 / cfg.k as f64;
    let mut cur = u.clone();
    for k in 0..cfg.k {
        let mut rhs = force.map(|f| f * share);
        if let Some(a) = cfg
            .term_kernels
            .as_ref()
            .and_then(|t| t.get(n))
            .and_then(|r| r.get(k))
        {
            rhs = rhs.zip_map(&convolve_periodic(&cur, a)?, |r, c| r + c)?;
        }
        if let Some(s) = cfg
            .term_sources
            .as_ref()
            .and_then(|t| t.get(n))
            .and_then(|r| r.get(k))
        {
            rhs = rhs.zip_map(s, |r, sv| r + sv)?;
        }
        let ubar = cur.zip_map(&rhs, |v, r| v - dt * r)?;
        cur = if k + 1 < cfg.k {
            ubar.try_map(|v| resolve_logit(v, mu))?
        } else {
            resolve_logit_nonlocal(&ubar, mu, nu, g, cfg.fp_tol, cfg.fp_max_iters)?
        };
    }
    Ok(cur)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Model2Energy {
    pub total: f64,
    pub data: f64,
    pub entropy: f64,
    pub interaction: f64,
}

/// Model II energy. Rejects fields touching 0 or 1.
pub fn energy_model2(
    u: &ScalarField,
    force: &ScalarField,
    eps: f64,
    lambda: f64,
    delta: f64,
    convention: GaussianConvention,
    prefactor: PerimeterPrefactor,
) -> Result<Model2Energy> {
    let g = gaussian_kernel(delta, convention, None)?;
    energy_model2_with_kernel(
        u,
        force,
        eps,
        lambda * prefactor.value(delta, convention),
        &g,
    )
}

pub(crate) fn energy_model2_with_kernel(
    u: &ScalarField,
    force: &ScalarField,
    eps: f64,
    strength: f64,
    g: &ConvKernel,
) -> Result<Model2Energy> {
    if let Some(&bad) = u.values().iter().find(|&&v| !(v > 0.0 && v < 1.0)) {
        return Err(Error::Domain(format!(
            "entropy needs u strictly inside (0,1), found {bad}"
        )));
    }
    let data = integrate(&force.zip_map(u, |f, v| f * v)?);
    let entropy = eps
        * u.values()
            .iter()
            .map(|&v| v * v.ln() + (1.0 - v) * (1.0 - v).ln())
            .sum::<f64>();
    let smoothed = convolve_periodic(&u.map(|v| 1.0 - v), g)?;
    let interaction = strength * integrate(&u.zip_map(&smoothed, |a, b| a * b)?);
    Ok(Model2Energy {
        total: data + entropy + interaction,
        data,
        entropy,
        interaction,
    })
}
