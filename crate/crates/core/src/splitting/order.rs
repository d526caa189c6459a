//! Empirical order of accuracy in time.

use super::resolvent::ResolventKind;
use super::scheme::{run, LinearOp, LinearTerm, SchemeSpec, SplitMode, SplitTerm};
use crate::error::{invalid, Error, Result};
use crate::field::ScalarField;

#[derive(Debug, Clone, PartialEq)]
pub struct OrderRow {
    pub dt: f64,
    pub steps: usize,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderReport {
    pub rows: Vec<OrderRow>,
    /// Least-squares slope of `ln(error)` against `ln(dt)`.
    pub slope: f64,
}

/// Unweighted least-squares slope of `y` on `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Runs the scheme produced by `family(dt)` to `t_final` for every `dt`,
/// measures the max-norm error against `exact`, and fits the log-log slope.
pub fn estimate_order(
    family: impl Fn(f64) -> Result<SchemeSpec>,
    u0: &ScalarField,
    exact: &ScalarField,
    t_final: f64,
    dts: &[f64],
) -> Result<OrderReport> {
    let mut distinct = dts.to_vec();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup();
    if distinct.len() < 3 {
        return Err(invalid(
            "order estimation needs at least 3 distinct dt values",
        ));
    }
    let mut rows = Vec::with_capacity(dts.len());
    for &dt in dts {
        if dt <= 0.0 {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        let steps = (t_final / dt).round() as usize;
        if steps == 0 || (steps as f64 * dt - t_final).abs() > 1e-12 * t_final.abs().max(1.0) {
            return Err(invalid(format!("dt {dt} does not divide T = {t_final}")));
        }
        let spec = family(dt)?.with_steps(steps)?;
        let out = run(&spec, u0, false)?;
        let error = out.final_field.max_abs_diff(exact)?;
        if error == 0.0 {
            return Err(Error::DegenerateFit(format!("zero error at dt = {dt}")));
        }
        rows.push(OrderRow { dt, steps, error });
    }
    let x: Vec<f64> = rows.iter().map(|r| r.dt.ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.error.ln()).collect();
    let slope = fit_slope(&x, &y);
    Ok(OrderReport { rows, slope })
}

/// A named convergence study with a closed-form reference solution.
pub struct OrderProblem {
    pub name: &'static str,
    pub description: &'static str,
    pub u0: ScalarField,
    pub exact: ScalarField,
    pub t_final: f64,
    pub dts: Vec<f64>,
    family: Box<dyn Fn(f64) -> Result<SchemeSpec>>,
}

impl OrderProblem {
    pub fn run(&self) -> Result<OrderReport> {
        estimate_order(&self.family, &self.u0, &self.exact, self.t_final, &self.dts)
    }

    pub fn scheme(&self, dt: f64) -> Result<SchemeSpec> {
        (self.family)(dt)
    }
}

pub const BUILTIN_PROBLEMS: &[&str] = &["lie-linear", "parallel-linear", "euler-linear"];

fn decay_terms(rates: &[f64]) -> Vec<SplitTerm> {
    rates
        .iter()
        .map(|&r| SplitTerm {
            linear: LinearTerm::new(LinearOp::ScaledIdentity { coefficient: -r }, None),
            resolvent: ResolventKind::Identity,
        })
        .collect()
}

/// `du/dt = -u` on an 8x8 field to `T = 1`, split three ways:
/// `lie-linear` as `-0.3u` then `-0.7u`, `parallel-linear` the same pair in
/// parallel, `euler-linear` unsplit.
pub fn builtin_problem(name: &str) -> Option<OrderProblem> {
    let (name, description, mode, rates): (&'static str, &'static str, SplitMode, Vec<f64>) =
        match name {
            "lie-linear" => (
                "lie-linear",
                "du/dt = -u split as -0.3u, -0.7u (sequential)",
                SplitMode::Sequential,
                vec![0.3, 0.7],
            ),
            "parallel-linear" => (
                "parallel-linear",
                "du/dt = -u split as -0.3u, -0.7u (parallel)",
                SplitMode::Parallel,
                vec![0.3, 0.7],
            ),
            "euler-linear" => (
                "euler-linear",
                "du/dt = -u, single term",
                SplitMode::Sequential,
                vec![1.0],
            ),
            _ => return None,
        };
    let t_final: f64 = 1.0;
    let tau = 2.0 * std::f64::consts::PI / 8.0;
    let u0 = ScalarField::from_fn(8, 8, |i, j| {
        1.0 + 0.5 * (tau * i as f64).sin() * (tau * j as f64).cos()
    })
    .ok()?;
    let exact = u0.scale((-t_final).exp());
    let family = Box::new(move |dt: f64| SchemeSpec::new(mode, decay_terms(&rates), dt, 1));
    Some(OrderProblem {
        name,
        description,
        u0,
        exact,
        t_final,
        dts: vec![1.0 / 10.0, 1.0 / 20.0, 1.0 / 40.0, 1.0 / 80.0],
        family,
    })
}
