use serde::{Deserialize, Serialize};

use super::resolvent::ResolventKind;
use crate::error::{invalid, Error, Result};
use crate::field::{convolve_periodic, laplacian_periodic, ConvKernel, ScalarField};

/// The linear operator `A_k` of one split term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LinearOp {
    ConvKernel { kernel: ConvKernel },
    ScaledLaplacian { coefficient: f64 },
    ScaledIdentity { coefficient: f64 },
    Zero,
}

impl LinearOp {
    /// `A u`, or `None` for the zero operator.
    pub fn apply(&self, u: &ScalarField) -> Result<Option<ScalarField>> {
        Ok(match self {
            LinearOp::ConvKernel { kernel } => Some(convolve_periodic(u, kernel)?),
            LinearOp::ScaledLaplacian { coefficient } => {
                let c = *coefficient;
                Some(laplacian_periodic(u)?.map(|v| c * v))
            }
            LinearOp::ScaledIdentity { coefficient } => {
                let c = *coefficient;
                Some(u.map(|v| c * v))
            }
            LinearOp::Zero => None,
        })
    }

    fn validate(&self) -> Result<()> {
        match self {
            LinearOp::ScaledLaplacian { coefficient }
            | LinearOp::ScaledIdentity { coefficient }
                if !coefficient.is_finite() =>
            {
                Err(invalid("operator coefficient must be finite"))
            }
            _ => Ok(()),
        }
    }
}

/// `A_k` together with its source `g_k` (`None` means zero).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearTerm {
    pub operator: LinearOp,
    #[serde(default)]
    pub source: Option<ScalarField>,
}

impl LinearTerm {
    pub fn new(operator: LinearOp, source: Option<ScalarField>) -> Self {
        LinearTerm { operator, source }
    }

    pub fn zero() -> Self {
        LinearTerm::new(LinearOp::Zero, None)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitMode {
    Sequential,
    Parallel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitTerm {
    #[serde(flatten)]
    pub linear: LinearTerm,
    pub resolvent: ResolventKind,
}

/// A full splitting scheme for `du/dt = sum_k (A_k u + B_k(u) + g_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScheme", into = "RawScheme")]
pub struct SchemeSpec {
    mode: SplitMode,
    terms: Vec<SplitTerm>,
    dt: f64,
    steps: usize,
}

#[derive(Serialize, Deserialize)]
struct RawScheme {
    mode: SplitMode,
    dt: f64,
    steps: usize,
    terms: Vec<SplitTerm>,
}

impl TryFrom<RawScheme> for SchemeSpec {
    type Error = Error;

    fn try_from(r: RawScheme) -> Result<Self> {
        SchemeSpec::new(r.mode, r.terms, r.dt, r.steps)
    }
}

impl From<SchemeSpec> for RawScheme {
    fn from(s: SchemeSpec) -> Self {
        RawScheme {
            mode: s.mode,
            dt: s.dt,
            steps: s.steps,
            terms: s.terms,
        }
    }
}

impl SchemeSpec {
    pub fn new(mode: SplitMode, terms: Vec<SplitTerm>, dt: f64, steps: usize) -> Result<Self> {
        if terms.is_empty() {
            return Err(invalid("a scheme needs at least one term"));
        }
        if dt <= 0.0 || !dt.is_finite() {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        if steps == 0 {
            return Err(invalid("steps must be at least 1"));
        }
        for t in &terms {
            t.linear.operator.validate()?;
            t.resolvent.validate()?;
        }
        Ok(SchemeSpec {
            mode,
            terms,
            dt,
            steps,
        })
    }

    pub fn mode(&self) -> SplitMode {
        self.mode
    }

    pub fn terms(&self) -> &[SplitTerm] {
        &self.terms
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn k(&self) -> usize {
        self.terms.len()
    }

    /// Step size each substep's linear part is advanced with: `dt` for
    /// sequential splitting, `K dt` for parallel splitting.
    pub fn substep_dt(&self) -> f64 {
        match self.mode {
            SplitMode::Sequential => self.dt,
            SplitMode::Parallel => self.dt * self.k() as f64,
        }
    }

    pub fn with_steps(&self, steps: usize) -> Result<Self> {
        SchemeSpec::new(self.mode, self.terms.clone(), self.dt, steps)
    }
}

/// Forward Euler on the linear part: `(I + dt A) u + dt g`.
pub fn apply_linear_step(u: &ScalarField, term: &LinearTerm, dt_eff: f64) -> Result<ScalarField> {
    let mut out = match term.operator.apply(u)? {
        Some(au) => u.zip_map(&au, |v, a| v + dt_eff * a)?,
        None => u.clone(),
    };
    if let Some(g) = &term.source {
        out = out.zip_map(g, |v, s| v + dt_eff * s)?;
    }
    Ok(out)
}

/// One Lie step: `u <- rho_k((I + dt A_k) u + dt g_k)` for `k = 1..K` in order.
pub fn step_sequential(u: &ScalarField, spec: &SchemeSpec) -> Result<ScalarField> {
    if spec.mode != SplitMode::Sequential {
        return Err(Error::WrongMode(
            "step_sequential needs a sequential scheme".into(),
        ));
    }
    let mut cur = u.clone();
    for term in &spec.terms {
        let ubar = apply_linear_step(&cur, &term.linear, spec.dt)?;
        cur = term.resolvent.apply(&ubar)?;
    }
    Ok(cur)
}

/// One parallel-splitting step: every branch starts from the same `u`, runs
/// with step `K dt`, and the branch results are averaged in index order.
pub fn step_parallel(u: &ScalarField, spec: &SchemeSpec) -> Result<ScalarField> {
    if spec.mode != SplitMode::Parallel {
        return Err(Error::WrongMode(
            "step_parallel needs a parallel scheme".into(),
        ));
    }
    let dt_k = spec.substep_dt();
    let mut sum: Option<ScalarField> = None;
    for term in &spec.terms {
        let ubar = apply_linear_step(u, &term.linear, dt_k)?;
        let branch = term.resolvent.apply(&ubar)?;
        sum = Some(match sum {
            None => branch,
            Some(acc) => acc.zip_map(&branch, |a, b| a + b)?,
        });
    }
    let inv_k = 1.0 / spec.k() as f64;
    Ok(sum.expect("at least one term").map(|v| v * inv_k))
}

pub fn step(u: &ScalarField, spec: &SchemeSpec) -> Result<ScalarField> {
    match spec.mode {
        SplitMode::Sequential => step_sequential(u, spec),
        SplitMode::Parallel => step_parallel(u, spec),
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_field: ScalarField,
    /// `steps + 1` fields starting with `u0`, when recording was requested.
    pub trajectory: Option<Vec<ScalarField>>,
}

pub fn run(spec: &SchemeSpec, u0: &ScalarField, record: bool) -> Result<RunOutput> {
    let mut trajectory = record.then(|| {
        let mut t = Vec::with_capacity(spec.steps + 1);
        t.push(u0.clone());
        t
    });
    let mut u = u0.clone();
    for _ in 0..spec.steps {
        u = step(&u, spec)?;
        if let Some(t) = trajectory.as_mut() {
            t.push(u.clone());
        }
    }
    Ok(RunOutput {
        final_field: u,
        trajectory,
    })
}
