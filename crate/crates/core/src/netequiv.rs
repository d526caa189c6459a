//! Splitting schemes read as feedforward networks.
//!
//! A Lie step `rho_k((I + dt A_k) u + dt g_k)` is a layer `sigma(W x + b)`
//! with `W = I + dt A_k`, `b = dt g_k`, `sigma = rho_k`; a sequential scheme
//! is a chain of `K` such layers followed by an identity head. A parallel
//! step is one block of `K` branches with `W = I + K dt A_k`, `b = K dt g_k`,
//! and a head that averages the branches.
//!
//! Weights are kept structurally (operator kind plus coefficient or kernel)
//! rather than as dense matrices.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{read_pgm, ScalarField};
use crate::splitting::{run, LinearOp, ResolventKind, SchemeSpec, SplitMode};

/// `W = I + scale * A`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AffineWeight {
    pub scale: f64,
    pub operator: LinearOp,
}

impl AffineWeight {
    pub fn apply(&self, x: &ScalarField) -> Result<ScalarField> {
        match self.operator.apply(x)? {
            Some(ax) => {
                let a = self.scale;
                x.zip_map(&ax, |v, w| v + a * w)
            }
            None => Ok(x.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnnLayer {
    pub weight: AffineWeight,
    /// `None` is the zero bias.
    pub bias: Option<ScalarField>,
    pub activation: ResolventKind,
}

impl FnnLayer {
    /// `sigma(W x + b)`
    pub fn forward(&self, x: &ScalarField) -> Result<ScalarField> {
        let mut z = self.weight.apply(x)?;
        if let Some(b) = &self.bias {
            z = z.zip_map(b, |v, bv| v + bv)?;
        }
        self.activation.apply(&z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Topology {
    Chain,
    ParallelBlock { branches: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Head {
    /// `W = I, b = 0`
    Identity,
    /// `W = (1/K) [I ... I], b = 0`
    Average { k: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FnnModel {
    topology: Topology,
    head: Head,
    layers: Vec<FnnLayer>,
}

impl FnnModel {
    pub fn new(topology: Topology, head: Head, layers: Vec<FnnLayer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(invalid("a network needs at least one layer"));
        }
        match (topology, head) {
            (Topology::Chain, Head::Identity) => {}
            (Topology::Chain, _) => {
                return Err(invalid("chain topology requires the identity head"))
            }
            (Topology::ParallelBlock { branches }, Head::Average { k }) => {
                if branches != k || branches != layers.len() {
                    return Err(invalid(format!(
                        "parallel block with {branches} branches needs average head over {branches} \
                         and {branches} branch layers (head k = {k}, layers = {})",
                        layers.len()
                    )));
                }
            }
            (Topology::ParallelBlock { .. }, _) => {
                return Err(invalid("parallel block requires the average head"));
            }
        }
        for l in &layers {
            l.activation.validate()?;
        }
        Ok(FnnModel {
            topology,
            head,
            layers,
        })
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn layers(&self) -> &[FnnLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [FnnLayer] {
        &mut self.layers
    }

    /// One pass through the network.
    pub fn pass(&self, x: &ScalarField) -> Result<ScalarField> {
        match self.topology {
            Topology::Chain => {
                let mut z = x.clone();
                for layer in &self.layers {
                    z = layer.forward(&z)?;
                }
                Ok(z)
            }
            Topology::ParallelBlock { branches } => {
                let mut acc: Option<ScalarField> = None;
                for layer in &self.layers {
                    let y = layer.forward(x)?;
                    acc = Some(match acc {
                        None => y,
                        Some(a) => a.zip_map(&y, |p, q| p + q)?,
                    });
                }
                let w = 1.0 / branches as f64;
                Ok(acc.expect("validated non-empty").map(|v| v * w))
            }
        }
    }
}

fn scaled_source(scale: f64, g: &Option<ScalarField>) -> Option<ScalarField> {
    g.as_ref().map(|g| g.map(|s| scale * s))
}

fn export_layers(spec: &SchemeSpec, scale: f64) -> Vec<FnnLayer> {
    spec.terms()
        .iter()
        .map(|t| FnnLayer {
            weight: AffineWeight {
                scale,
                operator: t.linear.operator.clone(),
            },
            bias: scaled_source(scale, &t.linear.source),
            activation: t.resolvent.clone(),
        })
        .collect()
}

/// Chain of `K` layers `(I + dt A_k, dt g_k, rho_k)` with an identity head.
pub fn export_sequential(spec: &SchemeSpec) -> Result<FnnModel> {
    if spec.mode() != SplitMode::Sequential {
        return Err(Error::WrongMode(
            "export_sequential needs a sequential scheme".into(),
        ));
    }
    FnnModel::new(
        Topology::Chain,
        Head::Identity,
        export_layers(spec, spec.dt()),
    )
}

/// One block of `K` branches `(I + K dt A_k, K dt g_k, rho_k)` with an
/// averaging head.
pub fn export_parallel(spec: &SchemeSpec) -> Result<FnnModel> {
    if spec.mode() != SplitMode::Parallel {
        return Err(Error::WrongMode(
            "export_parallel needs a parallel scheme".into(),
        ));
    }
    let k = spec.k();
    FnnModel::new(
        Topology::ParallelBlock { branches: k },
        Head::Average { k },
        export_layers(spec, spec.substep_dt()),
    )
}

pub fn export(spec: &SchemeSpec) -> Result<FnnModel> {
    match spec.mode() {
        SplitMode::Sequential => export_sequential(spec),
        SplitMode::Parallel => export_parallel(spec),
    }
}

/// Applies the model `n_passes` times; one pass is one time step.
pub fn forward(model: &FnnModel, u0: &ScalarField, n_passes: usize) -> Result<ScalarField> {
    if n_passes == 0 {
        return Err(invalid("forward needs at least one pass"));
    }
    let mut z = u0.clone();
    for _ in 0..n_passes {
        z = model.pass(&z)?;
    }
    Ok(z)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivalenceReport {
    pub steps: usize,
    pub max_abs_diff: f64,
    pub pass: bool,
}

/// Runs `model` and `spec` side by side from `u0` for `n` steps and compares
/// every intermediate state. Passes only on exact agreement.
pub fn compare_model(
    model: &FnnModel,
    spec: &SchemeSpec,
    u0: &ScalarField,
    n: usize,
) -> Result<EquivalenceReport> {
    let spec = spec.with_steps(n.max(1))?;
    let traj = run(&spec, u0, true)?.trajectory.expect("recorded");
    let mut z = u0.clone();
    let mut max_abs_diff: f64 = 0.0;
    for reference in traj.iter().skip(1) {
        z = model.pass(&z)?;
        max_abs_diff = max_abs_diff.max(z.max_abs_diff(reference)?);
    }
    Ok(EquivalenceReport {
        steps: spec.steps(),
        max_abs_diff,
        pass: max_abs_diff == 0.0,
    })
}

pub fn check_equivalence(
    spec: &SchemeSpec,
    u0: &ScalarField,
    n: usize,
) -> Result<EquivalenceReport> {
    compare_model(&export(spec)?, spec, u0, n)
}

// ---- JSON form ----

/// Bias as stored on disk: inline values or a PGM path (relative to the
/// model file) with optional affine rescaling `offset + scale * pixel`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BiasRef {
    Inline(ScalarField),
    Pgm {
        pgm: String,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default)]
        offset: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LayerFile {
    weight: WeightFile,
    bias: Option<BiasRef>,
    activation: ResolventKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct WeightFile {
    form: String,
    a: f64,
    operator: LinearOp,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelFile {
    topology: Topology,
    head: Head,
    layout: String,
    layers: Vec<LayerFile>,
}

const WEIGHT_FORM: &str = "I + a*A";

fn layout_text(topology: Topology) -> String {
    match topology {
        Topology::Chain => "chain: x <- sigma_k(W_k x + b_k) for k = 1..K, then W_{K+1} = I, b_{K+1} = 0".into(),
        Topology::ParallelBlock { branches } => format!(
            "parallel block: W1 = blockdiag(I + a*A_1, ..., I + a*A_{branches}) applied to [x; ...; x], \
             b1 = [b_1; ...; b_{branches}], sigma1 = [rho_1; ...; rho_{branches}] elementwise, \
             W2 = (1/{branches}) [I ... I], b2 = 0"
        ),
    }
}

pub fn model_to_json(model: &FnnModel) -> Result<String> {
    let file = ModelFile {
        topology: model.topology,
        head: model.head,
        layout: layout_text(model.topology),
        layers: model
            .layers
            .iter()
            .map(|l| LayerFile {
                weight: WeightFile {
                    form: WEIGHT_FORM.into(),
                    a: l.weight.scale,
                    operator: l.weight.operator.clone(),
                },
                bias: l.bias.clone().map(BiasRef::Inline),
                activation: l.activation.clone(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&file).map_err(|e| invalid(format!("model serialization: {e}")))
}

/// Parses a model file; PGM bias paths resolve against `base_dir`.
pub fn model_from_json(text: &str, base_dir: &Path) -> Result<FnnModel> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|e| invalid(format!("model JSON: {e}")))?;
    let mut layers = Vec::with_capacity(file.layers.len());
    for l in file.layers {
        if l.weight.form != WEIGHT_FORM {
            return Err(invalid(format!(
                "unsupported weight form `{}`",
                l.weight.form
            )));
        }
        let bias = match l.bias {
            None => None,
            Some(BiasRef::Inline(f)) => Some(f),
            Some(BiasRef::Pgm { pgm, scale, offset }) => {
                let path = base_dir.join(pgm);
                let bytes = std::fs::read(&path)
                    .map_err(|e| invalid(format!("cannot read bias {}: {e}", path.display())))?;
                Some(read_pgm(&bytes)?.map(|v| offset + scale * v))
            }
        };
        layers.push(FnnLayer {
            weight: AffineWeight {
                scale: l.weight.a,
                operator: l.weight.operator,
            },
            bias,
            activation: l.activation,
        });
    }
    FnnModel::new(file.topology, file.head, layers)
}
