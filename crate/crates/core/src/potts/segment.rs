use serde::{Deserialize, Serialize};

use super::force::{region_force, update_means, RegionForce};
use super::model1::{energy_model1, model1_step, ModelIConfig};
use super::model2::{energy_model2_with_kernel, model2_step_with_kernel, ModelIIConfig};
use super::Init;
use crate::error::{invalid, Result};
use crate::field::ScalarField;

/// Margin keeping the normalized initial iterate off `{0, 1}`.
pub const INIT_GAMMA: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model")]
pub enum ModelConfig {
    #[serde(rename = "I")]
    I(ModelIConfig),
    #[serde(rename = "II")]
    II(ModelIIConfig),
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelConfig::I(c) => c.validate(),
            ModelConfig::II(c) => c.validate(),
        }
    }

    pub fn steps(&self) -> usize {
        match self {
            ModelConfig::I(c) => c.steps,
            ModelConfig::II(c) => c.steps,
        }
    }

    pub fn dt(&self) -> f64 {
        match self {
            ModelConfig::I(c) => c.dt,
            ModelConfig::II(c) => c.dt,
        }
    }

    /// Chan–Vese weight used when the force leaves it unset.
    pub fn default_chan_vese_weight(&self) -> f64 {
        match self {
            ModelConfig::I(_) => 1.0,
            ModelConfig::II(_) => model2_chan_vese_weight(),
        }
    }

    pub fn init(&self) -> &Init {
        match self {
            ModelConfig::I(c) => &c.init,
            ModelConfig::II(c) => &c.init,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyRow {
    pub step: usize,
    pub t: f64,
    pub total: f64,
    /// Components in the order of [`EnergyTrace::columns`].
    pub terms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrace {
    pub columns: Vec<&'static str>,
    pub rows: Vec<EnergyRow>,
}

impl EnergyTrace {
    fn for_model(model: &ModelConfig) -> Self {
        let columns = match model {
            ModelConfig::I(_) => vec!["data", "reg"],
            ModelConfig::II(_) => vec!["data", "entropy", "interaction"],
        };
        EnergyTrace {
            columns,
            rows: vec![],
        }
    }

    pub fn totals(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.total).collect()
    }

    /// CSV with a `step,t,total,...` header and 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,t,total");
        for c in &self.columns {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{:.16e},{:.16e}", r.step, r.t, r.total));
            for v in &r.terms {
                out.push_str(&format!(",{v:.16e}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentOutput {
    pub u_final: ScalarField,
    /// `{0,1}` foreground indicator `u > 0.5`.
    pub mask: ScalarField,
    pub trace: EnergyTrace,
    pub c0: f64,
    pub c1: f64,
}

/// Chan–Vese weight for Model II at which its perimeter weight relative to
/// the data term equals that of Model I at its defaults.
///
/// Model I's interface tension is `sqrt(λε · λ/ε) · sqrt(2)/6`; Model II's is
/// `λ` under the heat-time kernel with prefactor `√(π/δ)`.
pub fn model2_chan_vese_weight() -> f64 {
    let m1 = ModelIConfig::default();
    let m2 = ModelIIConfig::default();
    let tension1 = (m1.lambda_eps * m1.lambda_over_eps).sqrt() * std::f64::consts::SQRT_2 / 6.0;
    m2.lambda / tension1
}

/// `u^0` for input image `f`.
pub fn initial_field(f: &ScalarField, init: &Init) -> Result<ScalarField> {
    let g = INIT_GAMMA;
    match init {
        Init::NormalizedInput => {
            let (lo, hi) = (f.min_value(), f.max_value());
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(invalid("input image has non-finite values"));
            }
            if hi == lo {
                return Ok(f.map(|_| 0.5));
            }
            let span = hi - lo;
            Ok(f.map(|v| g + (1.0 - 2.0 * g) * (v - lo) / span))
        }
        Init::Constant { value } => {
            if !value.is_finite() {
                return Err(invalid("constant init must be finite"));
            }
            ScalarField::constant(f.width(), f.height(), *value)
        }
        Init::Field { field } => {
            f.check_shape(field)?;
            if field.values().iter().any(|v| !(0.0..=1.0).contains(v)) {
                return Err(invalid("init field must lie in [0,1]"));
            }
            Ok(field.map(|v| g + (1.0 - 2.0 * g) * v))
        }
    }
}

/// Runs the chosen model on image `f` to `steps`.
pub fn segment(f: &ScalarField, model: &ModelConfig, force: &RegionForce) -> Result<SegmentOutput> {
    segment_observed(f, model, force, |_, _| {})
}

/// As [`segment`], calling `observe(n, u^n)` for every iterate including `u^0`.
pub fn segment_observed(
    f: &ScalarField,
    model: &ModelConfig,
    force: &RegionForce,
    mut observe: impl FnMut(usize, &ScalarField),
) -> Result<SegmentOutput> {
    model.validate()?;
    let (mut c0, mut c1, update_every, weight) = match force {
        RegionForce::ChanVese {
            c0,
            c1,
            update_every,
            weight,
        } => {
            if !(c0.is_finite() && c1.is_finite()) {
                return Err(invalid("chan-vese means must be finite"));
            }
            let w = weight.unwrap_or_else(|| model.default_chan_vese_weight());
            if w <= 0.0 || !w.is_finite() {
                return Err(invalid(format!(
                    "chan-vese weight must be positive, got {w}"
                )));
            }
            (*c0, *c1, *update_every, w)
        }
        RegionForce::FixedField { field } => {
            f.check_shape(field)?;
            (0.0, 0.0, 0, 1.0)
        }
    };
    let chan_vese = matches!(force, RegionForce::ChanVese { .. });
    let weighted = |c0: f64, c1: f64| region_force(f, c0, c1).map(|v| weight * v);
    let mut force_field = match force {
        RegionForce::ChanVese { .. } => weighted(c0, c1),
        RegionForce::FixedField { field } => field.clone(),
    };

    let mut u = initial_field(f, model.init())?;
    let kernel = match model {
        ModelConfig::II(c) => Some(c.kernel()?),
        ModelConfig::I(_) => None,
    };
    let energy = |u: &ScalarField, force: &ScalarField| -> Result<(f64, Vec<f64>)> {
        match model {
            ModelConfig::I(c) => {
                let e = energy_model1(u, force, c.lambda_eps, c.lambda_over_eps)?;
                Ok((e.total, vec![e.data, e.reg]))
            }
            ModelConfig::II(c) => {
                let g = kernel.as_ref().expect("kernel built for model II");
                let e =
                    energy_model2_with_kernel(u, force, c.eps, c.lambda * c.prefactor_value(), g)?;
                Ok((e.total, vec![e.data, e.entropy, e.interaction]))
            }
        }
    };

    let dt = model.dt();
    let refresh = |n: usize| chan_vese && update_every > 0 && n.is_multiple_of(update_every);
    if refresh(0) {
        (c0, c1) = update_means(f, &u)?.or(c0, c1);
        force_field = weighted(c0, c1);
    }
    let mut trace = EnergyTrace::for_model(model);
    let (total, terms) = energy(&u, &force_field)?;
    trace.rows.push(EnergyRow {
        step: 0,
        t: 0.0,
        total,
        terms,
    });
    observe(0, &u);
    for n in 0..model.steps() {
        if n > 0 && refresh(n) {
            (c0, c1) = update_means(f, &u)?.or(c0, c1);
            force_field = weighted(c0, c1);
        }
        u = match model {
            ModelConfig::I(c) => model1_step(&u, &force_field, c, n)?,
            ModelConfig::II(c) => model2_step_with_kernel(
                &u,
                c,
                &force_field,
                n,
                kernel.as_ref().expect("kernel built for model II"),
            )?,
        };
        observe(n + 1, &u);
        let (total, terms) = energy(&u, &force_field)?;
        trace.rows.push(EnergyRow {
            step: n + 1,
            t: (n + 1) as f64 * dt,
            total,
            terms,
        });
    }

    let mask = u.threshold(0.5);
    Ok(SegmentOutput {
        u_final: u,
        mask,
        trace,
        c0,
        c1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disk_image(w: usize, h: usize, r: f64) -> (ScalarField, ScalarField) {
        let (ci, cj) = ((h / 2) as f64, (w / 2) as f64);
        let truth = ScalarField::from_fn(w, h, |i, j| {
            let (di, dj) = (i as f64 - ci, j as f64 - cj);
            if di * di + dj * dj <= r * r {
                1.0
            } else {
                0.0
            }
        })
        .unwrap();
        let img = truth.map(|t| if t > 0.5 { 0.9 } else { 0.2 });
        (img, truth)
    }

    fn dice(a: &ScalarField, b: &ScalarField) -> f64 {
        let inter: f64 = a.values().iter().zip(b.values()).map(|(x, y)| x * y).sum();
        let s: f64 = a.values().iter().sum::<f64>() + b.values().iter().sum::<f64>();
        2.0 * inter / s
    }

    #[test]
    fn normalized_init_range() {
        let (img, _) = disk_image(32, 32, 8.0);
        let u = initial_field(&img, &Init::NormalizedInput).unwrap();
        assert!((u.min_value() - INIT_GAMMA).abs() < 1e-15);
        assert!((u.max_value() - (1.0 - INIT_GAMMA)).abs() < 1e-15);
        let flat = ScalarField::constant(4, 4, 0.3).unwrap();
        assert!(initial_field(&flat, &Init::NormalizedInput)
            .unwrap()
            .values()
            .iter()
            .all(|&v| v == 0.5));
    }

    #[test]
    fn trace_has_steps_plus_one_rows() {
        let (img, _) = disk_image(32, 32, 8.0);
        let model = ModelConfig::II(ModelIIConfig {
            steps: 7,
            ..Default::default()
        });
        let out = segment(&img, &model, &RegionForce::chan_vese_from_image(&img, 5)).unwrap();
        assert_eq!(out.trace.rows.len(), 8);
        let csv = out.trace.to_csv();
        assert_eq!(csv.lines().count(), 9);
        assert!(csv.starts_with("step,t,total,data,entropy,interaction\n"));
    }

    #[test]
    fn model_one_finds_disk() {
        let (img, truth) = disk_image(64, 64, 16.0);
        let model = ModelConfig::I(ModelIConfig {
            steps: 60,
            ..Default::default()
        });
        let out = segment(&img, &model, &RegionForce::chan_vese_from_image(&img, 5)).unwrap();
        assert!(dice(&out.mask, &truth) >= 0.95);
    }

    #[test]
    fn constant_image_gives_uniform_mask() {
        let img = ScalarField::constant(16, 16, 0.4).unwrap();
        let model = ModelConfig::I(ModelIConfig {
            steps: 10,
            ..Default::default()
        });
        let out = segment(&img, &model, &RegionForce::chan_vese_from_image(&img, 5)).unwrap();
        assert_eq!(out.c0, out.c1);
        let s: f64 = out.mask.values().iter().sum();
        assert!(s == 0.0 || s == 256.0);
    }

    #[test]
    fn observer_sees_every_iterate() {
        let (img, _) = disk_image(24, 24, 6.0);
        let model = ModelConfig::II(ModelIIConfig {
            steps: 4,
            ..Default::default()
        });
        let mut seen = vec![];
        segment_observed(
            &img,
            &model,
            &RegionForce::chan_vese_from_image(&img, 5),
            |n, u| {
                assert!(u.values().iter().all(|&v| v > 0.0 && v < 1.0));
                seen.push(n);
            },
        )
        .unwrap();
        assert_eq!(seen, vec![0, 1, 2, 3, 4]);
    }
}
