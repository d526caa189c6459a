use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::field::ScalarField;

/// The coefficient `F(f)` of `v` in the data term.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RegionForce {
    /// `w [(f - c0)^2 - (f - c1)^2]`, with the means re-estimated from the
    /// current iterate every `update_every` steps (0 = never). An absent
    /// weight `w` takes the per-model default.
    ChanVese {
        c0: f64,
        c1: f64,
        update_every: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        weight: Option<f64>,
    },
    FixedField {
        field: ScalarField,
    },
}

pub const DEFAULT_UPDATE_EVERY: usize = 5;

impl RegionForce {
    /// Chan–Vese force whose starting means are both the image mean.
    pub fn chan_vese_from_image(f: &ScalarField, update_every: usize) -> Self {
        let m = f.values().iter().sum::<f64>() / f.len() as f64;
        RegionForce::ChanVese {
            c0: m,
            c1: m,
            update_every,
            weight: None,
        }
    }
}

/// `(f - c0)^2 - (f - c1)^2` pointwise.
pub fn region_force(f: &ScalarField, c0: f64, c1: f64) -> ScalarField {
    f.map(|v| {
        let a = v - c0;
        let b = v - c1;
        a * a - b * b
    })
}

/// Region means; `None` marks an empty region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionMeans {
    /// Mean of `f` where `u > 0.5`.
    pub c0: Option<f64>,
    /// Mean of `f` where `u <= 0.5`.
    pub c1: Option<f64>,
}

impl RegionMeans {
    /// Means with empty regions replaced by the supplied previous values.
    pub fn or(self, prev_c0: f64, prev_c1: f64) -> (f64, f64) {
        (self.c0.unwrap_or(prev_c0), self.c1.unwrap_or(prev_c1))
    }
}

pub fn update_means(f: &ScalarField, u: &ScalarField) -> Result<RegionMeans> {
    f.check_shape(u)?;
    let (mut s0, mut n0, mut s1, mut n1) = (0.0, 0usize, 0.0, 0usize);
    for (&fv, &uv) in f.values().iter().zip(u.values()) {
        if uv > 0.5 {
            s0 += fv;
            n0 += 1;
        } else {
            s1 += fv;
            n1 += 1;
        }
    }
    Ok(RegionMeans {
        c0: (n0 > 0).then(|| s0 / n0 as f64),
        c1: (n1 > 0).then(|| s1 / n1 as f64),
    })
}
