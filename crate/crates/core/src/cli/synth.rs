//! Synthetic two-level test images.

use std::str::FromStr;

use rand_core::{Rng, SeedableRng};
use rand_pcg::Pcg64;

use crate::error::{invalid, Error, Result};
use crate::field::ScalarField;

pub const MIN_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Disk,
    TwoDisks,
    Square,
    HalfPlane,
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "disk" => Ok(Shape::Disk),
            "two-disks" => Ok(Shape::TwoDisks),
            "square" => Ok(Shape::Square),
            "half-plane" => Ok(Shape::HalfPlane),
            other => Err(invalid(format!("unknown shape '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub shape: Shape,
    pub width: usize,
    pub height: usize,
    /// Disk radius, or half side for the square.
    pub radius: f64,
    pub background: f64,
    pub foreground: f64,
    pub noise_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            shape: Shape::Disk,
            width: 256,
            height: 192,
            radius: 30.0,
            background: 0.2,
            foreground: 0.9,
            noise_sd: 0.0,
            seed: 0,
        }
    }
}

fn in_disk(i: usize, j: usize, ci: f64, cj: f64, r: f64) -> bool {
    let (di, dj) = (i as f64 - ci, j as f64 - cj);
    di * di + dj * dj <= r * r
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width < MIN_SIZE || self.height < MIN_SIZE {
            return Err(invalid(format!(
                "image must be at least {MIN_SIZE}x{MIN_SIZE}"
            )));
        }
        if !(self.noise_sd >= 0.0 && self.noise_sd.is_finite()) {
            return Err(invalid(format!(
                "noise sd must be finite and >= 0, got {}",
                self.noise_sd
            )));
        }
        if !(self.radius >= 0.0 && self.radius.is_finite()) {
            return Err(invalid(format!(
                "radius must be finite and >= 0, got {}",
                self.radius
            )));
        }
        for v in [self.background, self.foreground] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(format!("levels must lie in [0,1], got {v}")));
            }
        }
        Ok(())
    }

    /// `{0,1}` ground-truth indicator. Centers sit at `(H/2, W/2)` in
    /// integer division.
    pub fn truth(&self) -> Result<ScalarField> {
        self.validate()?;
        let (h, w) = (self.height, self.width);
        let ci = (h / 2) as f64;
        let cj = (w / 2) as f64;
        let r = self.radius;
        let inside = |i: usize, j: usize| match self.shape {
            Shape::Disk => in_disk(i, j, ci, cj, r),
            Shape::TwoDisks => {
                in_disk(i, j, ci, (w / 4) as f64, r) || in_disk(i, j, ci, (3 * w / 4) as f64, r)
            }
            Shape::Square => (i as f64 - ci).abs() <= r && (j as f64 - cj).abs() <= r,
            Shape::HalfPlane => j >= w / 2,
        };
        ScalarField::from_fn(w, h, |i, j| if inside(i, j) { 1.0 } else { 0.0 })
    }

    /// Two-level image with additive Gaussian noise, clamped to `[0,1]`.
    pub fn image(&self) -> Result<ScalarField> {
        let truth = self.truth()?;
        let (bg, fg) = (self.background, self.foreground);
        let clean = truth.map(|t| if t > 0.5 { fg } else { bg });
        if self.noise_sd == 0.0 {
            return Ok(clean);
        }
        let noise = gaussian_noise(clean.len(), self.seed);
        let sd = self.noise_sd;
        let values = clean
            .values()
            .iter()
            .zip(&noise)
            .map(|(v, z)| (v + sd * z).clamp(0.0, 1.0))
            .collect();
        ScalarField::new(self.width, self.height, values)
    }
}

/// Uniform in `(0, 1]` from the top 53 bits.
fn open_unit(rng: &mut Pcg64) -> f64 {
    ((rng.next_u64() >> 11) + 1) as f64 / (1u64 << 53) as f64
}

/// `n` standard normal variates by Box–Muller. Each pair of uniforms yields
/// the cosine variate first, then the sine variate.
pub fn gaussian_noise(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = Pcg64::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n + 1);
    while out.len() < n {
        let u1 = open_unit(&mut rng);
        let u2 = open_unit(&mut rng);
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        out.push(r * theta.cos());
        out.push(r * theta.sin());
    }
    out.truncate(n);
    out
}

/// `n` uniform variates in `[lo, hi)`.
pub fn uniform_values(n: usize, seed: u64, lo: f64, hi: f64) -> Vec<f64> {
    let mut rng = Pcg64::seed_from_u64(seed);
    (0..n)
        .map(|_| lo + (hi - lo) * ((rng.next_u64() >> 11) as f64 / (1u64 << 53) as f64))
        .collect()
}
