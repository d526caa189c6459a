use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Tolerance on the tap sum for a kernel to count as normalized.
const NORMALIZED_TOL: f64 = 1e-12;

/// Odd-sized, center-anchored convolution stencil.
///
/// A kernel may carry separable factors `(col, row)` with
/// `weights[a * kw + b] == col[a] * row[b]`; convolution then runs as two
/// 1D passes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernel", into = "RawKernel")]
pub struct ConvKernel {
    kh: usize,
    kw: usize,
    weights: Vec<f64>,
    factors: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Serialize, Deserialize)]
struct RawKernel {
    kh: usize,
    kw: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    col: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    row: Option<Vec<f64>>,
}

impl TryFrom<RawKernel> for ConvKernel {
    type Error = Error;

    fn try_from(raw: RawKernel) -> Result<Self> {
        match (raw.weights, raw.col, raw.row) {
            (_, Some(col), Some(row)) => {
                let k = ConvKernel::separable(col, row)?;
                if k.kh != raw.kh || k.kw != raw.kw {
                    return Err(invalid("kernel factors disagree with kh/kw"));
                }
                Ok(k)
            }
            (Some(w), None, None) => ConvKernel::new(raw.kh, raw.kw, w),
            _ => Err(invalid(
                "kernel needs either `weights` or both `col` and `row`",
            )),
        }
    }
}

impl From<ConvKernel> for RawKernel {
    fn from(k: ConvKernel) -> Self {
        match k.factors {
            Some((col, row)) => RawKernel {
                kh: k.kh,
                kw: k.kw,
                weights: None,
                col: Some(col),
                row: Some(row),
            },
            None => RawKernel {
                kh: k.kh,
                kw: k.kw,
                weights: Some(k.weights),
                col: None,
                row: None,
            },
        }
    }
}

impl ConvKernel {
    pub fn new(kh: usize, kw: usize, weights: Vec<f64>) -> Result<Self> {
        if kh.is_multiple_of(2) || kw.is_multiple_of(2) {
            return Err(invalid(format!("kernel size {kh}x{kw} must be odd")));
        }
        if weights.len() != kh * kw {
            return Err(invalid(format!(
                "kernel {kh}x{kw} needs {} weights, got {}",
                kh * kw,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(invalid("kernel weights must be finite"));
        }
        Ok(ConvKernel {
            kh,
            kw,
            weights,
            factors: None,
        })
    }

    /// Rank-one kernel `col ⊗ row`.
    pub fn separable(col: Vec<f64>, row: Vec<f64>) -> Result<Self> {
        let weights = col
            .iter()
            .flat_map(|&c| row.iter().map(move |&r| c * r))
            .collect();
        let mut k = Self::new(col.len(), row.len(), weights)?;
        k.factors = Some((col, row));
        Ok(k)
    }

    pub fn identity() -> Self {
        ConvKernel {
            kh: 1,
            kw: 1,
            weights: vec![1.0],
            factors: None,
        }
    }

    /// The 3x3 five-point Laplacian stencil.
    pub fn five_point() -> Self {
        ConvKernel {
            kh: 3,
            kw: 3,
            weights: vec![0.0, 1.0, 0.0, 1.0, -4.0, 1.0, 0.0, 1.0, 0.0],
            factors: None,
        }
    }

    pub fn kh(&self) -> usize {
        self.kh
    }

    pub fn kw(&self) -> usize {
        self.kw
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn factors(&self) -> Option<(&[f64], &[f64])> {
        self.factors
            .as_ref()
            .map(|(c, r)| (c.as_slice(), r.as_slice()))
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.sum() - 1.0).abs() <= NORMALIZED_TOL
    }

    pub fn scaled(&self, s: f64) -> ConvKernel {
        ConvKernel {
            kh: self.kh,
            kw: self.kw,
            weights: self.weights.iter().map(|w| s * w).collect(),
            factors: None,
        }
    }
}

/// How the width parameter `delta` of the threshold-dynamics Gaussian maps
/// to a standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GaussianConvention {
    /// Standard deviation `delta`.
    PaperStd,
    /// Heat kernel at time `delta`: standard deviation `sqrt(2 delta)`.
    #[default]
    HeatTime,
}

impl GaussianConvention {
    pub fn std_dev(self, delta: f64) -> f64 {
        match self {
            GaussianConvention::PaperStd => delta,
            GaussianConvention::HeatTime => (2.0 * delta).sqrt(),
        }
    }
}

impl std::str::FromStr for GaussianConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper-std" => Ok(GaussianConvention::PaperStd),
            "heat-time" => Ok(GaussianConvention::HeatTime),
            other => Err(invalid(format!("unknown gaussian convention `{other}`"))),
        }
    }
}

/// Isotropic bivariate normal density with standard deviation `std`.
pub fn gaussian_density(dx: f64, dy: f64, std: f64) -> f64 {
    let s2 = std * std;
    (-(dx * dx + dy * dy) / (2.0 * s2)).exp() / (2.0 * std::f64::consts::PI * s2)
}

/// Truncation radius `ceil(4 std)`, at least 1.
pub fn default_radius(std: f64) -> usize {
    ((4.0 * std).ceil() as usize).max(1)
}

/// Second antiderivative of the centred normal density:
/// `x Phi(x/std) + std phi(x/std)`.
fn normal_second_integral(x: f64, std: f64) -> f64 {
    let z = x / std;
    let cdf = 0.5 * libm::erfc(-z / std::f64::consts::SQRT_2);
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    x * cdf + std * pdf
}

/// Gaussian on a `(2 radius + 1)^2` grid, renormalized to sum 1.
///
/// Taps are the exact coupling between unit pixel cells, i.e. the density
/// averaged against the hat function `max(0, 1 - |t|)` per axis. For
/// indicator fields this makes `sum v (G * (1 - v))` equal the continuum
/// integral of the pixelated set, so axis-aligned interfaces carry no
/// lattice bias. The kernel is separable and stored as the outer product of
/// a normalized 1D profile with itself.
pub fn gaussian_kernel(
    delta: f64,
    convention: GaussianConvention,
    radius: Option<usize>,
) -> Result<ConvKernel> {
    if delta <= 0.0 || !delta.is_finite() {
        return Err(invalid(format!(
            "gaussian delta must be positive, got {delta}"
        )));
    }
    let std = convention.std_dev(delta);
    let radius = radius.unwrap_or_else(|| default_radius(std));
    if radius == 0 {
        return Err(invalid("gaussian radius must be at least 1"));
    }
    let h = |x: f64| normal_second_integral(x, std);
    // The left half avoids cancellation against the linear growth of `h`.
    let left: Vec<f64> = (-(radius as isize)..=0)
        .map(|m| {
            let m = m as f64;
            h(m + 1.0) - 2.0 * h(m) + h(m - 1.0)
        })
        .collect();
    let mut profile = left.clone();
    profile.extend(left.iter().rev().skip(1));
    let total: f64 = profile.iter().sum();
    let profile: Vec<f64> = profile.iter().map(|p| p / total).collect();
    ConvKernel::separable(profile.clone(), profile)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_density_unit_std() {
        let c = gaussian_density(0.0, 0.0, GaussianConvention::PaperStd.std_dev(1.0));
        assert!((c - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-15);
        assert!((c - 0.159155).abs() < 1e-6);
    }

    #[test]
    fn gaussian_sums_to_one_and_is_flagged() {
        for conv in [GaussianConvention::PaperStd, GaussianConvention::HeatTime] {
            for delta in [0.3, 1.0, 2.0, 4.5] {
                let k = gaussian_kernel(delta, conv, None).unwrap();
                assert!(k.is_normalized(), "{conv:?} {delta}");
                assert!((k.sum() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn gaussian_is_symmetric() {
        let k = gaussian_kernel(1.0, GaussianConvention::PaperStd, Some(3)).unwrap();
        assert_eq!((k.kh(), k.kw()), (7, 7));
        let w = |a: usize, b: usize| k.weights()[a * 7 + b];
        for a in 0..7 {
            for b in 0..7 {
                assert_eq!(w(a, b), w(6 - a, b));
                assert_eq!(w(a, b), w(a, 6 - b));
                assert_eq!(w(a, b), w(b, a));
            }
        }
    }

    #[test]
    fn profile_variance_adds_hat_variance() {
        // Convolving with the unit hat adds 1/6 to the variance; lattice
        // aliasing contributes at most about exp(-2 pi^2 std^2).
        for std in [1.0_f64, 2.0, 3.5] {
            let delta = std * std / 2.0;
            let r = (12.0 * std).ceil() as usize;
            let k = gaussian_kernel(delta, GaussianConvention::HeatTime, Some(r)).unwrap();
            let (row, _) = k.factors().unwrap();
            let var: f64 = row
                .iter()
                .enumerate()
                .map(|(i, w)| w * (i as f64 - r as f64).powi(2))
                .sum();
            assert!((var - (std * std + 1.0 / 6.0)).abs() < 1e-8, "{std}: {var}");
        }
    }

    #[test]
    fn profile_matches_numeric_quadrature() {
        let std = 1.3;
        let k = gaussian_kernel(std, GaussianConvention::PaperStd, Some(6)).unwrap();
        let (row, _) = k.factors().unwrap();
        let n = 20_000;
        let raw: Vec<f64> = (-6..=6)
            .map(|m| {
                (0..n)
                    .map(|i| {
                        let t = -1.0 + (i as f64 + 0.5) * 2.0 / n as f64;
                        let x = m as f64 - t;
                        (1.0 - t.abs()) * (-x * x / (2.0 * std * std)).exp()
                    })
                    .sum::<f64>()
            })
            .collect();
        let total: f64 = raw.iter().sum();
        for (a, b) in row.iter().zip(&raw) {
            assert!((a - b / total).abs() < 1e-8);
        }
    }

    #[test]
    fn gaussian_rejects_bad_delta() {
        assert!(gaussian_kernel(0.0, GaussianConvention::HeatTime, None).is_err());
        assert!(gaussian_kernel(-1.0, GaussianConvention::PaperStd, None).is_err());
        assert!(gaussian_kernel(1.0, GaussianConvention::PaperStd, Some(0)).is_err());
    }

    #[test]
    fn default_radius_is_four_sigma() {
        let k = gaussian_kernel(2.0, GaussianConvention::HeatTime, None).unwrap();
        assert_eq!(k.kh(), 17);
        let k = gaussian_kernel(1.0, GaussianConvention::PaperStd, None).unwrap();
        assert_eq!(k.kh(), 9);
    }

    #[test]
    fn even_kernels_rejected() {
        assert!(ConvKernel::new(2, 3, vec![0.0; 6]).is_err());
        assert!(ConvKernel::new(3, 3, vec![0.0; 8]).is_err());
    }

    #[test]
    fn kernel_json_keeps_factors() {
        let k = gaussian_kernel(1.0, GaussianConvention::HeatTime, Some(2)).unwrap();
        let s = serde_json::to_string(&k).unwrap();
        let back: ConvKernel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, k);
        assert!(back.factors().is_some());
    }
}
