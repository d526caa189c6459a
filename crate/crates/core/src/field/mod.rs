//! Scalar fields on a periodic pixel grid and the operators the schemes need.
//!
//! Pixel spacing is 1 and every integral is a plain sum. All stencils wrap
//! around both axes, so the grid is a discrete torus.

mod kernel;
mod pgm;

pub use kernel::{
    default_radius, gaussian_density, gaussian_kernel, ConvKernel, GaussianConvention,
};
pub use pgm::{quantize, read_pgm, write_pgm, PGM_MAXVAL};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// A real-valued image stored row-major: `values[i * width + j]` is row `i`,
/// column `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawField", into = "RawField")]
pub struct ScalarField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawField {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl TryFrom<RawField> for ScalarField {
    type Error = Error;

    fn try_from(raw: RawField) -> Result<Self> {
        ScalarField::new(raw.width, raw.height, raw.values)
    }
}

impl From<ScalarField> for RawField {
    fn from(f: ScalarField) -> Self {
        RawField {
            width: f.width,
            height: f.height,
            values: f.values,
        }
    }
}

impl ScalarField {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(invalid(format!(
                "field size {width}x{height} must be at least 1x1"
            )));
        }
        if values.len() != width * height {
            return Err(invalid(format!(
                "field {width}x{height} needs {} values, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid(format!("non-finite value at index {pos}")));
        }
        Ok(ScalarField {
            width,
            height,
            values,
        })
    }

    /// Builds a field from kernel output without re-checking finiteness.
    pub(crate) fn from_raw(width: usize, height: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), width * height);
        ScalarField {
            width,
            height,
            values,
        }
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::constant(width, height, 0.0)
    }

    /// `f(row, col)` for every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let values = (0..height)
            .flat_map(|i| (0..width).map(move |j| (i, j)))
            .map(|(i, j)| f(i, j))
            .collect();
        Self::new(width, height, values)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn same_shape(&self, other: &ScalarField) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn check_shape(&self, other: &ScalarField) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected_w: self.width,
                expected_h: self.height,
                got_w: other.width,
                got_h: other.height,
            })
        }
    }

    /// Pointwise map; evaluated in parallel, each pixel independently.
    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> ScalarField {
        let values = self.values.par_iter().map(|&v| f(v)).collect();
        ScalarField::from_raw(self.width, self.height, values)
    }

    pub fn try_map(&self, f: impl Fn(f64) -> Result<f64> + Sync) -> Result<ScalarField> {
        let values = self
            .values
            .par_iter()
            .map(|&v| f(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(ScalarField::from_raw(self.width, self.height, values))
    }

    pub fn zip_map(
        &self,
        other: &ScalarField,
        f: impl Fn(f64, f64) -> f64 + Sync,
    ) -> Result<ScalarField> {
        self.check_shape(other)?;
        let values = self
            .values
            .par_iter()
            .zip(other.values.par_iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(ScalarField::from_raw(self.width, self.height, values))
    }

    pub fn scale(&self, s: f64) -> ScalarField {
        self.map(|v| s * v)
    }

    pub fn max_abs_diff(&self, other: &ScalarField) -> Result<f64> {
        self.check_shape(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// `{0,1}` mask of pixels strictly above `level`.
    pub fn threshold(&self, level: f64) -> ScalarField {
        self.map(|v| if v > level { 1.0 } else { 0.0 })
    }

    /// Cyclic shift: output pixel `(i, j)` takes input pixel `(i - di, j - dj)`.
    pub fn shifted(&self, di: isize, dj: isize) -> ScalarField {
        let (h, w) = (self.height as isize, self.width as isize);
        let mut out = vec![0.0; self.len()];
        for i in 0..h {
            for j in 0..w {
                let si = (i - di).rem_euclid(h) as usize;
                let sj = (j - dj).rem_euclid(w) as usize;
                out[(i * w + j) as usize] = self.values[si * self.width + sj];
            }
        }
        ScalarField::from_raw(self.width, self.height, out)
    }
}

/// Sum over all pixels (unit pixel area), in storage order.
pub fn integrate(u: &ScalarField) -> f64 {
    u.values.iter().fold(0.0, |acc, &v| acc + v)
}

/// Circular convolution `(k * u)(x) = sum_y k(y) u(x - y)` on the torus.
///
/// Kernels built from separable factors run as a row pass followed by a
/// column pass; everything else uses the direct tap sum in row-major tap
/// order. Each output pixel is computed independently, so the parallel
/// evaluation is bitwise identical to a sequential one.
pub fn convolve_periodic(u: &ScalarField, k: &ConvKernel) -> Result<ScalarField> {
    if k.kh() > u.height || k.kw() > u.width {
        return Err(invalid(format!(
            "kernel {}x{} does not fit in field {}x{}",
            k.kw(),
            k.kh(),
            u.width,
            u.height
        )));
    }
    match k.factors() {
        Some((col, row)) => Ok(convolve_separable(u, col, row)),
        None => Ok(convolve_direct(u, k)),
    }
}

fn wrap_table(n: usize, radius: usize, taps: usize) -> Vec<usize> {
    // table[x * taps + t] = (x + radius - t) mod n
    let mut table = Vec::with_capacity(n * taps);
    for x in 0..n {
        for t in 0..taps {
            table.push((x + n * taps + radius - t) % n);
        }
    }
    table
}

fn convolve_direct(u: &ScalarField, k: &ConvKernel) -> ScalarField {
    let (w, h) = (u.width, u.height);
    let (kh, kw) = (k.kh(), k.kw());
    let rows = wrap_table(h, kh / 2, kh);
    let cols = wrap_table(w, kw / 2, kw);
    let weights = k.weights();
    let src = &u.values;
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(i, out_row)| {
        for (j, o) in out_row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for a in 0..kh {
                let base = rows[i * kh + a] * w;
                let wrow = &weights[a * kw..(a + 1) * kw];
                for (b, &wt) in wrow.iter().enumerate() {
                    acc += wt * src[base + cols[j * kw + b]];
                }
            }
            *o = acc;
        }
    });
    ScalarField::from_raw(w, h, out)
}

fn convolve_separable(u: &ScalarField, col: &[f64], row: &[f64]) -> ScalarField {
    let (w, h) = (u.width, u.height);
    let (kh, kw) = (col.len(), row.len());
    let rows = wrap_table(h, kh / 2, kh);
    let cols = wrap_table(w, kw / 2, kw);
    let src = &u.values;

    let mut tmp = vec![0.0; w * h];
    tmp.par_chunks_mut(w).enumerate().for_each(|(i, t_row)| {
        let line = &src[i * w..(i + 1) * w];
        for (j, t) in t_row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (b, &wt) in row.iter().enumerate() {
                acc += wt * line[cols[j * kw + b]];
            }
            *t = acc;
        }
    });

    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(i, out_row)| {
        for (j, o) in out_row.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (a, &wt) in col.iter().enumerate() {
                acc += wt * tmp[rows[i * kh + a] * w + j];
            }
            *o = acc;
        }
    });
    ScalarField::from_raw(w, h, out)
}

/// Five-point Laplacian with periodic wrap.
///
/// The summation order mirrors the tap order `convolve_periodic` uses for
/// [`ConvKernel::five_point`], so the two agree bitwise.
pub fn laplacian_periodic(u: &ScalarField) -> Result<ScalarField> {
    let (w, h) = (u.width, u.height);
    if w < 3 || h < 3 {
        return Err(invalid(format!(
            "laplacian needs at least 3x3, got {w}x{h}"
        )));
    }
    let src = &u.values;
    let mut out = vec![0.0; w * h];
    out.par_chunks_mut(w).enumerate().for_each(|(i, out_row)| {
        let up = ((i + h - 1) % h) * w;
        let down = ((i + 1) % h) * w;
        let here = i * w;
        for (j, o) in out_row.iter_mut().enumerate() {
            let left = (j + w - 1) % w;
            let right = (j + 1) % w;
            let mut acc = src[down + j];
            acc += src[here + right];
            acc += -4.0 * src[here + j];
            acc += src[here + left];
            acc += src[up + j];
            *o = acc;
        }
    });
    Ok(ScalarField::from_raw(w, h, out))
}

/// Sum of squared forward differences along both axes, periodic.
pub fn gradient_energy(u: &ScalarField) -> f64 {
    let (w, h) = (u.width, u.height);
    let src = &u.values;
    let mut acc = 0.0;
    for i in 0..h {
        let down = ((i + 1) % h) * w;
        for j in 0..w {
            let v = src[i * w + j];
            let dx = src[i * w + (j + 1) % w] - v;
            let dy = src[down + j] - v;
            acc += dx * dx + dy * dy;
        }
    }
    acc
}
