//! Backward-Euler resolvents `(I - dt B)^{-1}` for the nonlinear parts.
//!
//! These play the role of activation functions when a scheme is read as a
//! network. Scalar equations are solved by safeguarded Newton inside a sign
//! bracket, falling back to bisection whenever a Newton step leaves it.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::field::{convolve_periodic, ConvKernel, ScalarField};

/// Logit outputs are kept inside `[GAMMA, 1 - GAMMA]`.
pub const GAMMA: f64 = 1e-15;

pub const DEFAULT_FP_TOL: f64 = 1e-10;
pub const DEFAULT_FP_MAX_ITERS: usize = 2000;

const MAX_NEWTON_ITERS: usize = 200;

/// Root of an increasing function `f` on `[lo, hi]` with `f(lo) <= 0 <= f(hi)`.
///
/// `f` returns `(value, derivative)`. The result is the iterate with the
/// smallest `|f|` seen once the bracket or step collapses to rounding level.
fn safeguarded_newton(f: impl Fn(f64) -> (f64, f64), lo: f64, hi: f64, start: f64) -> f64 {
    let (mut a, mut b) = (lo, hi);
    let mut x = start.clamp(a, b);
    let mut best = (f64::INFINITY, x);
    for _ in 0..MAX_NEWTON_ITERS {
        let (fx, dfx) = f(x);
        if fx.abs() < best.0 {
            best = (fx.abs(), x);
        }
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            a = x;
        } else {
            b = x;
        }
        let newton = x - fx / dfx;
        let next = if newton.is_finite() && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        let scale = x.abs().max(next.abs()).max(1.0);
        if (next - x).abs() <= 2.0 * f64::EPSILON * scale || b - a <= 2.0 * f64::EPSILON * scale {
            let (fn_, _) = f(next);
            if fn_.abs() < best.0 {
                best = (fn_.abs(), next);
            }
            break;
        }
        x = next;
    }
    best.1
}

pub fn resolve_identity(ubar: f64) -> f64 {
    ubar
}

/// `u + c (2u^3 - 3u^2 + u) - ubar`
fn double_well_residual(u: f64, ubar: f64, c: f64) -> f64 {
    u + c * (u * (u * (2.0 * u - 3.0) + 1.0)) - ubar
}

fn double_well_slope(u: f64, c: f64) -> f64 {
    1.0 + c * (u * (6.0 * u - 6.0) + 1.0)
}

/// All real roots of `u + c (2u^3 - 3u^2 + u) = ubar`, ascending.
///
/// For `c <= 2` the left side is monotone and there is one root. Above that
/// the cubic has a local max at `1/2 - d` and a local min at `1/2 + d`,
/// `d = sqrt((c - 2) / (12 c))`, splitting the line into three monotone
/// pieces that each hold at most one root.
pub fn double_well_roots(ubar: f64, c: f64) -> Vec<f64> {
    let phi = |u: f64| (double_well_residual(u, ubar, c), double_well_slope(u, c));
    // phi(lo) <= 0 and phi(hi) >= 0 by the sign of each term
    let lo = ubar.min(0.0);
    let hi = ubar.max(1.0);
    if c <= 2.0 {
        return vec![safeguarded_newton(phi, lo, hi, ubar)];
    }
    let d = ((c - 2.0) / (12.0 * c)).sqrt();
    let (u_max, u_min) = (0.5 - d, 0.5 + d);
    let (p_max, p_min) = (phi(u_max).0, phi(u_min).0);
    let mut roots = Vec::with_capacity(3);
    if p_max >= 0.0 {
        roots.push(safeguarded_newton(phi, lo, u_max, ubar));
    }
    if p_max >= 0.0 && p_min <= 0.0 {
        let neg = |u: f64| {
            let (v, dv) = phi(u);
            (-v, -dv)
        };
        roots.push(safeguarded_newton(neg, u_max, u_min, ubar));
    }
    if p_min <= 0.0 {
        roots.push(safeguarded_newton(phi, u_min, hi, ubar));
    }
    roots.dedup();
    roots
}

/// Backward-Euler step of the double-well reaction.
///
/// Solves `u + c (2u^3 - 3u^2 + u) = ubar`; when several real roots exist
/// the one nearest `ubar` is returned, ties going to the smaller root.
pub fn resolve_double_well(ubar: f64, c: f64) -> f64 {
    debug_assert!(c >= 0.0);
    if c == 0.0 || double_well_residual(ubar, ubar, c) == 0.0 {
        return ubar;
    }
    let roots = double_well_roots(ubar, c);
    let mut best = roots[0];
    for &r in &roots[1..] {
        // ascending order, so strict comparison keeps the smaller root on ties
        if (r - ubar).abs() < (best - ubar).abs() {
            best = r;
        }
    }
    best
}

fn sigmoid(s: f64) -> f64 {
    if s >= 0.0 {
        1.0 / (1.0 + (-s).exp())
    } else {
        let e = s.exp();
        e / (1.0 + e)
    }
}

/// Backward-Euler step of the entropy term: solves `u + mu ln(u/(1-u)) = ubar`.
///
/// Newton runs on `s = ln(u/(1-u))`, where the equation
/// `sigmoid(s) + mu s = ubar` has slope at least `mu` and the root lies in
/// `[(ubar - 1)/mu, ubar/mu]`.
pub fn resolve_logit(ubar: f64, mu: f64) -> Result<f64> {
    if mu < 0.0 || !mu.is_finite() {
        return Err(invalid(format!("logit resolvent needs mu >= 0, got {mu}")));
    }
    if !ubar.is_finite() {
        return Err(Error::Domain(format!("non-finite logit input {ubar}")));
    }
    if mu == 0.0 {
        return if ubar > 0.0 && ubar < 1.0 {
            Ok(ubar)
        } else {
            Err(Error::Domain(format!(
                "with mu = 0 the input must lie in (0, 1), got {ubar}"
            )))
        };
    }
    let lo = (ubar - 1.0) / mu;
    let hi = ubar / mu;
    // sigmoid is nearly constant outside (0, 1), so the root sits near an end
    let guess = if ubar >= 1.0 {
        lo
    } else if ubar <= 0.0 {
        hi
    } else {
        let p = ubar.clamp(0.01, 0.99);
        (p / (1.0 - p)).ln()
    };
    let g = |s: f64| {
        let sg = sigmoid(s);
        (sg + mu * s - ubar, mu + sg * (1.0 - sg))
    };
    let s = safeguarded_newton(g, lo, hi, guess);
    Ok(sigmoid(s).clamp(GAMMA, 1.0 - GAMMA))
}

/// Backward-Euler step of entropy plus Gaussian interaction, fieldwise:
/// `u + mu ln(u/(1-u)) + nu K*(1 - 2u) = ubar`.
///
/// The convolution is lagged: a sweep solves the pointwise logit equation
/// with `K*(1 - 2u)` frozen at the previous iterate. Sweeps are combined by
/// Anderson mixing of depth [`ANDERSON_DEPTH`]. Iteration stops once the max
/// pointwise change of a sweep is at most `tol`.
pub fn resolve_logit_nonlocal(
    ubar: &ScalarField,
    mu: f64,
    nu: f64,
    kernel: &ConvKernel,
    tol: f64,
    max_iters: usize,
) -> Result<ScalarField> {
    resolve_logit_nonlocal_mixed(ubar, mu, nu, kernel, tol, max_iters, ANDERSON_DEPTH)
}

/// Mixing depth used by [`resolve_logit_nonlocal`].
pub const ANDERSON_DEPTH: usize = 5;

/// [`resolve_logit_nonlocal`] with an explicit mixing depth; `depth = 0`
/// gives the plain lagged iteration.
pub fn resolve_logit_nonlocal_mixed(
    ubar: &ScalarField,
    mu: f64,
    nu: f64,
    kernel: &ConvKernel,
    tol: f64,
    max_iters: usize,
    depth: usize,
) -> Result<ScalarField> {
    if mu <= 0.0 || !mu.is_finite() {
        return Err(invalid(format!(
            "nonlocal logit resolvent needs mu > 0, got {mu}"
        )));
    }
    if nu < 0.0 || !nu.is_finite() {
        return Err(invalid(format!(
            "nonlocal logit resolvent needs nu >= 0, got {nu}"
        )));
    }
    if !kernel.is_normalized() {
        return Err(invalid(
            "nonlocal logit resolvent needs a normalized kernel",
        ));
    }
    let interaction = |u: &ScalarField| convolve_periodic(&u.map(|v| 1.0 - 2.0 * v), kernel);
    // one lagged sweep from the interaction field of the previous iterate
    let sweep = |h: &ScalarField| -> Result<ScalarField> {
        ubar.zip_map(h, |b, g| b - nu * g)?
            .try_map(|v| resolve_logit(v, mu))
    };
    // Objective whose stationarity condition is the equation above, using
    // `G*(1-u) = (G*(1-2u) + G*1)/2`. A sweep never increases it; mixed
    // iterates are kept only if they do no worse than the plain sweep.
    let mass = kernel.sum();
    let objective = |u: &ScalarField, h: &ScalarField| -> f64 {
        u.values()
            .iter()
            .zip(ubar.values())
            .zip(h.values())
            .map(|((&v, &b), &g)| {
                0.5 * (v - b) * (v - b)
                    + mu * (v * v.ln() + (1.0 - v) * (1.0 - v).ln())
                    + 0.5 * nu * v * (g + mass)
            })
            .sum()
    };

    let mut x = sweep(&interaction(&ubar.map(|v| v.clamp(GAMMA, 1.0 - GAMMA)))?)?;
    let mut hx = interaction(&x)?;
    let mut mixer = Anderson::new(depth);
    let mut change = f64::INFINITY;
    for _ in 0..max_iters {
        let gx = sweep(&hx)?;
        change = gx.max_abs_diff(&x)?;
        if change <= tol {
            return Ok(gx);
        }
        let hg = interaction(&gx)?;
        (x, hx) = match mixer.next(&x, &gx) {
            Some(mixed) => {
                let y = ScalarField::from_raw(gx.width(), gx.height(), mixed);
                let hy = interaction(&y)?;
                if objective(&y, &hy) <= objective(&gx, &hg) {
                    (y, hy)
                } else {
                    mixer.reset();
                    (gx, hg)
                }
            }
            None => (gx, hg),
        };
    }
    Err(Error::Convergence {
        iterations: max_iters,
        residual: change,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Type-II Anderson mixing over the last `depth` sweep differences.
struct Anderson {
    depth: usize,
    prev: Option<(Vec<f64>, Vec<f64>)>,
    d_res: Vec<Vec<f64>>,
    d_out: Vec<Vec<f64>>,
}

impl Anderson {
    fn new(depth: usize) -> Self {
        Anderson {
            depth,
            prev: None,
            d_res: vec![],
            d_out: vec![],
        }
    }

    fn reset(&mut self) {
        self.prev = None;
        self.d_res.clear();
        self.d_out.clear();
    }

    /// Mixed iterate from the latest pair `(x, g(x))`, or `None` while there
    /// is no history to mix.
    fn next(&mut self, x: &ScalarField, gx: &ScalarField) -> Option<Vec<f64>> {
        if self.depth == 0 {
            return None;
        }
        let out = gx.values().to_vec();
        let res: Vec<f64> = out.iter().zip(x.values()).map(|(g, x)| g - x).collect();
        if let Some((pr, po)) = self.prev.take() {
            self.d_res
                .push(res.iter().zip(&pr).map(|(a, b)| a - b).collect());
            self.d_out
                .push(out.iter().zip(&po).map(|(a, b)| a - b).collect());
            if self.d_res.len() > self.depth {
                self.d_res.remove(0);
                self.d_out.remove(0);
            }
        }
        let m = self.d_res.len();
        let norm2 = dot(&res, &res);
        self.prev = Some((res.clone(), out.clone()));
        if m == 0 {
            return None;
        }
        // least squares on the m x m normal equations
        let gram = DMatrix::from_fn(m, m, |i, j| dot(&self.d_res[i], &self.d_res[j]));
        let rhs = DVector::from_fn(m, |i, _| dot(&self.d_res[i], &res));
        let gamma = gram.svd(true, true).solve(&rhs, 1e-14 * norm2).ok()?;
        let mut mixed = out;
        for (j, g) in gamma.iter().enumerate() {
            for (v, d) in mixed.iter_mut().zip(&self.d_out[j]) {
                *v -= g * d;
            }
        }
        for v in &mut mixed {
            *v = v.clamp(GAMMA, 1.0 - GAMMA);
        }
        Some(mixed)
    }
}

/// The nonlinear map applied after each linear substep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ResolventKind {
    Identity,
    DoubleWell {
        c: f64,
    },
    Logit {
        mu: f64,
    },
    LogitNonlocal {
        mu: f64,
        nu: f64,
        kernel: ConvKernel,
        #[serde(default = "default_tol")]
        tol: f64,
        #[serde(default = "default_max_iters")]
        max_iters: usize,
    },
}

fn default_tol() -> f64 {
    DEFAULT_FP_TOL
}

fn default_max_iters() -> usize {
    DEFAULT_FP_MAX_ITERS
}

impl ResolventKind {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(format!(
                    "resolvent parameter {name} must be finite and >= 0, got {v}"
                )))
            }
        };
        match self {
            ResolventKind::Identity => Ok(()),
            ResolventKind::DoubleWell { c } => nonneg("c", *c),
            ResolventKind::Logit { mu } => nonneg("mu", *mu),
            ResolventKind::LogitNonlocal {
                mu,
                nu,
                kernel,
                tol,
                ..
            } => {
                nonneg("mu", *mu)?;
                nonneg("nu", *nu)?;
                nonneg("tol", *tol)?;
                if *mu == 0.0 {
                    return Err(invalid("nonlocal logit resolvent needs mu > 0"));
                }
                if !kernel.is_normalized() {
                    return Err(invalid("nonlocal logit kernel must be normalized"));
                }
                Ok(())
            }
        }
    }

    pub fn apply(&self, ubar: &ScalarField) -> Result<ScalarField> {
        match self {
            ResolventKind::Identity => Ok(ubar.clone()),
            ResolventKind::DoubleWell { c } => Ok(ubar.map(|v| resolve_double_well(v, *c))),
            ResolventKind::Logit { mu } => ubar.try_map(|v| resolve_logit(v, *mu)),
            ResolventKind::LogitNonlocal {
                mu,
                nu,
                kernel,
                tol,
                max_iters,
            } => resolve_logit_nonlocal(ubar, *mu, *nu, kernel, *tol, *max_iters),
        }
    }
}
