//! Independent oracles and generators shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand_core::{Rng, SeedableRng};
use rand_pcg::Pcg64;
use splitseg::field::{ConvKernel, ScalarField};
use splitseg::splitting::{LinearOp, LinearTerm, ResolventKind, SchemeSpec, SplitMode, SplitTerm};

pub struct Gen(Pcg64);

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen(Pcg64::seed_from_u64(seed))
    }

    pub fn unit(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn int(&mut self, lo: usize, hi_inclusive: usize) -> usize {
        lo + (self.0.next_u64() % (hi_inclusive - lo + 1) as u64) as usize
    }

    pub fn coin(&mut self) -> bool {
        self.0.next_u64() & 1 == 1
    }

    pub fn field(&mut self, w: usize, h: usize, lo: f64, hi: f64) -> ScalarField {
        let values = (0..w * h).map(|_| self.range(lo, hi)).collect();
        ScalarField::new(w, h, values).unwrap()
    }
}

/// Real roots of `u + c (2u^3 - 3u^2 + u) = ubar`, ascending, by the
/// trigonometric / Cardano formulas, each polished with Newton steps.
pub fn cubic_roots(ubar: f64, c: f64) -> Vec<f64> {
    if c == 0.0 {
        return vec![ubar];
    }
    // monic: u^3 + a u^2 + b u + d
    let a = -1.5;
    let b = (1.0 + c) / (2.0 * c);
    let d = -ubar / (2.0 * c);
    // u = t - a/3
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + d;
    let shift = -a / 3.0;
    let disc = q * q / 4.0 + p * p * p / 27.0;
    let mut roots = if disc > 0.0 {
        let s = disc.sqrt();
        vec![(-q / 2.0 + s).cbrt() + (-q / 2.0 - s).cbrt() + shift]
    } else {
        let r = (-p / 3.0).sqrt();
        let arg = (3.0 * q / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| 2.0 * r * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift)
            .collect()
    };
    for x in &mut roots {
        for _ in 0..3 {
            let f = *x + c * (2.0 * *x * *x * *x - 3.0 * *x * *x + *x) - ubar;
            let df = 1.0 + c * (6.0 * *x * *x - 6.0 * *x + 1.0);
            if df.abs() > 1e-6 {
                *x -= f / df;
            }
        }
    }
    roots.sort_by(f64::total_cmp);
    roots
}

/// Dense matrix of periodic convolution with `k` on a `w x h` torus.
pub fn convolution_matrix(k: &ConvKernel, w: usize, h: usize) -> DMatrix<f64> {
    let n = w * h;
    let (rh, rw) = ((k.kh() / 2) as isize, (k.kw() / 2) as isize);
    let mut m = DMatrix::zeros(n, n);
    for i in 0..h as isize {
        for j in 0..w as isize {
            for a in 0..k.kh() as isize {
                for b in 0..k.kw() as isize {
                    // out[i][j] += k[a][b] * u[i - (a - rh)][j - (b - rw)]
                    let si = (i - (a - rh)).rem_euclid(h as isize) as usize;
                    let sj = (j - (b - rw)).rem_euclid(w as isize) as usize;
                    m[(i as usize * w + j as usize, si * w + sj)] +=
                        k.weights()[(a * k.kw() as isize + b) as usize];
                }
            }
        }
    }
    m
}

fn sigma(s: f64) -> f64 {
    1.0 / (1.0 + (-s).exp())
}

/// Damped Newton on the coupled system
/// `u + mu ln(u/(1-u)) + nu G(1 - 2u) = ubar`, in logit coordinates.
pub fn nonlocal_newton(ubar: &ScalarField, mu: f64, nu: f64, k: &ConvKernel) -> Vec<f64> {
    let n = ubar.len();
    let g = convolution_matrix(k, ubar.width(), ubar.height());
    let b = DVector::from_column_slice(ubar.values());
    let ones = DVector::from_element(n, 1.0);
    let residual = |s: &DVector<f64>| {
        let u = s.map(sigma);
        &u + s * mu + (&g * (&ones - &u * 2.0)) * nu - &b
    };
    let mut s = DVector::zeros(n);
    let mut r = residual(&s);
    for _ in 0..200 {
        if r.amax() < 1e-15 {
            break;
        }
        let u = s.map(sigma);
        let du = u.map(|v| v * (1.0 - v));
        let mut jac = -&g * 2.0 * nu;
        for c in 0..n {
            for row in 0..n {
                jac[(row, c)] *= du[c];
            }
            jac[(c, c)] += du[c] + mu;
        }
        let step = jac.lu().solve(&(-&r)).expect("nonsingular Jacobian");
        let mut t = 1.0;
        loop {
            let trial = &s + &step * t;
            let rt = residual(&trial);
            if rt.norm() < r.norm() || t < 1e-6 {
                s = trial;
                r = rt;
                break;
            }
            t *= 0.5;
        }
    }
    s.iter().map(|&v| sigma(v)).collect()
}

/// Random normalized 3x3 kernel with positive taps.
pub fn positive_kernel(g: &mut Gen) -> ConvKernel {
    let raw: Vec<f64> = (0..9).map(|_| g.range(0.1, 1.0)).collect();
    let sum: f64 = raw.iter().sum();
    ConvKernel::new(3, 3, raw.iter().map(|v| v / sum).collect()).unwrap()
}

/// Random scheme on a field of at most 16x16. `kind` picks the resolvent
/// of the first term (0 identity, 1 double well, 2 logit, 3 nonlocal).
pub fn random_scheme(g: &mut Gen, kind: usize) -> (SchemeSpec, ScalarField) {
    let w = g.int(3, 16);
    let h = g.int(3, 16);
    let k = g.int(1, 4);
    let mut terms = Vec::with_capacity(k);
    for t in 0..k {
        let operator = match g.int(0, 3) {
            0 => LinearOp::ScaledLaplacian {
                coefficient: g.range(-1.0, 1.0),
            },
            1 => LinearOp::ScaledIdentity {
                coefficient: g.range(-1.0, 1.0),
            },
            2 => {
                let weights = (0..9).map(|_| g.range(-0.2, 0.2)).collect();
                LinearOp::ConvKernel {
                    kernel: ConvKernel::new(3, 3, weights).unwrap(),
                }
            }
            _ => LinearOp::Zero,
        };
        let source = g.coin().then(|| g.field(w, h, -0.5, 0.5));
        let which = if t == 0 { kind } else { g.int(0, 3) };
        let resolvent = match which {
            0 => ResolventKind::Identity,
            1 => ResolventKind::DoubleWell {
                c: g.range(0.0, 5.0),
            },
            2 => ResolventKind::Logit {
                mu: g.range(0.05, 2.0),
            },
            _ => ResolventKind::LogitNonlocal {
                mu: g.range(0.5, 2.0),
                nu: g.range(0.0, 0.5),
                kernel: positive_kernel(g),
                tol: 1e-12,
                max_iters: 500,
            },
        };
        terms.push(SplitTerm {
            linear: LinearTerm::new(operator, source),
            resolvent,
        });
    }
    let mode = if g.coin() {
        SplitMode::Sequential
    } else {
        SplitMode::Parallel
    };
    let dt = g.range(0.001, 0.05);
    let steps = g.int(1, 10);
    let spec = SchemeSpec::new(mode, terms, dt, steps).unwrap();
    let u0 = g.field(w, h, 0.0, 1.0);
    (spec, u0)
}

/// Disk indicator centred at `(H/2, W/2)`.
pub fn disk_truth(w: usize, h: usize, r: f64) -> ScalarField {
    let (ci, cj) = ((h / 2) as f64, (w / 2) as f64);
    ScalarField::from_fn(w, h, |i, j| {
        let (di, dj) = (i as f64 - ci, j as f64 - cj);
        if di * di + dj * dj <= r * r {
            1.0
        } else {
            0.0
        }
    })
    .unwrap()
}

pub fn dice(a: &ScalarField, b: &ScalarField) -> f64 {
    let (mut inter, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.values().iter().zip(b.values()) {
        inter += usize::from(x > 0.5 && y > 0.5);
        na += usize::from(x > 0.5);
        nb += usize::from(y > 0.5);
    }
    if na + nb == 0 {
        1.0
    } else {
        2.0 * inter as f64 / (na + nb) as f64
    }
}
