//! Self-consistent transfer operator for the Euler recursion
//! `x_{n+1} = (1 - αh) x_n + h F(x_{n-N})`, with the delayed value replaced by
//! an independent copy of the current one:
//!
//! `(Qu)(x) = ∫ v(x - z) w(z) dz`, where `v` is the density of `(1-αh)X` and
//! `w` the density of `h F(Y)`, `X, Y ~ u`.
//!
//! Both factors are tabulated as cell averages computed from the CDF of `u`,
//! the convolution uses Simpson weights and is evaluated with an FFT.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::density::{bin_index, uniform_edges, Cdf, Density1D};
use crate::error::{Error, Result};
use crate::system::{DelaySystem, Feedback};

/// Default number of grid intervals.
pub const DEFAULT_SCPF_GRID: usize = 512;

/// Points of the finite-difference scan used to split non-monotone feedback.
const SCAN_POINTS: usize = 10_000;

/// Pre-image structure of the feedback function.
#[derive(Debug, Clone)]
enum Branches {
    /// `F(s) = (1 - 1.9|s|)/ε`: two linear branches `s = ±(1 - εy)/1.9`.
    Tent { epsilon: f64 },
    /// Monotone pieces `[a, b]` of a smooth feedback, inverted by bisection.
    Monotone {
        pieces: Vec<(f64, f64)>,
        feedback: Feedback,
    },
    /// `F = c` on `[x1, x2]`, 0 elsewhere: two atoms.
    Indicator { c: f64, x1: f64, x2: f64 },
}

impl Branches {
    fn for_feedback(fb: Feedback, lo: f64, hi: f64) -> Result<Self> {
        Ok(match fb {
            Feedback::Tent { epsilon } => Branches::Tent { epsilon },
            Feedback::Indicator { c, x1, x2 } => Branches::Indicator { c, x1, x2 },
            Feedback::MackeyGlass { .. } => Branches::Monotone {
                pieces: monotone_pieces(|s| fb.eval(s), lo, hi),
                feedback: fb,
            },
            Feedback::Linear { .. } | Feedback::NegSquare => {
                return Err(Error::UnsupportedModel(format!("{fb:?}")))
            }
        })
    }

    /// `P(F(Y) ∈ [a, b])` for `Y` with CDF `cdf`.
    fn image_mass(&self, cdf: &Cdf<'_>, a: f64, b: f64) -> f64 {
        match self {
            Branches::Tent { epsilon } => {
                // F(s) ∈ [a, b]  ⇔  |s| ∈ [(1 - εb)/1.9, (1 - εa)/1.9]
                let outer = (1.0 - epsilon * a) / 1.9;
                if outer < 0.0 {
                    return 0.0;
                }
                let inner = ((1.0 - epsilon * b) / 1.9).max(0.0);
                let right = cdf.eval(outer) - cdf.eval(inner);
                let left = cdf.eval(-inner) - cdf.eval(-outer);
                right + left
            }
            Branches::Monotone { pieces, feedback } => pieces
                .iter()
                .map(|&(p, q)| {
                    let za = invert_on(|s| feedback.eval(s), p, q, a);
                    let zb = invert_on(|s| feedback.eval(s), p, q, b);
                    (cdf.eval(zb) - cdf.eval(za)).abs()
                })
                .sum(),
            Branches::Indicator { .. } => unreachable!("atoms are deposited directly"),
        }
    }
}

/// Splits `[lo, hi]` where a finite-difference derivative changes sign.
fn monotone_pieces(f: impl Fn(f64) -> f64, lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let n = SCAN_POINTS;
    let xs: Vec<f64> = (0..=n)
        .map(|i| lo + (hi - lo) * i as f64 / n as f64)
        .collect();
    let d: Vec<f64> = xs.windows(2).map(|w| f(w[1]) - f(w[0])).collect();
    let mut cuts = vec![lo];
    for i in 1..d.len() {
        if d[i] * d[i - 1] < 0.0 {
            // refine the extremum inside [x_{i-1}, x_{i+1}] by bisection on f'
            let (mut a, mut b) = (xs[i - 1], xs[i + 1]);
            let slope = |x: f64| {
                let e = 1e-7 * (1.0 + x.abs());
                f(x + e) - f(x - e)
            };
            let sa = slope(a).signum();
            while b - a > 1e-12 {
                let m = 0.5 * (a + b);
                if slope(m).signum() == sa {
                    a = m;
                } else {
                    b = m;
                }
            }
            cuts.push(0.5 * (a + b));
        }
    }
    cuts.push(hi);
    cuts.windows(2).map(|w| (w[0], w[1])).collect()
}

/// Point of `[p, q]` where the monotone `f` reaches `y`, clamped to the ends.
fn invert_on(f: impl Fn(f64) -> f64, p: f64, q: f64, y: f64) -> f64 {
    let (fp, fq) = (f(p), f(q));
    let increasing = fq >= fp;
    let (ylo, yhi) = if increasing { (fp, fq) } else { (fq, fp) };
    if y <= ylo {
        return if increasing { p } else { q };
    }
    if y >= yhi {
        return if increasing { q } else { p };
    }
    let (mut a, mut b) = (p, q);
    while b - a > 1e-12 {
        let m = 0.5 * (a + b);
        if (f(m) < y) == increasing {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Composite Simpson weights for `m` (even) intervals of width `dx`.
fn simpson_weights(m: usize, dx: f64) -> Vec<f64> {
    (0..=m)
        .map(|j| {
            let c = if j == 0 || j == m {
                1.0
            } else if j % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * dx / 3.0
        })
        .collect()
}

/// Tabulated operator on the uniform grid `x_j = lo + j Δx`, `j = 0..=M`.
#[derive(Debug, Clone)]
pub struct ScpfOperator {
    decay: f64,
    h: f64,
    grid: Vec<f64>,
    dx: f64,
    cells: Vec<f64>,
    branches: Branches,
    weights: Vec<f64>,
}

/// Builds the operator for a system `x' = -αx + F(x(t-1))` at step `h` on
/// `m` intervals of `[lo, hi]`.
pub fn scpf_build(
    system: &DelaySystem,
    h: f64,
    lo: f64,
    hi: f64,
    m: usize,
) -> Result<ScpfOperator> {
    let (decay, fb) = system
        .decay_feedback()
        .ok_or_else(|| Error::UnsupportedModel(system.id().to_string()))?;
    if !(h > 0.0) {
        return Err(Error::invalid("h", "must be > 0"));
    }
    if !(hi > lo) {
        return Err(Error::invalid("grid", "needs lo < hi"));
    }
    if m < 2 || !m.is_multiple_of(2) {
        return Err(Error::invalid(
            "grid",
            "Simpson's rule needs an even number of intervals",
        ));
    }
    if !(1.0 - decay * h > 0.0) {
        return Err(Error::invalid("h", "needs 1 - alpha h > 0"));
    }
    let branches = Branches::for_feedback(fb, lo, hi)?;
    let grid = uniform_edges(lo, hi, m);
    let dx = (hi - lo) / m as f64;
    let cells = uniform_edges(lo - 0.5 * dx, hi + 0.5 * dx, m + 1);
    Ok(ScpfOperator {
        decay,
        h,
        grid,
        dx,
        cells,
        branches,
        weights: simpson_weights(m, dx),
    })
}

impl ScpfOperator {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    /// Cells of width `Δx` centred on the grid points; densities passed to
    /// [`scpf_apply`] are rebinned onto these.
    pub fn cell_edges(&self) -> &[f64] {
        &self.cells
    }

    fn points(&self) -> usize {
        self.grid.len()
    }

    fn on_cells(&self, u: &Density1D) -> Result<Density1D> {
        if u.edges() == self.cells.as_slice() {
            Ok(u.clone())
        } else {
            u.rebin(&self.cells)
        }
    }

    /// `v` at offsets `(k - (P-1)) Δx`, `k = 0..2P-1`, as cell averages.
    pub fn v_table(&self, u: &Density1D) -> Vec<f64> {
        let cdf = u.cdf();
        let c = 1.0 - self.decay * self.h;
        let p = self.points() as isize;
        (0..2 * p - 1)
            .map(|k| {
                let y = (k - (p - 1)) as f64 * self.dx;
                let (a, b) = (y - 0.5 * self.dx, y + 0.5 * self.dx);
                (cdf.eval(b / c) - cdf.eval(a / c)) / self.dx
            })
            .collect()
    }

    /// `w` at the grid points, as cell averages.
    pub fn w_table(&self, u: &Density1D) -> Vec<f64> {
        let cdf = u.cdf();
        let h = self.h;
        match &self.branches {
            Branches::Indicator { c, x1, x2 } => {
                let on = cdf.eval(*x2) - cdf.eval(*x1);
                let mut w = vec![0.0; self.points()];
                for (value, mass) in [(h * c, on), (0.0, cdf.total() - on)] {
                    if let Some(j) = bin_index(&self.cells, value) {
                        w[j] += mass / self.dx;
                    }
                }
                w
            }
            br => self
                .grid
                .iter()
                .map(|&x| {
                    let (a, b) = ((x - 0.5 * self.dx) / h, (x + 0.5 * self.dx) / h);
                    br.image_mass(&cdf, a, b) / self.dx
                })
                .collect(),
        }
    }

    /// `(Qu)_i = Σ_j v_{i-j} w_j α_j` by FFT, not renormalized.
    pub fn apply_raw(&self, u: &Density1D) -> Result<Vec<f64>> {
        let u = self.on_cells(u)?;
        let v = self.v_table(&u);
        let ww: Vec<f64> = self
            .w_table(&u)
            .iter()
            .zip(&self.weights)
            .map(|(w, a)| w * a)
            .collect();
        let p = self.points();
        let len = (3 * p - 2).next_power_of_two();
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(len);
        let inv = planner.plan_fft_inverse(len);
        let pad = |xs: &[f64]| {
            let mut buf = vec![Complex::new(0.0, 0.0); len];
            for (b, x) in buf.iter_mut().zip(xs) {
                b.re = *x;
            }
            buf
        };
        let (mut a, mut b) = (pad(&ww), pad(&v));
        fwd.process(&mut a);
        fwd.process(&mut b);
        for (x, y) in a.iter_mut().zip(&b) {
            *x *= y;
        }
        inv.process(&mut a);
        let scale = 1.0 / len as f64;
        Ok((0..p).map(|i| (a[i + p - 1].re * scale).max(0.0)).collect())
    }

    /// [`apply_raw`](Self::apply_raw) by the direct double sum.
    pub fn apply_direct(&self, u: &Density1D) -> Result<Vec<f64>> {
        let u = self.on_cells(u)?;
        let v = self.v_table(&u);
        let w = self.w_table(&u);
        let p = self.points();
        Ok((0..p)
            .map(|i| {
                (0..p)
                    .map(|j| v[i + p - 1 - j] * w[j] * self.weights[j])
                    .sum::<f64>()
                    .max(0.0)
            })
            .collect())
    }

    /// Grid values as a density on the cells.
    pub fn to_density(&self, values: Vec<f64>) -> Result<Density1D> {
        Density1D::new(self.cells.clone(), values)
    }
}

/// `Qu`, renormalized.
pub fn scpf_apply(op: &ScpfOperator, u: &Density1D) -> Result<Density1D> {
    let q = op.to_density(op.apply_raw(u)?)?;
    if q.mass() <= 0.0 {
        return Err(Error::Domain("Qu has no mass on the grid".into()));
    }
    Ok(q.normalized())
}

/// One fixed-point iterate with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ScpfStep {
    pub density: Density1D,
    pub l1_change: f64,
    pub center_of_mass: f64,
    pub std_dev: f64,
}

/// `u_{k+1} = Q u_k` for `k = 0..n_iter`.
pub fn scpf_iterate(op: &ScpfOperator, u0: &Density1D, n_iter: usize) -> Result<Vec<ScpfStep>> {
    if n_iter == 0 {
        return Err(Error::invalid("n_iter", "must be >= 1"));
    }
    let mut u = op.on_cells(u0)?.normalized();
    let mut out = Vec::with_capacity(n_iter);
    for _ in 0..n_iter {
        let next = scpf_apply(op, &u)?;
        out.push(ScpfStep {
            l1_change: next.l1_distance(&u)?,
            center_of_mass: next.mean(),
            std_dev: next.std_dev(),
            density: next.clone(),
        });
        u = next;
    }
    Ok(out)
}
