//! Density evolution for the augmented equation: gridded densities, explicit
//! Perron-Frobenius operators, ensembles, the piecewise-linear transfer
//! operator and the density support curve.

mod ensemble;
mod explicit;
mod plmap;
mod support;

pub use ensemble::{sample_ensemble, sampling_requirement, EnsembleHistogram};
pub use explicit::{
    explicit_pf_linear, explicit_pf_linear_on, explicit_pf_quadratic, explicit_pf_quadratic_on,
    quadratic_map_invariant_density, quadratic_map_pf, quadratic_map_pf_at,
};
pub use plmap::{apply_pl_pf, build_pl_map, PfEvaluation, PiecewiseLinearMap, DEFAULT_PL_MESH};
pub use support::{track_support_curve, SupportCurve};

use std::io::{self, Write};

use crate::error::{Error, Result};

/// Default number of histogram bins.
pub const DEFAULT_BINS: usize = 100;

/// `bins + 1` equally spaced edges from `lo` to `hi` (both exact).
pub fn uniform_edges(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let w = hi - lo;
    let mut e: Vec<f64> = (0..=bins)
        .map(|i| lo + w * (i as f64 / bins as f64))
        .collect();
    e[bins] = hi;
    e
}

/// Index of the bin of `edges` containing `x`; the last bin is closed.
pub fn bin_index(edges: &[f64], x: f64) -> Option<usize> {
    let n = edges.len();
    if n < 2 || !(x >= edges[0] && x <= edges[n - 1]) {
        return None;
    }
    if x == edges[n - 1] {
        return Some(n - 2);
    }
    Some(edges.partition_point(|&e| e <= x) - 1)
}

pub(crate) fn validate_edges(edges: &[f64]) -> Result<()> {
    if edges.len() < 2 {
        return Err(Error::InvalidInput(
            "a grid needs at least two edges".into(),
        ));
    }
    if edges.iter().any(|e| !e.is_finite()) {
        return Err(Error::InvalidInput("grid edges must be finite".into()));
    }
    if edges.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput(
            "grid edges must be strictly increasing".into(),
        ));
    }
    Ok(())
}

/// A piecewise-constant density on explicit bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Density1D {
    edges: Vec<f64>,
    density: Vec<f64>,
}

impl Density1D {
    pub fn new(edges: Vec<f64>, density: Vec<f64>) -> Result<Self> {
        validate_edges(&edges)?;
        if density.len() + 1 != edges.len() {
            return Err(Error::InvalidInput(format!(
                "{} edges need {} bin values, got {}",
                edges.len(),
                edges.len() - 1,
                density.len()
            )));
        }
        if let Some(i) = density.iter().position(|d| !(d.is_finite() && *d >= 0.0)) {
            return Err(Error::InvalidInput(format!(
                "bin {i} has invalid density {}",
                density[i]
            )));
        }
        Ok(Density1D { edges, density })
    }

    pub(crate) fn from_parts_unchecked(edges: Vec<f64>, density: Vec<f64>) -> Self {
        Density1D { edges, density }
    }

    /// Normalized indicator of `[lo, hi]` on `bins` equal bins.
    pub fn uniform(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        if !(hi > lo) || bins == 0 {
            return Err(Error::InvalidInput(
                "uniform density needs lo < hi and bins > 0".into(),
            ));
        }
        Density1D::new(uniform_edges(lo, hi, bins), vec![1.0 / (hi - lo); bins])
    }

    /// Midpoint samples of `f` on `edges`.
    pub fn from_fn(edges: Vec<f64>, f: impl Fn(f64) -> f64) -> Result<Self> {
        validate_edges(&edges)?;
        let d = edges.windows(2).map(|w| f(0.5 * (w[0] + w[1]))).collect();
        Density1D::new(edges, d)
    }

    /// Bin probabilities `masses` turned into densities.
    pub fn from_masses(edges: Vec<f64>, masses: &[f64]) -> Result<Self> {
        validate_edges(&edges)?;
        let d = edges
            .windows(2)
            .zip(masses)
            .map(|(w, m)| m / (w[1] - w[0]))
            .collect();
        Density1D::new(edges, d)
    }

    /// Histogram density: `counts / (total * width)`.
    pub fn from_counts(edges: Vec<f64>, counts: &[u64], total: u64) -> Result<Self> {
        if total == 0 {
            return Err(Error::InvalidInput("histogram with no samples".into()));
        }
        let masses: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Density1D::from_masses(edges, &masses)
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn density(&self) -> &[f64] {
        &self.density
    }

    pub fn bins(&self) -> usize {
        self.density.len()
    }

    pub fn lo(&self) -> f64 {
        self.edges[0]
    }

    pub fn hi(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    pub fn width(&self, i: usize) -> f64 {
        self.edges[i + 1] - self.edges[i]
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Probability of each bin.
    pub fn masses(&self) -> Vec<f64> {
        (0..self.bins())
            .map(|i| self.density[i] * self.width(i))
            .collect()
    }

    pub fn mass(&self) -> f64 {
        self.masses().iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.mass() - 1.0).abs() <= 1e-9
    }

    /// Rescaled to unit mass (unchanged if the mass is zero).
    pub fn normalized(&self) -> Density1D {
        let m = self.mass();
        if m <= 0.0 {
            return self.clone();
        }
        Density1D::from_parts_unchecked(
            self.edges.clone(),
            self.density.iter().map(|d| d / m).collect(),
        )
    }

    /// Density at `x`, zero outside the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        bin_index(&self.edges, x).map_or(0.0, |i| self.density[i])
    }

    pub fn cdf(&self) -> Cdf<'_> {
        let mut cum = Vec::with_capacity(self.edges.len());
        let mut acc = 0.0;
        cum.push(0.0);
        for m in self.masses() {
            acc += m;
            cum.push(acc);
        }
        Cdf { rho: self, cum }
    }

    pub fn mean(&self) -> f64 {
        let m = self.mass();
        self.masses()
            .iter()
            .zip(self.midpoints())
            .map(|(p, x)| p * x)
            .sum::<f64>()
            / m
    }

    /// Variance of the piecewise-constant density (includes the in-bin spread).
    pub fn variance(&self) -> f64 {
        let m = self.mass();
        let mu = self.mean();
        (0..self.bins())
            .map(|i| {
                let (a, b) = (self.edges[i], self.edges[i + 1]);
                let c = 0.5 * (a + b) - mu;
                let w = b - a;
                self.density[i] * w * (c * c + w * w / 12.0)
            })
            .sum::<f64>()
            / m
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    /// Smallest interval holding all positive bins.
    pub fn support(&self) -> Option<(f64, f64)> {
        let first = self.density.iter().position(|&d| d > 0.0)?;
        let last = self.density.iter().rposition(|&d| d > 0.0)?;
        Some((self.edges[first], self.edges[last + 1]))
    }

    /// Exact redistribution onto another grid.
    pub fn rebin(&self, edges: &[f64]) -> Result<Density1D> {
        validate_edges(edges)?;
        let cdf = self.cdf();
        let masses: Vec<f64> = edges
            .windows(2)
            .map(|w| (cdf.eval(w[1]) - cdf.eval(w[0])).max(0.0))
            .collect();
        Density1D::from_masses(edges.to_vec(), &masses)
    }

    /// `∫ |self - other|` over the bins where `keep(i)` holds; grids must match.
    pub fn l1_distance_where(
        &self,
        other: &Density1D,
        keep: impl Fn(usize) -> bool,
    ) -> Result<f64> {
        if self.edges != other.edges {
            return Err(Error::InvalidInput(
                "L1 distance needs identical grids".into(),
            ));
        }
        Ok((0..self.bins())
            .filter(|&i| keep(i))
            .map(|i| (self.density[i] - other.density[i]).abs() * self.width(i))
            .sum())
    }

    pub fn l1_distance(&self, other: &Density1D) -> Result<f64> {
        self.l1_distance_where(other, |_| true)
    }

    /// CSV with header `bin_left,bin_right,density`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "bin_left,bin_right,density")?;
        for i in 0..self.bins() {
            writeln!(
                w,
                "{},{},{}",
                self.edges[i],
                self.edges[i + 1],
                self.density[i]
            )?;
        }
        Ok(())
    }
}

/// Cumulative distribution of a [`Density1D`] (piecewise linear).
pub struct Cdf<'a> {
    rho: &'a Density1D,
    cum: Vec<f64>,
}

impl Cdf<'_> {
    pub fn total(&self) -> f64 {
        self.cum[self.cum.len() - 1]
    }

    /// `∫_{-∞}^x ρ`.
    pub fn eval(&self, x: f64) -> f64 {
        let e = &self.rho.edges;
        if x <= e[0] {
            return 0.0;
        }
        if x >= e[e.len() - 1] {
            return self.total();
        }
        let i = e.partition_point(|&v| v <= x) - 1;
        self.cum[i] + self.rho.density[i] * (x - e[i])
    }

    /// Smallest `x` with `F(x) = u · total`, for `u ∈ [0, 1]`.
    pub fn inverse(&self, u: f64) -> f64 {
        let target = u.clamp(0.0, 1.0) * self.total();
        let e = &self.rho.edges;
        // first bin whose right cumulative value reaches the target
        let j = self.cum[1..]
            .partition_point(|&c| c < target)
            .min(self.rho.bins() - 1);
        let d = self.rho.density[j];
        if d <= 0.0 {
            return e[j];
        }
        (e[j] + (target - self.cum[j]) / d).clamp(e[j], e[j + 1])
    }
}
