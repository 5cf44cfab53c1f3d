//! Asymptotic densities: long-trajectory histograms, trace-map histograms,
//! Ulam matrices and the self-consistent transfer operator.

mod scpf;
mod ulam;

pub use scpf::{scpf_apply, scpf_build, scpf_iterate, ScpfOperator, ScpfStep, DEFAULT_SCPF_GRID};
pub use ulam::{stationary_vector, ulam_matrix, Stationary, TransitionMatrix};

use std::io::{self, Write};

use crate::density::{bin_index, validate_edges, Density1D};
use crate::error::{Error, Result};
use crate::history::{initial_history, HistoryVector, InitialFamily};
use crate::integrate::Stepper;
use crate::system::DelaySystem;

/// Samples `x_k = x(k · h_sample)` of one solution, `k = 0, 1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub values: Vec<f64>,
    pub h_sample: f64,
    pub burn_in: usize,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>, h_sample: f64, burn_in: usize) -> Result<Self> {
        if burn_in >= values.len() {
            return Err(Error::invalid(
                "burn_in",
                "must be smaller than the series length",
            ));
        }
        Ok(TimeSeries {
            values,
            h_sample,
            burn_in,
        })
    }

    /// Integrates `family` and records `n_samples` samples.
    pub fn generate(
        system: &DelaySystem,
        family: &InitialFamily,
        h_sample: f64,
        n_samples: usize,
        burn_in: usize,
        n_mesh: usize,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(n_samples);
        walk(system, family, h_sample, n_samples, n_mesh, |_, x, _| {
            values.push(x)
        })?;
        TimeSeries::new(values, h_sample, burn_in)
    }

    /// Samples after the burn-in.
    pub fn retained(&self) -> &[f64] {
        &self.values[self.burn_in..]
    }
}

fn sample_stride(h_sample: f64, n_mesh: usize) -> Result<usize> {
    let s = h_sample * n_mesh as f64;
    let r = s.round();
    if !(r >= 1.0) || (s - r).abs() > 1e-9 * r {
        return Err(Error::invalid(
            "h_sample",
            format!("must be a positive multiple of the integration step 1/{n_mesh}"),
        ));
    }
    Ok(r as usize)
}

/// Runs the solution and calls `visit(k, x(t_k), x(t_k - 1))` for every
/// sample; the lagged value is `None` while `t_k < 1`. Returns the final
/// history vector.
fn walk(
    system: &DelaySystem,
    family: &InitialFamily,
    h_sample: f64,
    n_samples: usize,
    n_mesh: usize,
    mut visit: impl FnMut(usize, f64, Option<f64>),
) -> Result<HistoryVector> {
    let stride = sample_stride(h_sample, n_mesh)?;
    let hist = initial_history(family, n_mesh)?;
    let u = hist.values();
    let mut k = 0;
    while k < n_samples && k * stride < n_mesh {
        visit(k, u[k * stride], None);
        k += 1;
    }
    let mut st = Stepper::new(system, u, 1.0);
    let mut mesh = n_mesh;
    while k < n_samples {
        while mesh < k * stride {
            st.step()?;
            mesh += 1;
        }
        visit(k, st.current(), Some(st.lagged()));
        k += 1;
    }
    Ok(st.history())
}

fn check_trap(last: &HistoryVector) -> Result<()> {
    let v = last.values();
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| {
            (a.min(x), b.max(x))
        });
    if hi - lo <= 1e-10 {
        Err(Error::EquilibriumTrap)
    } else {
        Ok(())
    }
}

fn check_sizes(n_samples: usize, burn_in: usize) -> Result<()> {
    if n_samples <= burn_in {
        return Err(Error::invalid("n_samples", "must exceed burn_in"));
    }
    Ok(())
}

/// Normalized histogram of the post-burn-in samples of one solution.
///
/// Fails with [`Error::EquilibriumTrap`] when the solution ends on an
/// equilibrium (last delay interval constant to `1e-10`).
pub fn solution_histogram(
    system: &DelaySystem,
    family: &InitialFamily,
    h_sample: f64,
    n_samples: usize,
    burn_in: usize,
    edges: &[f64],
    n_mesh: usize,
) -> Result<Density1D> {
    check_sizes(n_samples, burn_in)?;
    validate_edges(edges)?;
    let mut counts = vec![0u64; edges.len() - 1];
    let last = walk(system, family, h_sample, n_samples, n_mesh, |k, x, _| {
        if k >= burn_in {
            if let Some(b) = bin_index(edges, x) {
                counts[b] += 1;
            }
        }
    })?;
    check_trap(&last)?;
    Density1D::from_counts(edges.to_vec(), &counts, (n_samples - burn_in) as u64)
}

/// 2-D histogram of `(x(t-1), x(t))` pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram2D {
    pub x_edges: Vec<f64>,
    pub y_edges: Vec<f64>,
    /// Row-major, `counts[iy * nx + ix]`.
    pub counts: Vec<u64>,
    /// Number of samples, including any that fell outside the grid.
    pub total: u64,
}

impl Histogram2D {
    pub fn nx(&self) -> usize {
        self.x_edges.len() - 1
    }

    pub fn ny(&self) -> usize {
        self.y_edges.len() - 1
    }

    pub fn count(&self, ix: usize, iy: usize) -> u64 {
        self.counts[iy * self.nx() + ix]
    }

    pub fn density(&self, ix: usize, iy: usize) -> f64 {
        let wx = self.x_edges[ix + 1] - self.x_edges[ix];
        let wy = self.y_edges[iy + 1] - self.y_edges[iy];
        self.count(ix, iy) as f64 / (self.total as f64 * wx * wy)
    }

    /// Density of `x(t)`: counts summed over the `x(t-1)` axis.
    pub fn marginal_current(&self) -> Result<Density1D> {
        let nx = self.nx();
        let counts: Vec<u64> = (0..self.ny())
            .map(|iy| self.counts[iy * nx..(iy + 1) * nx].iter().sum())
            .collect();
        Density1D::from_counts(self.y_edges.clone(), &counts, self.total)
    }

    /// Density of `x(t-1)`.
    pub fn marginal_lagged(&self) -> Result<Density1D> {
        let nx = self.nx();
        let counts: Vec<u64> = (0..nx)
            .map(|ix| (0..self.ny()).map(|iy| self.counts[iy * nx + ix]).sum())
            .collect();
        Density1D::from_counts(self.x_edges.clone(), &counts, self.total)
    }

    /// Plain PGM (P2): one pixel per cell, `x(t-1)` to the right, `x(t)`
    /// upward, gray = `round(255 · count / max_count)`.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> io::Result<()> {
        let max = self.counts.iter().copied().max().unwrap_or(0).max(1);
        writeln!(w, "P2")?;
        writeln!(w, "{} {}", self.nx(), self.ny())?;
        writeln!(w, "255")?;
        for iy in (0..self.ny()).rev() {
            let row: Vec<String> = (0..self.nx())
                .map(|ix| {
                    let g = (255.0 * self.count(ix, iy) as f64 / max as f64).round();
                    (g as u32).to_string()
                })
                .collect();
            writeln!(w, "{}", row.join(" "))?;
        }
        Ok(())
    }

    /// Text describing the axes and intensity scaling of [`write_pgm`](Self::write_pgm).
    pub fn pgm_sidecar(&self) -> String {
        let max = self.counts.iter().copied().max().unwrap_or(0);
        format!(
            "columns: x(t-1) from {} to {} in {} cells (left to right)\n\
             rows: x(t) from {} to {} in {} cells (top row = largest x(t))\n\
             gray = round(255 * count / {max}) (linear; max_count = {max})\n\
             samples: {}\n",
            self.x_edges[0],
            self.x_edges[self.nx()],
            self.nx(),
            self.y_edges[0],
            self.y_edges[self.ny()],
            self.ny(),
            self.total
        )
    }
}

/// Histogram of `(x(t-1), x(t))` over the post-burn-in samples.
///
/// The burn-in must cover the initial interval (`burn_in · h_sample ≥ 1`) so
/// every retained sample has a lagged value.
#[allow(clippy::too_many_arguments)]
pub fn trace2d_histogram(
    system: &DelaySystem,
    family: &InitialFamily,
    h_sample: f64,
    n_samples: usize,
    burn_in: usize,
    x_edges: &[f64],
    y_edges: &[f64],
    n_mesh: usize,
) -> Result<Histogram2D> {
    check_sizes(n_samples, burn_in)?;
    validate_edges(x_edges)?;
    validate_edges(y_edges)?;
    let stride = sample_stride(h_sample, n_mesh)?;
    if burn_in * stride < n_mesh {
        return Err(Error::invalid(
            "burn_in",
            "must cover the initial delay interval",
        ));
    }
    let nx = x_edges.len() - 1;
    let mut counts = vec![0u64; nx * (y_edges.len() - 1)];
    let last = walk(system, family, h_sample, n_samples, n_mesh, |k, x, lag| {
        if k >= burn_in {
            let lag = lag.expect("burn-in covers the initial interval");
            if let (Some(ix), Some(iy)) = (bin_index(x_edges, lag), bin_index(y_edges, x)) {
                counts[iy * nx + ix] += 1;
            }
        }
    })?;
    if let Err(e) = check_trap(&last) {
        // a constant solution still has a well-defined (single-cell) portrait
        if counts.iter().filter(|&&c| c > 0).count() > 1 {
            return Err(e);
        }
    }
    Ok(Histogram2D {
        x_edges: x_edges.to_vec(),
        y_edges: y_edges.to_vec(),
        counts,
        total: (n_samples - burn_in) as u64,
    })
}
