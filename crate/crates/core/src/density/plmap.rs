//! Piecewise-linear approximation of the solution map and its transfer operator.

use super::{bin_index, validate_edges, Density1D};
use crate::error::{Error, Result};
use crate::exec;
use crate::history::FamilyKind;
use crate::integrate::scalar_solution_map;
use crate::system::DelaySystem;

/// Default number of mesh nodes.
pub const DEFAULT_PL_MESH: usize = 1000;

/// Segments whose image is shorter than this are treated as collapsed.
const DEGENERATE_DY: f64 = 1e-14;

/// Linear interpolant of `x0 ↦ x(t)` through computed mesh values.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinearMap {
    pub mesh_x: Vec<f64>,
    pub mesh_y: Vec<f64>,
    pub t: f64,
}

impl PiecewiseLinearMap {
    pub fn new(mesh_x: Vec<f64>, mesh_y: Vec<f64>, t: f64) -> Result<Self> {
        validate_edges(&mesh_x)?;
        if mesh_y.len() != mesh_x.len() {
            return Err(Error::InvalidInput(
                "mesh_x and mesh_y lengths differ".into(),
            ));
        }
        Ok(PiecewiseLinearMap { mesh_x, mesh_y, t })
    }

    pub fn eval(&self, x: f64) -> Option<f64> {
        let i = bin_index(&self.mesh_x, x)?;
        let (x0, x1) = (self.mesh_x[i], self.mesh_x[i + 1]);
        let (y0, y1) = (self.mesh_y[i], self.mesh_y[i + 1]);
        Some(y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    }
}

/// Samples the solution map at every mesh node.
pub fn build_pl_map(
    system: &DelaySystem,
    kind: FamilyKind,
    mesh_x: &[f64],
    t: f64,
    n_mesh: usize,
) -> Result<PiecewiseLinearMap> {
    validate_edges(mesh_x)?;
    let ys = exec::map_slice(mesh_x, |&x| scalar_solution_map(system, kind, x, t, n_mesh));
    let mesh_y = ys
        .into_iter()
        .enumerate()
        .map(|(index, r)| {
            r.map_err(|e| Error::MeshOverflow {
                index,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    PiecewiseLinearMap::new(mesh_x.to_vec(), mesh_y, t)
}

/// How [`apply_pl_pf`] evaluates the transported density.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PfEvaluation {
    /// `Σ ρ0(z)|Δx/Δy|` over pre-images `z` of each bin midpoint.
    #[default]
    Pointwise,
    /// Exact bin averages: pre-image mass of each bin divided by its width.
    BinAverage,
}

/// Transfer operator of a piecewise-linear map applied to `rho0`, on the bins
/// of `eval_edges`. Not renormalized.
///
/// A segment whose image is shorter than `1e-14` deposits its whole mass into
/// the bin containing its image.
pub fn apply_pl_pf(
    plmap: &PiecewiseLinearMap,
    rho0: &Density1D,
    eval_edges: &[f64],
    mode: PfEvaluation,
) -> Result<Density1D> {
    validate_edges(eval_edges)?;
    let cdf = rho0.cdf();
    let (xs, ys) = (&plmap.mesh_x, &plmap.mesh_y);
    let segments = xs.len() - 1;

    // collapsed segments: (bin, mass)
    let mut deposits = vec![0.0; eval_edges.len() - 1];
    for i in 0..segments {
        if (ys[i + 1] - ys[i]).abs() < DEGENERATE_DY {
            if let Some(b) = bin_index(eval_edges, ys[i]) {
                deposits[b] += cdf.eval(xs[i + 1]) - cdf.eval(xs[i]);
            }
        }
    }

    let bin_density = |b: usize| -> f64 {
        let (a, c) = (eval_edges[b], eval_edges[b + 1]);
        let mut acc = 0.0;
        match mode {
            PfEvaluation::Pointwise => {
                let p = 0.5 * (a + c);
                for i in 0..segments {
                    let (y0, y1) = (ys[i], ys[i + 1]);
                    let dy = y1 - y0;
                    if dy.abs() < DEGENERATE_DY || p < y0.min(y1) || p >= y0.max(y1) {
                        continue;
                    }
                    let dx = xs[i + 1] - xs[i];
                    let z = xs[i] + dx / dy * (p - y0);
                    acc += rho0.value_at(z) * (dx / dy).abs();
                }
            }
            PfEvaluation::BinAverage => {
                for i in 0..segments {
                    let (y0, y1) = (ys[i], ys[i + 1]);
                    let dy = y1 - y0;
                    let (lo, hi) = (y0.min(y1).max(a), y0.max(y1).min(c));
                    if dy.abs() < DEGENERATE_DY || hi <= lo {
                        continue;
                    }
                    let dx = xs[i + 1] - xs[i];
                    let z = |y: f64| (xs[i] + dx / dy * (y - y0)).clamp(xs[i], xs[i + 1]);
                    acc += (cdf.eval(z(hi)) - cdf.eval(z(lo))).abs();
                }
                acc /= c - a;
            }
        }
        acc + deposits[b] / (c - a)
    };
    let density = exec::map_indexed(eval_edges.len() - 1, bin_density);
    Density1D::new(eval_edges.to_vec(), density)
}
