//! Ulam transition matrices estimated from a single time series.

use std::io::{self, Write};

use petgraph::algo::condensation;
use petgraph::graph::DiGraph;

use crate::density::{bin_index, validate_edges};
use crate::error::{Error, Result};

/// Column-stochastic matrix: `P[i][j]` is the probability of moving from bin
/// `j` to bin `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub edges: Vec<f64>,
    /// Row-major `r × r`.
    entries: Vec<f64>,
}

impl TransitionMatrix {
    /// Validates `entries` (row-major) as a column-stochastic matrix.
    pub fn new(edges: Vec<f64>, entries: Vec<f64>) -> Result<Self> {
        validate_edges(&edges)?;
        let r = edges.len() - 1;
        if entries.len() != r * r {
            return Err(Error::InvalidInput(format!(
                "need {} entries, got {}",
                r * r,
                entries.len()
            )));
        }
        if entries.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::InvalidInput(
                "entries must be finite and >= 0".into(),
            ));
        }
        for j in 0..r {
            let s: f64 = (0..r).map(|i| entries[i * r + j]).sum();
            if (s - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidInput(format!("column {j} sums to {s}")));
            }
        }
        Ok(TransitionMatrix { edges, entries })
    }

    pub fn size(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size() + j]
    }

    /// `P p`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        let r = self.size();
        (0..r)
            .map(|i| {
                self.entries[i * r..(i + 1) * r]
                    .iter()
                    .zip(p)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// Number of closed communicating classes of the transition graph.
    pub fn closed_classes(&self) -> usize {
        let r = self.size();
        let mut g = DiGraph::<usize, ()>::new();
        let nodes: Vec<_> = (0..r).map(|i| g.add_node(i)).collect();
        for j in 0..r {
            for i in 0..r {
                if i != j && self.get(i, j) > 0.0 {
                    g.add_edge(nodes[j], nodes[i], ());
                }
            }
        }
        let dag = condensation(g, true);
        dag.node_indices()
            .filter(|&n| dag.neighbors(n).next().is_none())
            .count()
    }

    /// CSV triplets `i,j,p_ij` for the nonzero entries.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "i,j,p_ij")?;
        let r = self.size();
        for i in 0..r {
            for j in 0..r {
                let p = self.get(i, j);
                if p != 0.0 {
                    writeln!(w, "{i},{j},{p}")?;
                }
            }
        }
        Ok(())
    }
}

/// `P_ij = #{k : x_k ∈ B_j, x_{k+1} ∈ B_i} / #{k : x_k ∈ B_j}` over
/// consecutive pairs of `series`.
pub fn ulam_matrix(series: &[f64], edges: &[f64]) -> Result<TransitionMatrix> {
    validate_edges(edges)?;
    if series.len() < 2 {
        return Err(Error::InvalidInput(
            "a series needs at least two samples".into(),
        ));
    }
    let r = edges.len() - 1;
    let bins = series
        .iter()
        .enumerate()
        .map(|(index, &value)| {
            bin_index(edges, value).ok_or(Error::OutOfPartition { index, value })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut counts = vec![0u64; r * r];
    let mut out = vec![0u64; r];
    for w in bins.windows(2) {
        counts[w[1] * r + w[0]] += 1;
        out[w[0]] += 1;
    }
    if let Some(j) = out.iter().position(|&d| d == 0) {
        return Err(Error::EmptyBin(j));
    }
    let entries = counts
        .iter()
        .enumerate()
        .map(|(k, &c)| c as f64 / out[k % r] as f64)
        .collect();
    Ok(TransitionMatrix {
        edges: edges.to_vec(),
        entries,
    })
}

/// Result of [`stationary_vector`].
#[derive(Debug, Clone, PartialEq)]
pub struct Stationary {
    pub p: Vec<f64>,
    pub iterations: usize,
    /// `P` has more than one closed class, so the fixed point is not unique.
    pub multiple_fixed_points: bool,
}

/// Fixed point of `P` by lazy power iteration `p ← (P p + p)/2` from the
/// uniform vector, stopping when `‖P p − p‖₁ < tol`.
///
/// The lazy chain has the same fixed points as `P` but no periodic classes,
/// so the iteration also converges when `P` is periodic.
pub fn stationary_vector(
    matrix: &TransitionMatrix,
    tol: f64,
    max_iter: usize,
) -> Result<Stationary> {
    let r = matrix.size();
    let mut p = vec![1.0 / r as f64; r];
    let multiple_fixed_points = matrix.closed_classes() > 1;
    for it in 0..=max_iter {
        let q = matrix.apply(&p);
        let res: f64 = q.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
        if res < tol {
            let s: f64 = p.iter().sum();
            p.iter_mut().for_each(|v| *v /= s);
            return Ok(Stationary {
                p,
                iterations: it,
                multiple_fixed_points,
            });
        }
        for (v, w) in p.iter_mut().zip(&q) {
            *v = 0.5 * (*v + w);
        }
    }
    Err(Error::NoConvergence(max_iter))
}
