//! Monte Carlo ensembles of solutions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{bin_index, validate_edges, Density1D};
use crate::error::{Error, Result};
use crate::exec;
use crate::history::FamilyKind;
use crate::integrate::scalar_solution_map;
use crate::system::DelaySystem;

/// Ensemble size so that a bin of probability `p` is estimated with
/// relative standard deviation at most `delta/2`: `⌈4(1-p)/(δ²p)⌉`.
pub fn sampling_requirement(p: f64, delta: f64) -> Result<u64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("p = {p} must lie in (0, 1)")));
    }
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("delta = {delta} must be > 0")));
    }
    let n = 4.0 * (1.0 - p) / (delta * delta * p);
    // guard against 3960000.0000000005 style round-up
    let r = n.round();
    Ok(if (n - r).abs() <= 1e-9 * r.max(1.0) {
        r
    } else {
        n.ceil()
    } as u64)
}

/// Histogram of an ensemble at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleHistogram {
    /// Counts normalized by the number of retained samples.
    pub density: Density1D,
    pub counts: Vec<u64>,
    /// Samples that stayed finite.
    pub retained: usize,
    /// Samples dropped because their solution overflowed.
    pub dropped: usize,
    /// Retained samples that fell outside the grid.
    pub outside: usize,
}

/// Uniform draw number `index` of the stream identified by `seed`.
pub(crate) fn uniform_draw(seed: u64, index: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng.random::<f64>()
}

/// Samples `n_samples` initial values from `rho0` by inverse CDF, evolves
/// each to time `t` and histograms `x(t)` on `edges`.
///
/// Draw `i` depends only on `(seed, i)`, so results do not depend on how the
/// work is split across threads.
#[allow(clippy::too_many_arguments)]
pub fn sample_ensemble(
    system: &DelaySystem,
    rho0: &Density1D,
    kind: FamilyKind,
    t: f64,
    n_samples: usize,
    seed: u64,
    edges: &[f64],
    n_mesh: usize,
) -> Result<EnsembleHistogram> {
    if n_samples == 0 {
        return Err(Error::InvalidInput("n_samples must be >= 1".into()));
    }
    validate_edges(edges)?;
    let bins = edges.len() - 1;
    let cdf = rho0.cdf();
    if cdf.total() <= 0.0 {
        return Err(Error::InvalidInput("initial density has no mass".into()));
    }
    // first pass surfaces input errors before the parallel sweep
    scalar_solution_map(system, kind, cdf.inverse(0.5), 0.0, n_mesh)?;

    // slot `bins` = outside the grid, `bins + 1` = overflowed
    let counts = exec::count_bins(n_samples, bins + 2, |i| {
        let x0 = cdf.inverse(uniform_draw(seed, i as u64));
        Some(match scalar_solution_map(system, kind, x0, t, n_mesh) {
            Ok(x) => bin_index(edges, x).unwrap_or(bins),
            Err(_) => bins + 1,
        })
    });
    let dropped = counts[bins + 1] as usize;
    if dropped * 100 > n_samples {
        return Err(Error::TooManyDropped {
            dropped,
            total: n_samples,
        });
    }
    let retained = n_samples - dropped;
    let in_grid = counts[..bins].to_vec();
    let density = Density1D::from_counts(edges.to_vec(), &in_grid, retained as u64)?;
    Ok(EnsembleHistogram {
        density,
        counts: in_grid,
        retained,
        dropped,
        outside: counts[bins] as usize,
    })
}
