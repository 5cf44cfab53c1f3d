use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::exec;

/// Points in `R^d`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
}

impl PointCloud {
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 || !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(format!(
                "{} coordinates do not form points of dimension {dim}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(
                "point cloud has non-finite coordinates".into(),
            ));
        }
        Ok(PointCloud { dim, coords })
    }

    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::InvalidInput(
                "points have differing dimensions".into(),
            ));
        }
        Self::new(dim, points.concat())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }
}

/// Delay embedding of a sampled series: point `k` is
/// `(x(t_k - lags[0]), x(t_k - lags[1]), ...)` with `t_k` running over the
/// samples every `every` steps once all lags are available. Lags are in time
/// units and must be multiples of `step`.
pub fn delay_embedding(
    series: &[f64],
    step: f64,
    lags: &[f64],
    every: usize,
) -> Result<PointCloud> {
    if lags.is_empty() || every == 0 {
        return Err(Error::InvalidInput(
            "need at least one lag and every >= 1".into(),
        ));
    }
    let offsets = lags
        .iter()
        .map(|&l| {
            let k = (l / step).round();
            if l < 0.0 || (k * step - l).abs() > 1e-9 * (1.0 + l) {
                Err(Error::invalid(
                    "lags",
                    format!("{l} is not a non-negative multiple of the step"),
                ))
            } else {
                Ok(k as usize)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let reach = *offsets.iter().max().unwrap();
    let mut coords = Vec::new();
    let mut k = reach;
    while k < series.len() {
        coords.extend(offsets.iter().map(|&o| series[k - o]));
        k += every;
    }
    PointCloud::new(lags.len(), coords)
}

/// Grassberger-Procaccia estimate with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationDimension {
    pub dimension: f64,
    pub r: Vec<f64>,
    /// Fraction of admissible pairs closer than `r`.
    pub c: Vec<f64>,
    /// Index range `fit.0..=fit.1` into `r` used for the fit.
    pub fit: (usize, usize),
    pub local_slopes: Vec<f64>,
    pub pairs: u64,
}

impl CorrelationDimension {
    /// CSV `r,C`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "r,C")?;
        for (r, c) in self.r.iter().zip(&self.c) {
            writeln!(w, "{r},{c}")?;
        }
        Ok(())
    }
}

/// Correlation sums on `n_r` log-spaced radii in `[r_min, r_max]` and the
/// least-squares slope of `log C` against `log r`.
///
/// Pairs closer than `theiler` in index are skipped. The fit uses the longest
/// run of consecutive radii over which the local slope stays within 15% of
/// its mean; radii with `C = 0` are never part of it.
pub fn correlation_dimension(
    cloud: &PointCloud,
    r_min: f64,
    r_max: f64,
    n_r: usize,
    theiler: usize,
) -> Result<CorrelationDimension> {
    if !(r_min > 0.0 && r_min < r_max) {
        return Err(Error::invalid("r_min", "need 0 < r_min < r_max"));
    }
    if n_r < 3 {
        return Err(Error::invalid("n_r", "need at least 3 radii"));
    }
    let n = cloud.len();
    if n <= theiler + 1 {
        return Err(Error::InvalidInput(
            "too few points for the Theiler window".into(),
        ));
    }
    let ratio = (r_max / r_min).ln() / (n_r - 1) as f64;
    let r: Vec<f64> = (0..n_r).map(|k| r_min * (ratio * k as f64).exp()).collect();
    let r2: Vec<f64> = r.iter().map(|x| x * x).collect();
    // bins[k] counts pairs with r[k-1] <= d < r[k]; bins[n_r] the rest
    let bins = exec::accumulate_bins(n, n_r + 1, |i, acc| {
        let p = cloud.point(i);
        for j in i + theiler + 1..n {
            let q = cloud.point(j);
            let d2: f64 = p.iter().zip(q).map(|(a, b)| (a - b) * (a - b)).sum();
            let k = r2.partition_point(|&x| x <= d2);
            acc[k] += 1;
        }
    });
    let pairs: u64 = bins.iter().sum();
    let mut cum = 0u64;
    let c: Vec<f64> = bins[..n_r]
        .iter()
        .map(|b| {
            cum += b;
            cum as f64 / pairs as f64
        })
        .collect();
    let logs: Vec<(f64, f64)> = r.iter().zip(&c).map(|(r, c)| (r.ln(), c.ln())).collect();
    let local_slopes: Vec<f64> = logs
        .windows(2)
        .map(|w| {
            if w[0].1.is_finite() {
                (w[1].1 - w[0].1) / (w[1].0 - w[0].0)
            } else {
                f64::NAN
            }
        })
        .collect();
    let fit = longest_flat_run(&local_slopes).ok_or_else(|| Error::InsufficientPairs {
        r: r[c.iter().position(|&x| x == 0.0).unwrap_or(0)],
    })?;
    let (lo, hi) = (fit.0, fit.1 + 1);
    let pts = &logs[lo..=hi];
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    Ok(CorrelationDimension {
        dimension: sxy / sxx,
        r,
        c,
        fit: (lo, hi),
        local_slopes,
        pairs,
    })
}

/// Longest run `a..=b` of finite slopes whose spread is below 15% of the run
/// mean; ties go to the smaller radii.
fn longest_flat_run(s: &[f64]) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for a in 0..s.len() {
        let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
        for (b, &v) in s.iter().enumerate().skip(a) {
            if !v.is_finite() {
                break;
            }
            lo = lo.min(v);
            hi = hi.max(v);
            sum += v;
            let mean = sum / (b - a + 1) as f64;
            if !(mean > 0.0) || hi - lo > 0.15 * mean {
                break;
            }
            if best.is_none_or(|(x, y)| b - a > y - x) {
                best = Some((a, b));
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn embedding_lags() {
        let s: Vec<f64> = (0..10).map(f64::from).collect();
        let c = delay_embedding(&s, 0.5, &[1.0, 0.0], 3).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.point(0), &[0.0, 2.0]);
        assert_eq!(c.point(2), &[6.0, 8.0]);
        assert!(delay_embedding(&s, 0.5, &[0.3], 1).is_err());
    }

    #[test]
    fn line_has_dimension_one() {
        let pts: Vec<Vec<f64>> = (0..2000)
            .map(|i| vec![(i as f64 * 0.618034) % 1.0, 0.0])
            .collect();
        let cloud = PointCloud::from_points(&pts).unwrap();
        let cd = correlation_dimension(&cloud, 1e-3, 0.1, 12, 0).unwrap();
        assert!((cd.dimension - 1.0).abs() < 0.05, "{}", cd.dimension);
        assert!(cd.c.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn empty_correlation_sum_is_reported() {
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![i as f64]).collect();
        let cloud = PointCloud::from_points(&pts).unwrap();
        assert!(matches!(
            correlation_dimension(&cloud, 1e-3, 0.5, 5, 0),
            Err(Error::InsufficientPairs { .. })
        ));
    }
}
