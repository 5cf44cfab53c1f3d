//! The density support curve: the image of the diagonal
//! `{(s, s, ..., s)}` under the modified method-of-steps flow.

use std::io::{self, Write};

use super::{bin_index, validate_edges, Density1D};
use crate::error::{Error, Result};
use crate::exec;
use crate::history::FamilyKind;
use crate::integrate::OVERFLOW_LIMIT;
use crate::system::DelaySystem;

/// Points `y(t) = (x(t), x(t-1), ..., x(t-K))` of the solutions started from
/// each `s`, with the probability carried by each point.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportCurve {
    pub t: f64,
    pub params: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl SupportCurve {
    /// Weights each point with the `rho0`-mass of its Voronoi cell in `s`.
    pub fn weighted_by(mut self, rho0: &Density1D) -> Self {
        let cdf = rho0.cdf();
        let n = self.params.len();
        let cut = |i: usize| -> f64 {
            match i {
                0 => 0.0,
                _ if i == n => cdf.total(),
                _ => cdf.eval(0.5 * (self.params[i - 1] + self.params[i])),
            }
        };
        self.weights = (0..n).map(|i| cut(i + 1) - cut(i)).collect();
        self
    }

    /// Weighted histogram of the `y0 = x(t)` coordinates on `edges`.
    pub fn projected_density(&self, edges: &[f64]) -> Result<Density1D> {
        validate_edges(edges)?;
        let mut masses = vec![0.0; edges.len() - 1];
        for (p, w) in self.points.iter().zip(&self.weights) {
            if let Some(b) = bin_index(edges, p[0]) {
                masses[b] += w;
            }
        }
        Density1D::from_masses(edges.to_vec(), &masses)
    }

    /// CSV with header `s,y0,y1`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "s,y0,y1")?;
        for (s, p) in self.params.iter().zip(&self.points) {
            writeln!(w, "{},{},{}", s, p[0], p[1])?;
        }
        Ok(())
    }
}

/// Evolves the diagonal points `(s, ..., s)` under the vector field
/// `y_n' = 0` for `t < n`, `g(y_n)` on `[n, n+1)`, `f(y_n, y_{n+1})` after,
/// with Euler steps of size `1/n_mesh`.
///
/// Component 0 coincides with the scalar integrator's `x(t)`.
pub fn track_support_curve(
    system: &DelaySystem,
    kind: FamilyKind,
    x0_samples: &[f64],
    t_end: f64,
    n_mesh: usize,
) -> Result<SupportCurve> {
    if x0_samples.is_empty() {
        return Err(Error::InvalidInput("no initial values".into()));
    }
    if x0_samples.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidInput("initial values must be sorted".into()));
    }
    if !(t_end >= 0.0) || n_mesh < 2 {
        return Err(Error::InvalidInput(
            "need t_end >= 0 and n_mesh >= 2".into(),
        ));
    }
    let steps = (t_end * n_mesh as f64).round() as usize;
    let dim = t_end.floor() as usize + 2;
    let h = 1.0 / n_mesh as f64;

    let evolve = |s: f64| -> Result<Vec<f64>> {
        let mut y = vec![s; dim];
        let mut next = y.clone();
        for k in 0..steps {
            // descending, so that y_{n+1}'s new value is available to y_n
            for n in (0..dim).rev() {
                let phase = k as isize - (n * n_mesh) as isize;
                next[n] = if phase < 0 {
                    y[n]
                } else if (phase as usize) < n_mesh {
                    y[n] + h * kind.g(y[n])
                } else {
                    y[n] + system.step_increment(y[n], y[n + 1], next[n + 1], h)
                };
            }
            std::mem::swap(&mut y, &mut next);
            if !(y[0].is_finite() && y[0].abs() <= OVERFLOW_LIMIT) {
                return Err(Error::Overflow {
                    t: (k + 1) as f64 * h,
                });
            }
        }
        Ok(y)
    };
    let points = exec::map_slice(x0_samples, |&s| evolve(s))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let n = x0_samples.len() as f64;
    Ok(SupportCurve {
        t: t_end,
        params: x0_samples.to_vec(),
        points,
        weights: vec![1.0 / n; x0_samples.len()],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::OdeGenerator;
    use crate::integrate::scalar_solution_map;
    use approx::assert_abs_diff_eq;

    #[test]
    fn starts_on_the_diagonal() {
        let mg = DelaySystem::mackey_glass(2.0, 4.0, 10.0).unwrap();
        let c = track_support_curve(&mg, FamilyKind::Constant, &[0.1, 0.5, 0.9], 0.0, 64).unwrap();
        for (s, p) in c.params.iter().zip(&c.points) {
            assert!(p.iter().all(|v| v == s));
        }
    }

    #[test]
    fn linear_curve_is_straight() {
        let alpha = 0.7;
        let lin = DelaySystem::linear(alpha).unwrap();
        let xs: Vec<f64> = (0..11).map(|i| i as f64 / 10.0).collect();
        let t = 1.5;
        let c = track_support_curve(&lin, FamilyKind::Constant, &xs, t, 1000).unwrap();
        for (s, p) in xs.iter().zip(&c.points) {
            assert_abs_diff_eq!(p[0], s + alpha * (t - 1.0) * s, epsilon = 1e-12);
            assert_eq!(p[1], *s);
        }
    }

    #[test]
    fn quadratic_curve_is_a_parabola() {
        let q = DelaySystem::quadratic();
        let xs: Vec<f64> = (0..11).map(|i| i as f64 / 5.0 - 1.0).collect();
        let t = 1.75;
        let c = track_support_curve(&q, FamilyKind::Constant, &xs, t, 1000).unwrap();
        for (s, p) in xs.iter().zip(&c.points) {
            assert_abs_diff_eq!(p[0], s - (t - 1.0) * s * s, epsilon = 1e-12);
        }
    }

    #[test]
    fn first_component_is_the_scalar_solution() {
        let systems = [
            DelaySystem::mackey_glass(2.0, 4.0, 10.0).unwrap(),
            DelaySystem::piecewise_constant(3.25, 20.5, 1.0, 2.0).unwrap(),
        ];
        let kinds = [
            FamilyKind::Constant,
            FamilyKind::Ode(OdeGenerator::Affine {
                offset: 0.3,
                rate: -0.5,
            }),
        ];
        let xs = [0.35, 0.8, 1.25];
        for sys in &systems {
            for kind in kinds {
                let c = track_support_curve(sys, kind, &xs, 3.5, 64).unwrap();
                for (s, p) in xs.iter().zip(&c.points) {
                    let x = scalar_solution_map(sys, kind, *s, 3.5, 64).unwrap();
                    let lag = scalar_solution_map(sys, kind, *s, 2.5, 64).unwrap();
                    assert_eq!(p[0], x);
                    assert_eq!(p[1], lag);
                }
            }
        }
    }

    #[test]
    fn voronoi_weights_sum_to_mass() {
        let lin = DelaySystem::linear(1.0).unwrap();
        let xs: Vec<f64> = (0..20).map(|i| (i as f64 + 0.5) / 20.0).collect();
        let rho0 = Density1D::uniform(0.0, 1.0, 10).unwrap();
        let c = track_support_curve(&lin, FamilyKind::Constant, &xs, 1.0, 16)
            .unwrap()
            .weighted_by(&rho0);
        assert_abs_diff_eq!(c.weights.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(c.weights[3], 0.05, epsilon = 1e-12);
    }
}
