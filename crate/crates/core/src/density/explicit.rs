//! Closed-form Perron-Frobenius operators.

use std::f64::consts::PI;

use super::{uniform_edges, validate_edges, Density1D};
use crate::error::{Error, Result};

/// `Pf(x)` for the logistic map `x ↦ 4x(1-x)` and a density function `f`.
pub fn quadratic_map_pf_at(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    if !(0.0..1.0).contains(&x) {
        return 0.0;
    }
    let r = (1.0 - x).sqrt();
    (f(0.5 - 0.5 * r) + f(0.5 + 0.5 * r)) / (4.0 * r)
}

/// `f*(x) = 1 / (π √(x(1-x)))`, the invariant density of the logistic map.
pub fn quadratic_map_invariant_density(x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    1.0 / (PI * (x * (1.0 - x)).sqrt())
}

/// One application of the logistic-map transfer operator, evaluated at bin
/// midpoints and renormalized.
pub fn quadratic_map_pf(rho: &Density1D) -> Result<Density1D> {
    const SLACK: f64 = 1e-12;
    for i in 0..rho.bins() {
        let (a, b) = (rho.edges()[i], rho.edges()[i + 1]);
        if rho.density()[i] > 0.0 && (a < -SLACK || b > 1.0 + SLACK) {
            return Err(Error::Domain(format!(
                "density has mass on [{a}, {b}], outside [0, 1]"
            )));
        }
    }
    let out = Density1D::from_fn(rho.edges().to_vec(), |x| {
        quadratic_map_pf_at(|y| rho.value_at(y), x)
    })?;
    if out.mass() <= 0.0 {
        return Err(Error::Domain("image density vanishes on the grid".into()));
    }
    Ok(out.normalized())
}

fn linear_scale(alpha: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!("t = {t} must be >= 0")));
    }
    if t > 2.0 {
        return Err(Error::NotImplementedWindow { t });
    }
    let beta = if t <= 1.0 {
        1.0
    } else {
        1.0 + alpha * (t - 1.0)
    };
    if beta.abs() < 1e-12 {
        return Err(Error::SingularTime { t });
    }
    Ok(beta)
}

/// Density of `x(t)` for `x'(t) = α x(t-1)` with constant initial functions:
/// `ρ(x,t) = ρ0(x/β)/|β|`, `β(t) = 1 + α(t-1)` on `[1, 2]`.
///
/// The result lives on the image grid `β · edges`, where it is exact.
pub fn explicit_pf_linear(rho0: &Density1D, alpha: f64, t: f64) -> Result<Density1D> {
    let beta = linear_scale(alpha, t)?;
    let mut edges: Vec<f64> = rho0.edges().iter().map(|e| beta * e).collect();
    let mut density: Vec<f64> = rho0.density().iter().map(|d| d / beta.abs()).collect();
    if beta < 0.0 {
        edges.reverse();
        density.reverse();
    }
    Density1D::new(edges, density)
}

/// [`explicit_pf_linear`] averaged over the bins of `edges`.
pub fn explicit_pf_linear_on(
    rho0: &Density1D,
    alpha: f64,
    t: f64,
    edges: &[f64],
) -> Result<Density1D> {
    explicit_pf_linear(rho0, alpha, t)?.rebin(edges)
}

fn quadratic_coefficient(t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidInput(format!("t = {t} must be >= 0")));
    }
    if t > 2.0 {
        return Err(Error::NotImplementedWindow { t });
    }
    Ok((t - 1.0).max(0.0))
}

/// `P(S_t(X) ≤ y)` for `S_t(x) = x - c x²`, `X ~ ρ0`.
fn quadratic_image_cdf(cdf: &super::Cdf<'_>, c: f64, y: f64) -> f64 {
    if c == 0.0 {
        return cdf.eval(y);
    }
    let disc = 1.0 - 4.0 * c * y;
    if disc < 0.0 {
        return cdf.total();
    }
    let sq = disc.sqrt();
    let r_lo = 2.0 * y / (1.0 + sq);
    let r_hi = (1.0 + sq) / (2.0 * c);
    cdf.eval(r_lo) + cdf.total() - cdf.eval(r_hi)
}

/// Density of `x(t)` for `x'(t) = -x(t-1)²` with constant initial functions,
/// `1 ≤ t ≤ 2`, averaged over the bins of `edges`.
///
/// Both pre-image branches of `S_t(x) = x - (t-1)x²` contribute; the density
/// vanishes above `1/(4(t-1))`. Bin averages are CDF differences, so the
/// integrable singularity at the fold is handled exactly.
pub fn explicit_pf_quadratic_on(rho0: &Density1D, t: f64, edges: &[f64]) -> Result<Density1D> {
    let c = quadratic_coefficient(t)?;
    validate_edges(edges)?;
    let cdf = rho0.cdf();
    let g: Vec<f64> = edges
        .iter()
        .map(|&y| quadratic_image_cdf(&cdf, c, y))
        .collect();
    let masses: Vec<f64> = g.windows(2).map(|w| (w[1] - w[0]).max(0.0)).collect();
    Density1D::from_masses(edges.to_vec(), &masses)
}

/// [`explicit_pf_quadratic_on`] over the image of `rho0`'s support, with the
/// same number of bins as `rho0`.
pub fn explicit_pf_quadratic(rho0: &Density1D, t: f64) -> Result<Density1D> {
    let c = quadratic_coefficient(t)?;
    let (lo, hi) = rho0
        .support()
        .ok_or_else(|| Error::InvalidInput("initial density has no mass".into()))?;
    let s = |x: f64| x - c * x * x;
    let top = if c > 0.0 && (lo..=hi).contains(&(0.5 / c)) {
        0.25 / c
    } else {
        s(lo).max(s(hi))
    };
    let bottom = s(lo).min(s(hi));
    if !(top > bottom) {
        return Err(Error::SingularTime { t });
    }
    explicit_pf_quadratic_on(rho0, t, &uniform_edges(bottom, top, rho0.bins()))
}
