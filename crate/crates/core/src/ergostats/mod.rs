//! Lyapunov spectra, Kaplan-Yorke dimension and correlation dimension.

mod corrdim;

pub use corrdim::{correlation_dimension, delay_embedding, CorrelationDimension, PointCloud};

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec;
use crate::history::HistoryVector;
use crate::integrate::{time_one_map_into, SolutionPath};
use crate::system::DelaySystem;
use crate::transient::SaddleRun;

/// Largest number of exponents computed.
pub const MAX_EXPONENTS: usize = 8;
/// Relative finite-difference step.
const FD_REL: f64 = 1e-6;

/// A trajectory of the time-one map along which tangent vectors are carried.
pub trait BaseRun {
    /// States at consecutive integer times.
    fn base_states(&self) -> Vec<HistoryVector>;
}

impl BaseRun for SaddleRun {
    fn base_states(&self) -> Vec<HistoryVector> {
        self.states.clone()
    }
}

impl BaseRun for SolutionPath {
    /// Histories ending at `t = 1, 2, ...`; the mesh is `1 / step`.
    fn base_states(&self) -> Vec<HistoryVector> {
        let n = (1.0 / self.step).round() as usize;
        (1..)
            .map(|m| m * n)
            .map_while(|k| self.history_at(k, n))
            .collect()
    }
}

impl BaseRun for [HistoryVector] {
    fn base_states(&self) -> Vec<HistoryVector> {
        self.to_vec()
    }
}

/// Lyapunov exponents in bits per unit time, descending.
#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSpectrum {
    pub exponents: Vec<f64>,
    pub renorm_every: usize,
    /// Map steps averaged over.
    pub steps: usize,
}

impl LyapunovSpectrum {
    /// Number of exponents above `threshold`.
    pub fn count_above(&self, threshold: f64) -> usize {
        self.exponents.iter().filter(|&&l| l > threshold).count()
    }

    /// CSV `index,exponent_bits_per_time`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "index,exponent_bits_per_time")?;
        for (i, l) in self.exponents.iter().enumerate() {
            writeln!(w, "{},{l}", i + 1)?;
        }
        Ok(())
    }
}

/// Modified Gram-Schmidt in place; returns the norms removed from each vector.
pub fn gram_schmidt(vectors: &mut [Vec<f64>]) -> Vec<f64> {
    let mut norms = Vec::with_capacity(vectors.len());
    for j in 0..vectors.len() {
        let (done, rest) = vectors.split_at_mut(j);
        let v = &mut rest[0];
        for q in done.iter() {
            let dot: f64 = q.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(q).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 && norm.is_finite() {
            v.iter_mut().for_each(|x| *x /= norm);
        }
        norms.push(norm);
    }
    norms
}

/// Directional derivative of the time-one map at `x` along `v` by central
/// differences with step `1e-6 ‖x‖_sup` (scaled by `|v|`).
fn tangent_image(system: &DelaySystem, x: &[f64], v: &[f64]) -> Result<Vec<f64>> {
    let scale = x.iter().fold(0.0f64, |m, a| m.max(a.abs())).max(1.0e-3);
    let vnorm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if !(vnorm > 0.0) {
        return Ok(vec![0.0; v.len()]);
    }
    let delta = FD_REL * scale / vnorm;
    let plus: Vec<f64> = x.iter().zip(v).map(|(a, b)| a + delta * b).collect();
    let minus: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - delta * b).collect();
    let mut sp = vec![0.0; x.len()];
    let mut sm = vec![0.0; x.len()];
    let overflow = |_| Error::Overflow { t: f64::NAN };
    time_one_map_into(system, &plus, &mut sp).map_err(overflow)?;
    time_one_map_into(system, &minus, &mut sm).map_err(overflow)?;
    Ok(sp
        .iter()
        .zip(&sm)
        .map(|(a, b)| (a - b) / (2.0 * delta))
        .collect())
}

/// Benettin estimate of the `k` leading exponents along `base`.
///
/// Tangent vectors start as seeded Gaussian directions, are pushed through
/// finite-difference linearizations of the time-one map at each base state,
/// and are re-orthonormalized every `renorm_every` steps.
pub fn lyapunov_spectrum<B: BaseRun + ?Sized>(
    system: &DelaySystem,
    base: &B,
    k: usize,
    renorm_every: usize,
    seed: u64,
) -> Result<LyapunovSpectrum> {
    if k == 0 || k > MAX_EXPONENTS {
        return Err(Error::invalid(
            "k",
            format!("must be in 1..={MAX_EXPONENTS}"),
        ));
    }
    if renorm_every == 0 {
        return Err(Error::invalid("renorm_every", "must be positive"));
    }
    let states = base.base_states();
    let steps = states.len().saturating_sub(1);
    if steps < 100 * renorm_every {
        return Err(Error::InvalidInput(format!(
            "base run has {steps} map steps, need at least {}",
            100 * renorm_every
        )));
    }
    let dim = states[0].values().len();
    if k > dim {
        return Err(Error::invalid("k", "exceeds the state dimension"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut vs: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            (0..dim)
                .map(|_| rng.sample::<f64, _>(StandardNormal))
                .collect()
        })
        .collect();
    gram_schmidt(&mut vs);
    let mut sums = vec![0.0; k];
    let mut counted = 0;
    for (n, x) in states[..steps].iter().enumerate() {
        let images = exec::map_slice(&vs, |v| tangent_image(system, x.values(), v));
        vs = images.into_iter().collect::<Result<_>>()?;
        if (n + 1) % renorm_every == 0 {
            let norms = gram_schmidt(&mut vs);
            for (j, r) in norms.iter().enumerate() {
                if !(*r > 1e-300 && r.is_finite()) {
                    return Err(Error::DegenerateTangent { index: j, step: n });
                }
                sums[j] += r.log2();
            }
            counted = n + 1;
        }
    }
    let mut exponents: Vec<f64> = sums.iter().map(|s| s / counted as f64).collect();
    exponents.sort_by(|a, b| b.total_cmp(a));
    Ok(LyapunovSpectrum {
        exponents,
        renorm_every,
        steps: counted,
    })
}

/// Lyapunov (Kaplan-Yorke) dimension `j + (λ_1 + … + λ_j) / |λ_{j+1}|`, with
/// `j` the largest index whose prefix sum is positive.
pub fn kaplan_yorke(exponents: &[f64]) -> Result<f64> {
    if exponents.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::InvalidInput(
            "spectrum must be sorted descending".into(),
        ));
    }
    let mut sum = 0.0;
    let mut best = None;
    for (i, &l) in exponents.iter().enumerate() {
        sum += l;
        if sum > 0.0 {
            best = Some((i + 1, sum));
        }
    }
    let (j, s) = best.ok_or_else(|| Error::Undefined("no positive prefix sum".into()))?;
    match exponents.get(j) {
        Some(&next) if next < 0.0 => Ok(j as f64 + s / next.abs()),
        _ => Err(Error::Undefined(
            "no negative exponent follows the positive prefix".into(),
        )),
    }
}
