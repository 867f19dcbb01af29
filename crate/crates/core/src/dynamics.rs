//! Particle transport, Langevin mutation and importance resampling.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::VelocityField;
use crate::points::Points;
use crate::rng::Streams;
use crate::targets::Energy;

/// Particles with the log of their current density, up to one shared constant.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleEnsemble {
    points: Points,
    log_density: Vec<f64>,
}

impl ParticleEnsemble {
    pub fn new(points: Points, log_density: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Shape("ensemble needs at least one particle".into()));
        }
        if points.len() != log_density.len() {
            return Err(Error::Shape(format!(
                "{} points but {} log-densities",
                points.len(),
                log_density.len()
            )));
        }
        Ok(Self {
            points,
            log_density,
        })
    }

    /// Ensemble with `log_density = -energy(x)`.
    pub fn from_energy(points: Points, energy: &dyn Energy) -> Result<Self> {
        let ld = points.rows().map(|x| -energy.value(x)).collect();
        Self::new(points, ld)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.dim()
    }

    pub fn points(&self) -> &Points {
        &self.points
    }

    pub fn log_density(&self) -> &[f64] {
        &self.log_density
    }

    pub fn into_points(self) -> Points {
        self.points
    }

    /// Declares the ensemble distributed as `e^{-energy}` from here on.
    pub fn reset_log_density(&mut self, energy: &dyn Energy) {
        let pts = &self.points;
        self.log_density
            .par_iter_mut()
            .zip(pts.as_slice().par_chunks(pts.dim()))
            .for_each(|(ld, x)| *ld = -energy.value(x));
    }
}

/// Axis-aligned box; trajectories leaving it are frozen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SafetyBox {
    pub lo: f64,
    pub hi: f64,
}

impl SafetyBox {
    /// `[lo, hi]` scaled by `factor` about its centre.
    pub fn around(lo: f64, hi: f64, factor: f64) -> Self {
        let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo) * factor);
        Self { lo: c - h, hi: c + h }
    }

    fn contains(&self, x: &[f64]) -> bool {
        x.iter().all(|v| v.is_finite() && (self.lo..=self.hi).contains(v))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct OdeReport {
    /// Particles whose trajectory left the safety box and were frozen.
    pub frozen: usize,
}

/// RK4 transport over `[t0, t1]` under a frozen field.
///
/// The log-density follows `d/ds log q = -∇·v` integrated with the same stages.
pub fn ode_solve(
    ensemble: &mut ParticleEnsemble,
    field: &dyn VelocityField,
    t0: f64,
    t1: f64,
    substeps: usize,
    safety: Option<SafetyBox>,
) -> Result<OdeReport> {
    if !(t0 < t1) {
        return Err(Error::InvalidArgument(format!("ode_solve needs t0 < t1, got {t0} >= {t1}")));
    }
    if substeps == 0 {
        return Err(Error::InvalidArgument("ode.substeps must be >= 1".into()));
    }
    if field.dim() != ensemble.dim() {
        return Err(Error::Shape(format!("{}-d field for a {}-d ensemble", field.dim(), ensemble.dim())));
    }
    let d = ensemble.dim();
    let h = (t1 - t0) / substeps as f64;
    let ParticleEnsemble {
        points,
        log_density,
    } = ensemble;
    let frozen = points
        .as_mut_slice()
        .par_chunks_mut(d)
        .zip(log_density.par_iter_mut())
        .map(|(x, ld)| {
            let mut k = [vec![0.0; d], vec![0.0; d], vec![0.0; d], vec![0.0; d]];
            let mut y = vec![0.0; d];
            for _ in 0..substeps {
                let g1 = field.eval(x, &mut k[0]);
                for j in 0..d {
                    y[j] = x[j] + 0.5 * h * k[0][j];
                }
                let g2 = field.eval(&y, &mut k[1]);
                for j in 0..d {
                    y[j] = x[j] + 0.5 * h * k[1][j];
                }
                let g3 = field.eval(&y, &mut k[2]);
                for j in 0..d {
                    y[j] = x[j] + h * k[2][j];
                }
                let g4 = field.eval(&y, &mut k[3]);
                for j in 0..d {
                    y[j] = x[j] + h / 6.0 * (k[0][j] + 2.0 * k[1][j] + 2.0 * k[2][j] + k[3][j]);
                }
                if let Some(b) = &safety {
                    if !b.contains(&y) {
                        return 1usize;
                    }
                }
                x.copy_from_slice(&y);
                *ld -= h / 6.0 * (g1 + 2.0 * g2 + 2.0 * g3 + g4);
            }
            0
        })
        .sum();
    if ensemble.points.as_slice().iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite particle after ODE step".into()));
    }
    Ok(OdeReport { frozen })
}

/// One unadjusted Langevin update `x ← x - h ∇f(x) + sqrt(2h) ξ`.
#[inline]
pub fn langevin_update(x: &mut [f64], grad: &[f64], h: f64, noise: &[f64]) {
    let s = (2.0 * h).sqrt();
    for ((xi, g), z) in x.iter_mut().zip(grad).zip(noise) {
        *xi += -h * g + s * z;
    }
}

/// `steps` Langevin updates targeting `e^{-energy}`; log-densities are left untouched.
///
/// Particle `i` draws its noise from `streams.particle(i)`.
pub fn langevin_step(
    ensemble: &mut ParticleEnsemble,
    energy: &dyn Energy,
    h: f64,
    steps: usize,
    streams: &Streams,
) -> Result<()> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument(format!("Langevin step size {h} must be positive")));
    }
    if steps == 0 {
        return Ok(());
    }
    let d = ensemble.dim();
    let bad = ensemble
        .points
        .as_mut_slice()
        .par_chunks_mut(d)
        .enumerate()
        .map(|(i, x)| {
            let mut rng = streams.particle(i as u64);
            let mut grad = vec![0.0; d];
            let mut noise = vec![0.0; d];
            for _ in 0..steps {
                energy.gradient(x, &mut grad);
                if grad.iter().any(|g| !g.is_finite()) {
                    return Some(i);
                }
                noise.iter_mut().for_each(|z| *z = rng.sample(StandardNormal));
                langevin_update(x, &grad, h, &noise);
            }
            None
        })
        .min();
    match bad.flatten() {
        Some(i) => Err(Error::Numerical(format!("non-finite energy gradient at particle {i} during Langevin steps"))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum ResampleScheme {
    #[default]
    Multinomial,
    Systematic,
}

impl std::str::FromStr for ResampleScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multinomial" => Ok(Self::Multinomial),
            "systematic" => Ok(Self::Systematic),
            other => Err(Error::Config(format!("unknown resampling scheme `{other}`"))),
        }
    }
}

impl std::fmt::Display for ResampleScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::Multinomial => "multinomial",
            Self::Systematic => "systematic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResampleReport {
    pub ess: f64,
    pub resampled: bool,
}

/// `(sum w)^2 / sum w^2` from log-weights.
pub fn effective_sample_size(log_weights: &[f64]) -> f64 {
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return 0.0;
    }
    let (s, s2) = log_weights.iter().fold((0.0, 0.0), |(s, s2), lw| {
        let w = (lw - max).exp();
        (s + w, s2 + w * w)
    });
    s * s / s2
}

/// `log p(x) - log q(x)` per particle.
pub fn log_weights<F>(ensemble: &ParticleEnsemble, log_target: &F) -> Vec<f64>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let pts = &ensemble.points;
    pts.as_slice()
        .par_chunks(pts.dim())
        .zip(ensemble.log_density.par_iter())
        .map(|(x, lq)| log_target(x) - lq)
        .collect()
}

/// Draws `weights.len()` indices proportional to `exp(log_weights)`.
pub fn resample_indices<R: Rng + ?Sized>(log_weights: &[f64], scheme: ResampleScheme, rng: &mut R) -> Result<Vec<usize>> {
    let max = log_weights
        .iter()
        .copied()
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() || log_weights.iter().any(|v| v.is_nan()) {
        return Err(Error::Numerical(format!(
            "degenerate importance weights (max log-weight {max}, NaN present: {})",
            log_weights.iter().any(|v| v.is_nan())
        )));
    }
    let mut cdf = Vec::with_capacity(log_weights.len());
    let mut acc = 0.0;
    for lw in log_weights {
        acc += (lw - max).exp();
        cdf.push(acc);
    }
    let total = acc;
    let n = log_weights.len();
    let pick = |u: f64| -> usize {
        let target = u * total;
        cdf.partition_point(|&c| c <= target).min(n - 1)
    };
    Ok(match scheme {
        ResampleScheme::Multinomial => (0..n).map(|_| pick(rng.random::<f64>())).collect(),
        ResampleScheme::Systematic => {
            let u0: f64 = rng.random();
            (0..n).map(|i| pick((i as f64 + u0) / n as f64)).collect()
        }
    })
}

/// Importance resampling towards `exp(log_target)`.
///
/// Skipped when `ESS / N > ess_floor`; with `ess_floor = 1` it always runs.
/// Survivors get `log_density = log_target(x)`.
pub fn resampling_step<F, R>(
    ensemble: &mut ParticleEnsemble,
    log_target: &F,
    scheme: ResampleScheme,
    ess_floor: f64,
    rng: &mut R,
) -> Result<ResampleReport>
where
    F: Fn(&[f64]) -> f64 + Sync,
    R: Rng + ?Sized,
{
    let lw = log_weights(ensemble, log_target);
    let ess = effective_sample_size(&lw);
    if ess / ensemble.len() as f64 > ess_floor {
        return Ok(ResampleReport {
            ess,
            resampled: false,
        });
    }
    let idx = resample_indices(&lw, scheme, rng)?;
    ensemble.points = ensemble.points.select(&idx);
    let lt: Vec<f64> = idx.iter().map(|&i| lw[i] + ensemble.log_density[i]).collect();
    ensemble.log_density = lt;
    Ok(ResampleReport {
        ess,
        resampled: true,
    })
}
