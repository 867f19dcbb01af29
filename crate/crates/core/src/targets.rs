//! Energies, the linear annealing path and exact reference samplers.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::points::Points;

/// Energy `f` of an unnormalized density `e^{-f}`.
pub trait Energy: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64], grad: &mut [f64]);

    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.gradient(x, grad);
        self.value(x)
    }
}

/// Isotropic Gaussian energy `||x - mean||^2 / (2 std^2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    mean: Vec<f64>,
    std: f64,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, std: f64) -> Result<Self> {
        if !(std > 0.0 && std.is_finite()) {
            return Err(Error::InvalidArgument(format!("stddev {std} must be positive")));
        }
        if mean.is_empty() {
            return Err(Error::InvalidArgument("Gaussian needs dim >= 1".into()));
        }
        Ok(Self { mean, std })
    }

    pub fn standard(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: 1.0,
        }
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn std(&self) -> f64 {
        self.std
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Points {
        let d = self.mean.len();
        let mut data = Vec::with_capacity(count * d);
        for _ in 0..count {
            for m in &self.mean {
                data.push(m + self.std * rng.sample::<f64, _>(StandardNormal));
            }
        }
        Points::new(d, data).expect("dim >= 1")
    }
}

impl Energy for Gaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let s2 = self.std * self.std;
        x.iter()
            .zip(&self.mean)
            .map(|(a, m)| (a - m) * (a - m))
            .sum::<f64>()
            / (2.0 * s2)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        let s2 = self.std * self.std;
        for ((g, a), m) in grad.iter_mut().zip(x).zip(&self.mean) {
            *g = (a - m) / s2;
        }
    }
}

/// `-log sum_j w_j N(x; mu_j, variance I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    means: Vec<Vec<f64>>,
    variance: f64,
    weights: Vec<f64>,
    log_weights: Vec<f64>,
    log_norm: f64,
}

impl GaussianMixture {
    pub fn new(means: Vec<Vec<f64>>, variance: f64, weights: Vec<f64>) -> Result<Self> {
        if means.is_empty() {
            return Err(Error::InvalidArgument("empty mixture".into()));
        }
        if means.len() != weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} means but {} weights",
                means.len(),
                weights.len()
            )));
        }
        if !(variance > 0.0 && variance.is_finite()) {
            return Err(Error::InvalidArgument(format!("variance {variance} must be positive")));
        }
        let d = means[0].len();
        if d == 0 || means.iter().any(|m| m.len() != d) {
            return Err(Error::InvalidArgument("mixture means must share dim >= 1".into()));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0)) || !(total > 0.0) {
            return Err(Error::InvalidArgument("mixture weights must be >= 0 with positive sum".into()));
        }
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let log_weights = weights.iter().map(|w| w.ln()).collect();
        let log_norm = 0.5 * d as f64 * (2.0 * std::f64::consts::PI * variance).ln();
        Ok(Self {
            means,
            variance,
            weights,
            log_weights,
            log_norm,
        })
    }

    /// Equal weights.
    pub fn uniform(means: Vec<Vec<f64>>, variance: f64) -> Result<Self> {
        let k = means.len();
        Self::new(means, variance, vec![1.0; k])
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    fn log_components(&self, x: &[f64], out: &mut Vec<f64>) -> f64 {
        out.clear();
        let mut max = f64::NEG_INFINITY;
        for (m, lw) in self.means.iter().zip(&self.log_weights) {
            let sq: f64 = x.iter().zip(m).map(|(a, b)| (a - b) * (a - b)).sum();
            let l = lw - sq / (2.0 * self.variance);
            max = max.max(l);
            out.push(l);
        }
        max
    }

    pub fn sample<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Points {
        let d = self.means[0].len();
        let std = self.variance.sqrt();
        let mut data = Vec::with_capacity(count * d);
        for _ in 0..count {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let mut pick = self.weights.len() - 1;
            for (j, w) in self.weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    pick = j;
                    break;
                }
            }
            for m in &self.means[pick] {
                data.push(m + std * rng.sample::<f64, _>(StandardNormal));
            }
        }
        Points::new(d, data).expect("dim >= 1")
    }
}

impl Energy for GaussianMixture {
    fn dim(&self) -> usize {
        self.means[0].len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut logs = Vec::with_capacity(self.means.len());
        let max = self.log_components(x, &mut logs);
        let s: f64 = logs.iter().map(|l| (l - max).exp()).sum();
        -(max + s.ln()) + self.log_norm
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.value_and_gradient(x, grad);
    }

    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        let mut logs = Vec::with_capacity(self.means.len());
        let max = self.log_components(x, &mut logs);
        let mut s = 0.0;
        for l in logs.iter_mut() {
            *l = (*l - max).exp();
            s += *l;
        }
        grad.iter_mut().for_each(|g| *g = 0.0);
        for (r, m) in logs.iter().zip(&self.means) {
            let r = r / s;
            for ((g, a), b) in grad.iter_mut().zip(x).zip(m) {
                *g += r * (a - b) / self.variance;
            }
        }
        -(max + s.ln()) + self.log_norm
    }
}

/// `m` double wells on coordinate pairs `(2i, 2i + 1)` (0-based) and standard
/// Gaussian energies on the remaining `d - 2m` coordinates:
/// `sum_i (x_{2i}^4 - 6 x_{2i}^2 - x_{2i}/2 + x_{2i+1}^2/2) + sum_{j >= 2m} x_j^2/2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ManyWell {
    wells: usize,
    dim: usize,
}

impl ManyWell {
    pub fn new(wells: usize, dim: usize) -> Result<Self> {
        if dim == 0 || 2 * wells > dim {
            return Err(Error::InvalidArgument(format!(
                "many-well needs 2m <= d and d >= 1, got m={wells}, d={dim}"
            )));
        }
        Ok(Self { wells, dim })
    }

    pub fn wells(&self) -> usize {
        self.wells
    }

    /// Energy of the one-dimensional quartic marginal.
    pub fn quartic(x: f64) -> f64 {
        let x2 = x * x;
        x2 * x2 - 6.0 * x2 - 0.5 * x
    }

    fn quartic_grad(x: f64) -> f64 {
        4.0 * x * x * x - 12.0 * x - 0.5
    }
}

impl Energy for ManyWell {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> f64 {
        let mut f = 0.0;
        for (j, &xj) in x.iter().enumerate() {
            f += if j < 2 * self.wells && j % 2 == 0 {
                Self::quartic(xj)
            } else {
                0.5 * xj * xj
            };
        }
        f
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        for (j, (&xj, g)) in x.iter().zip(grad.iter_mut()).enumerate() {
            *g = if j < 2 * self.wells && j % 2 == 0 {
                Self::quartic_grad(xj)
            } else {
                xj
            };
        }
    }
}

/// Values of the annealing path at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub value: f64,
    /// `∂_t f_t = f_1 - f_0`.
    pub dt: f64,
    pub grad: Vec<f64>,
}

/// `f_t = t f_1 + (1 - t) f_0`.
#[derive(Clone)]
pub struct EnergyPath {
    latent: Arc<dyn Energy>,
    target: Arc<dyn Energy>,
}

impl std::fmt::Debug for EnergyPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EnergyPath").field("dim", &self.dim()).finish()
    }
}

impl EnergyPath {
    pub fn new(latent: Arc<dyn Energy>, target: Arc<dyn Energy>) -> Result<Self> {
        if latent.dim() != target.dim() {
            return Err(Error::Shape(format!(
                "latent dim {} != target dim {}",
                latent.dim(),
                target.dim()
            )));
        }
        Ok(Self { latent, target })
    }

    pub fn dim(&self) -> usize {
        self.latent.dim()
    }

    pub fn latent(&self) -> &Arc<dyn Energy> {
        &self.latent
    }

    pub fn target(&self) -> &Arc<dyn Energy> {
        &self.target
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> Result<PathPoint> {
        check_time(t)?;
        let mut grad = vec![0.0; self.dim()];
        let (value, dt) = self.eval_into(t, x, &mut grad);
        Ok(PathPoint { value, dt, grad })
    }

    /// Returns `(f_t, ∂_t f_t)` and writes `∇f_t` into `grad`; `t` is not checked.
    pub fn eval_into(&self, t: f64, x: &[f64], grad: &mut [f64]) -> (f64, f64) {
        let d = self.dim();
        let mut g0 = vec![0.0; d];
        let f0 = self.latent.value_and_gradient(x, &mut g0);
        let f1 = self.target.value_and_gradient(x, grad);
        for (g, a) in grad.iter_mut().zip(&g0) {
            *g = t * *g + (1.0 - t) * a;
        }
        (t * f1 + (1.0 - t) * f0, f1 - f0)
    }

    /// `f_t(x)` only.
    pub fn value(&self, t: f64, x: &[f64]) -> f64 {
        t * self.target.value(x) + (1.0 - t) * self.latent.value(x)
    }

    /// Energy `f_t` as a standalone [`Energy`].
    pub fn at(&self, t: f64) -> Result<Annealed> {
        check_time(t)?;
        Ok(Annealed {
            path: self.clone(),
            t,
        })
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("time {t} outside [0, 1]")));
    }
    Ok(())
}

/// `f_t` for a fixed `t`.
#[derive(Debug, Clone)]
pub struct Annealed {
    path: EnergyPath,
    t: f64,
}

impl Annealed {
    pub fn time(&self) -> f64 {
        self.t
    }
}

impl Energy for Annealed {
    fn dim(&self) -> usize {
        self.path.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.path.value(self.t, x)
    }

    fn gradient(&self, x: &[f64], grad: &mut [f64]) {
        self.path.eval_into(self.t, x, grad);
    }

    fn value_and_gradient(&self, x: &[f64], grad: &mut [f64]) -> f64 {
        self.path.eval_into(self.t, x, grad).0
    }
}

/// Exact sampler for a target, used as the evaluation reference.
pub trait GroundTruthSampler: Send + Sync {
    fn dim(&self) -> usize;

    fn draw(&self, count: usize, rng: &mut dyn rand::RngCore) -> Points;
}

impl GroundTruthSampler for Gaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn draw(&self, count: usize, rng: &mut dyn rand::RngCore) -> Points {
        self.sample(count, rng)
    }
}

impl GroundTruthSampler for GaussianMixture {
    fn dim(&self) -> usize {
        self.means[0].len()
    }

    fn draw(&self, count: usize, rng: &mut dyn rand::RngCore) -> Points {
        self.sample(count, rng)
    }
}

/// Rejection sampler for the density proportional to `exp(-(x^4 - 6x^2 - x/2))`.
///
/// The proposal is a two-component Gaussian mixture centred on the two wells;
/// the bound on density/proposal is taken from a dense grid with a safety margin.
#[derive(Debug, Clone)]
pub struct QuarticSampler {
    centers: [f64; 2],
    stds: [f64; 2],
    weights: [f64; 2],
    log_bound: f64,
}

impl QuarticSampler {
    pub fn new() -> Self {
        // stationary points of x^4 - 6x^2 - x/2
        let mut centers = [-1.7, 1.7];
        for c in centers.iter_mut() {
            for _ in 0..50 {
                let g = 4.0 * *c * *c * *c - 12.0 * *c - 0.5;
                let h = 12.0 * *c * *c - 12.0;
                *c -= g / h;
            }
        }
        let stds = centers.map(|c| 1.6 / (12.0 * c * c - 12.0f64).sqrt());
        let mass = [0, 1].map(|i| (-ManyWell::quartic(centers[i])).exp() * stds[i]);
        let total = mass[0] + mass[1];
        let weights = mass.map(|m| m / total);
        let mut s = Self {
            centers,
            stds,
            weights,
            log_bound: 0.0,
        };
        let mut worst = f64::NEG_INFINITY;
        for k in 0..=200_000 {
            let x = -6.0 + 12.0 * k as f64 / 200_000.0;
            worst = worst.max(-ManyWell::quartic(x) - s.log_proposal(x));
        }
        s.log_bound = worst + 0.05;
        s
    }

    fn log_proposal(&self, x: f64) -> f64 {
        let mut p = 0.0;
        for i in 0..2 {
            let z = (x - self.centers[i]) / self.stds[i];
            p += self.weights[i] * (-0.5 * z * z).exp()
                / (self.stds[i] * (2.0 * std::f64::consts::PI).sqrt());
        }
        p.ln()
    }

    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        loop {
            let i = usize::from(rng.random::<f64>() >= self.weights[0]);
            let x = self.centers[i] + self.stds[i] * rng.sample::<f64, _>(StandardNormal);
            let log_accept = -ManyWell::quartic(x) - self.log_proposal(x) - self.log_bound;
            if rng.random::<f64>().ln() < log_accept {
                return x;
            }
        }
    }
}

impl Default for QuarticSampler {
    fn default() -> Self {
        Self::new()
    }
}

/// Exact sampler for [`ManyWell`]: the energy factorizes over coordinates.
#[derive(Debug, Clone)]
pub struct ManyWellSampler {
    energy: ManyWell,
    quartic: QuarticSampler,
}

impl ManyWellSampler {
    pub fn new(energy: ManyWell) -> Self {
        Self {
            energy,
            quartic: QuarticSampler::new(),
        }
    }
}

impl GroundTruthSampler for ManyWellSampler {
    fn dim(&self) -> usize {
        self.energy.dim
    }

    fn draw(&self, count: usize, rng: &mut dyn rand::RngCore) -> Points {
        let d = self.energy.dim;
        let mut data = Vec::with_capacity(count * d);
        for _ in 0..count {
            for j in 0..d {
                data.push(if j < 2 * self.energy.wells && j % 2 == 0 {
                    self.quartic.sample_one(rng)
                } else {
                    rng.sample::<f64, _>(StandardNormal)
                });
            }
        }
        Points::new(d, data).expect("dim >= 1")
    }
}

/// Means of the 40-mode benchmark mixture, drawn once uniformly from `[-40, 40]^2`.
pub fn gm40_means() -> Vec<Vec<f64>> {
    include_str!("../data/gm40_means.csv")
        .lines()
        .skip(1)
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .map(|v| v.trim().parse::<f64>().expect("valid gm40 data file"))
                .collect()
        })
        .collect()
}

/// Two equal-weight modes at `(2, 2)` and `(-2, -2)` with variance `0.01`.
pub fn gm2() -> GaussianMixture {
    GaussianMixture::uniform(vec![vec![2.0, 2.0], vec![-2.0, -2.0]], 0.01).expect("valid mixture")
}

/// Forty equal-weight unit-variance modes.
pub fn gm40() -> GaussianMixture {
    GaussianMixture::uniform(gm40_means(), 1.0).expect("valid mixture")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn check_gradient(e: &dyn Energy, rng: &mut ChaCha8Rng, spread: f64, tol: f64) {
        let d = e.dim();
        let h = 1e-6;
        for _ in 0..20 {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-spread..spread)).collect();
            let mut g = vec![0.0; d];
            e.gradient(&x, &mut g);
            let scale = g.iter().map(|v| v.abs()).fold(1e-8, f64::max);
            for j in 0..d {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[j] += h;
                xm[j] -= h;
                let fd = (e.value(&xp) - e.value(&xm)) / (2.0 * h);
                assert!((fd - g[j]).abs() <= tol * scale, "coord {j}: fd {fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn gaussian_values() {
        let g = Gaussian::standard(2);
        let mut grad = vec![1.0; 2];
        assert_eq!(g.value_and_gradient(&[0.0, 0.0], &mut grad), 0.0);
        assert_eq!(grad, vec![0.0, 0.0]);
        let wide = Gaussian::new(vec![0.0, 0.0], 500.0).unwrap();
        assert!((wide.value(&[500.0, 0.0]) - 0.5).abs() < 1e-15);
        assert!(Gaussian::new(vec![0.0], 0.0).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        check_gradient(&Gaussian::new(vec![1.0, -2.0, 0.5], 1.7).unwrap(), &mut rng, 3.0, 1e-6);
    }

    #[test]
    fn mixture_reduces_to_gaussian_for_one_component() {
        let gm = GaussianMixture::uniform(vec![vec![1.0, 2.0]], 0.25).unwrap();
        let g = Gaussian::new(vec![1.0, 2.0], 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let offset = gm.value(&[0.0, 0.0]) - g.value(&[0.0, 0.0]);
        for _ in 0..20 {
            let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
            let (mut a, mut b) = (vec![0.0; 2], vec![0.0; 2]);
            gm.gradient(&x, &mut a);
            g.gradient(&x, &mut b);
            assert_eq!(a, b);
            assert!((gm.value(&x) - g.value(&x) - offset).abs() < 1e-12);
        }
    }

    #[test]
    fn two_mode_mixture_is_symmetric() {
        let gm = gm2();
        assert_eq!(gm.value(&[2.0, 2.0]), gm.value(&[-2.0, -2.0]));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        check_gradient(&gm, &mut rng, 2.5, 1e-5);
        check_gradient(&gm40(), &mut rng, 40.0, 1e-5);
    }

    #[test]
    fn mixture_is_permutation_invariant() {
        let a = GaussianMixture::uniform(vec![vec![0.0, 1.0], vec![3.0, -1.0], vec![-2.0, 0.0]], 0.5).unwrap();
        let b = GaussianMixture::uniform(vec![vec![-2.0, 0.0], vec![0.0, 1.0], vec![3.0, -1.0]], 0.5).unwrap();
        for x in [[0.1, 0.2], [2.5, -0.7], [-1.0, 1.0]] {
            assert!((a.value(&x) - b.value(&x)).abs() < 1e-12);
        }
    }

    #[test]
    fn mixture_rejects_bad_input() {
        assert!(GaussianMixture::uniform(vec![], 1.0).is_err());
        assert!(GaussianMixture::new(vec![vec![0.0]], 1.0, vec![1.0, 1.0]).is_err());
        assert!(GaussianMixture::uniform(vec![vec![0.0]], -1.0).is_err());
    }

    #[test]
    fn many_well_values() {
        let gauss = ManyWell::new(0, 3).unwrap();
        assert!((gauss.value(&[1.0, 2.0, -1.0]) - Gaussian::standard(3).value(&[1.0, 2.0, -1.0])).abs() < 1e-15);
        let mw = ManyWell::new(1, 2).unwrap();
        assert!((mw.value(&[1.0, 0.0]) + 5.5).abs() < 1e-15);
        assert!(ManyWell::new(3, 5).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        check_gradient(&ManyWell::new(2, 6).unwrap(), &mut rng, 2.5, 1e-5);
    }

    #[test]
    fn path_endpoints_and_constant_path() {
        let f0: Arc<dyn Energy> = Arc::new(Gaussian::standard(2));
        let f1: Arc<dyn Energy> = Arc::new(ManyWell::new(1, 2).unwrap());
        let path = EnergyPath::new(f0.clone(), f1.clone()).unwrap();
        let x = [0.3, -1.2];
        let (mut g0, mut g1) = (vec![0.0; 2], vec![0.0; 2]);
        let v0 = f0.value_and_gradient(&x, &mut g0);
        let v1 = f1.value_and_gradient(&x, &mut g1);
        let p0 = path.eval(0.0, &x).unwrap();
        let p1 = path.eval(1.0, &x).unwrap();
        assert_eq!((p0.value, p0.dt, p0.grad.clone()), (v0, v1 - v0, g0));
        assert_eq!((p1.value, p1.dt, p1.grad.clone()), (v1, v1 - v0, g1));
        assert!(path.eval(1.5, &x).is_err());
        assert!(path.eval(-0.1, &x).is_err());

        let flat = EnergyPath::new(f1.clone(), f1).unwrap();
        for t in [0.0, 0.3, 1.0] {
            assert_eq!(flat.eval(t, &x).unwrap().dt, 0.0);
        }
    }

    #[test]
    fn path_is_affine_in_time() {
        let path = EnergyPath::new(Arc::new(Gaussian::standard(2)), Arc::new(gm2())).unwrap();
        let x = [0.4, 1.1];
        let a = path.eval(0.2, &x).unwrap();
        let b = path.eval(0.6, &x).unwrap();
        let m = path.eval(0.4, &x).unwrap();
        assert!((0.5 * (a.value + b.value) - m.value).abs() < 1e-12);
        assert_eq!(a.dt, b.dt);
    }

    #[test]
    fn ground_truth_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pure = ManyWellSampler::new(ManyWell::new(0, 2).unwrap());
        let p = pure.draw(20_000, &mut rng);
        for (m, v) in p.mean().iter().zip(p.variance()) {
            assert!(m.abs() < 0.03 && (v - 1.0).abs() < 0.04, "{m} {v}");
        }
        let mw = ManyWellSampler::new(ManyWell::new(2, 5).unwrap());
        let s = mw.draw(20_000, &mut rng);
        let mean = s.mean();
        // odd coordinates of each pair and the tail are standard normal
        for j in [1, 3, 4] {
            assert!(mean[j].abs() < 0.03, "coord {j}: {}", mean[j]);
        }
        let gm = gm2();
        let g = gm.sample(20_000, &mut rng);
        assert!(g.mean().iter().all(|m| m.abs() < 0.06));
        assert!(g.variance().iter().all(|v| (v - 4.01).abs() < 0.1));
    }
}
