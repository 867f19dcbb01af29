//! Energy distance and moment diagnostics.

use std::cmp::Ordering;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::points::Points;
use crate::targets::GroundTruthSampler;

/// Default per-set subsampling cap.
pub const DEFAULT_CAP: usize = 50_000;

const BLOCK: usize = 64;

/// `sum_i sum_j ||a_i - b_j||`, reduced over fixed row blocks in index order.
fn pair_sum(a: &Points, b: &Points) -> f64 {
    let d = a.dim();
    let partial: Vec<f64> = a
        .as_slice()
        .par_chunks(BLOCK * d)
        .map(|block| {
            let mut s = 0.0;
            for x in block.chunks_exact(d) {
                let mut row = 0.0;
                for y in b.rows() {
                    let mut sq = 0.0;
                    for k in 0..d {
                        let t = x[k] - y[k];
                        sq += t * t;
                    }
                    row += sq.sqrt();
                }
                s += row;
            }
            s
        })
        .collect();
    partial.iter().sum()
}

/// Orders two sets so that the statistic does not depend on argument order.
fn canonical<'a>(x: &'a Points, y: &'a Points) -> (&'a Points, &'a Points) {
    let bits = |p: &'a Points| p.as_slice().iter().map(|v| v.to_bits());
    let swap = match x.len().cmp(&y.len()) {
        Ordering::Equal => bits(x).cmp(bits(y)) == Ordering::Greater,
        other => other == Ordering::Greater,
    };
    if swap {
        (y, x)
    } else {
        (x, y)
    }
}

/// V-statistic `2/(NM) sum ||x-y|| - 1/N^2 sum ||x-x'|| - 1/M^2 sum ||y-y'||`.
///
/// Exactly symmetric, exactly zero on identical sets.
pub fn energy_distance(x: &Points, y: &Points) -> Result<f64> {
    if x.is_empty() || y.is_empty() {
        return Err(Error::InvalidArgument("energy distance needs two non-empty sets".into()));
    }
    if x.dim() != y.dim() {
        return Err(Error::Shape(format!("energy distance between {}-d and {}-d sets", x.dim(), y.dim())));
    }
    let (x, y) = canonical(x, y);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let cross = pair_sum(x, y) / (n * m);
    let within_x = pair_sum(x, x) / (n * n);
    let within_y = pair_sum(y, y) / (m * m);
    Ok(2.0 * cross - (within_x + within_y))
}

/// Random subset of at most `cap` rows, keeping the original row order.
pub fn subsample<R: Rng + ?Sized>(points: &Points, cap: usize, rng: &mut R) -> Points {
    if points.len() <= cap {
        return points.clone();
    }
    let mut idx = index::sample(rng, points.len(), cap).into_vec();
    idx.sort_unstable();
    points.select(&idx)
}

/// [`energy_distance`] after subsampling each set to at most `cap` rows.
pub fn energy_distance_capped<R: Rng + ?Sized>(x: &Points, y: &Points, cap: usize, rng: &mut R) -> Result<f64> {
    if cap == 0 {
        return Err(Error::InvalidArgument("subsampling cap must be >= 1".into()));
    }
    let xs = subsample(x, cap, rng);
    let ys = subsample(y, cap, rng);
    energy_distance(&xs, &ys)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
    pub draws: usize,
}

/// Mean and sample standard deviation.
pub fn summarize(values: &[f64]) -> Summary {
    let k = values.len();
    let mean = values.iter().sum::<f64>() / k as f64;
    let std = if k > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1) as f64).sqrt()
    } else {
        0.0
    };
    Summary { mean, std, draws: k }
}

/// Energy distance over `draws` independent draws.
///
/// `model(i)` returns the `i`-th sample set; the reference set for draw `i`
/// comes from `truth` with `rng_for(i)`.
pub fn repeated_eval<M, G, R>(
    mut model: M,
    truth: &dyn GroundTruthSampler,
    draws: usize,
    samples_per_draw: usize,
    mut rng_for: G,
) -> Result<(Summary, Vec<f64>)>
where
    M: FnMut(usize) -> Result<Points>,
    G: FnMut(usize) -> R,
    R: rand::RngCore,
{
    if draws < 2 {
        return Err(Error::InvalidArgument(format!("repeated evaluation needs >= 2 draws, got {draws}")));
    }
    let mut values = Vec::with_capacity(draws);
    for i in 0..draws {
        let xs = model(i)?;
        let mut rng = rng_for(i);
        let ys = truth.draw(samples_per_draw, &mut rng);
        values.push(energy_distance(&xs, &ys)?);
    }
    Ok((summarize(&values), values))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricReport {
    pub energy_distance: Summary,
    pub distances: Vec<f64>,
    pub samples: usize,
    pub reference_samples: usize,
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub reference_mean: Vec<f64>,
    pub reference_variance: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ess: Option<f64>,
}

/// Compares one fixed sample set against `draws` fresh reference sets.
pub fn evaluate_samples<R: Rng>(
    samples: &Points,
    truth: &dyn GroundTruthSampler,
    draws: usize,
    reference_size: usize,
    cap: usize,
    rng: &mut R,
) -> Result<MetricReport> {
    if samples.dim() != truth.dim() {
        return Err(Error::Shape(format!("{}-d samples for a {}-d target", samples.dim(), truth.dim())));
    }
    if samples.len() < 2 {
        return Err(Error::Data(format!("need at least 2 samples, got {}", samples.len())));
    }
    if draws == 0 {
        return Err(Error::InvalidArgument("draws must be >= 1".into()));
    }
    let mut values = Vec::with_capacity(draws);
    let mut reference = None;
    for _ in 0..draws {
        let ys = truth.draw(reference_size, rng);
        values.push(energy_distance_capped(samples, &ys, cap, rng)?);
        reference = Some(ys);
    }
    let reference = reference.expect("draws >= 1");
    Ok(MetricReport {
        energy_distance: summarize(&values),
        distances: values,
        samples: samples.len(),
        reference_samples: reference_size,
        mean: samples.mean(),
        variance: samples.variance(),
        reference_mean: reference.mean(),
        reference_variance: reference.variance(),
        ess: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::targets::Gaussian;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn brute(x: &Points, y: &Points) -> f64 {
        let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let mean = |a: &Points, b: &Points| {
            let mut s = 0.0;
            for p in a.rows() {
                for q in b.rows() {
                    s += dist(p, q);
                }
            }
            s / (a.len() * b.len()) as f64
        };
        2.0 * mean(x, y) - mean(x, x) - mean(y, y)
    }

    fn gauss(len: usize, d: usize, shift: f64, seed: u64) -> Points {
        let mut p = Gaussian::standard(d).sample(len, &mut ChaCha8Rng::seed_from_u64(seed));
        p.as_mut_slice().iter_mut().for_each(|v| *v += shift);
        p
    }

    #[test]
    fn identical_sets_give_exact_zero() {
        let x = gauss(300, 3, 0.0, 1);
        assert_eq!(energy_distance(&x, &x.clone()).unwrap(), 0.0);
    }

    #[test]
    fn point_masses() {
        let x = Points::new(2, vec![0.0; 2 * 7]).unwrap();
        let y = Points::from_rows(&[[3.0, 4.0]; 5]).unwrap();
        assert!((energy_distance(&x, &y).unwrap() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn exact_symmetry() {
        for (nx, ny) in [(200, 150), (150, 150), (80, 300)] {
            let x = gauss(nx, 2, 0.0, 2);
            let y = gauss(ny, 2, 0.5, 3);
            assert_eq!(energy_distance(&x, &y).unwrap(), energy_distance(&y, &x).unwrap());
        }
    }

    #[test]
    fn translation_invariance() {
        let x = gauss(200, 2, 0.0, 4);
        let y = gauss(250, 2, 0.3, 5);
        let mut xs = x.clone();
        let mut ys = y.clone();
        xs.as_mut_slice().iter_mut().for_each(|v| *v += 0.25);
        ys.as_mut_slice().iter_mut().for_each(|v| *v += 0.25);
        let (a, b) = (energy_distance(&x, &y).unwrap(), energy_distance(&xs, &ys).unwrap());
        assert!((a - b).abs() <= 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn matches_brute_force() {
        let x = gauss(257, 3, 0.0, 6);
        let y = gauss(131, 3, 1.0, 7);
        let (a, b) = (energy_distance(&x, &y).unwrap(), brute(&x, &y));
        assert!((a - b).abs() <= 1e-12 * b.abs());
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        let x = gauss(10, 2, 0.0, 8);
        assert!(energy_distance(&x, &Points::zeros(0, 2)).is_err());
        assert!(energy_distance(&x, &gauss(10, 3, 0.0, 9)).is_err());
    }

    #[test]
    fn capped_distance_subsamples() {
        let x = gauss(500, 1, 0.0, 10);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let s = subsample(&x, 100, &mut rng);
        assert_eq!(s.len(), 100);
        assert!(s.rows().all(|r| x.rows().any(|q| q == r)));
        assert_eq!(energy_distance_capped(&x, &x, 1000, &mut rng).unwrap(), 0.0);
    }

    #[test]
    fn summary_uses_sample_std() {
        let s = summarize(&[1.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn repeated_eval_self_comparison_is_small() {
        let g = Gaussian::standard(2);
        let (summary, values) = repeated_eval(
            |i| Ok(g.sample(400, &mut ChaCha8Rng::seed_from_u64(100 + i as u64))),
            &g,
            2,
            400,
            |i| ChaCha8Rng::seed_from_u64(200 + i as u64),
        )
        .unwrap();
        assert_eq!(values.len(), 2);
        assert!(values.iter().all(|v| v.is_finite()));
        assert!(summary.mean < 0.05);
    }
}
