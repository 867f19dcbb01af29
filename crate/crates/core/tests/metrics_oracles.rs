//! Energy distance against brute force, closed-form population values and a bootstrap null.

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttflow::metrics::{energy_distance, repeated_eval};
use ttflow::targets::{Gaussian, GroundTruthSampler};
use ttflow::Points;

fn naive_ed(x: &Points, y: &Points) -> f64 {
    let dist = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
    let mean_pair = |a: &Points, b: &Points| {
        let mut s = 0.0;
        for i in 0..a.len() {
            for j in 0..b.len() {
                s += dist(a.row(i), b.row(j));
            }
        }
        s / (a.len() * b.len()) as f64
    };
    2.0 * mean_pair(x, y) - mean_pair(x, x) - mean_pair(y, y)
}

/// `E|W|` for `W ~ N(mu, s^2)` by composite Simpson quadrature over `mu ± 12 s`.
fn mean_abs_normal(mu: f64, s: f64) -> f64 {
    let (a, b, n) = (mu - 12.0 * s, mu + 12.0 * s, 20_000);
    let h = (b - a) / n as f64;
    let f = |w: f64| w.abs() * (-(w - mu).powi(2) / (2.0 * s * s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
    let mut sum = f(a) + f(b);
    for i in 1..n {
        sum += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

fn resample(p: &Points, rng: &mut ChaCha8Rng) -> Points {
    let idx: Vec<usize> = (0..p.len()).map(|_| rng.random_range(0..p.len())).collect();
    p.select(&idx)
}

#[test]
fn matches_brute_force_on_small_sets() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let x = Gaussian::standard(3).sample(70, &mut rng);
    let y = Gaussian::new(vec![0.5, 0.0, -1.0], 2.0).unwrap().sample(45, &mut rng);
    let got = energy_distance(&x, &y).unwrap();
    let want = naive_ed(&x, &y);
    assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} vs {want}");
}

#[test]
fn gaussian_pair_within_three_bootstrap_errors_of_population_value() {
    let n = 5000;
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = Gaussian::new(vec![0.0], 1.0).unwrap().sample(n, &mut rng);
    let y = Gaussian::new(vec![1.0], 1.0).unwrap().sample(n, &mut rng);
    let got = energy_distance(&x, &y).unwrap();
    assert!((got - naive_ed(&x, &y)).abs() <= 1e-10);

    // Z - Z' - 1 ~ N(-1, 2) and Z - Z' ~ N(0, 2)
    let (cross, within) = (mean_abs_normal(-1.0, 2f64.sqrt()), mean_abs_normal(0.0, 2f64.sqrt()));
    assert!((within - 2.0 / std::f64::consts::PI.sqrt()).abs() <= 1e-10);
    let population = 2.0 * cross - 2.0 * within;
    // the diagonal zeros of the V-statistic add E|Z - Z'| (1/N + 1/M) in expectation
    let expected = population + within * 2.0 / n as f64;

    let boot: Vec<f64> =
        (0..40).map(|_| energy_distance(&resample(&x, &mut rng), &resample(&y, &mut rng)).unwrap()).collect();
    let mean = boot.iter().sum::<f64>() / boot.len() as f64;
    let se = (boot.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / (boot.len() - 1) as f64).sqrt();
    assert!((got - expected).abs() <= 3.0 * se, "ED {got}, expected {expected}, bootstrap se {se}");
}

#[test]
fn self_comparison_null_is_within_bootstrap_noise() {
    let truth = Gaussian::new(vec![0.0, 0.0], 1.0).unwrap();
    let (summary, values) = repeated_eval(
        |i| Ok(truth.draw(2000, &mut ChaCha8Rng::seed_from_u64(100 + i as u64))),
        &truth,
        5,
        2000,
        |i| ChaCha8Rng::seed_from_u64(200 + i as u64),
    )
    .unwrap();
    assert_eq!(values.len(), 5);

    // null distribution: ED between two further independent draws from the truth
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut null: Vec<f64> =
        (0..40).map(|_| energy_distance(&truth.draw(2000, &mut rng), &truth.draw(2000, &mut rng)).unwrap()).collect();
    null.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let p99 = null[(0.99 * (null.len() - 1) as f64).round() as usize];
    assert!(summary.mean <= p99, "mean {} above the null 99th percentile {p99}", summary.mean);
}

#[test]
fn two_draw_smoke_run_reports_two_finite_values() {
    let truth = Gaussian::standard(2);
    let (s, v) = repeated_eval(
        |i| Ok(truth.draw(50, &mut ChaCha8Rng::seed_from_u64(i as u64))),
        &truth,
        2,
        50,
        |i| ChaCha8Rng::seed_from_u64(10 + i as u64),
    )
    .unwrap();
    assert_eq!(s.draws, 2);
    assert!(v.iter().all(|e| e.is_finite()));
}

fn points(dim: usize, data: Vec<f64>) -> Points {
    Points::new(dim, data).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn symmetric_and_shift_invariant(
        xs in prop::collection::vec(-5.0f64..5.0, 4..40),
        ys in prop::collection::vec(-5.0f64..5.0, 4..40),
        c in prop::array::uniform2(-10.0f64..10.0),
    ) {
        let x = points(2, xs[..xs.len() / 2 * 2].to_vec());
        let y = points(2, ys[..ys.len() / 2 * 2].to_vec());
        let xy = energy_distance(&x, &y).unwrap();
        prop_assert_eq!(xy, energy_distance(&y, &x).unwrap());
        let shift = |p: &Points| {
            let data = p.rows().flat_map(|r| [r[0] + c[0], r[1] + c[1]]).collect();
            points(2, data)
        };
        let shifted = energy_distance(&shift(&x), &shift(&y)).unwrap();
        prop_assert!((shifted - xy).abs() <= 1e-12 * (1.0 + xy.abs()) * 10.0);
    }

    #[test]
    fn identical_sets_give_exact_zero(xs in prop::collection::vec(-5.0f64..5.0, 3..60)) {
        let x = points(3, xs[..xs.len() / 3 * 3].to_vec());
        prop_assert_eq!(energy_distance(&x, &x.clone()).unwrap(), 0.0);
    }

    #[test]
    fn point_masses_give_twice_the_offset(
        n in 1usize..30,
        m in 1usize..30,
        c in prop::array::uniform3(-4.0f64..4.0),
    ) {
        let x = points(3, vec![0.0; 3 * n]);
        let y = points(3, c.iter().copied().cycle().take(3 * m).collect());
        let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
        let ed = energy_distance(&x, &y).unwrap();
        prop_assert!((ed - 2.0 * norm).abs() <= 1e-12 * (1.0 + norm));
    }
}
