//! Energy distance between sample sets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttflow::metrics::{energy_distance, repeated_eval};
use ttflow::targets::{gm2, GroundTruthSampler};
use ttflow::Points;

fn main() -> ttflow::Result<()> {
    let truth = gm2();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let a = truth.draw(5000, &mut rng);
    let b = truth.draw(5000, &mut rng);
    println!("two exact GM2 draws: ED {:.2e}", energy_distance(&a, &b)?);

    // all mass in one mode
    let one_mode = Points::new(2, a.rows().flat_map(|r| [r[0].abs(), r[1].abs()]).collect())?;
    println!("folded onto one mode: ED {:.2e}", energy_distance(&one_mode, &b)?);

    let zeros = Points::zeros(100, 2);
    let shifted = Points::new(2, [3.0, 4.0].repeat(100))?;
    println!("point masses 5 apart: ED {} (2 * 5)", energy_distance(&zeros, &shifted)?);

    let (summary, _) = repeated_eval(
        |i| Ok(truth.draw(2000, &mut ChaCha8Rng::seed_from_u64(100 + i as u64))),
        &truth,
        5,
        2000,
        |i| ChaCha8Rng::seed_from_u64(200 + i as u64),
    )?;
    println!("exact sampler vs itself over {} draws: {:.2e} +- {:.1e}", summary.draws, summary.mean, summary.std);
    Ok(())
}
