//! Build, combine and round tensor trains.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttflow::TensorTrain;

fn main() -> ttflow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let a = TensorTrain::random(2, &[4, 4, 4, 4], &[3, 3, 3], 1.0, &mut rng)?;
    let b = TensorTrain::random(2, &[4, 4, 4, 4], &[2, 2, 2], 1.0, &mut rng)?;

    let sum = a.add(&b)?;
    println!("ranks a {:?}, b {:?}, a + b {:?}", a.ranks(), b.ranks(), sum.ranks());

    // a + b has ranks a.ranks + b.ranks; a - a rounds back to rank 1 (numerically zero)
    let zero = a.add(&a.scale(-1.0))?;
    let (z, report) = zero.round_with_report(1e-10, 20);
    println!("a - a rounds to ranks {:?}, norm {:.1e}", z.ranks(), report.norm);

    for tol in [1e-12, 1e-2, 1e-1, 3e-1] {
        let (r, report) = sum.round_with_report(tol, 20);
        println!(
            "tol {tol:>6.0e}: ranks {:?}, truncation error {:.3e} (bound {:.3e})",
            r.ranks(),
            report.error(),
            tol * report.norm
        );
    }

    let features: Vec<Vec<f64>> = (0..4).map(|k| (0..4).map(|i| ((k + i) as f64).cos()).collect()).collect();
    println!("(a + b)(phi) = {:?}", sum.evaluate(&features)?);
    Ok(())
}
