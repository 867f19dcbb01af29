//! The H²-orthonormal Fourier system on an interval.

use ttflow::basis::{raw_gram, BasisSet};

fn main() -> ttflow::Result<()> {
    let basis = BasisSet::fourier_h2(-5.0, 5.0, 7)?;
    let (lo, hi) = basis.interval();
    println!("{} functions on [{lo}, {hi}]", basis.size());
    println!("raw Gram diagonal: {:?}", (0..7).map(|i| raw_gram(lo, hi, 7)[(i, i)]).collect::<Vec<_>>());

    for x in [-5.0, -2.5, 0.0, 1.0, 5.0, 12.5] {
        let (v, d) = basis.eval_features(x)?;
        let fmt = |s: &[f64]| s.iter().map(|a| format!("{a:+.4}")).collect::<Vec<_>>().join(" ");
        println!("x = {x:>5}: phi  {}", fmt(&v));
        println!("           phi' {}", fmt(&d));
    }
    println!("x = 12.5 lies outside and is evaluated by periodic extension (equal to x = 2.5)");
    Ok(())
}
