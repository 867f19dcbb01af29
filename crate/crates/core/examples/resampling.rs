//! Importance weights, ESS and the two resampling schemes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttflow::dynamics::{effective_sample_size, log_weights, resample_indices, resampling_step, ParticleEnsemble, ResampleScheme};
use ttflow::targets::{Energy, Gaussian};

fn main() -> ttflow::Result<()> {
    let proposal = Gaussian::standard(1);
    let target = Gaussian::new(vec![1.0], 0.5)?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ens = ParticleEnsemble::from_energy(proposal.sample(5000, &mut rng), &proposal)?;

    let log_target = |x: &[f64]| -target.value(x);
    let lw = log_weights(&ens, &log_target);
    println!("ESS of N(0,1) particles for N(1, 0.25): {:.1} of {}", effective_sample_size(&lw), ens.len());

    for scheme in [ResampleScheme::Multinomial, ResampleScheme::Systematic] {
        let idx = resample_indices(&lw, scheme, &mut rng)?;
        let mut distinct = idx.clone();
        distinct.sort_unstable();
        distinct.dedup();
        println!("{scheme}: {} distinct survivors", distinct.len());

        let mut e = ens.clone();
        let report = resampling_step(&mut e, &log_target, scheme, 1.0, &mut rng)?;
        let mean = e.points().mean()[0];
        println!("  resampled: ess {:.1}, mean {mean:.3} (target 1.0)", report.ess);
    }
    Ok(())
}
