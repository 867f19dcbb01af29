//! Transport particles with RK4 and track the log-density change.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttflow::dynamics::{ode_solve, ParticleEnsemble, SafetyBox};
use ttflow::field::VelocityField;
use ttflow::targets::Gaussian;

/// `v(x) = x`, divergence `d`.
struct Expansion(usize);

impl VelocityField for Expansion {
    fn dim(&self) -> usize {
        self.0
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> f64 {
        out.copy_from_slice(x);
        self.0 as f64
    }
}

fn main() -> ttflow::Result<()> {
    let d = 3;
    let latent = Gaussian::standard(d);
    let points = latent.sample(1000, &mut ChaCha8Rng::seed_from_u64(2));
    let mut ens = ParticleEnsemble::from_energy(points, &latent)?;
    let before = ens.log_density()[0];
    let x0 = ens.points().row(0).to_vec();

    let report = ode_solve(&mut ens, &Expansion(d), 0.0, 0.2, 8, Some(SafetyBox::around(-5.0, 5.0, 10.0)))?;
    let x1 = ens.points().row(0);
    println!("x(0) = {x0:.4?}\nx(0.2) = {x1:.4?} (exact factor e^0.2 = {:.6})", 0.2f64.exp());
    println!("log q change {:.12} (exact {:.12})", ens.log_density()[0] - before, -(d as f64) * 0.2);
    println!("frozen trajectories: {}", report.frozen);
    Ok(())
}
