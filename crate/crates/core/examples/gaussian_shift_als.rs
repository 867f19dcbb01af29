//! Fit the velocity of the Gaussian shift path with ALS and compare to `v = mu`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ttflow::als::{als_fit, residual, AlsConfig, TrainingBatch};
use ttflow::basis::BasisSet;
use ttflow::field::{FttVectorField, VelocityField};
use ttflow::targets::{EnergyPath, Gaussian};
use ttflow::TensorTrain;

fn main() -> ttflow::Result<()> {
    let mu = vec![1.0, 0.0];
    let t = 0.3;
    let path = EnergyPath::new(Arc::new(Gaussian::standard(2)), Arc::new(Gaussian::new(mu.clone(), 1.0)?))?;
    let basis = BasisSet::fourier_h2(-8.0, 8.0, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let batch = TrainingBatch::from_path(Gaussian::standard(2).sample(500, &mut rng), &path, t, &basis)?;

    let init = TensorTrain::random(2, &[2, 2], &[1], 1.0, &mut rng)?;
    let cfg = AlsConfig { sweeps: 50, tol: 0.0, ridge: Some(1e-12 * 500.0), ..AlsConfig::default() };
    let fit = als_fit(&batch, &basis, &init, &cfg)?;
    println!("{} sweeps, loss {:.3e}, C_t {:.6} (exact {:.6})", fit.sweeps, fit.loss, fit.c_t, t - 0.5);

    let field = FttVectorField::new(fit.tt, basis)?;
    let mut v = [0.0; 2];
    for x in [[0.0, 0.0], [2.0, -1.0], [-3.0, 3.0]] {
        let div = field.eval(&x, &mut v);
        println!("v({x:?}) = [{:.6}, {:.6}], div {div:.1e}", v[0], v[1]);
    }
    let res = residual(&field, &batch, fit.c_t)?;
    println!("max |residual| on the batch: {:.2e}", res.iter().fold(0.0f64, |m, r| m.max(r.abs())));
    Ok(())
}
