//! Many-well target: exact reference sampler, training, histogram of the first pair.
//!
//! `cargo run --release --example many_well [config.toml]`; defaults to `configs/manywell_desk.toml`.

use std::path::PathBuf;

use ttflow::metrics::energy_distance;
use ttflow::pipeline::{sample, train};
use ttflow::rng::Streams;
use ttflow::targets::ManyWell;
use ttflow::RunConfig;

fn main() -> ttflow::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/manywell_desk.toml"));
    let cfg = RunConfig::from_file(&path)?;
    let truth = cfg.target.sampler()?;
    let reference = truth.draw(10_000, &mut Streams::new(cfg.seed).derive(&[99]).master());

    let q = |x: f64| ManyWell::quartic(x);
    println!("double-well marginal energy at -1.7, 0, 1.7: {:.3} {:.3} {:.3}", q(-1.7), q(0.0), q(1.7));

    let model = train(&cfg)?;
    let (xs, info) = sample(Some(&model.checkpoint), &cfg, cfg.method, 10_000, 3)?;
    println!("{} ED {:.2e}, {} frozen", cfg.method, energy_distance(&xs, &reference)?, info.frozen);

    // coarse histogram of x1 against the reference
    let bins = 12;
    let (lo, hi) = (-3.0, 3.0);
    let count = |p: &ttflow::Points| {
        let mut h = vec![0usize; bins];
        for r in p.rows() {
            if (lo..hi).contains(&r[0]) {
                h[((r[0] - lo) / (hi - lo) * bins as f64) as usize] += 1;
            }
        }
        h
    };
    for (i, (a, b)) in count(&xs).into_iter().zip(count(&reference)).enumerate() {
        let left = lo + (hi - lo) * i as f64 / bins as f64;
        println!("x1 in [{left:+.1}, {:+.1}): model {a:>5}  exact {b:>5}", left + (hi - lo) / bins as f64);
    }
    Ok(())
}
