//! Train on the two-mode Gaussian mixture and compare the four sampler variants.
//!
//! `cargo run --release --example gm2_sampler [config.toml]`; defaults to `configs/gm2_desk.toml`.

use std::path::PathBuf;
use std::time::Instant;

use ttflow::metrics::energy_distance;
use ttflow::pipeline::{sample, train};
use ttflow::rng::Streams;
use ttflow::{Method, RunConfig};

fn main() -> ttflow::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/gm2_desk.toml"));
    let base = RunConfig::from_file(&path)?;
    let truth = base.target.sampler()?;
    let reference = truth.draw(10_000, &mut Streams::new(base.seed).derive(&[99]).master());

    for trained_as in [Method::Flow, Method::FlowPlusStochastic] {
        let mut cfg = base.clone();
        cfg.method = trained_as;
        let start = Instant::now();
        let model = train(&cfg)?;
        println!("trained as {trained_as} in {:.1}s", start.elapsed().as_secs_f64());
        let variants: &[Method] = match trained_as {
            Method::Flow => &[Method::Flow, Method::FlowPlus],
            _ => &[Method::FlowPlusStochastic, Method::Stochastic],
        };
        for &v in variants {
            let (xs, _) = sample(Some(&model.checkpoint), &cfg, v, 10_000, 7)?;
            let upper = xs.rows().filter(|r| r[0] + r[1] > 0.0).count() as f64 / xs.len() as f64;
            println!("  {v:<16} ED {:.2e}, mass of mode (2,2) {upper:.3}", energy_distance(&xs, &reference)?);
        }
    }
    Ok(())
}
