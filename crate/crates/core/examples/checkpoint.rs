//! Persist a trained flow, hash it and load it back.

use ttflow::checkpoint::{git_blob_sha1, Checkpoint};
use ttflow::pipeline::{sample, train};
use ttflow::{Method, RunConfig, TargetSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::new(11, TargetSpec::Gm2);
    cfg.method = Method::Flow;
    cfg.latent_std = 0.1;
    cfg.steps = 4;
    cfg.samples = 500;
    cfg.iterations = 1;
    cfg.basis_size = 5;
    cfg.init_rank = 2;
    cfg.max_rank = 3;

    let model = train(&cfg)?;
    let bytes = model.checkpoint.to_bytes();
    println!("{} fields, {} bytes, sha1 {}", model.checkpoint.steps(), bytes.len(), git_blob_sha1(&bytes));

    let dir = tempfile::tempdir()?;
    let path = dir.path().join("flow.ttfl");
    std::fs::write(&path, &bytes)?;
    let loaded = Checkpoint::read(&path)?;
    println!("round trip identical: {}", loaded == model.checkpoint);

    let (a, _) = sample(Some(&model.checkpoint), &cfg, Method::Flow, 5, 1)?;
    let (b, _) = sample(Some(&loaded), &cfg, Method::Flow, 5, 1)?;
    println!("samples identical: {}", a.as_slice() == b.as_slice());
    for r in b.rows() {
        println!("  {r:.4?}");
    }
    Ok(())
}
