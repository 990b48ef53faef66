//! Featurizes a dataset once and trains the recurrent model with both
//! streams, with the shape stream zeroed and with the texture stream zeroed.
//! The polygon and segmented-polygon classes rasterize identically, so only
//! the shape stream can tell them apart.
//!
//! cargo run --release --example ablation

use dualsketch::harness::{fit, prepare, ExperimentConfig};
use dualsketch::nn::worker_pool;

const CONFIG: &str = r#"
seed = 3
threads = 2

[data]
source = "synthetic"
families = ["polygon", "segmented-polygon", "star", "spiral", "grid"]
per_class = 20

[augment]
enabled = false

[shape]
codebook_size = 64
kmeans_iterations = 30

[texture]
arch = "tiny"
epochs = 15

[model]
hidden = 16

[train]
lr = 0.2
batch = 10
epochs = 120
patience = 15
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = ExperimentConfig::from_toml(CONFIG)?;
    let pool = worker_pool(base.threads())?;
    let prepared = prepare(&base, pool.as_ref())?;
    for (name, shape, texture) in [("both streams", true, true), ("texture only", false, true), ("shape only", true, false)] {
        let mut cfg = base.clone();
        cfg.model.shape = shape;
        cfg.model.texture = texture;
        let report = fit(&prepared, &cfg, pool.as_ref())?;
        println!(
            "{name:13} test {}/{} = {:.3}, train {:.3}",
            report.test.correct(),
            report.test.total(),
            report.test.accuracy,
            report.train.accuracy
        );
    }
    Ok(())
}
