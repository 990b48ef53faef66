//! Pretrains the small texture CNN on stroke-group bitmaps of synthetic
//! sketches and extracts the feature vector of one ten-crop sequence.
//!
//! cargo run --release --example texture_cnn

use dualsketch::cnn::{cnn_forward, pretrain_texture, CnnArch, CnnMode, CnnTrainConfig};
use dualsketch::fusion::SequenceConfig;
use dualsketch::harness::texture_training_set;
use dualsketch::sketch::{rasterize, ten_crop_sequence};
use dualsketch::synth::synth_generate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sketches = synth_generate(3, 12, 2)?;
    let classes = ["polygon", "spiral", "star"];
    let labeled: Vec<_> = sketches
        .iter()
        .map(|s| {
            let y = classes.iter().position(|c| Some(*c) == s.label.as_deref()).unwrap_or(0);
            (s.clone(), y)
        })
        .collect();

    let arch = CnnArch::tiny(classes.len());
    println!("architecture: {}", arch.describe());
    let seq = SequenceConfig::for_crop(arch.input_size);
    let data = texture_training_set(&labeled, &seq, arch.input_size, None)?;
    let cfg = CnnTrainConfig { lr: 0.05, batch: 16, epochs: 10, seed: 4 };
    let (params, trace) = pretrain_texture(&data, &arch, &cfg, None)?;
    for e in &trace {
        println!("epoch {:2}: loss {:.4}, accuracy {:.3}", e.epoch, e.loss, e.accuracy);
    }

    let bitmap = rasterize(&labeled[0].0, seq.raster_size, seq.line_width);
    for (i, crop) in ten_crop_sequence(&bitmap, arch.input_size)?.iter().enumerate() {
        let f = cnn_forward(crop, &params, CnnMode::Features)?;
        let active = f.iter().filter(|v| **v > 0.0).count();
        println!("crop {i}: {} features, {active} active", f.len());
    }
    Ok(())
}
