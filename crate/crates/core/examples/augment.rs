//! Expands one synthetic sketch into its augmented variants and writes them
//! as canonical JSON files.
//!
//! cargo run --release --example augment -- out/augment

use std::path::PathBuf;

use dualsketch::sketch::{augment_with, to_canonical, AugmentConfig};
use dualsketch::synth::{synth_generate_classes, Family, SynthClass};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "out/augment".into()));
    let star = SynthClass { family: Family::Star, variant: 0 };
    let sketch = synth_generate_classes(&[star, SynthClass { family: Family::Spiral, variant: 0 }], 5, 11)?
        .into_iter()
        .find(|s| s.label.as_deref() == Some("star"))
        .ok_or("no star generated")?;

    let cfg = AugmentConfig::for_canvas(sketch.canvas.width);
    let variants = augment_with(&sketch, &cfg);
    println!("{} variants (rotations {:?}, shift {} px)", variants.len(), cfg.rotations, cfg.shift);

    std::fs::create_dir_all(&out)?;
    for (i, v) in variants.iter().enumerate() {
        let (lo, hi) = v.bounding_box();
        println!("variant {i:2}: box ({:6.1}, {:6.1}) .. ({:6.1}, {:6.1})", lo.x, lo.y, hi.x, hi.y);
        std::fs::write(out.join(format!("star-{i:02}.json")), to_canonical(v))?;
    }
    println!("written to {}", out.display());
    Ok(())
}
