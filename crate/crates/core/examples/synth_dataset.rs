//! Generates a labeled synthetic sketch set as `<out>/<class>/<n>.json`, the
//! layout the file-based experiment loader reads.
//!
//! cargo run --release --example synth_dataset -- out/synth 6 30

use std::collections::BTreeMap;
use std::path::PathBuf;

use dualsketch::sketch::to_canonical;
use dualsketch::synth::{default_classes, synth_generate_classes};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "out/synth".into()));
    let classes: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(6);
    let per_class: usize = args.next().map(|a| a.parse()).transpose()?.unwrap_or(30);

    let sketches = synth_generate_classes(&default_classes(classes), per_class, 1)?;
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for s in &sketches {
        let label = s.label.clone().unwrap_or_default();
        let n = counts.entry(label.clone()).or_default();
        let dir = out.join(&label);
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join(format!("{n:04}.json")), to_canonical(s))?;
        *n += 1;
    }
    for (label, n) in &counts {
        let strokes: Vec<usize> = sketches.iter().filter(|s| s.label.as_ref() == Some(label)).map(|s| s.stroke_count()).collect();
        let mean = strokes.iter().sum::<usize>() as f64 / strokes.len() as f64;
        println!("{label:20} {n:4} sketches, {mean:.1} strokes on average");
    }
    println!("written to {}", out.display());
    Ok(())
}
