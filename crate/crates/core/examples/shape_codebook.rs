//! Builds a shape-context codebook from synthetic sketches, codes one sketch
//! with locality-constrained linear coding and max-pools the codes.
//!
//! cargo run --release --example shape_codebook

use dualsketch::shape::{
    build_codebook_traced, llc_encode, pool_shape_feature, reconstruction_residual, sketch_descriptors, ShapeContextConfig,
};
use dualsketch::synth::synth_generate;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sketches = synth_generate(4, 10, 5)?;
    let cfg = ShapeContextConfig::default();
    let mut descriptors = Vec::new();
    for s in &sketches {
        descriptors.extend(sketch_descriptors(s, &cfg)?.into_iter().map(|d| d.0));
    }
    println!("{} stroke descriptors of length {}", descriptors.len(), cfg.descriptor_len());

    let (codebook, trace) = build_codebook_traced(&descriptors, 32, 50, 9)?;
    println!(
        "k-means: {} iterations, converged {}, inertia {:.3} -> {:.3}",
        trace.iterations,
        trace.converged,
        trace.inertia.first().copied().unwrap_or(f64::NAN),
        trace.inertia.last().copied().unwrap_or(f64::NAN)
    );
    println!("codebook sha256 {}", codebook.fingerprint());

    let probe = &sketches[0];
    let codes = sketch_descriptors(probe, &cfg)?
        .iter()
        .map(|d| {
            let code = llc_encode(d, &codebook, 5)?;
            println!(
                "stroke code: atoms {:?}, weights sum {:.6}, residual {:.4}",
                code.indices,
                code.weights.iter().sum::<f64>(),
                reconstruction_residual(d, &codebook, &code)
            );
            Ok(code)
        })
        .collect::<dualsketch::Result<Vec<_>>>()?;
    let pooled = pool_shape_feature(&codes, codebook.len())?;
    let active = pooled.0.iter().filter(|v| **v != 0.0).count();
    println!("{:?}: pooled feature of length {}, {active} active atoms", probe.label, pooled.0.len());
    Ok(())
}
