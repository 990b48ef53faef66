//! Checks the analytic gradients of the fused recurrent model against central
//! finite differences for each model variant.
//!
//! cargo run --release --example gradcheck

use dualsketch::fusion::{fusion_grad_check, FusionConfig};
use dualsketch::nn::CheckCoords;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = FusionConfig { steps: 10, ..FusionConfig::new(8, 12, 4, 3) };
    let variants = [
        ("baseline", base.clone()),
        ("shape stream off", FusionConfig { shape_input: false, ..base.clone() }),
        ("texture stream off", FusionConfig { texture_input: false, ..base.clone() }),
        ("normalized sum", FusionConfig { normalized_sum: true, ..base.clone() }),
        ("learned step weights", FusionConfig { time_weights: true, ..base.clone() }),
    ];
    for (name, cfg) in variants {
        let r = fusion_grad_check(&cfg, 17, 1e-5, CheckCoords::All)?;
        println!("{name:22} max relative error {:.3e} over {} coordinates", r.max_rel_error, r.checked);
    }
    Ok(())
}
