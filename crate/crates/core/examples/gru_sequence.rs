//! Trains a single GRU layer with backpropagation through time to report, at
//! every step, whether it has seen more ones than zeros so far.
//!
//! cargo run --release --example gru_sequence

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use dualsketch::nn::{argmax, bptt, clip_global_norm, gru_forward, sgd_step, softmax_xent, GruLayerParams, Parameters, CLIP_NORM};

fn sample(rng: &mut impl Rng, len: usize) -> (Vec<Vec<f64>>, Vec<usize>) {
    let bits: Vec<usize> = (0..len).map(|_| rng.gen_range(0..2)).collect();
    let mut balance = 0i32;
    let targets = bits
        .iter()
        .map(|&b| {
            balance += if b == 1 { 1 } else { -1 };
            usize::from(balance > 0)
        })
        .collect();
    (bits.iter().map(|&b| vec![b as f64, 1.0 - b as f64]).collect(), targets)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut params = GruLayerParams::init(2, 12, 2, &mut rng);
    for epoch in 0..=2000 {
        let (xs, ys) = sample(&mut rng, 12);
        let fwd = gru_forward(&xs, &params)?;
        let mut loss = 0.0;
        let mut correct = 0;
        let mut d_out = Vec::new();
        for (y, &t) in fwd.outputs.iter().zip(&ys) {
            let (l, g) = softmax_xent(y, t)?;
            loss += l / ys.len() as f64;
            correct += usize::from(argmax(y) == t);
            d_out.push(g.iter().map(|v| v / ys.len() as f64).collect());
        }
        let (mut grads, _) = bptt(&params, &fwd.state, Some(&d_out), None)?;
        clip_global_norm(&mut grads, CLIP_NORM);
        sgd_step(&mut params, &grads, 0.5)?;
        if epoch % 400 == 0 {
            println!("step {epoch:4}: loss {loss:.4}, {correct}/{} steps right", ys.len());
        }
    }
    println!("{} trainable parameters", params.num_params());
    Ok(())
}
