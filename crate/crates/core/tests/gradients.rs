use dualsketch::cnn::{cnn_backward, cnn_forward_cached, CnnArch, CnnParams, ConvSpec};
use dualsketch::fusion::{fusion_grad_check, FusionConfig};
use dualsketch::nn::{bptt, grad_check, gru_forward, softmax_xent, CheckCoords, GruLayerParams, Parameters};
use dualsketch::sketch::Bitmap;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn gru_bptt_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let p = GruLayerParams::init(3, 4, 2, &mut rng);
    let xs: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let targets: Vec<usize> = (0..5).map(|_| rng.gen_range(0..2)).collect();
    let mut probe = p.clone();
    let report = grad_check(
        &p.flatten(),
        |flat| {
            probe.assign_flat(flat).unwrap();
            let fwd = gru_forward(&xs, &probe).unwrap();
            let mut loss = 0.0;
            let mut d = Vec::new();
            for (y, &t) in fwd.outputs.iter().zip(&targets) {
                let (l, g) = softmax_xent(y, t).unwrap();
                loss += l;
                d.push(g);
            }
            let (g, _) = bptt(&probe, &fwd.state, Some(&d), None).unwrap();
            (loss, g.flatten())
        },
        1e-5,
        CheckCoords::All,
    );
    assert!(report.max_rel_error <= 1e-6, "{report:?}");
}

#[test]
fn gru_input_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let p = GruLayerParams::init(3, 4, 2, &mut rng);
    let xs: Vec<Vec<f64>> = (0..5).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let loss_and_grad = |flat: &[f64]| {
        let xs: Vec<Vec<f64>> = flat.chunks(3).map(<[f64]>::to_vec).collect();
        let fwd = gru_forward(&xs, &p).unwrap();
        let loss: f64 = fwd.outputs.iter().map(|y| y[0] - 0.5 * y[1] * y[1]).sum();
        let d: Vec<Vec<f64>> = fwd.outputs.iter().map(|y| vec![1.0, -y[1]]).collect();
        let (_, dx) = bptt(&p, &fwd.state, Some(&d), None).unwrap();
        (loss, dx.concat())
    };
    let report = grad_check(&xs.concat(), loss_and_grad, 1e-5, CheckCoords::All);
    assert!(report.max_rel_error <= 1e-6, "{report:?}");
}

#[test]
fn cnn_backward_matches_central_differences() {
    let arch = CnnArch {
        input_size: 10,
        convs: vec![ConvSpec::new(3, 3, 1).pooled(2, 2), ConvSpec::new(4, 3, 1).strided(2)],
        fc: vec![6],
        classes: 3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut p = CnnParams::init(&arch, &mut rng).unwrap();
    // nonzero biases so fewer units sit exactly at the ReLU kink
    for b in p.conv_biases.iter_mut().chain(p.fc_biases.iter_mut()) {
        b.data.iter_mut().for_each(|v| *v = rng.gen_range(0.05..0.2));
    }
    let b = Bitmap::from_vec(10, 10, (0..100).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap();
    let mut probe = p.clone();
    let report = grad_check(
        &p.flatten(),
        |flat| {
            probe.assign_flat(flat).unwrap();
            let cache = cnn_forward_cached(&b, &probe).unwrap();
            let (loss, d) = softmax_xent(&cache.logits, 2).unwrap();
            (loss, cnn_backward(&d, &cache, &probe).unwrap().flatten())
        },
        1e-5,
        CheckCoords::All,
    );
    assert!(report.max_rel_error <= 1e-5, "{report:?}");
}

#[test]
fn fusion_gradients_match_central_differences() {
    let cfg = FusionConfig { steps: 10, ..FusionConfig::new(8, 12, 4, 3) };
    let r = fusion_grad_check(&cfg, 1, 1e-5, CheckCoords::All).unwrap();
    assert!(r.max_rel_error <= 1e-4, "{r:?}");
}

#[test]
fn fusion_gradients_with_step_weights_and_normalized_sum() {
    let cfg = FusionConfig { steps: 10, time_weights: true, ..FusionConfig::new(8, 12, 4, 3) };
    let r = fusion_grad_check(&cfg, 2, 1e-5, CheckCoords::All).unwrap();
    assert!(r.max_rel_error <= 1e-4, "{r:?}");
    let cfg = FusionConfig { normalized_sum: true, shape_input: false, ..cfg };
    let r = fusion_grad_check(&cfg, 3, 1e-5, CheckCoords::All).unwrap();
    assert!(r.max_rel_error <= 1e-4, "{r:?}");
}
