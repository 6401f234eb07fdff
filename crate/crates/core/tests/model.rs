//! Whole-network properties: gradients, linearity, shapes, initialization.

use ecgnet::model::{composite_grad_check, labels_from_logits, Network, NetworkConfig};
use ecgnet::rng::stream;
use ecgnet::tensor::{softmax_xent, Matrix, Shape3, Tensor};
use ecgnet::Error;
use proptest::prelude::*;
use rand::Rng;

fn tiny() -> NetworkConfig {
    NetworkConfig {
        residual_blocks: 2,
        base_filters: 8,
        filter_len: 3,
        widen_every: 1,
        ..NetworkConfig::default()
    }
}

#[test]
fn composite_network_gradients_match_finite_differences() {
    for seed in 0..2 {
        let report = composite_grad_check(&tiny(), 2, 16, 1e-3, seed).unwrap();
        println!(
            "seed {seed}: {} checked, {} skipped, max rel {:.2e}",
            report.checked(),
            report.skipped(),
            report.max_rel_error()
        );
        assert!(report.passed(), "seed {seed}\n{report}");
        assert!(
            report.skipped() * 20 < report.checked(),
            "seed {seed}: too many kink crossings\n{report}"
        );
    }
}

#[test]
fn backward_is_linear_in_the_logit_gradient() {
    let config = tiny();
    let mut net = Network::<f64>::build(&config, &mut stream(1, "init")).unwrap();
    let mut rng = stream(1, "data");
    let x = Tensor::from_fn(Shape3::new(2, 1, 16), |_, _, _| rng.random_range(-1.0..1.0));
    let (logits, tape) = net.forward_train(&x, &mut stream(1, "dropout")).unwrap();
    let rows = logits.values.rows();
    let g: Vec<f64> = (0..rows * 14).map(|_| rng.random_range(-1.0..1.0)).collect();
    let single = net.backward(&tape, &Matrix::new(rows, 14, g.clone()).unwrap()).unwrap();
    let doubled = net
        .backward(
            &tape,
            &Matrix::new(rows, 14, g.iter().map(|v| 2.0 * v).collect()).unwrap(),
        )
        .unwrap();
    let zero = net.backward(&tape, &Matrix::zeros(rows, 14)).unwrap();
    for ((s, d), z) in single.arrays.iter().zip(&doubled.arrays).zip(&zero.arrays) {
        for ((a, b), c) in s.iter().zip(d).zip(z) {
            assert_eq!(2.0 * a, *b);
            assert_eq!(*c, 0.0);
        }
    }
}

#[test]
fn default_ledger_and_parameter_count() {
    let start = std::time::Instant::now();
    let config = NetworkConfig::default();
    let net = Network::<f32>::build(&config, &mut stream(0, "init")).unwrap();
    let convs = net
        .params()
        .arrays()
        .iter()
        .filter(|a| a.name.ends_with(".weight") && a.shape.len() == 3)
        .count();
    let dense = net
        .params()
        .arrays()
        .iter()
        .filter(|a| a.name == "head.dense.weight")
        .count();
    assert_eq!((convs, dense), (33, 1));
    // Frozen from an independent walk over the shape schedule.
    assert_eq!(net.params().learnable_count(), 15_158_990);
    assert!(start.elapsed().as_secs_f64() < 1.0);
}

#[test]
fn shrunken_parameter_counts() {
    let desk = NetworkConfig {
        residual_blocks: 4,
        base_filters: 16,
        ..NetworkConfig::default()
    };
    let net = Network::<f32>::build(&desk, &mut stream(0, "init")).unwrap();
    assert_eq!(net.params().learnable_count(), 33_694);
}

#[test]
fn initial_loss_is_near_uniform() {
    let net = Network::<f32>::build(&NetworkConfig::default(), &mut stream(7, "init")).unwrap();
    let mut rng = stream(7, "data");
    let x = Tensor::from_fn(Shape3::new(1, 1, 6144), |_, _, _| rng.random_range(-3.0..3.0));
    let logits = net.forward(&x).unwrap();
    assert_eq!((logits.positions, logits.values.cols()), (24, 14));
    let targets: Vec<usize> = (0..24).map(|_| rng.random_range(0..14)).collect();
    let (loss, _) = softmax_xent(&logits.values, &targets, 14).unwrap();
    assert!((loss - 14f64.ln()).abs() < 0.3, "{loss}");
}

#[test]
fn minimal_network_shape_and_bad_lengths() {
    let config = NetworkConfig {
        residual_blocks: 2,
        widen_every: 2,
        ..NetworkConfig::default()
    };
    let net = Network::<f32>::build(&config, &mut stream(0, "init")).unwrap();
    let x = Tensor::<f32>::zeros(Shape3::new(1, 1, 256));
    let logits = net.forward(&x).unwrap();
    assert_eq!((logits.batch, logits.positions, logits.values.cols()), (1, 128, 14));
    let odd = Tensor::<f32>::zeros(Shape3::new(1, 1, 255));
    assert!(matches!(net.forward(&odd), Err(Error::InvalidInput(_))));
}

#[test]
fn predict_rejects_empty_signal() {
    let net = Network::<f32>::build(&tiny(), &mut stream(0, "init")).unwrap();
    assert!(matches!(net.predict_record(&[]), Err(Error::InvalidInput(_))));
    let grid = net.predict_record(&[0.5; 300]).unwrap();
    assert_eq!(grid.len(), 2);
}

#[test]
fn argmax_labels_and_tie_rule() {
    let mut values = vec![0.0f32; 2 * 14];
    values[10] = 5.0; // SINUS at position 0
    values[14] = 5.0; // AFIB at position 1
    let m = Matrix::new(2, 14, values).unwrap();
    assert_eq!(labels_from_logits(&m, 1).unwrap(), vec![10, 0]);
    let flat = Matrix::new(3, 14, vec![0.25f32; 42]).unwrap();
    assert_eq!(labels_from_logits(&flat, 1).unwrap(), vec![0, 0, 0]);
    // grouped rows sum their log-probabilities
    let mut g = vec![0.0f32; 2 * 14];
    g[3] = 1.0;
    g[14 + 4] = 3.0;
    assert_eq!(labels_from_logits(&Matrix::new(2, 14, g).unwrap(), 2).unwrap(), vec![4]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn output_positions_follow_the_stride(windows in 1usize..=32) {
        let config = NetworkConfig { base_filters: 2, filter_len: 4, ..NetworkConfig::default() };
        let net = Network::<f32>::build(&config, &mut stream(3, "init")).unwrap();
        let x = Tensor::<f32>::zeros(Shape3::new(1, 1, windows * 256));
        let logits = net.forward(&x).unwrap();
        prop_assert_eq!(logits.positions, windows);
        prop_assert_eq!(logits.values.rows(), windows);
    }
}

#[test]
fn recalibrated_eval_matches_batch_statistics() {
    let config = NetworkConfig {
        dropout_rate: 0.0,
        ..tiny()
    };
    let mut net = Network::<f64>::build(&config, &mut stream(3, "init")).unwrap();
    let mut rng = stream(3, "data");
    let x = Tensor::from_fn(Shape3::new(4, 1, 64), |_, _, _| rng.random_range(-2.0..2.0) + 0.5);
    net.recalibrate_batchnorm(std::slice::from_ref(&x)).unwrap();
    let eval = net.forward(&x).unwrap();
    let mut trained = net.clone();
    let (batch, _) = trained.forward_train(&x, &mut stream(3, "dropout")).unwrap();
    // Running variance is the unbiased estimate, so the two differ by the
    // factor n/(n-1) inside each square root.
    for (a, b) in eval.values.data().iter().zip(batch.values.data()) {
        assert!((a - b).abs() < 0.05 * b.abs().max(1.0), "{a} vs {b}");
    }
    assert!(matches!(net.recalibrate_batchnorm(&[]), Err(Error::InvalidInput(_))));
}

#[test]
fn recalibration_averages_batches_by_size() {
    let config = tiny();
    let mut rng = stream(4, "data");
    let a = Tensor::from_fn(Shape3::new(2, 1, 32), |_, _, _| rng.random_range(-1.0..1.0));
    let b = Tensor::from_fn(Shape3::new(1, 1, 64), |_, _, _| rng.random_range(0.0..3.0));
    let base = Network::<f64>::build(&config, &mut stream(4, "init")).unwrap();
    let mut one = base.clone();
    one.recalibrate_batchnorm(std::slice::from_ref(&a)).unwrap();
    let mut two = base.clone();
    two.recalibrate_batchnorm(std::slice::from_ref(&b)).unwrap();
    let mut both = base.clone();
    both.recalibrate_batchnorm(&[a, b]).unwrap();
    // The stem layer sees the raw input, so its estimate is the plain
    // size-weighted mean of the two single-batch estimates.
    for name in ["stem.bn.running_mean", "stem.bn.running_var"] {
        let stat = |n: &Network<f64>| n.params().find(name).unwrap().data.clone();
        let (x, y, z) = (stat(&one), stat(&two), stat(&both));
        for ((p, q), r) in x.iter().zip(&y).zip(&z) {
            assert!((r - (64.0 * p + 64.0 * q) / 128.0).abs() < 1e-12);
        }
    }
}
