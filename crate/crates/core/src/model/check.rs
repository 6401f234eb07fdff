//! Finite-difference check of the whole network's backward pass.

use rand::Rng;

use super::{Network, NetworkConfig, ParamKind};
use crate::error::Result;
use crate::rng::stream;
use crate::tensor::gradcheck::{finite_difference_check_piecewise, GradCheckReport, Probe, EPSILON};
use crate::tensor::{softmax_xent, Shape3, Tensor};

/// Builds an f64 network, perturbs every learnable array away from its
/// initial values (so zero-initialized arrays still carry signal), and
/// compares the backward pass against central differences of the mean
/// cross-entropy for every learnable scalar. Perturbations that flip a ReLU
/// sign or a max-pool winner are skipped and counted in the report.
pub fn composite_grad_check(
    config: &NetworkConfig,
    batch: usize,
    time: usize,
    tolerance: f64,
    seed: u64,
) -> Result<GradCheckReport> {
    let mut rng = stream(seed, "gradcheck/init");
    let mut net = Network::<f64>::build(config, &mut rng)?;
    for array in net.params_mut().arrays_mut() {
        if array.kind != ParamKind::Learnable {
            continue;
        }
        for v in &mut array.data {
            *v += rng.random_range(-0.5..0.5);
        }
    }
    let x = Tensor::from_fn(Shape3::new(batch, 1, time), |_, _, _| rng.random_range(-2.0..2.0));
    let positions = time / config.output_stride();
    let targets: Vec<usize> = (0..batch * positions)
        .map(|_| rng.random_range(0..config.class_count))
        .collect();

    let mut analytic_net = net.clone();
    let (logits, tape) = analytic_net.forward_train(&x, &mut stream(seed, "gradcheck/dropout"))?;
    let (_, dlogits) = softmax_xent(&logits.values, &targets, config.class_count)?;
    let grads = analytic_net.backward(&tape, &dlogits)?;

    let learnable: Vec<usize> = net
        .params()
        .arrays()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.kind == ParamKind::Learnable)
        .map(|(i, _)| i)
        .collect();
    let mut probes: Vec<Probe> = learnable
        .iter()
        .map(|&i| {
            let a = &net.params().arrays()[i];
            Probe::new(a.name.clone(), a.data.clone(), grads.arrays[i].clone())
        })
        .collect();
    let classes = config.class_count;
    let signature = tape.kink_signature();
    Ok(finite_difference_check_piecewise(
        &mut probes,
        EPSILON,
        tolerance,
        |probes| {
            let mut trial = net.clone();
            for (&i, p) in learnable.iter().zip(probes) {
                trial.params_mut().arrays_mut()[i].data.copy_from_slice(&p.values);
            }
            let (logits, tape) = trial
                .forward_train(&x, &mut stream(seed, "gradcheck/dropout"))
                .expect("forward on a validated network");
            (tape.kink_signature() == signature).then(|| {
                softmax_xent(&logits.values, &targets, classes)
                    .expect("consistent targets")
                    .0
            })
        },
    ))
}
