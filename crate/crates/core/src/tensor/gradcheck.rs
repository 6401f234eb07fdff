//! Central finite-difference checks of hand-written backward kernels.
//!
//! Checks run in `f64`. The error of one element is
//! `|analytic − numeric| / max(|analytic|, |numeric|, 1e-8)` and each named
//! array reports its worst element.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    batchnorm, batchnorm_backward, conv1d, conv1d_backward, dense, dense_backward, dropout, dropout_backward,
    maxpool1d, maxpool1d_backward, relu, relu_backward, softmax_xent, Conv1dSpec, Matrix, Mode, RunningStats, Shape3,
    Tensor,
};

pub const EPSILON: f64 = 1e-3;
const FLOOR: f64 = 1e-8;

/// A named array under test with its analytic gradient at the current values.
#[derive(Debug, Clone)]
pub struct Probe {
    pub name: String,
    pub values: Vec<f64>,
    pub analytic: Vec<f64>,
}

impl Probe {
    pub fn new(name: impl Into<String>, values: Vec<f64>, analytic: Vec<f64>) -> Self {
        Probe {
            name: name.into(),
            values,
            analytic,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamReport {
    pub name: String,
    pub len: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Elements whose perturbation crossed a non-differentiable point.
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub params: Vec<ParamReport>,
    pub tolerance: f64,
}

impl GradCheckReport {
    pub fn skipped(&self) -> usize {
        self.params.iter().map(|p| p.skipped).sum()
    }

    pub fn checked(&self) -> usize {
        self.params.iter().map(|p| p.len - p.skipped).sum()
    }

    pub fn max_rel_error(&self) -> f64 {
        self.params.iter().map(|p| p.max_rel_error).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.params.iter().all(|p| p.max_rel_error < self.tolerance)
    }

    pub fn worst(&self) -> Option<&ParamReport> {
        self.params
            .iter()
            .max_by(|a, b| a.max_rel_error.total_cmp(&b.max_rel_error))
    }
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for p in &self.params {
            writeln!(
                f,
                "{:<32} n={:<6} max_rel={:.3e} max_abs={:.3e} skipped={}",
                p.name, p.len, p.max_rel_error, p.max_abs_error, p.skipped
            )?;
        }
        write!(
            f,
            "tolerance {:.1e}: {}",
            self.tolerance,
            if self.passed() { "pass" } else { "FAIL" }
        )
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(FLOOR)
}

/// Perturbs every element of every probe by `±epsilon` and compares the
/// central difference of `loss` with the stored analytic gradient.
///
/// Never fails: a probe whose analytic gradient has the wrong length reports
/// an infinite error.
pub fn finite_difference_check<F>(probes: &mut [Probe], epsilon: f64, tolerance: f64, mut loss: F) -> GradCheckReport
where
    F: FnMut(&[Probe]) -> f64,
{
    finite_difference_check_piecewise(probes, epsilon, tolerance, |p| Some(loss(p)))
}

/// Like [`finite_difference_check`] for piecewise-smooth losses: `loss`
/// returns `None` when the perturbed point lies on a different smooth piece
/// than the unperturbed one, and that element is counted as skipped.
pub fn finite_difference_check_piecewise<F>(
    probes: &mut [Probe],
    epsilon: f64,
    tolerance: f64,
    mut loss: F,
) -> GradCheckReport
where
    F: FnMut(&[Probe]) -> Option<f64>,
{
    let mut params = Vec::with_capacity(probes.len());
    for i in 0..probes.len() {
        let len = probes[i].values.len();
        if probes[i].analytic.len() != len {
            params.push(ParamReport {
                name: probes[i].name.clone(),
                len,
                max_rel_error: f64::INFINITY,
                max_abs_error: f64::INFINITY,
                skipped: 0,
            });
            continue;
        }
        let (mut max_rel, mut max_abs, mut skipped) = (0.0f64, 0.0f64, 0);
        for j in 0..len {
            let original = probes[i].values[j];
            probes[i].values[j] = original + epsilon;
            let plus = loss(probes);
            probes[i].values[j] = original - epsilon;
            let minus = loss(probes);
            probes[i].values[j] = original;
            let (Some(plus), Some(minus)) = (plus, minus) else {
                skipped += 1;
                continue;
            };
            let numeric = (plus - minus) / (2.0 * epsilon);
            let analytic = probes[i].analytic[j];
            let rel = relative_error(analytic, numeric);
            max_rel = if rel.is_nan() { f64::INFINITY } else { max_rel.max(rel) };
            max_abs = max_abs.max((analytic - numeric).abs());
        }
        params.push(ParamReport {
            name: probes[i].name.clone(),
            len,
            max_rel_error: max_rel,
            max_abs_error: max_abs,
            skipped,
        });
    }
    GradCheckReport { params, tolerance }
}

/// Layer primitives that [`grad_check`] knows how to exercise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LayerUnderTest {
    Conv1d {
        out_channels: usize,
        filter_len: usize,
        stride: usize,
    },
    BatchNorm,
    Relu,
    Dropout {
        rate: f64,
    },
    MaxPool {
        pool: usize,
        stride: usize,
    },
    /// Time-distributed dense map from `channels` to `out_features`.
    Dense {
        out_features: usize,
    },
    /// Softmax cross-entropy over `channels` classes per position.
    SoftmaxXent,
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn tensor(shape: Shape3, values: &[f64]) -> Tensor<f64> {
    Tensor::new(shape, values.to_vec()).expect("probe length matches shape")
}

/// Random-input finite-difference check of one layer primitive.
///
/// The scalar objective is a fixed random projection of the layer output
/// (or the cross-entropy itself for [`LayerUnderTest::SoftmaxXent`]).
pub fn grad_check(layer: LayerUnderTest, input_shape: Shape3, tolerance: f64, seed: u64) -> GradCheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let s = input_shape;
    match layer {
        LayerUnderTest::Conv1d {
            out_channels,
            filter_len,
            stride,
        } => {
            let spec = Conv1dSpec::new(s.channels, out_channels, filter_len, stride);
            let x = uniform(&mut rng, s.len());
            let w = uniform(&mut rng, spec.weight_len());
            let b = uniform(&mut rng, out_channels);
            let out_shape = Shape3::new(s.batch, out_channels, spec.output_len(s.time));
            let proj = uniform(&mut rng, out_shape.len());
            let grads =
                conv1d_backward(&tensor(s, &x), &w, spec, &tensor(out_shape, &proj)).expect("valid conv shapes");
            let mut probes = vec![
                Probe::new("input", x, grads.input_grad.into_data()),
                Probe::new("weight", w, grads.param_grads[0].data.clone()),
                Probe::new("bias", b, grads.param_grads[1].data.clone()),
            ];
            finite_difference_check(&mut probes, EPSILON, tolerance, |p| {
                let y = conv1d(&tensor(s, &p[0].values), &p[1].values, &p[2].values, spec).expect("valid conv");
                dot(y.data(), &proj)
            })
        }
        LayerUnderTest::BatchNorm => {
            let x = uniform(&mut rng, s.len());
            let gamma: Vec<f64> = (0..s.channels).map(|_| rng.random_range(0.5..1.5)).collect();
            let beta = uniform(&mut rng, s.channels);
            let proj = uniform(&mut rng, s.len());
            let mut rs = RunningStats::identity(s.channels);
            let (_, cache) = batchnorm(&tensor(s, &x), &gamma, &beta, &mut rs, Mode::Train, 0.99, 1e-5)
                .expect("valid batchnorm shapes");
            let grads = batchnorm_backward(&cache.expect("train mode caches"), &gamma, &tensor(s, &proj))
                .expect("valid batchnorm grads");
            let mut probes = vec![
                Probe::new("input", x, grads.input_grad.into_data()),
                Probe::new("gamma", gamma, grads.param_grads[0].data.clone()),
                Probe::new("beta", beta, grads.param_grads[1].data.clone()),
            ];
            finite_difference_check(&mut probes, EPSILON, tolerance, |p| {
                let mut rs = RunningStats::identity(s.channels);
                let (y, _) = batchnorm(
                    &tensor(s, &p[0].values),
                    &p[1].values,
                    &p[2].values,
                    &mut rs,
                    Mode::Train,
                    0.99,
                    1e-5,
                )
                .expect("valid batchnorm");
                dot(y.data(), &proj)
            })
        }
        LayerUnderTest::Relu => {
            // keep every input well clear of the kink at zero
            let x: Vec<f64> = (0..s.len())
                .map(|_| {
                    let v: f64 = rng.random_range(0.05..1.0);
                    if rng.random::<bool>() {
                        v
                    } else {
                        -v
                    }
                })
                .collect();
            let proj = uniform(&mut rng, s.len());
            let dx = relu_backward(&tensor(s, &x), &tensor(s, &proj)).expect("same shapes");
            let mut probes = vec![Probe::new("input", x, dx.into_data())];
            finite_difference_check(&mut probes, EPSILON, tolerance, |p| {
                dot(relu(&tensor(s, &p[0].values)).data(), &proj)
            })
        }
        LayerUnderTest::Dropout { rate } => {
            let x = uniform(&mut rng, s.len());
            let proj = uniform(&mut rng, s.len());
            let mask_seed: u64 = rng.random();
            let (_, mask) = dropout(
                &tensor(s, &x),
                rate,
                &mut ChaCha8Rng::seed_from_u64(mask_seed),
                Mode::Train,
            )
            .expect("valid rate");
            let dx = dropout_backward(&mask, &tensor(s, &proj)).expect("mask matches");
            let mut probes = vec![Probe::new("input", x, dx.into_data())];
            finite_difference_check(&mut probes, EPSILON, tolerance, |p| {
                let (y, _) = dropout(
                    &tensor(s, &p[0].values),
                    rate,
                    &mut ChaCha8Rng::seed_from_u64(mask_seed),
                    Mode::Train,
                )
                .expect("valid rate");
                dot(y.data(), &proj)
            })
        }
        LayerUnderTest::MaxPool { pool, stride } => {
            // distinct values at least 0.01 apart so no window is near a tie
            let mut order: Vec<usize> = (0..s.len()).collect();
            for i in (1..order.len()).rev() {
                order.swap(i, rng.random_range(0..=i));
            }
            let x: Vec<f64> = order.iter().map(|&r| r as f64 * 0.01 - 0.5).collect();
            let (y, idx) = maxpool1d(&tensor(s, &x), pool, stride).expect("valid pool");
            let proj = uniform(&mut rng, y.data().len());
            let out_shape = y.shape();
            let dx = maxpool1d_backward(&idx, &tensor(out_shape, &proj), s).expect("valid indices");
            let mut probes = vec![Probe::new("input", x, dx.into_data())];
            finite_difference_check(&mut probes, EPSILON, tolerance, |p| {
                let (y, _) = maxpool1d(&tensor(s, &p[0].values), pool, stride).expect("valid pool");
                dot(y.data(), &proj)
            })
        }
        LayerUnderTest::Dense { out_features } => {
            let (rows, fin) = (s.batch * s.time, s.channels);
            let x = uniform(&mut rng, rows * fin);
            let w = uniform(&mut rng, out_features * fin);
            let b = uniform(&mut rng, out_features);
            let proj = uniform(&mut rng, rows * out_features);
            let m = |v: &[f64], c: usize| Matrix::new(v.len() / c, c, v.to_vec()).expect("whole rows");
            let grads = dense_backward(&m(&x, fin), &w, &m(&proj, out_features)).expect("valid dense");
            let mut probes = vec![
                Probe::new("input", x, grads.input_grad.into_data()),
                Probe::new("weight", w, grads.param_grads[0].data.clone()),
                Probe::new("bias", b, grads.param_grads[1].data.clone()),
            ];
            finite_difference_check(&mut probes, EPSILON, tolerance, |p| {
                let y = dense(&m(&p[0].values, fin), &p[1].values, &p[2].values).expect("valid dense");
                dot(y.data(), &proj)
            })
        }
        LayerUnderTest::SoftmaxXent => {
            let (rows, classes) = (s.batch * s.time, s.channels);
            let logits: Vec<f64> = (0..rows * classes).map(|_| rng.random_range(-3.0..3.0)).collect();
            let targets: Vec<usize> = (0..rows).map(|_| rng.random_range(0..classes)).collect();
            let m = |v: &[f64]| Matrix::new(rows, classes, v.to_vec()).expect("whole rows");
            let (_, grad) = softmax_xent(&m(&logits), &targets, classes).expect("valid targets");
            let mut probes = vec![Probe::new("logits", logits, grad.into_data())];
            finite_difference_check(&mut probes, EPSILON, tolerance, |p| {
                softmax_xent(&m(&p[0].values), &targets, classes)
                    .expect("valid targets")
                    .0
            })
        }
    }
}
