//! The pre-activation residual network: plan, initialization, forward and
//! backward passes, and record-level prediction.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::config::NetworkConfig;
use super::params::{Gradients, ParamKind, Parameters};
use crate::data::{pad_to_stride, robust_normalize, LabelGrid, RhythmClass, CLASS_COUNT, LABEL_STRIDE};
use crate::error::{Error, Result};
use crate::tensor::{
    batchnorm, batchnorm_backward, conv1d, conv1d_backward, dense, dense_backward, dropout, dropout_backward,
    from_rows, log_softmax_rows, maxpool1d, maxpool1d_backward, relu, relu_backward, to_rows, BatchNormCache,
    Conv1dSpec, DropoutMask, Matrix, Mode, Real, RunningStats, Shape3, Tensor,
};

pub const BN_MOMENTUM: f64 = 0.99;
pub const BN_EPSILON: f64 = 1e-5;

#[derive(Debug, Clone, Copy)]
struct ConvSlot {
    weight: usize,
    bias: usize,
    spec: Conv1dSpec,
}

#[derive(Debug, Clone, Copy)]
struct BnSlot {
    gamma: usize,
    beta: usize,
    mean: usize,
    var: usize,
    /// Count of train-mode updates folded into the running statistics.
    updates: usize,
}

/// `[BN → ReLU → [dropout] →] conv`.
#[derive(Debug, Clone, Copy)]
struct Unit {
    bn: Option<BnSlot>,
    dropout: bool,
    conv: ConvSlot,
}

#[derive(Debug, Clone)]
struct BlockPlan {
    in_channels: usize,
    out_channels: usize,
    subsample: bool,
    units: Vec<Unit>,
}

#[derive(Debug, Clone)]
struct Plan {
    stem: ConvSlot,
    stem_bn: BnSlot,
    blocks: Vec<BlockPlan>,
    head_bn: BnSlot,
    dense_weight: usize,
    dense_bias: usize,
}

fn conv_slot<T: Real>(params: &mut Parameters<T>, prefix: &str, spec: Conv1dSpec) -> ConvSlot {
    let weight = params.push(
        format!("{prefix}.weight"),
        vec![spec.out_channels, spec.in_channels, spec.filter_len],
        ParamKind::Learnable,
        T::zero(),
    );
    let bias = params.push(
        format!("{prefix}.bias"),
        vec![spec.out_channels],
        ParamKind::Learnable,
        T::zero(),
    );
    ConvSlot { weight, bias, spec }
}

fn bn_slot<T: Real>(params: &mut Parameters<T>, prefix: &str, channels: usize) -> BnSlot {
    BnSlot {
        gamma: params.push(
            format!("{prefix}.gamma"),
            vec![channels],
            ParamKind::Learnable,
            T::one(),
        ),
        beta: params.push(
            format!("{prefix}.beta"),
            vec![channels],
            ParamKind::Learnable,
            T::zero(),
        ),
        mean: params.push(
            format!("{prefix}.running_mean"),
            vec![channels],
            ParamKind::Running,
            T::zero(),
        ),
        var: params.push(
            format!("{prefix}.running_var"),
            vec![channels],
            ParamKind::Running,
            T::one(),
        ),
        updates: params.push(format!("{prefix}.updates"), vec![1], ParamKind::Running, T::zero()),
    }
}

fn make_plan<T: Real>(config: &NetworkConfig) -> (Plan, Parameters<T>) {
    let mut params = Parameters::default();
    let k = config.filter_len;
    let base = config.base_filters;
    let stem = conv_slot(&mut params, "stem.conv", Conv1dSpec::new(1, base, k, 1));
    let stem_bn = bn_slot(&mut params, "stem.bn", base);
    let mut blocks = Vec::with_capacity(config.residual_blocks);
    let mut channels = base;
    for i in 0..config.residual_blocks {
        let out = config.block_channels(i);
        let subsample = config.block_subsamples(i);
        let mut units = Vec::with_capacity(config.convs_per_block);
        for j in 0..config.convs_per_block {
            let cin = if j == 0 { channels } else { out };
            let stride = if j == 0 && subsample { 2 } else { 1 };
            let bn = if i == 0 && j == 0 {
                None
            } else {
                Some(bn_slot(&mut params, &format!("block{i:02}.bn{j}"), cin))
            };
            let conv = conv_slot(
                &mut params,
                &format!("block{i:02}.conv{j}"),
                Conv1dSpec::new(cin, out, k, stride),
            );
            units.push(Unit {
                bn,
                dropout: j > 0 && config.dropout_rate > 0.0,
                conv,
            });
        }
        blocks.push(BlockPlan {
            in_channels: channels,
            out_channels: out,
            subsample,
            units,
        });
        channels = out;
    }
    let head_bn = bn_slot(&mut params, "head.bn", channels);
    let dense_weight = params.push(
        "head.dense.weight".into(),
        vec![config.class_count, channels],
        ParamKind::Learnable,
        T::zero(),
    );
    let dense_bias = params.push(
        "head.dense.bias".into(),
        vec![config.class_count],
        ParamKind::Learnable,
        T::zero(),
    );
    let plan = Plan {
        stem,
        stem_bn,
        blocks,
        head_bn,
        dense_weight,
        dense_bias,
    };
    (plan, params)
}

#[derive(Debug, Clone)]
struct UnitTape<T> {
    bn: Option<BatchNormCache<T>>,
    /// ReLU output when dropout follows it; otherwise it equals `conv_input`.
    act: Option<Tensor<T>>,
    mask: Option<DropoutMask<T>>,
    conv_input: Tensor<T>,
}

#[derive(Debug, Clone)]
struct BlockTape<T> {
    input_shape: Shape3,
    pool_indices: Option<Vec<usize>>,
    units: Vec<UnitTape<T>>,
}

/// Activations saved by a train-mode forward pass for [`Network::backward`].
#[derive(Debug, Clone)]
pub struct Tape<T> {
    input: Tensor<T>,
    stem_bn: BatchNormCache<T>,
    stem_act: Tensor<T>,
    blocks: Vec<BlockTape<T>>,
    head_bn: BatchNormCache<T>,
    head_act: Tensor<T>,
}

impl<T: Real> Tape<T> {
    /// Hash of every ReLU sign pattern and max-pool winner in the pass. Two
    /// passes with equal signatures lie on the same smooth piece of the loss.
    pub fn kink_signature(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut h = std::collections::hash_map::DefaultHasher::new();
        let mut signs = |x: &Tensor<T>| {
            for v in x.data() {
                (*v > T::zero()).hash(&mut h);
            }
        };
        signs(&self.stem_act);
        signs(&self.head_act);
        for block in &self.blocks {
            for unit in &block.units {
                if unit.bn.is_some() {
                    signs(unit.act.as_ref().unwrap_or(&unit.conv_input));
                }
            }
        }
        for block in &self.blocks {
            block.pool_indices.hash(&mut h);
        }
        h.finish()
    }
}

/// Per-position class scores, one row per `(item, position)` in item-major
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits<T> {
    pub batch: usize,
    pub positions: usize,
    pub values: Matrix<T>,
}

/// How a forward pass treats batch norm and dropout.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pass {
    /// Batch statistics, dropout on, tape kept, running statistics updated.
    Train,
    /// Running statistics, dropout off.
    Eval,
    /// Batch statistics, dropout off; only the batch statistics are reported.
    Calibrate,
}

impl Pass {
    fn bn_mode(self) -> Mode {
        match self {
            Pass::Eval => Mode::Eval,
            Pass::Train | Pass::Calibrate => Mode::Train,
        }
    }

    fn dropout_mode(self) -> Mode {
        match self {
            Pass::Train => Mode::Train,
            Pass::Eval | Pass::Calibrate => Mode::Eval,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Network<T: Real = f32> {
    config: NetworkConfig,
    plan: Plan,
    params: Parameters<T>,
}

fn pad_channels<T: Real>(x: &Tensor<T>, channels: usize) -> Tensor<T> {
    let s = x.shape();
    if s.channels == channels {
        return x.clone();
    }
    let mut out = Tensor::zeros(Shape3::new(s.batch, channels, s.time));
    let n = s.channels * s.time;
    for b in 0..s.batch {
        out.item_mut(b)[..n].copy_from_slice(x.item(b));
    }
    out
}

fn slice_channels<T: Real>(x: &Tensor<T>, channels: usize) -> Tensor<T> {
    let s = x.shape();
    if s.channels == channels {
        return x.clone();
    }
    let n = channels * s.time;
    let mut data = Vec::with_capacity(s.batch * n);
    for b in 0..s.batch {
        data.extend_from_slice(&x.item(b)[..n]);
    }
    Tensor::new(Shape3::new(s.batch, channels, s.time), data).expect("sliced shape matches data")
}

impl<T: Real> Network<T> {
    /// He-normal convolutions, unit batch-norm scale, zero biases and a
    /// zero-initialized classification head (uniform initial predictions).
    pub fn build<R: Rng + ?Sized>(config: &NetworkConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let (plan, mut params) = make_plan::<T>(config);
        let mut convs = vec![plan.stem];
        convs.extend(plan.blocks.iter().flat_map(|b| b.units.iter().map(|u| u.conv)));
        debug_assert_eq!(convs.len(), config.conv_layer_count());
        for slot in convs {
            let fan_in = (slot.spec.in_channels * slot.spec.filter_len) as f64;
            let normal = Normal::new(0.0, (2.0 / fan_in).sqrt()).expect("positive std");
            for w in params.get_mut(slot.weight) {
                *w = T::from_f64(normal.sample(rng));
            }
        }
        let net = Network {
            config: config.clone(),
            plan,
            params,
        };
        net.check_structure()?;
        Ok(net)
    }

    /// Rebuilds a network from stored parameters, validating the layout.
    pub fn from_parameters(config: &NetworkConfig, params: Parameters<T>) -> Result<Self> {
        config.validate()?;
        let (plan, mut layout) = make_plan::<T>(config);
        layout.load_from(params)?;
        let net = Network {
            config: config.clone(),
            plan,
            params: layout,
        };
        net.check_structure()?;
        Ok(net)
    }

    fn check_structure(&self) -> Result<()> {
        let c = &self.config;
        let convs = 1 + self.plan.blocks.iter().map(|b| b.units.len()).sum::<usize>();
        let stages = self.plan.blocks.iter().filter(|b| b.subsample).count();
        let last = self.plan.blocks.last().map_or(c.base_filters, |b| b.out_channels);
        let expected_last = if c.residual_blocks == 0 {
            c.base_filters
        } else {
            c.block_channels(c.residual_blocks - 1)
        };
        if convs != c.conv_layer_count() || stages != c.subsampling_stages() || last != expected_last {
            return Err(Error::Config(format!(
                "network plan has {convs} convs, {stages} subsampling stages and {last} final channels"
            )));
        }
        Ok(())
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn params(&self) -> &Parameters<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut Parameters<T> {
        &mut self.params
    }

    pub fn into_parameters(self) -> Parameters<T> {
        self.params
    }

    pub fn cast<U: Real>(&self) -> Network<U> {
        Network {
            config: self.config.clone(),
            plan: self.plan.clone(),
            params: self.params.cast(),
        }
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let s = x.shape();
        let stride = self.config.output_stride();
        if s.channels != 1 {
            return Err(Error::InvalidInput(format!(
                "network input must have 1 channel, got {}",
                s.channels
            )));
        }
        if s.batch == 0 || s.time == 0 || !s.time.is_multiple_of(stride) {
            return Err(Error::InvalidInput(format!(
                "input length {} must be a positive multiple of the output stride {stride}",
                s.time
            )));
        }
        Ok(())
    }

    fn bn(
        &self,
        x: &Tensor<T>,
        slot: BnSlot,
        pass: Pass,
        updates: &mut Vec<(BnSlot, RunningStats<T>)>,
    ) -> Result<(Tensor<T>, Option<BatchNormCache<T>>)> {
        let p = &self.params;
        let mut running = RunningStats {
            mean: p.get(slot.mean).to_vec(),
            var: p.get(slot.var).to_vec(),
        };
        // The first update replaces the initial statistics outright; a
        // calibration pass reports the raw batch statistics.
        let momentum = if pass == Pass::Calibrate || p.get(slot.updates)[0] == T::zero() {
            0.0
        } else {
            BN_MOMENTUM
        };
        let mode = pass.bn_mode();
        let out = batchnorm(
            x,
            p.get(slot.gamma),
            p.get(slot.beta),
            &mut running,
            mode,
            momentum,
            BN_EPSILON,
        )?;
        if mode == Mode::Train {
            updates.push((slot, running));
        }
        Ok(out)
    }

    fn conv(&self, x: &Tensor<T>, slot: ConvSlot) -> Result<Tensor<T>> {
        conv1d(x, self.params.get(slot.weight), self.params.get(slot.bias), slot.spec)
    }

    fn forward_impl<R: Rng + ?Sized>(
        &self,
        x: &Tensor<T>,
        pass: Pass,
        rng: &mut R,
        updates: &mut Vec<(BnSlot, RunningStats<T>)>,
    ) -> Result<(Logits<T>, Option<Tape<T>>)> {
        self.check_input(x)?;
        let train = pass == Pass::Train;
        let plan = &self.plan;
        let stem_out = self.conv(x, plan.stem)?;
        let (bn_out, stem_bn) = self.bn(&stem_out, plan.stem_bn, pass, updates)?;
        drop(stem_out);
        let mut h = relu(&bn_out);
        drop(bn_out);
        let stem_act = if train { Some(h.clone()) } else { None };
        let mut block_tapes = Vec::with_capacity(plan.blocks.len());
        for block in &plan.blocks {
            let input_shape = h.shape();
            let (shortcut, pool_indices) = if block.subsample {
                let (pooled, idx) = maxpool1d(&h, 2, 2)?;
                (pooled, Some(idx))
            } else {
                (h.clone(), None)
            };
            let shortcut = pad_channels(&shortcut, block.out_channels);
            let mut unit_tapes = Vec::with_capacity(block.units.len());
            let mut z = h;
            for unit in &block.units {
                let mut bn_cache = None;
                let mut act = None;
                let mut mask = None;
                if let Some(slot) = unit.bn {
                    let (normed, cache) = self.bn(&z, slot, pass, updates)?;
                    bn_cache = cache;
                    z = relu(&normed);
                    if unit.dropout {
                        let (dropped, m) = dropout(&z, self.config.dropout_rate, rng, pass.dropout_mode())?;
                        if train {
                            act = Some(std::mem::replace(&mut z, dropped));
                            mask = Some(m);
                        } else {
                            z = dropped;
                        }
                    }
                }
                let out = self.conv(&z, unit.conv)?;
                if train {
                    unit_tapes.push(UnitTape {
                        bn: bn_cache,
                        act,
                        mask,
                        conv_input: z,
                    });
                }
                z = out;
            }
            z.add_assign(&shortcut)?;
            h = z;
            if train {
                block_tapes.push(BlockTape {
                    input_shape,
                    pool_indices,
                    units: unit_tapes,
                });
            }
        }
        let (normed, head_bn) = self.bn(&h, plan.head_bn, pass, updates)?;
        drop(h);
        let act = relu(&normed);
        let s = act.shape();
        let values = dense(
            &to_rows(&act),
            self.params.get(plan.dense_weight),
            self.params.get(plan.dense_bias),
        )?;
        let logits = Logits {
            batch: s.batch,
            positions: s.time,
            values,
        };
        let tape = if train {
            Some(Tape {
                input: x.clone(),
                stem_bn: stem_bn.expect("train mode returns a cache"),
                stem_act: stem_act.expect("train mode keeps the stem activation"),
                blocks: block_tapes,
                head_bn: head_bn.expect("train mode returns a cache"),
                head_act: act,
            })
        } else {
            None
        };
        Ok((logits, tape))
    }

    /// Eval-mode forward pass: running batch-norm statistics, no dropout.
    pub fn forward(&self, x: &Tensor<T>) -> Result<Logits<T>> {
        let mut unused = Vec::new();
        // Eval mode never draws from the generator.
        let mut rng = crate::rng::stream(0, "eval");
        Ok(self.forward_impl(x, Pass::Eval, &mut rng, &mut unused)?.0)
    }

    /// Train-mode forward pass. Updates the running batch-norm statistics and
    /// returns the tape needed by [`Network::backward`].
    pub fn forward_train<R: Rng + ?Sized>(&mut self, x: &Tensor<T>, rng: &mut R) -> Result<(Logits<T>, Tape<T>)> {
        let mut updates = Vec::new();
        let (logits, tape) = self.forward_impl(x, Pass::Train, rng, &mut updates)?;
        for (slot, stats) in updates {
            self.params.get_mut(slot.mean).copy_from_slice(&stats.mean);
            self.params.get_mut(slot.var).copy_from_slice(&stats.var);
            let count = &mut self.params.get_mut(slot.updates)[0];
            *count += T::one();
        }
        Ok((logits, tape.expect("train mode returns a tape")))
    }

    /// Replaces every batch-norm layer's running statistics with population
    /// estimates over `inputs`: the size-weighted mean of per-batch means and
    /// unbiased variances, measured with dropout off and each layer
    /// normalizing by its batch statistics.
    pub fn recalibrate_batchnorm(&mut self, inputs: &[Tensor<T>]) -> Result<()> {
        if inputs.is_empty() {
            return Err(Error::InvalidInput(
                "batch-norm recalibration needs at least one batch".into(),
            ));
        }
        let mut rng = crate::rng::stream(0, "calibrate");
        let mut acc: Vec<(BnSlot, Vec<f64>, Vec<f64>)> = Vec::new();
        let mut total = 0.0;
        for x in inputs {
            let mut stats = Vec::new();
            self.forward_impl(x, Pass::Calibrate, &mut rng, &mut stats)?;
            let weight = (x.shape().batch * x.shape().time) as f64;
            total += weight;
            if acc.is_empty() {
                acc = stats
                    .iter()
                    .map(|(slot, s)| (*slot, vec![0.0; s.mean.len()], vec![0.0; s.var.len()]))
                    .collect();
            }
            for ((_, mean, var), (_, s)) in acc.iter_mut().zip(&stats) {
                for (m, v) in mean.iter_mut().zip(&s.mean) {
                    *m += weight * v.as_f64();
                }
                for (m, v) in var.iter_mut().zip(&s.var) {
                    *m += weight * v.as_f64();
                }
            }
        }
        for (slot, mean, var) in acc {
            for (dst, m) in self.params.get_mut(slot.mean).iter_mut().zip(mean) {
                *dst = T::from_f64(m / total);
            }
            for (dst, v) in self.params.get_mut(slot.var).iter_mut().zip(var) {
                *dst = T::from_f64(v / total);
            }
            let count = &mut self.params.get_mut(slot.updates)[0];
            if *count == T::zero() {
                *count = T::one();
            }
        }
        Ok(())
    }

    fn bn_backward(
        &self,
        cache: &BatchNormCache<T>,
        slot: BnSlot,
        d: &Tensor<T>,
        grads: &mut Gradients<T>,
    ) -> Result<Tensor<T>> {
        let g = batchnorm_backward(cache, self.params.get(slot.gamma), d)?;
        for pg in &g.param_grads {
            let idx = if pg.name == "gamma" { slot.gamma } else { slot.beta };
            grads.accumulate(idx, &pg.data);
        }
        Ok(g.input_grad)
    }

    fn conv_backward(
        &self,
        input: &Tensor<T>,
        slot: ConvSlot,
        d: &Tensor<T>,
        grads: &mut Gradients<T>,
    ) -> Result<Tensor<T>> {
        let g = conv1d_backward(input, self.params.get(slot.weight), slot.spec, d)?;
        for pg in &g.param_grads {
            let idx = if pg.name == "weight" { slot.weight } else { slot.bias };
            grads.accumulate(idx, &pg.data);
        }
        Ok(g.input_grad)
    }

    /// Parameter gradients given the gradient of the loss with respect to
    /// the logits.
    pub fn backward(&self, tape: &Tape<T>, logit_grad: &Matrix<T>) -> Result<Gradients<T>> {
        let plan = &self.plan;
        if tape.blocks.len() != plan.blocks.len() {
            return Err(Error::State(format!(
                "tape holds {} blocks, network has {}",
                tape.blocks.len(),
                plan.blocks.len()
            )));
        }
        let mut grads = self.params.zero_grads();
        let s = tape.head_act.shape();
        let dg = dense_backward(&to_rows(&tape.head_act), self.params.get(plan.dense_weight), logit_grad)?;
        for pg in &dg.param_grads {
            let idx = if pg.name == "weight" {
                plan.dense_weight
            } else {
                plan.dense_bias
            };
            grads.accumulate(idx, &pg.data);
        }
        let d = from_rows(&dg.input_grad, s.batch, s.time)?;
        let d = relu_backward(&tape.head_act, &d)?;
        let mut d = self.bn_backward(&tape.head_bn, plan.head_bn, &d, &mut grads)?;
        for (block, bt) in plan.blocks.iter().zip(&tape.blocks).rev() {
            let mut d_short = slice_channels(&d, block.in_channels);
            if let Some(idx) = &bt.pool_indices {
                d_short = maxpool1d_backward(idx, &d_short, bt.input_shape)?;
            }
            for (unit, ut) in block.units.iter().zip(&bt.units).rev() {
                d = self.conv_backward(&ut.conv_input, unit.conv, &d, &mut grads)?;
                if let Some(mask) = &ut.mask {
                    d = dropout_backward(mask, &d)?;
                }
                if let Some(slot) = unit.bn {
                    let act = ut.act.as_ref().unwrap_or(&ut.conv_input);
                    d = relu_backward(act, &d)?;
                    let cache = ut
                        .bn
                        .as_ref()
                        .ok_or_else(|| Error::State("missing batchnorm cache".into()))?;
                    d = self.bn_backward(cache, slot, &d, &mut grads)?;
                }
            }
            d.add_assign(&d_short)?;
        }
        let d = relu_backward(&tape.stem_act, &d)?;
        let d = self.bn_backward(&tape.stem_bn, plan.stem_bn, &d, &mut grads)?;
        self.conv_backward(&tape.input, plan.stem, &d, &mut grads)?;
        Ok(grads)
    }

    /// Rhythm label for every 256-sample window of a raw record.
    pub fn predict_record(&self, samples: &[f32]) -> Result<LabelGrid> {
        let group = self.reporting_group()?;
        if self.config.class_count != CLASS_COUNT {
            return Err(Error::Config(format!(
                "prediction needs {CLASS_COUNT} output classes, network has {}",
                self.config.class_count
            )));
        }
        let x = pad_to_stride(&robust_normalize(samples)?, LABEL_STRIDE);
        let time = x.len();
        let input = Tensor::new(
            Shape3::new(1, 1, time),
            x.into_iter().map(|v| T::from_f64(v as f64)).collect(),
        )?;
        let logits = self.forward(&input)?;
        let labels = labels_from_logits(&logits.values, group)?
            .into_iter()
            .map(|i| RhythmClass::from_index(i).expect("class index below CLASS_COUNT"))
            .collect();
        Ok(LabelGrid {
            stride: LABEL_STRIDE,
            labels,
        })
    }

    /// Network positions per 256-sample reporting window.
    pub fn reporting_group(&self) -> Result<usize> {
        let stride = self.config.output_stride();
        if stride > LABEL_STRIDE || !LABEL_STRIDE.is_multiple_of(stride) {
            return Err(Error::Config(format!(
                "output stride {stride} does not divide the {LABEL_STRIDE}-sample label grid"
            )));
        }
        Ok(LABEL_STRIDE / stride)
    }
}

/// Argmax class per group of `group` consecutive rows, scoring each class by
/// its summed log-probability. Ties go to the lowest class index.
pub fn labels_from_logits<T: Real>(logits: &Matrix<T>, group: usize) -> Result<Vec<usize>> {
    if group == 0 || !logits.rows().is_multiple_of(group) {
        return Err(Error::Contract(format!(
            "{} logit rows cannot be grouped by {group}",
            logits.rows()
        )));
    }
    let logp = log_softmax_rows(logits);
    let classes = logits.cols();
    let mut out = Vec::with_capacity(logits.rows() / group);
    for g in 0..logits.rows() / group {
        let mut score = vec![0.0f64; classes];
        for r in g * group..(g + 1) * group {
            for (s, &v) in score.iter_mut().zip(logp.row(r)) {
                *s += v;
            }
        }
        let mut best = 0;
        for (k, &v) in score.iter().enumerate() {
            if v > score[best] {
                best = k;
            }
        }
        out.push(best);
    }
    Ok(out)
}
