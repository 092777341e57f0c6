//! Fully connected ReLU network trained with MSE loss and Adam.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::channel::rng_stream;
use crate::detector::SlidingWindowDataset;
use crate::error::{Error, Result};
use crate::numeric::Real;

/// Hidden-layer widths of the detector network.
pub const HIDDEN_WIDTHS: [usize; 4] = [320, 160, 80, 40];

/// One affine layer, `z = W a + b` with `W` shaped `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub weights: Array2<T>,
    pub biases: Array1<T>,
}

impl<T: Real> Layer<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weights: Array2::zeros((outputs, inputs)),
            biases: Array1::zeros(outputs),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weights.ncols()
    }

    pub fn outputs(&self) -> usize {
        self.weights.nrows()
    }

    fn same_shape(&self, other: &Self) -> bool {
        self.weights.dim() == other.weights.dim() && self.biases.len() == other.biases.len()
    }
}

/// Multilayer perceptron: ReLU on every hidden layer, identity on the output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    layers: Vec<Layer<T>>,
}

impl<T: Real> Mlp<T> {
    /// Random network with zero biases and fan-in scaled uniform weights.
    pub fn new(sizes: &[usize], seed: u64) -> Result<Self> {
        check_sizes(sizes)?;
        let mut rng = rng_stream(seed, 0x6e65_7477);
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                // He-uniform for rectified layers, LeCun-uniform for the linear output.
                let gain = if i == last { 3.0 } else { 6.0 };
                let bound = (gain / fan_in as f64).sqrt();
                let weights = Array2::from_shape_fn((fan_out, fan_in), |_| T::lit(rng.random_range(-bound..bound)));
                Layer {
                    weights,
                    biases: Array1::zeros(fan_out),
                }
            })
            .collect();
        Ok(Self { layers })
    }

    /// Detector architecture `[L, 320, 160, 80, 40, m]`.
    pub fn detector(window_len: usize, step: usize, seed: u64) -> Result<Self> {
        Self::new(&detector_sizes(window_len, step), seed)
    }

    pub fn zeros(sizes: &[usize]) -> Result<Self> {
        check_sizes(sizes)?;
        Ok(Self {
            layers: sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect(),
        })
    }

    /// Assembles a network, checking that consecutive layers chain and every
    /// parameter is finite.
    pub fn from_layers(layers: Vec<Layer<T>>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::ShapeMismatch("network needs at least one layer".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.biases.len() != l.outputs() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i}: {} biases for {} outputs",
                    l.biases.len(),
                    l.outputs()
                )));
            }
            if i > 0 && layers[i - 1].outputs() != l.inputs() {
                return Err(Error::ShapeMismatch(format!(
                    "layer {i} expects {} inputs, previous layer emits {}",
                    l.inputs(),
                    layers[i - 1].outputs()
                )));
            }
        }
        let net = Self { layers };
        if !net.is_finite() {
            return Err(Error::Domain("non-finite network parameter".into()));
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    /// Neuron counts per layer, input first.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.input_len()];
        s.extend(self.layers.iter().map(Layer::outputs));
        s
    }

    pub fn input_len(&self) -> usize {
        self.layers[0].inputs()
    }

    pub fn output_len(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().chain(l.biases.iter()).all(|v| v.is_finite()))
    }

    /// Converts every parameter to another scalar type.
    pub fn cast<U: Real>(&self) -> Mlp<U> {
        Mlp {
            layers: self
                .layers
                .iter()
                .map(|l| Layer {
                    weights: l.weights.mapv(|v| U::lit(v.to_f64_lossless())),
                    biases: l.biases.mapv(|v| U::lit(v.to_f64_lossless())),
                })
                .collect(),
        }
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>> {
        let x = ArrayView2::from_shape((1, input.len()), input).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
        Ok(self.forward_batch(x)?.into_raw_vec_and_offset().0)
    }

    /// Row-wise forward pass over a `batch x inputs` matrix.
    pub fn forward_batch(&self, x: ArrayView2<T>) -> Result<Array2<T>> {
        self.check_input(x.ncols())?;
        let last = self.layers.len() - 1;
        let mut a = affine(x, &self.layers[0]);
        if last > 0 {
            relu_inplace(&mut a);
        }
        for (i, layer) in self.layers.iter().enumerate().skip(1) {
            a = affine(a.view(), layer);
            if i != last {
                relu_inplace(&mut a);
            }
        }
        Ok(a)
    }

    fn check_input(&self, n: usize) -> Result<()> {
        if n != self.input_len() {
            return Err(Error::ShapeMismatch(format!(
                "network expects {} inputs, got {n}",
                self.input_len()
            )));
        }
        Ok(())
    }
}

/// Layer sizes of the detector network.
pub fn detector_sizes(window_len: usize, step: usize) -> Vec<usize> {
    let mut s = vec![window_len];
    s.extend(HIDDEN_WIDTHS);
    s.push(step);
    s
}

fn check_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 || sizes.contains(&0) {
        return Err(Error::ShapeMismatch(format!("invalid layer sizes {sizes:?}")));
    }
    Ok(())
}

fn affine<T: Real>(a: ArrayView2<T>, layer: &Layer<T>) -> Array2<T> {
    let mut z = a.dot(&layer.weights.t());
    z += &layer.biases;
    z
}

fn relu_inplace<T: Real>(a: &mut Array2<T>) {
    a.mapv_inplace(|v| if v > T::zero() { v } else { T::zero() });
}

/// Parameter gradients, shaped like the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Layer<T>>,
}

/// MSE loss (mean over the outputs) and its gradients for one sample.
pub fn backward<T: Real>(net: &Mlp<T>, input: &[T], target: &[T]) -> Result<(T, Gradients<T>)> {
    let x = ArrayView2::from_shape((1, input.len()), input).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    let y = ArrayView2::from_shape((1, target.len()), target).map_err(|e| Error::ShapeMismatch(e.to_string()))?;
    backward_batch(net, x, y)
}

/// Batch-mean MSE loss and gradients. The rectifier derivative at zero is 0.
pub fn backward_batch<T: Real>(net: &Mlp<T>, x: ArrayView2<T>, target: ArrayView2<T>) -> Result<(T, Gradients<T>)> {
    net.check_input(x.ncols())?;
    if target.ncols() != net.output_len() || target.nrows() != x.nrows() {
        return Err(Error::ShapeMismatch(format!(
            "target is {:?}, network emits {} values for {} rows",
            target.dim(),
            net.output_len(),
            x.nrows()
        )));
    }
    if x.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let last = net.layers.len() - 1;
    // Pre-activations of every layer; activations are recomputed on the fly.
    let mut pre: Vec<Array2<T>> = Vec::with_capacity(net.layers.len());
    let mut acts: Vec<Array2<T>> = Vec::with_capacity(net.layers.len());
    for (i, layer) in net.layers.iter().enumerate() {
        let input = if i == 0 { x } else { acts[i - 1].view() };
        let z = affine(input, layer);
        let mut a = z.clone();
        if i != last {
            relu_inplace(&mut a);
        }
        pre.push(z);
        acts.push(a);
    }
    let batch = T::from_usize_exact(x.nrows());
    let m = T::from_usize_exact(net.output_len());
    let mut delta = &acts[last] - &target;
    let loss = delta.iter().map(|&d| d * d).sum::<T>() / (m * batch);
    delta *= T::lit(2.0) / (m * batch);

    let mut grads: Vec<Layer<T>> = Vec::with_capacity(net.layers.len());
    for i in (0..net.layers.len()).rev() {
        if i != last {
            ndarray::Zip::from(&mut delta).and(&pre[i]).for_each(|d, &z| {
                if z <= T::zero() {
                    *d = T::zero();
                }
            });
        }
        let input = if i == 0 { x } else { acts[i - 1].view() };
        let dw = delta.t().dot(&input);
        let db = delta.sum_axis(Axis(0));
        if i > 0 {
            delta = delta.dot(&net.layers[i].weights);
        }
        grads.push(Layer {
            weights: dw,
            biases: db,
        });
    }
    grads.reverse();
    Ok((loss, Gradients { layers: grads }))
}

/// Mean MSE over a dataset, evaluated in chunks.
pub fn evaluate_loss<T: Real>(net: &Mlp<T>, x: ArrayView2<T>, target: ArrayView2<T>) -> Result<f64> {
    if x.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for start in (0..x.nrows()).step_by(4096) {
        let end = (start + 4096).min(x.nrows());
        let out = net.forward_batch(x.slice(ndarray::s![start..end, ..]))?;
        let t = target.slice(ndarray::s![start..end, ..]);
        total += out
            .iter()
            .zip(t.iter())
            .map(|(&o, &t)| {
                let d = (o - t).to_f64_lossless();
                d * d
            })
            .sum::<f64>();
    }
    Ok(total / (x.nrows() * net.output_len()) as f64)
}

/// Adam moments and hyper-parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first: Vec<Layer<T>>,
    pub second: Vec<Layer<T>>,
    pub step: u64,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    pub learning_rate: T,
}

impl<T: Real> AdamState<T> {
    /// Zeroed moments with `beta1 = 0.9`, `beta2 = 0.999`, `epsilon = 1e-8`.
    pub fn new(net: &Mlp<T>, learning_rate: T) -> Self {
        let zeros: Vec<Layer<T>> = net
            .layers
            .iter()
            .map(|l| Layer::zeros(l.inputs(), l.outputs()))
            .collect();
        Self {
            first: zeros.clone(),
            second: zeros,
            step: 0,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            epsilon: T::lit(1e-8),
            learning_rate,
        }
    }
}

/// One bias-corrected Adam update, in place.
pub fn adam_step<T: Real>(net: &mut Mlp<T>, grads: &Gradients<T>, state: &mut AdamState<T>) -> Result<()> {
    let ok = grads.layers.len() == net.layers.len()
        && state.first.len() == net.layers.len()
        && net
            .layers
            .iter()
            .zip(&grads.layers)
            .zip(state.first.iter().zip(&state.second))
            .all(|((p, g), (m, v))| p.same_shape(g) && p.same_shape(m) && p.same_shape(v));
    if !ok {
        return Err(Error::ShapeMismatch(
            "gradients or optimizer state do not match the network".into(),
        ));
    }
    state.step += 1;
    let one = T::one();
    let (b1, b2) = (state.beta1, state.beta2);
    let t = state.step as i32;
    let c1 = one - b1.powi(t);
    let c2 = one - b2.powi(t);
    let lr = state.learning_rate;
    let eps = state.epsilon;
    let update = |p: &mut T, g: T, m: &mut T, v: &mut T| {
        *m = b1 * *m + (one - b1) * g;
        *v = b2 * *v + (one - b2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    };
    for (((p, g), m), v) in net
        .layers
        .iter_mut()
        .zip(&grads.layers)
        .zip(state.first.iter_mut())
        .zip(state.second.iter_mut())
    {
        ndarray::Zip::from(&mut p.weights)
            .and(&g.weights)
            .and(&mut m.weights)
            .and(&mut v.weights)
            .for_each(|p, &g, m, v| update(p, g, m, v));
        ndarray::Zip::from(&mut p.biases)
            .and(&g.biases)
            .and(&mut m.biases)
            .and(&mut v.biases)
            .for_each(|p, &g, m, v| update(p, g, m, v));
    }
    Ok(())
}

/// Learning rate in force from `from_fraction` of the total step count on.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrStage {
    pub from_fraction: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    /// Training symbols to simulate (consumed by dataset generation).
    pub symbols_total: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_schedule: [LrStage; 3],
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            symbols_total: 2_000_000,
            batch_size: 512,
            epochs: 6,
            lr_schedule: [
                LrStage {
                    from_fraction: 0.0,
                    rate: 1e-3,
                },
                LrStage {
                    from_fraction: 0.6,
                    rate: 2e-4,
                },
                LrStage {
                    from_fraction: 0.85,
                    rate: 4e-5,
                },
            ],
            seed: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &'static str, reason: &str| Err(crate::error::invalid(field, reason));
        if self.batch_size == 0 {
            return bad("batch_size", "must be positive");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be positive");
        }
        let s = &self.lr_schedule;
        if s[0].from_fraction != 0.0 {
            return bad("lr_schedule", "first stage must start at fraction 0");
        }
        for w in s.windows(2) {
            if !(w[1].from_fraction > w[0].from_fraction && w[1].from_fraction < 1.0) {
                return bad("lr_schedule", "stage fractions must increase within [0, 1)");
            }
            if !(w[1].rate < w[0].rate) {
                return bad("lr_schedule", "rates must be strictly decreasing");
            }
        }
        if s.iter().any(|st| !(st.rate >= 0.0)) {
            return bad("lr_schedule", "rates must be non-negative");
        }
        Ok(())
    }

    /// Learning rate at `step` of `total` optimizer steps.
    pub fn rate_at(&self, step: usize, total: usize) -> f64 {
        let frac = step as f64 / total.max(1) as f64;
        self.lr_schedule
            .iter()
            .rev()
            .find(|st| frac >= st.from_fraction)
            .map_or(self.lr_schedule[0].rate, |st| st.rate)
    }
}

/// Result of [`train`].
#[derive(Debug, Clone)]
pub struct Trained<T> {
    pub net: Mlp<T>,
    /// Mean training loss of each epoch.
    pub loss_trace: Vec<f64>,
}

/// Shuffled mini-batch Adam training on a sliding-window dataset.
pub fn train<T: Real>(net: Mlp<T>, dataset: &SlidingWindowDataset<T>, cfg: &TrainConfig) -> Result<Trained<T>> {
    train_with_progress(net, dataset, cfg, |_, _| {})
}

/// As [`train`], reporting `(epoch, mean loss)` after every epoch.
pub fn train_with_progress<T: Real>(
    mut net: Mlp<T>,
    dataset: &SlidingWindowDataset<T>,
    cfg: &TrainConfig,
    mut progress: impl FnMut(usize, f64),
) -> Result<Trained<T>> {
    cfg.validate()?;
    let rows = dataset.len();
    if rows == 0 {
        return Err(Error::EmptyDataset);
    }
    if dataset.inputs.ncols() != net.input_len() || dataset.labels.ncols() != net.output_len() {
        return Err(Error::ShapeMismatch(format!(
            "dataset rows are {} -> {}, network is {} -> {}",
            dataset.inputs.ncols(),
            dataset.labels.ncols(),
            net.input_len(),
            net.output_len()
        )));
    }
    let steps_per_epoch = rows.div_ceil(cfg.batch_size);
    let total_steps = steps_per_epoch * cfg.epochs;
    let mut state = AdamState::new(&net, T::lit(cfg.lr_schedule[0].rate));
    let mut order: Vec<usize> = (0..rows).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    let mut step = 0;
    for epoch in 0..cfg.epochs {
        let mut rng = rng_stream(cfg.seed, 0x7472_0000 + epoch as u64);
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x = dataset.inputs.select(Axis(0), batch);
            let y = dataset.labels.select(Axis(0), batch);
            let (loss, grads) = backward_batch(&net, x.view(), y.view())?;
            weighted += loss.to_f64_lossless() * batch.len() as f64;
            state.learning_rate = T::lit(cfg.rate_at(step, total_steps));
            adam_step(&mut net, &grads, &mut state)?;
            step += 1;
        }
        let mean = weighted / rows as f64;
        loss_trace.push(mean);
        progress(epoch, mean);
        if !net.is_finite() {
            return Err(Error::Domain(format!("training diverged in epoch {epoch}")));
        }
    }
    Ok(Trained { net, loss_trace })
}

/// Random sample helper for tests and tools: `n` values uniform in `[-a, a)`.
pub fn uniform_vec<T: Real>(n: usize, a: f64, rng: &mut impl Rng) -> Vec<T> {
    (0..n).map(|_| T::lit(rng.random_range(-a..a))).collect()
}
