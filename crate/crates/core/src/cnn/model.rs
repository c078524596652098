use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::layers::{relu_backward, relu_in_place, softmax_in_place, Conv2d, Dense, PROB_FLOOR};
use super::tensor::{Real, Tensor};
use super::CnnConfig;
use crate::{Error, Result};

/// Initial weights are N(0, 0.1^2); biases start at 0.1.
pub const INIT_WEIGHT_STD: f64 = 0.1;
pub const INIT_BIAS: f64 = 0.1;

#[derive(Clone, Debug, PartialEq)]
pub enum Layer<T> {
    Conv(Conv2d<T>),
    Relu,
    Flatten,
    Dense(Dense<T>),
}

/// Sequential network on `[H, W, C]` images ending in class logits.
#[derive(Clone, Debug, PartialEq)]
pub struct CnnModel<T> {
    input_shape: [usize; 3],
    layers: Vec<Layer<T>>,
}

/// Parameter gradients aligned with the model's layers; `None` for layers
/// without parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients<T> {
    pub layers: Vec<Option<(Tensor<T>, Tensor<T>)>>,
}

/// Per-layer activations kept for the backward pass.
pub struct ForwardTrace<T> {
    /// `inputs[l]` is the input of layer `l`; the last entry is the logits.
    inputs: Vec<Tensor<T>>,
    patches: Vec<Option<Vec<T>>>,
}

impl<T> ForwardTrace<T> {
    pub fn logits(&self) -> &Tensor<T> {
        self.inputs.last().expect("trace holds at least the input")
    }
}

impl<T: Real> CnnModel<T> {
    /// conv → ReLU → conv → ReLU → flatten → dense → ReLU → dense, with
    /// parameters drawn from `rng`.
    pub fn initialize<R: Rng + ?Sized>(cfg: &CnnConfig, input_shape: [usize; 3], rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let [h, w, c] = input_shape;
        let k1 = cfg.conv1_size;
        let k2 = cfg.conv2_size;
        if h + 1 < k1 + k2 || w + 1 < k1 + k2 {
            return Err(Error::Shape(format!(
                "{h}x{w} images too small for {k1}x{k1} then {k2}x{k2} filters"
            )));
        }
        let (h2, w2) = (h - k1 + 1 - k2 + 1, w - k1 + 1 - k2 + 1);
        let flat = h2 * w2 * cfg.conv2_filters;
        let normal = Normal::new(0.0, INIT_WEIGHT_STD).expect("valid std");
        let mut weights = |shape: Vec<usize>| {
            let len = shape.iter().product();
            let data = (0..len).map(|_| T::from_f64(normal.sample(rng))).collect();
            Tensor::new(shape, data).expect("shape matches")
        };
        let bias = |n: usize| Tensor::filled(vec![n], T::from_f64(INIT_BIAS));
        let layers = vec![
            Layer::Conv(Conv2d::new(weights(vec![cfg.conv1_filters, k1, k1, c]), bias(cfg.conv1_filters))?),
            Layer::Relu,
            Layer::Conv(Conv2d::new(weights(vec![cfg.conv2_filters, k2, k2, cfg.conv1_filters]), bias(cfg.conv2_filters))?),
            Layer::Relu,
            Layer::Flatten,
            Layer::Dense(Dense::new(weights(vec![cfg.fc_units, flat]), bias(cfg.fc_units))?),
            Layer::Relu,
            Layer::Dense(Dense::new(weights(vec![cfg.classes, cfg.fc_units]), bias(cfg.classes))?),
        ];
        Self::from_layers(input_shape, layers)
    }

    /// Builds a model after checking that consecutive shapes agree.
    pub fn from_layers(input_shape: [usize; 3], layers: Vec<Layer<T>>) -> Result<Self> {
        let model = Self { input_shape, layers };
        model.output_classes()?;
        Ok(model)
    }

    pub fn input_shape(&self) -> [usize; 3] {
        self.input_shape
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<T>] {
        &mut self.layers
    }

    /// Walks the topology, returning the logit count.
    pub fn output_classes(&self) -> Result<usize> {
        let [h, w, c] = self.input_shape;
        let mut shape = vec![h, w, c];
        for (index, layer) in self.layers.iter().enumerate() {
            shape = match layer {
                Layer::Conv(conv) => {
                    let &[h, w, c] = shape.as_slice() else {
                        return Err(Error::Shape(format!("layer {index}: conv after flatten")));
                    };
                    if c != conv.channels() {
                        return Err(Error::Shape(format!("layer {index}: {c} channels, filters expect {}", conv.channels())));
                    }
                    let (ho, wo) = conv.output_hw(h, w)?;
                    vec![ho, wo, conv.filters()]
                }
                Layer::Relu => shape,
                Layer::Flatten => vec![shape.iter().product()],
                Layer::Dense(dense) => {
                    if shape.len() != 1 || shape[0] != dense.inputs() {
                        return Err(Error::Shape(format!("layer {index}: dense expects {} inputs, got {shape:?}", dense.inputs())));
                    }
                    vec![dense.outputs()]
                }
            };
        }
        match shape.as_slice() {
            &[classes] => Ok(classes),
            other => Err(Error::Shape(format!("network ends in shape {other:?}, not logits"))),
        }
    }

    pub fn parameter_count(&self) -> usize {
        self.parameters().iter().map(|(w, b)| w.len() + b.len()).sum()
    }

    /// `(weights, bias)` of every parameterised layer in order.
    pub fn parameters(&self) -> Vec<(&Tensor<T>, &Tensor<T>)> {
        self.layers
            .iter()
            .filter_map(|layer| match layer {
                Layer::Conv(c) => Some((&c.weights, &c.bias)),
                Layer::Dense(d) => Some((&d.weights, &d.bias)),
                _ => None,
            })
            .collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<(&mut Tensor<T>, &mut Tensor<T>)> {
        self.layers
            .iter_mut()
            .filter_map(|layer| match layer {
                Layer::Conv(c) => Some((&mut c.weights, &mut c.bias)),
                Layer::Dense(d) => Some((&mut d.weights, &mut d.bias)),
                _ => None,
            })
            .collect()
    }

    pub fn cast<U: Real>(&self) -> CnnModel<U> {
        let layers = self
            .layers
            .iter()
            .map(|layer| match layer {
                Layer::Conv(c) => Layer::Conv(Conv2d { weights: c.weights.cast(), bias: c.bias.cast() }),
                Layer::Dense(d) => Layer::Dense(Dense { weights: d.weights.cast(), bias: d.bias.cast() }),
                Layer::Relu => Layer::Relu,
                Layer::Flatten => Layer::Flatten,
            })
            .collect();
        CnnModel { input_shape: self.input_shape, layers }
    }

    fn check_batch(&self, x: &Tensor<T>) -> Result<()> {
        let s = x.shape();
        if s.len() != 4 || s[1..] != self.input_shape {
            return Err(Error::Shape(format!(
                "batch {:?} does not match model input {:?}",
                s, self.input_shape
            )));
        }
        Ok(())
    }

    /// Forward pass on a `[B, H, W, C]` batch, keeping activations.
    pub fn forward_trace(&self, x: &Tensor<T>) -> Result<ForwardTrace<T>> {
        self.check_batch(x)?;
        let mut inputs = vec![x.clone()];
        let mut patches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let current = inputs.last().expect("non-empty");
            let (next, patch) = match layer {
                Layer::Conv(conv) => {
                    let (out, cols) = conv.forward_batch(current)?;
                    (out, Some(cols))
                }
                Layer::Relu => {
                    let mut out = current.clone();
                    relu_in_place(&mut out);
                    (out, None)
                }
                Layer::Flatten => {
                    let batch = current.shape()[0];
                    let flat = current.len() / batch.max(1);
                    (current.clone().reshape(vec![batch, flat])?, None)
                }
                Layer::Dense(dense) => (dense.forward_batch(current)?, None),
            };
            inputs.push(next);
            patches.push(patch);
        }
        Ok(ForwardTrace { inputs, patches })
    }

    /// Class probabilities, `[B, classes]`.
    pub fn predict_proba(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut logits = self.forward_trace(x)?.inputs.pop().expect("logits");
        let classes = logits.shape()[1];
        for row in logits.data_mut().chunks_exact_mut(classes) {
            softmax_in_place(row);
        }
        Ok(logits)
    }

    pub fn predict(&self, x: &Tensor<T>) -> Result<Vec<usize>> {
        let probs = self.predict_proba(x)?;
        let classes = probs.shape()[1];
        Ok(probs.data().chunks_exact(classes).map(argmax).collect())
    }

    /// Mean cross-entropy of a batch.
    pub fn loss(&self, x: &Tensor<T>, labels: &[usize]) -> Result<f64> {
        let probs = self.predict_proba(x)?;
        let classes = probs.shape()[1];
        check_labels(labels, probs.shape()[0], classes)?;
        let total: f64 = probs
            .data()
            .chunks_exact(classes)
            .zip(labels)
            .map(|(p, &y)| -(p[y].as_f64().max(PROB_FLOOR)).ln())
            .sum();
        Ok(total / labels.len() as f64)
    }

    /// Exact gradients of the mean batch cross-entropy.
    ///
    /// Returns the gradients together with the per-example losses and
    /// predicted classes of this forward pass.
    pub fn backward(&self, x: &Tensor<T>, labels: &[usize]) -> Result<(Gradients<T>, BatchOutcome)> {
        let trace = self.forward_trace(x)?;
        let logits = trace.logits();
        let (batch, classes) = (logits.shape()[0], logits.shape()[1]);
        check_labels(labels, batch, classes)?;

        let mut grad = logits.clone();
        let mut losses = Vec::with_capacity(batch);
        let mut predictions = Vec::with_capacity(batch);
        let scale = T::from_f64(1.0 / batch as f64);
        for (row, &y) in grad.data_mut().chunks_exact_mut(classes).zip(labels) {
            softmax_in_place(row);
            losses.push(-(row[y].as_f64().max(PROB_FLOOR)).ln());
            predictions.push(argmax(row));
            row[y] = row[y] - T::one();
            row.iter_mut().for_each(|v| *v = *v * scale);
        }

        let mut layer_grads = vec![None; self.layers.len()];
        for (index, layer) in self.layers.iter().enumerate().rev() {
            let input = &trace.inputs[index];
            let need_input = index > 0;
            grad = match layer {
                Layer::Conv(conv) => {
                    let cols = trace.patches[index].as_ref().expect("conv keeps patches");
                    let (dw, db, dx) = conv.backward_batch(input.shape(), cols, &grad, need_input);
                    layer_grads[index] = Some((dw, db));
                    match dx {
                        Some(dx) => dx,
                        None => break,
                    }
                }
                Layer::Dense(dense) => {
                    let (dw, db, dx) = dense.backward_batch(input, &grad, need_input);
                    layer_grads[index] = Some((dw, db));
                    match dx {
                        Some(dx) => dx,
                        None => break,
                    }
                }
                Layer::Relu => {
                    relu_backward(&trace.inputs[index + 1], &mut grad);
                    grad
                }
                Layer::Flatten => grad.reshape(input.shape().to_vec())?,
            };
        }
        Ok((Gradients { layers: layer_grads }, BatchOutcome { losses, predictions }))
    }

    /// Plain gradient descent: `W ← W − η ∇W`, `b ← b − η ∇b`.
    pub fn sgd_step(&mut self, gradients: &Gradients<T>, learning_rate: f64) -> Result<()> {
        if gradients.layers.len() != self.layers.len() {
            return Err(Error::Shape("gradient layers do not match model layers".into()));
        }
        let eta = T::from_f64(learning_rate);
        for (layer, grad) in self.layers.iter_mut().zip(&gradients.layers) {
            let params = match layer {
                Layer::Conv(c) => Some((&mut c.weights, &mut c.bias)),
                Layer::Dense(d) => Some((&mut d.weights, &mut d.bias)),
                _ => None,
            };
            match (params, grad) {
                (Some((w, b)), Some((dw, db))) => {
                    if w.shape() != dw.shape() || b.shape() != db.shape() {
                        return Err(Error::Shape("gradient shape differs from parameter shape".into()));
                    }
                    for (p, &g) in w.data_mut().iter_mut().zip(dw.data()) {
                        *p = *p - eta * g;
                    }
                    for (p, &g) in b.data_mut().iter_mut().zip(db.data()) {
                        *p = *p - eta * g;
                    }
                }
                (None, None) => {}
                _ => return Err(Error::Shape("gradient missing for a parameterised layer".into())),
            }
        }
        Ok(())
    }
}

/// Per-example results of one training forward pass.
#[derive(Clone, Debug, PartialEq)]
pub struct BatchOutcome {
    pub losses: Vec<f64>,
    pub predictions: Vec<usize>,
}

fn check_labels(labels: &[usize], batch: usize, classes: usize) -> Result<()> {
    if labels.len() != batch {
        return Err(Error::Shape(format!("{} labels for a batch of {batch}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&y| y >= classes) {
        return Err(Error::Index(format!("label {bad} with {classes} classes")));
    }
    Ok(())
}

/// First index of the largest value.
pub(crate) fn argmax<T: Real>(row: &[T]) -> usize {
    row.iter()
        .enumerate()
        .fold((0, T::neg_infinity()), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
        .0
}
