//! Mini-batch SGD with softmax cross-entropy, plus the analytic backward
//! pass it needs.
//!
//! The loss history is computed by separate full-dataset evaluation passes
//! in a fixed order (entry 0 before training, then one after each epoch),
//! never from running batch losses: with a zero learning rate the recorded
//! entries are therefore bit-identical, which pins down that evaluation has
//! no hidden state.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::net::{ForwardPass, Layer, Network, Tensor};

#[derive(Debug, Clone, Copy)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            epochs: 20,
            batch_size: 8,
            seed: 0,
        }
    }
}

/// Labeled images with a fixed class count.
#[derive(Debug, Clone)]
pub struct Dataset {
    images: Vec<Tensor>,
    labels: Vec<usize>,
    num_classes: usize,
}

impl Dataset {
    pub fn new(images: Vec<Tensor>, labels: Vec<usize>, num_classes: usize) -> Result<Self> {
        if images.is_empty() || images.len() != labels.len() {
            return Err(Error::LayerShape(format!(
                "dataset needs matching nonempty images and labels, got {} and {}",
                images.len(),
                labels.len()
            )));
        }
        for &l in &labels {
            if l >= num_classes {
                return Err(Error::Label {
                    label: l,
                    num_classes,
                });
            }
        }
        let shape = images[0].shape();
        if images.iter().any(|i| i.shape() != shape) {
            return Err(Error::LayerShape("images differ in shape".into()));
        }
        Ok(Self {
            images,
            labels,
            num_classes,
        })
    }

    /// Row-major grayscale images of one extent.
    pub fn from_grayscale(
        images: &[Vec<f64>],
        height: usize,
        width: usize,
        labels: &[usize],
        num_classes: usize,
    ) -> Result<Self> {
        let tensors = images
            .iter()
            .map(|img| Tensor::from_grayscale(img, height, width))
            .collect::<Result<Vec<_>>>()?;
        Self::new(tensors, labels.to_vec(), num_classes)
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn image(&self, i: usize) -> &Tensor {
        &self.images[i]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }
}

/// Per-layer parameter gradients, aligned with the network's layers;
/// non-parameterized layers hold empty buffers.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub bias: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(net: &Network) -> Self {
        let mut weights = Vec::with_capacity(net.layers().len());
        let mut bias = Vec::with_capacity(net.layers().len());
        for l in net.layers() {
            match l {
                Layer::Conv {
                    weights: w,
                    bias: b,
                    ..
                }
                | Layer::Dense {
                    weights: w,
                    bias: b,
                    ..
                } => {
                    weights.push(vec![0.0; w.len()]);
                    bias.push(vec![0.0; b.len()]);
                }
                _ => {
                    weights.push(Vec::new());
                    bias.push(Vec::new());
                }
            }
        }
        Self { weights, bias }
    }

    fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            for v in w {
                *v *= factor;
            }
        }
        for b in &mut self.bias {
            for v in b {
                *v *= factor;
            }
        }
    }

    /// Flat view matching [`Network::get_params`] ordering.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.bias) {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Full-dataset mean loss: entry 0 before training, one entry per epoch
    /// after it.
    pub loss_history: Vec<f64>,
    /// Fraction of the training set classified correctly after training.
    pub accuracy: f64,
}

/// Cross-entropy of one forward pass against a label.
fn loss_of(pass: &ForwardPass, label: usize) -> f64 {
    -pass.output().as_slice()[label].max(1e-12).ln()
}

/// Mean loss and accuracy over the dataset, in index order.
pub fn evaluate(net: &Network, data: &Dataset) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let mut correct = 0usize;
    for i in 0..data.len() {
        let pass = net.forward(data.image(i))?;
        total += loss_of(&pass, data.label(i));
        let probs = pass.output().as_slice();
        let mut best = 0;
        for c in 1..probs.len() {
            if probs[c] > probs[best] {
                best = c;
            }
        }
        if best == data.label(i) {
            correct += 1;
        }
    }
    Ok((
        total / data.len() as f64,
        correct as f64 / data.len() as f64,
    ))
}

/// Analytic gradients for one example, from an already-computed forward pass.
pub fn backward(net: &Network, pass: &ForwardPass, label: usize) -> Result<Gradients> {
    let layers = net.layers();
    if label >= net.num_classes() {
        return Err(Error::Label {
            label,
            num_classes: net.num_classes(),
        });
    }
    let mut grads = Gradients::zeros_like(net);

    // Softmax and cross-entropy collapse: the gradient at the logits is
    // probs - onehot. The loop below therefore starts at the layer before
    // the softmax.
    let probs = pass.output().as_slice();
    let mut delta: Vec<f64> = probs.to_vec();
    delta[label] -= 1.0;

    for li in (0..layers.len() - 1).rev() {
        let input = &pass.activations[li];
        let output = &pass.activations[li + 1];
        match &layers[li] {
            Layer::Dense {
                inputs,
                outputs,
                weights,
                ..
            } => {
                let x = input.as_slice();
                let gw = &mut grads.weights[li];
                let gb = &mut grads.bias[li];
                let mut prev = vec![0.0f64; *inputs];
                for o in 0..*outputs {
                    let d = delta[o];
                    gb[o] += d;
                    let row = &weights[o * inputs..(o + 1) * inputs];
                    let grow = &mut gw[o * inputs..(o + 1) * inputs];
                    for i in 0..*inputs {
                        grow[i] += d * x[i];
                        prev[i] += d * row[i];
                    }
                }
                delta = prev;
            }
            Layer::Relu => {
                for (d, &x) in delta.iter_mut().zip(input.as_slice()) {
                    if x <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            Layer::MaxPool { size } => {
                let (c, ih, iw) = input.shape();
                let (_, oh, ow) = output.shape();
                let mut prev = vec![0.0f64; c * ih * iw];
                for ch in 0..c {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            // Re-find the argmax with the forward scan order
                            // so ties route identically.
                            let mut best = f64::NEG_INFINITY;
                            let mut by = 0;
                            let mut bx = 0;
                            for dy in 0..*size {
                                for dx in 0..*size {
                                    let v = input.get(ch, oy * size + dy, ox * size + dx);
                                    if v > best {
                                        best = v;
                                        by = oy * size + dy;
                                        bx = ox * size + dx;
                                    }
                                }
                            }
                            prev[(ch * ih + by) * iw + bx] += delta[(ch * oh + oy) * ow + ox];
                        }
                    }
                }
                delta = prev;
            }
            Layer::Conv {
                in_channels,
                out_channels,
                kernel,
                stride,
                padding,
                weights,
                ..
            } => {
                let (_, ih, iw) = input.shape();
                let (_, oh, ow) = output.shape();
                let gw = &mut grads.weights[li];
                let gb = &mut grads.bias[li];
                let mut prev = vec![0.0f64; in_channels * ih * iw];
                for f in 0..*out_channels {
                    for oy in 0..oh {
                        for ox in 0..ow {
                            let d = delta[(f * oh + oy) * ow + ox];
                            gb[f] += d;
                            for ic in 0..*in_channels {
                                for ky in 0..*kernel {
                                    for kx in 0..*kernel {
                                        let iy = (oy * stride + ky) as isize - *padding as isize;
                                        let ix = (ox * stride + kx) as isize - *padding as isize;
                                        if iy < 0
                                            || ix < 0
                                            || iy >= ih as isize
                                            || ix >= iw as isize
                                        {
                                            continue;
                                        }
                                        let wi =
                                            ((f * in_channels + ic) * kernel + ky) * kernel + kx;
                                        let pi = (ic * ih + iy as usize) * iw + ix as usize;
                                        gw[wi] += d * input.as_slice()[pi];
                                        prev[pi] += d * weights[wi];
                                    }
                                }
                            }
                        }
                    }
                }
                delta = prev;
            }
            Layer::Softmax => unreachable!("softmax handled analytically"),
        }
    }
    Ok(grads)
}

/// Mean analytic gradient over a set of examples.
pub fn batch_gradients(net: &Network, data: &Dataset, indices: &[usize]) -> Result<Gradients> {
    let mut acc = Gradients::zeros_like(net);
    for &i in indices {
        let pass = net.forward(data.image(i))?;
        let g = backward(net, &pass, data.label(i))?;
        for (a, b) in acc.weights.iter_mut().zip(&g.weights) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in acc.bias.iter_mut().zip(&g.bias) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
    }
    acc.scale(1.0 / indices.len() as f64);
    Ok(acc)
}

/// Mini-batch SGD. Batch order reshuffles each epoch from the config seed;
/// identical seeds replay identical runs.
pub fn train(net: &mut Network, data: &Dataset, config: &TrainingConfig) -> Result<TrainReport> {
    if data.num_classes() != net.num_classes() {
        return Err(Error::LayerShape(format!(
            "dataset has {} classes, network {}",
            data.num_classes(),
            net.num_classes()
        )));
    }
    if config.batch_size == 0 {
        return Err(Error::LayerShape("batch size must be positive".into()));
    }
    if !config.learning_rate.is_finite() || config.learning_rate < 0.0 {
        return Err(Error::LayerShape(
            "learning rate must be a nonnegative real".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(config.epochs + 1);
    history.push(evaluate(net, data)?.0);
    for _ in 0..config.epochs {
        // Fisher-Yates shuffle.
        for i in (1..order.len()).rev() {
            let j = rng.random_range(0..=i);
            order.swap(i, j);
        }
        for batch in order.chunks(config.batch_size) {
            let grads = batch_gradients(net, data, batch)?;
            apply(net, &grads, config.learning_rate)?;
        }
        history.push(evaluate(net, data)?.0);
    }
    let (_, accuracy) = evaluate(net, data)?;
    Ok(TrainReport {
        loss_history: history,
        accuracy,
    })
}

fn apply(net: &mut Network, grads: &Gradients, lr: f64) -> Result<()> {
    let mut params = net.get_params();
    let flat = grads.flatten();
    debug_assert_eq!(params.len(), flat.len());
    for (p, g) in params.iter_mut().zip(&flat) {
        *p -= lr * g;
    }
    net.set_params(&params)
}
